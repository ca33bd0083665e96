//! Parser for risk expressions such as `mv(0.5) + cvar(0.95)`.
//!
//! | name                     | functional                               |
//! |--------------------------|------------------------------------------|
//! | `mean()`                 | expectation (identity distortion)        |
//! | `cvar(α)`, α ∈ [0,1)     | `g(x) = min{x/(1−α), 1}`                 |
//! | `prop(p)`, p ∈ (0,1)     | proportional hazard `g(x) = x^p`         |
//! | `lb(q)`, q ∈ (0,1)       | lookback `g(x) = x^q (1 − q log x)`      |
//! | `var(α)`, α ∈ (0,1)      | value-at-risk `g(x) = 1{x ≥ 1−α}`        |
//! | `ave()`                  | mean as an EDPM                          |
//! | `e2()`                   | second moment                            |
//! | `tsv(r)`                 | negative below-target semi-variance      |
//! | `ent(θ)`, θ > 0          | entropic risk                            |
//! | `nvar()`                 | negative variance                        |
//! | `mv(γ)`, γ > 0           | mean-variance `γ E[X] − Var[X]`          |
//! | `sharpe(r[, ε])`         | Sharpe ratio, ε defaults to 1e-6         |
//! | `sortino(r[, ε])`        | Sortino ratio, ε defaults to 1e-6        |

use super::{DistortionFunction, EdpmSpec, RiskBase, RiskSpec, RiskTerm, DEFAULT_EPS_SIGMA};
use crate::error::{Error, Result};

pub fn parse_risk_expr(text: &str) -> Result<RiskSpec> {
    Parser { src: text, pos: 0 }.expr()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(found) => self.err(format!("expected `{c}`, found `{found}`")),
                None => self.err(format!("expected `{c}`, found end of input")),
            }
        }
    }

    fn expr(mut self) -> Result<RiskSpec> {
        let mut terms = Vec::new();
        let mut offset = 0.0;
        let mut sign = 1.0;
        loop {
            match self.term()? {
                Term::Constant(c) => offset += sign * c,
                Term::Func(coef, base) => terms.push(RiskTerm {
                    coef: sign * coef,
                    base,
                }),
            }
            if self.eat('+') {
                sign = 1.0;
            } else if self.eat('-') {
                sign = -1.0;
            } else if self.peek().is_none() {
                break;
            } else {
                let c = self.peek().unwrap();
                return self.err(format!("unexpected `{c}`"));
            }
        }
        if terms.is_empty() {
            self.pos = 0;
            return self.err("expression has no risk function");
        }
        RiskSpec::with_offset(terms, offset)
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                let coef = self.number()?;
                if self.eat('*') {
                    Ok(Term::Func(coef, self.func()?))
                } else {
                    Ok(Term::Constant(coef))
                }
            }
            Some(c) if c.is_ascii_alphabetic() => Ok(Term::Func(1.0, self.func()?)),
            Some(c) => self.err(format!("expected a term, found `{c}`")),
            None => self.err("expected a term, found end of input"),
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        if end < bytes.len() && (bytes[end] == b'-' || bytes[end] == b'+') {
            end += 1;
        }
        while end < bytes.len() {
            let b = bytes[end];
            let exp_sign = (b == b'-' || b == b'+') && matches!(bytes[end - 1], b'e' | b'E');
            if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                end += 1;
            } else {
                break;
            }
        }
        match self.src[start..end].parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = end;
                Ok(v)
            }
            _ => self.err(format!("invalid number `{}`", &self.src[start..end])),
        }
    }

    fn ident(&mut self) -> (usize, &str) {
        self.skip_ws();
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        self.pos += len;
        (start, &self.src[start..start + len])
    }

    fn func(&mut self) -> Result<RiskBase> {
        let (name_pos, name) = self.ident();
        let name = name.to_ascii_lowercase();
        if name.is_empty() {
            return self.err("expected a function name");
        }
        self.expect('(')?;
        let mut params = Vec::new();
        if !self.eat(')') {
            loop {
                params.push(self.number()?);
                if self.eat(')') {
                    break;
                }
                self.expect(',')?;
            }
        }
        let arity = |lo: usize, hi: usize| -> Result<()> {
            if params.len() < lo || params.len() > hi {
                let want = if lo == hi {
                    format!("{lo}")
                } else {
                    format!("{lo} to {hi}")
                };
                return Err(Error::Parse {
                    pos: name_pos,
                    msg: format!("`{name}` takes {want} parameter(s), got {}", params.len()),
                });
            }
            Ok(())
        };
        let base = match name.as_str() {
            "mean" => {
                arity(0, 0)?;
                RiskBase::Distortion(DistortionFunction::Expectation)
            }
            "cvar" => {
                arity(1, 1)?;
                RiskBase::Distortion(DistortionFunction::cvar(params[0])?)
            }
            "prop" => {
                arity(1, 1)?;
                RiskBase::Distortion(DistortionFunction::prop_hazard(params[0])?)
            }
            "lb" => {
                arity(1, 1)?;
                RiskBase::Distortion(DistortionFunction::lookback(params[0])?)
            }
            "var" => {
                arity(1, 1)?;
                RiskBase::Distortion(DistortionFunction::var(params[0])?)
            }
            "ave" => {
                arity(0, 0)?;
                RiskBase::Edpm(EdpmSpec::Mean)
            }
            "e2" => {
                arity(0, 0)?;
                RiskBase::Edpm(EdpmSpec::SecondMoment)
            }
            "tsv" => {
                arity(1, 1)?;
                RiskBase::Edpm(EdpmSpec::below_target_semi_variance(params[0])?)
            }
            "ent" => {
                arity(1, 1)?;
                RiskBase::Edpm(EdpmSpec::entropic(params[0])?)
            }
            "nvar" => {
                arity(0, 0)?;
                RiskBase::Edpm(EdpmSpec::NegativeVariance)
            }
            "mv" => {
                arity(1, 1)?;
                RiskBase::Edpm(EdpmSpec::mean_variance(params[0])?)
            }
            "sharpe" => {
                arity(1, 2)?;
                let eps = params.get(1).copied().unwrap_or(DEFAULT_EPS_SIGMA);
                RiskBase::Edpm(EdpmSpec::sharpe(params[0], eps)?)
            }
            "sortino" => {
                arity(1, 2)?;
                let eps = params.get(1).copied().unwrap_or(DEFAULT_EPS_SIGMA);
                RiskBase::Edpm(EdpmSpec::sortino(params[0], eps)?)
            }
            _ => return Err(Error::UnknownFunction { name, pos: name_pos }),
        };
        Ok(base)
    }
}

enum Term {
    Constant(f64),
    Func(f64, RiskBase),
}
