mod common;

use common::binary_kl;
use riskbandit::bounds::{
    c1, c2, dominance_grid_check, tail_bound_report, tail_lower_bound, tail_upper_bound, Direction, Verdict,
};
use riskbandit::distributions::DirichletParams;
use riskbandit::kinf::KinfOptions;
use riskbandit::risk::parse_risk_expr;

#[test]
fn constants_have_closed_forms() {
    let tau = 2.0 * std::f64::consts::PI;
    assert!((c1(1) - (1.0f64 / 12.0).exp() / tau.sqrt()).abs() <= 1e-12);
    assert!((c1(2) - (1.0f64 / 12.0).exp() / (2.0 * tau)).abs() <= 1e-12);
    assert!((c2(1) - tau.sqrt() * (1.0f64 / 2.13).sqrt()).abs() <= 1e-12);
    assert!((c2(2) - tau.sqrt() * (2.0 / 2.13)).abs() <= 1e-12);
}

#[test]
fn upper_bound_composes_with_binary_kl() {
    let params = DirichletParams::new(vec![3, 3]).unwrap();
    let spec = parse_risk_expr("mean()").unwrap();
    let b = tail_upper_bound(
        &params,
        &[0.0, 1.0],
        0.9,
        &spec,
        Direction::AtLeast,
        &KinfOptions::default(),
    )
    .unwrap();
    let expect = c1(1) * 6f64.sqrt() * (-6.0 * binary_kl(0.5, 0.9)).exp();
    assert!((b.value - expect).abs() <= 1e-9 * expect, "{} vs {expect}", b.value);

    let vacuous = tail_upper_bound(
        &params,
        &[0.0, 1.0],
        0.2,
        &spec,
        Direction::AtLeast,
        &KinfOptions::default(),
    )
    .unwrap();
    assert!((vacuous.value - c1(1) * 6f64.sqrt()).abs() <= 1e-12);
}

#[test]
fn discontinuous_and_non_dominant_specs_are_refused() {
    let params = DirichletParams::new(vec![2, 2]).unwrap();
    let opts = KinfOptions::default();
    let var = parse_risk_expr("var(0.5)").unwrap();
    assert!(tail_upper_bound(&params, &[0.0, 1.0], 0.9, &var, Direction::AtLeast, &opts).is_err());
    assert!(tail_lower_bound(&params, &[0.0, 1.0], 0.9, &var, &opts).is_err());
    let sharpe = parse_risk_expr("sharpe(0)").unwrap();
    assert!(tail_lower_bound(&params, &[0.0, 1.0], 0.9, &sharpe, &opts).is_err());
}

#[test]
fn monte_carlo_sits_between_the_bounds() {
    let spec = parse_risk_expr("cvar(0.5)").unwrap();
    let params = DirichletParams::new(vec![42, 18]).unwrap();
    let report = tail_bound_report(
        &params,
        &[0.0, 1.0],
        0.65,
        &spec,
        Direction::AtLeast,
        20_000,
        3,
        &KinfOptions::default(),
    )
    .unwrap();
    assert_eq!(report.verdict, Verdict::Consistent);
    assert!(report.lower_bound.unwrap() <= report.upper_bound);
}

#[test]
fn dominance_witnesses() {
    let spec = parse_risk_expr("cvar(0.5)").unwrap();
    let res = dominance_grid_check(&spec, &[0.0, 0.5, 1.0], &[0.2, 0.3, 0.5], 200).unwrap();
    assert!(res.holds);
    assert_eq!(res.witness, Some(vec![0, 1]));
    let mean = parse_risk_expr("mean()").unwrap();
    let res = dominance_grid_check(&mean, &[0.0, 1.0], &[0.6, 0.4], 200).unwrap();
    assert_eq!(res.witness, Some(vec![0]));
}
