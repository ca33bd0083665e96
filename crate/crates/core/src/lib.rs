pub mod bandit;
pub mod bounds;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod kinf;
pub mod risk;
