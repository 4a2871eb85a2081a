use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("infeasible design: batch size {n} cannot give both arms at least {n_min} subjects")]
    InfeasibleDesign { n: usize, n_min: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("degenerate variance: residual variance is zero, statistic undefined")]
    DegenerateVariance,

    #[error("expansion degenerate: {0}")]
    ExpansionDegenerate(String),

    #[error(
        "bracket [{lo}, {hi}] does not straddle tail level {level}: tail(lo) = {tail_lo}, tail(hi) = {tail_hi}"
    )]
    Bracket {
        lo: f64,
        hi: f64,
        level: f64,
        tail_lo: f64,
        tail_hi: f64,
    },

    #[error("non-finite importance ratio at draw {draw}: integrand {integrand}, proposal density {proposal}")]
    NonFiniteRatio {
        draw: usize,
        integrand: f64,
        proposal: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
