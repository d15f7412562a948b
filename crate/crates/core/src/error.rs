use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dispersion polynomial is degenerate (leading coefficient {0:e})")]
    DegeneratePolynomial(f64),

    #[error("inner radicand {0} is negative; closed-form pole branches are complex")]
    ComplexInnerRoot(f64),

    #[error("no bound state: {0}")]
    NoBoundState(String),

    #[error("localized-component expression vanishes for this coupling matrix")]
    ZeroExpression,

    #[error("energy {energy} lies outside the required window ({lo}, {hi})")]
    GapViolation { energy: f64, lo: f64, hi: f64 },

    #[error("closed-form constant-coupling kernel is singular for g = 0")]
    SingularG,

    #[error("two momentum poles coincide (separation {0:e}); offset the energy")]
    DegeneratePoles(f64),

    #[error("invalid radicand {0} (must be positive)")]
    InvalidRadicand(f64),

    #[error("potential denominator is singular")]
    SingularDenominator,

    #[error("grid too coarse: phase step {0:.3} rad per point exceeds the limit")]
    GridTooCoarse(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("nearest operator eigenvalue {re}{im:+}i is too far from 1")]
    NoNearUnitEigenvalue { re: f64, im: f64 },

    #[error("no self-consistent solution in ({lo}, {hi})")]
    NoSolutionInRange { lo: f64, hi: f64 },

    #[error("energy {0} is not in the mixed-pole region")]
    OutsideMixedRegion(f64),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("tail window holds {0:.2} oscillation periods; at least 3 are required")]
    WindowTooShort(f64),

    #[error("matrix dimension {dim} exceeds the dense-solver limit {limit}")]
    GridTooLarge { dim: usize, limit: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("parse error: {0}")]
    Parse(String),
}
