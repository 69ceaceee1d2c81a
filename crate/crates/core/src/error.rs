use thiserror::Error;

use crate::fock::BasisTag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operation requires basis {expected:?}, operator is tagged {found:?}")]
    WrongBasisTag { expected: BasisTag, found: BasisTag },

    #[error("state is already expressed in the {0:?} basis")]
    SameBasis(BasisTag),

    #[error("truncation n_max={n_max} leaves tail mass {tail:.3e} above tolerance {tol:.1e}")]
    TruncationInsufficient { n_max: usize, tail: f64, tol: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("mixing angle is undetermined (g and mu*(w1^2-w2^2) both vanish); supply theta explicitly")]
    DegenerateAngle,

    #[error("coupling too strong: omega_minus^2 = {0:.6e} <= 0")]
    Unstable(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step {dt:.3e} exceeds stability limit {limit:.3e}")]
    UnstableStep { dt: f64, limit: f64 },

    #[error("target score {p_target} outside attainable range [{p_min}, {p_max}] at this truncation")]
    InfeasibleTarget { p_target: f64, p_min: f64, p_max: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("coefficients are not normalized (norm^2 = {0})")]
    NormalizationError(f64),

    #[error("|psi_0| = 1: the a+ state is the vacuum and the family state is a product state")]
    PsiZeroUnit,

    #[error("simplified Zhang criterion needs vanishing first moments (max |<a_j>| = {0:.3e})")]
    NonzeroFirstMoments(f64),

    #[error("canonical witness is defined for odd K only, got K = {0}")]
    EvenK(usize),

    #[error("no separable probe found up to r = {0}")]
    SearchFailed(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
