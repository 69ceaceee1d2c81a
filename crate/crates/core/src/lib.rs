//! Dynamic entanglement witness toolkit for two coupled harmonic oscillators.
//!
//! The crate covers the truncated Fock-space algebra, the normal-mode change of
//! basis, the precession protocol operator `Q_K`, classical Monte-Carlo baselines,
//! a semidefinite program that lower-bounds logarithmic negativity from an observed
//! score, rival moment-based criteria and the structure of the associated witness.

pub mod classical;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod normal_modes;
pub mod precession;
pub mod rival;
pub mod sdp;
pub mod witness;

pub use error::{Error, Result};
pub use fock::{BasisTag, FockOperator, HermitianBasis, TwoModeState};
pub use normal_modes::NormalModeSpec;
pub use precession::{ProtocolSpec, ScoreEstimate, Sigma};
