//! Verification harness: finite-width ansatz assembly, weak-residual
//! pairings against a deterministic bank of test bumps, convergence-order
//! fits over an eps sweep, a pseudo-spectral dispersive oracle, the exact
//! peak-seeded background solution, the derivative-peak consistency
//! identities, and the ill-posedness demonstration.

mod ansatz;
mod bank;
mod exact;
mod ledger;
mod nonuniq;
mod order;
mod pairing;
mod spectral;

pub use ansatz::{build_smooth_ansatz, ProfileSource, SmoothAnsatz};
pub use bank::{TestBump, TestFunctionBank};
pub use exact::{
    hopf_delta_exact, lemma_identity_residuals, ramp_pairing, DeltaSeedCheck, LemmaResiduals,
};
pub use ledger::entropy_peak_slot;
pub use nonuniq::{nonuniqueness_demo, AmplitudeHistory, NonUniqueReport};
pub use order::{def11_check, default_eps_sweep, fit_order, MemberRow, ResidualReport, SlopeFit};
pub use pairing::{entropy_pairing, residual_pairing, OperatorSpec};
pub use spectral::{kdv_direct, DirectRun, SpectralConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("time {t} outside the trajectory range [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },
    #[error("grid spacing {dx} exceeds eps/6 = {width}/6")]
    ResolutionInsufficient { dx: f64, width: f64 },
    #[error("direct solve blew up at t = {0}")]
    BlowupDetected(f64),
    #[error("step orientation does not match the trajectory's shelf side")]
    OrientationMismatch,
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error(transparent)]
    Background(#[from] crate::hopf::HopfError),
    #[error(transparent)]
    Profile(#[from] crate::profiles::ProfileError),
    #[error(transparent)]
    Quadrature(#[from] crate::quad::QuadError),
    #[error(transparent)]
    Mollifier(#[from] crate::mollifiers::MollifierError),
    #[error("distribution-algebra assembly failed: {0}")]
    Algebra(String),
}
