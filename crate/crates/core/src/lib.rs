//! Optimized t-expansion for the quantum Rabi model.
//!
//! The crate estimates the ground-state energy `E0` and the first excited
//! energy `E1` of
//!
//! ```text
//! H = (w0/2) sz + w b'b + g (s+ + s-)(b' + b)
//! ```
//!
//! from a handful of connected moments of a two-parameter trial state. The
//! moments are extrapolated with the connected-moments expansion (CMX) or the
//! canonical-sequence method (CSM), and the trial parameters `(x, y)` are fixed
//! by requiring the order-`m` estimate to be stationary.
//!
//! Module map:
//!
//! * [`fock`]: truncated Fock space, the Hamiltonian and the trial states.
//! * [`moments`]: raw and connected moments.
//! * [`extrapolation`]: CMX, CSM and formal power-series reversion.
//! * [`optimize`]: stationary points, branch continuation, final estimates.
//! * [`exact`]: reference spectrum by diagonalization.

pub mod error;
pub mod exact;
pub mod extrapolation;
pub mod fock;
pub mod moments;
pub mod optimize;

pub use error::{Error, Result};
pub use exact::{exact_levels, parity_resolve, Parity, SpectrumResult};
pub use extrapolation::{
    cmx_estimate, csm_estimate, e_of_t, estimate, series_revert, EnergyEstimate, Method,
    SeriesCoeffs,
};
pub use fock::{
    build_hamiltonian, coherent_state, trial_state, FockConfig, Operator, RabiHamiltonian,
    RabiParams, StateVector, TrialKind, TrialSpec,
};
pub use moments::{
    analytic_moments_12, connected_from_raw, raw_moments, trial_moments, ConnectedMoments,
    MomentSet,
};
pub use optimize::{
    continue_branch, estimate_energy, stationary_points, variational_optimum, BranchLabel,
    BranchOutcome, BranchTrace, HessianClass, OptimizeConfig, SearchBox, StationaryPoint,
};
