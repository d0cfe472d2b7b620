//! Successive Bayesian reconstruction of fluid-antenna port channels.
//!
//! A fluid antenna array exposes `N` closely spaced ports but only `M` RF
//! chains, so each pilot timeslot observes `M` ports. The channel over all
//! ports is modelled as a zero-mean complex Gaussian vector with a kernel
//! prior. Offline, ports are chosen greedily where the posterior variance is
//! largest and the linear MAP weights are precomputed ([`design_plan`]).
//! Online, the estimate is a single weighted sum of the pilots
//! ([`reconstruct`]).
//!
//! The crate also carries a clustered channel simulator, two baseline
//! estimators and a Monte-Carlo harness for comparing them.

pub mod baselines;
pub mod bessel;
pub mod error;
pub mod files;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod plan;
pub mod posterior;
pub mod rng;

pub use baselines::{estimate_fas_omp, estimate_selmmse, SteeringDictionary};
pub use error::{Error, Result};
pub use geometry::{
    build_port_geometry, generate_ssc_channel, noise_power_for_snr, ChannelRealization, PilotObservation,
    PortGeometry, SscModelParams, SwitchMatrix,
};
pub use kernels::{kernel_bessel, kernel_covariance, kernel_exponential, validate_kernel, Kernel, KernelKind};
pub use plan::{
    compute_weights, design_plan, observe_pilots, plan_to_switch_matrices, reconstruct, Reconstruction,
    SamplingPlan,
};
pub use posterior::{posterior_update_one, PosteriorState};
