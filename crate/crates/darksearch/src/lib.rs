//! Simulation and analysis toolkit for a random-search protocol that locates
//! the dark resonance of a laser-driven Λ-type three-level system.
//!
//! The protocol redraws the probe-laser detuning uniformly on
//! `[-δ_max, δ_max]` after every photodetection. Near the two-photon
//! resonance the atom is shelved in a pseudo-dark state and the waiting
//! times between detections become heavy-tailed, so the instantaneous
//! detuning is an ever-improving estimate of the atomic transition
//! frequency. The crates' modules map onto the layers of that analysis:
//!
//! * [`quantum`] — exact operators, Liouvillian, steady state and
//!   two-time correlations of the Λ-system (units of Γ = 1 throughout);
//! * [`rates`] — frequency-dependent emission rates Γ∓(δ) and the
//!   piecewise plateau/dip/wing rate model;
//! * [`trajectory`] — stochastic protocol runs, both as a full quantum-jump
//!   unraveling and as a statistical rate model;
//! * [`ensemble`] — reproducible (optionally rayon-parallel) batches of
//!   trajectories with checkpointed final detunings;
//! * [`levy`] — closed-form Lévy/renewal predictions (trapping tails,
//!   trapped fraction, asymptotic detuning distribution) and ensemble
//!   estimators;
//! * [`estimation`] — Fisher information of a systematic frequency scan and
//!   its comparison with the random search.

pub mod ensemble;
pub mod estimation;
pub mod levy;
pub mod quantum;
mod quadrature;
pub mod rates;
pub mod special;
pub mod trajectory;

pub use quantum::{DensityMatrix, LambdaParams, PureState, QuantumError};
pub use rates::{GroundRates, RateModel};
pub use trajectory::{Mode, ProtocolConfig, TrajectoryEvent, TrajectoryRecord};
