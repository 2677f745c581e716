//! Sampled sparse feedback control of high-dimensional alignment systems.
//!
//! The crate simulates Cucker-Smale-type consensus dynamics under sparse
//! feedback controls that are recomputed only at multiples of a sampling time,
//! including a dimension-reduction strategy where the controlled agent is
//! selected from a Johnson-Lindenstrauss projected low-dimensional twin of the
//! system. Alongside the simulators it provides the random projection
//! machinery, the theoretical constants and error bounds that certify when
//! the reduced control provably steers the full system to consensus, and an
//! experiment harness with CSV/JSON emission.

pub mod analysis;
pub mod control;
pub mod dynamics;
pub mod experiments;
pub mod io;
pub mod jl;
pub mod model;
pub mod par;
pub mod quad;
pub mod rng;

pub use model::{
    consensus_margin, gamma_functional, kernel_a, lipschitz_constant, moments, perp_decompose,
    FlockState, GammaFn, ModelParams, Moments,
};
