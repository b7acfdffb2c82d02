//! Simulation toolkit for a mechanically controlled optical beam splitter.
//!
//! Two optical cavities exchange photons through a trilinear coupling
//! `g (a1† a2 b† + a1 a2† b)` to a mechanical mode `b`. Depending on the
//! mechanical state the coupling acts as a quantum controller (entangling
//! light and mechanics) or, for large coherent amplitudes, as a classical
//! beam splitter. The modules cover:
//!
//! * [`hilbert`]: truncated Fock-space operators, coherent states, partial traces.
//! * [`closed_system`]: unitary single-frequency model, branch states and decoherence coefficients.
//! * [`semiclassical`]: closed-form Langevin results for transmission, MZ and HOM interference.
//! * [`fock_master`]: the Fock-state master-equation hierarchy for single-photon wavepackets.
//! * [`trajectories`]: conditional two-jump Monte-Carlo estimation of coincidence statistics.
//! * [`memory_prep`]: loading a coherent state into the mechanics through a Raman-type swap.
//!
//! Units: ħ = 1, all rates in units of a reference rate (usually κ).

pub mod closed_system;
pub mod error;
pub mod fock_master;
mod hierarchy;
pub mod hilbert;
pub mod memory_prep;
pub mod semiclassical;
mod sparse;
pub mod trajectories;

pub use error::{Error, Result};
