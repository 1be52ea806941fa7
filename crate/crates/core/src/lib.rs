//! Two-polariton scattering and bound states in a one-dimensional array of
//! cavities, each coupled to a two-level system, solved in the relative
//! coordinate at fixed total momentum `K`.
//!
//! Energies are in units of the photon–TLS coupling `g`. The relative-motion
//! spinor is ordered `(p, d+, d-, t)`: photon pair, symmetric and
//! antisymmetric photon–TLS combinations, and TLS pair.

pub mod bands;
pub mod bound_states;
pub mod channels;
pub mod ed;
mod error;
pub mod linalg;
pub mod model;
pub mod scattering;

pub use bands::{band_structure, branch_energy, branch_vector, BandId, BandStructure, Branch, Gap};
pub use bound_states::{find_all_bound_states, find_bound_states, BoundState};
pub use channels::{find_channel_roots, ChannelRoot, ChannelSolver, Tolerances};
pub use error::{Error, Result};
pub use model::{ModelParams, RelativeHamiltonian, Spinor, SpinorField, C64};
pub use scattering::{solve_scattering, ScatteringSolution};
