//! Sub-wavelength Rydberg atom arrays as chiral nonlinear quantum-optical elements.
//!
//! All quantities use Γ = 1 (decay rate of the intermediate state), λ = 1 and c = 1,
//! so k = 2π and g²/c = 3/(8π).

pub mod atomdata;
pub mod chiral;
pub mod coupling;
pub mod error;
pub mod hierarchy;
pub mod interferometer;
pub mod lattice;
pub mod linalg;
pub mod protocols;
pub mod pulse;
pub mod steady_state;
pub mod two_photon;
pub mod units;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use num_complex::Complex64 as C64;
