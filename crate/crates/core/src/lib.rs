//! Joint transmit/receive beamformer design for MIMO links whose transmit
//! antennas each have their own power budget.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex helpers, whitened Gram matrices, dominant eigenpairs.
//! * [`geometry`]: per-antenna budgets, the projection onto the constant-modulus
//!   set and its weighted l1 norm.
//! * [`single_carrier`]: MSE objective, MMSE combiner, closed-form constrained
//!   precoders with KKT certificates, and the alternating (Gauss-Seidel) designs.
//! * [`multicarrier`]: the dual solver for the coupled per-antenna budget, the
//!   cyclic multicarrier design and the baseline methods it is compared with.
//! * [`channel_sim`]: Rayleigh tapped-delay-line channels, scenario draws and the
//!   seeded Monte-Carlo experiment with empirical CDFs.
//! * [`report`]: CSV/JSON export of experiment results.

pub mod channel_sim;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod multicarrier;
pub mod report;
pub mod single_carrier;

pub use error::{PapcError, Result};
pub use geometry::PowerConstraints;
pub use linalg::{ComplexMatrix, ComplexVector, DiagonalNoise};
pub use num_complex::Complex64;
