//! Numerical core for hybrid particle/grid viscous fluid simulation.
//!
//! Everything here is `no_std` with `alloc`: staggered grid fields, APIC
//! transfers, the variational implicit viscosity solver, pressure
//! projection, the symmetric MAC grid channel encoding, a U-Net forward
//! pass for the learned viscosity surrogate, and the loss functions used to
//! check both. File IO, clocks and the command line live in the `viscid`
//! crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod apic;
pub mod error;
pub mod grid;
pub mod loss;
pub mod nn;
pub mod pressure;
pub mod scene;
pub mod sim;
pub mod sparse;
pub mod symgrid;
pub mod viscosity;

pub use error::{CoreError, FormatError, Result};
pub use grid::{Array2, GridDims, LevelSet2, MacVelocity2, SolidSdf2, VolumeFractions2};
