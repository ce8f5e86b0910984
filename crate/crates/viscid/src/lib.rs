//! Scene files, snapshots, dataset and weight files, multi-frame runs and
//! the `viscid` command line, on top of [`viscid_core`].

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
mod le;
pub mod runner;
pub mod scene_io;
pub mod snapshot;
pub mod weights;

pub use error::{Error, Result};
pub use viscid_core;
