use std::fs;
use std::path::Path;

use viscid_core::nn::WeightManifest;
use viscid_core::CoreError;

use crate::error::{Error, Result};

/// Load and validate a weight file. Nothing is returned unless the whole
/// file decodes.
pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightManifest> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::io(path))?;
    WeightManifest::from_bytes(&bytes).map_err(|e| match e {
        CoreError::Format(f) => Error::Format(f),
        other => Error::Core(other),
    })
}

pub fn save_weights(path: impl AsRef<Path>, manifest: &WeightManifest) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, manifest.to_bytes()).map_err(Error::io(path))
}
