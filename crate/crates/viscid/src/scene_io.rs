//! Scene files are JSON documents deserialized into [`Scene`].

use std::fs;
use std::path::Path;

use viscid_core::scene::Scene;

use crate::error::{Error, Result};

pub fn parse_scene(text: &str) -> std::result::Result<Scene, serde_json::Error> {
    serde_json::from_str(text)
}

/// Read and validate a scene file.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let scene = parse_scene(&text).map_err(|source| Error::Scene { path: path.to_path_buf(), source })?;
    scene.validate()?;
    Ok(scene)
}
