//! Per-frame particle snapshots.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 8 | magic `VSNAP1\0\0` |
//! | 8 | 4 | version (u32, currently 1) |
//! | 12 | 4 | particle count `P` (u32) |
//! | 16 | 8 | frame index (u64) |
//! | 24 | 8 | simulated time in s (f64) |
//! | 32 | 33·P | per particle: x, y (f64, m), vx, vy (f64, m/s), color (u8) |

use std::fs;
use std::path::Path;

use viscid_core::apic::ParticleSet;
use viscid_core::FormatError;

use crate::error::{Error, Result};
use crate::le::{Reader, Writer};

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"VSNAP1\0\0";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub frame: u64,
    pub time: f64,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub color: Vec<u8>,
}

impl Snapshot {
    pub fn of(particles: &ParticleSet, frame: u64, time: f64) -> Self {
        Self {
            frame,
            time,
            positions: particles.positions.clone(),
            velocities: particles.velocities.clone(),
            color: particles.color.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.buf.extend_from_slice(&SNAPSHOT_MAGIC);
        w.u32(SNAPSHOT_VERSION);
        w.u32(self.positions.len() as u32);
        w.u64(self.frame);
        w.f64(self.time);
        for k in 0..self.positions.len() {
            w.f64s(&self.positions[k]);
            w.f64s(&self.velocities[k]);
            w.u8(self.color[k]);
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        if r.take(8)? != SNAPSHOT_MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(FormatError::VersionMismatch { found: version, expected: SNAPSHOT_VERSION });
        }
        let count = r.u32()? as usize;
        let frame = r.u64()?;
        let time = r.f64()?;
        let mut s = Snapshot { frame, time, positions: Vec::new(), velocities: Vec::new(), color: Vec::new() };
        for _ in 0..count {
            s.positions.push([r.f64()?, r.f64()?]);
            s.velocities.push([r.f64()?, r.f64()?]);
            s.color.push(r.u8()?);
        }
        if r.remaining() != 0 {
            return Err(FormatError::Malformed(format!("{} trailing bytes", r.remaining())));
        }
        Ok(s)
    }
}

/// File name used for frame `frame` inside an output directory.
pub fn snapshot_name(frame: u64) -> String {
    format!("frame_{frame:06}.vsnap")
}

pub fn write_snapshot(path: impl AsRef<Path>, snapshot: &Snapshot) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, snapshot.to_bytes()).map_err(Error::io(path))
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(Snapshot::from_bytes(&bytes)?)
}
