//! Training data files: one frame record per simulated step.
//!
//! A dataset file starts with the 8-byte magic `VFDATA1\0` and a u32 format
//! version, followed by records. Each record is
//!
//! ```text
//! u32 version | u32 payload length | payload | u32 CRC32 of payload
//! ```
//!
//! and the payload holds, in order (all little-endian):
//!
//! ```text
//! u64 frame
//! u32 nx, u32 ny, f64 dx, f64 dt, f64 rho
//! f64 × nx·ny                   mu per cell, x-major
//! u32 channels, f32 × C·(2nx+1)·(2ny+1)   input stack, channel-major, x-major
//! f64 × (nx+1)·ny, f64 × nx·(ny+1)   velocity before viscosity (u, v)
//! f64 × (nx+1)·ny, f64 × nx·(ny+1)   label: velocity change (Δu, Δv)
//! ```
//!
//! Next to the data file sits a plain-text `key=value` manifest (see
//! [`DatasetManifest`]).

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use viscid_core::grid::{Array2, GridDims, MacVelocity2};
use viscid_core::symgrid::{ChannelStack, BASE_CHANNELS, COEFF_CHANNELS};
use viscid_core::viscosity::{FluidParams, MuField};
use viscid_core::FormatError;

use crate::error::{Error, Result};
use crate::le::{Reader, Writer};

pub const DATASET_MAGIC: [u8; 8] = *b"VFDATA1\0";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: u64,
    pub dims: GridDims,
    pub dt: f64,
    pub rho: f64,
    /// Viscosity per cell, Pa·s.
    pub mu: Array2,
    /// Unpadded network input.
    pub input: ChannelStack,
    /// Grid velocity entering the viscosity stage.
    pub vel_old: MacVelocity2,
    /// Velocity change from the classic solver: `label.u` is Δu on
    /// `(nx+1, ny)`, `label.v` is Δv on `(nx, ny+1)`.
    pub label: MacVelocity2,
}

impl FrameRecord {
    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        d.validate()?;
        self.params().validate(d)?;
        let (sx, sy) = d.sym_shape();
        if self.mu.shape() != (d.nx, d.ny) {
            return Err(Error::Invalid("viscosity field does not match grid".into()));
        }
        if !matches!(self.input.channels, BASE_CHANNELS | COEFF_CHANNELS) || (self.input.sx, self.input.sy) != (sx, sy)
        {
            return Err(Error::Invalid(format!(
                "input stack {}x{}x{} does not match grid",
                self.input.channels, self.input.sx, self.input.sy
            )));
        }
        self.vel_old.check(d)?;
        self.label.check(d)?;
        if !self.label.is_finite() || !self.vel_old.is_finite() {
            return Err(Error::Invalid("non-finite velocity in record".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> FluidParams {
        FluidParams { rho: self.rho, mu: MuField::PerCell(self.mu.clone()), dt: self.dt }
    }

    fn payload(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.frame);
        w.u32(self.dims.nx as u32);
        w.u32(self.dims.ny as u32);
        w.f64(self.dims.dx);
        w.f64(self.dt);
        w.f64(self.rho);
        w.f64s(self.mu.as_slice());
        w.u32(self.input.channels as u32);
        w.f32s(&self.input.data);
        for field in [&self.vel_old, &self.label] {
            w.f64s(field.u.as_slice());
            w.f64s(field.v.as_slice());
        }
        w.buf
    }

    fn from_payload(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        let malformed = |e: viscid_core::CoreError| FormatError::Malformed(e.to_string());
        let mut r = Reader::new(bytes);
        let frame = r.u64()?;
        let (nx, ny) = (r.u32()? as usize, r.u32()? as usize);
        let dims = GridDims::new(nx, ny, r.f64()?).map_err(malformed)?;
        let (dt, rho) = (r.f64()?, r.f64()?);
        let mu = Array2::from_vec(nx, ny, r.f64s(nx * ny)?).map_err(malformed)?;
        let channels = r.u32()? as usize;
        let (sx, sy) = dims.sym_shape();
        let input = ChannelStack::from_vec(channels, sx, sy, r.f32s(channels * sx * sy)?).map_err(malformed)?;
        let field = |r: &mut Reader| -> std::result::Result<MacVelocity2, FormatError> {
            let u = r.f64s((nx + 1) * ny)?;
            let v = r.f64s(nx * (ny + 1))?;
            Ok(MacVelocity2 {
                u: Array2::from_vec(nx + 1, ny, u).map_err(malformed)?,
                v: Array2::from_vec(nx, ny + 1, v).map_err(malformed)?,
            })
        };
        let vel_old = field(&mut r)?;
        let label = field(&mut r)?;
        if r.remaining() != 0 {
            return Err(FormatError::Malformed(format!("{} trailing bytes in record", r.remaining())));
        }
        Ok(Self { frame, dims, dt, rho, mu, input, vel_old, label })
    }
}

/// Append one record. Returns the number of bytes written.
pub fn write_frame(record: &FrameRecord, sink: &mut impl Write) -> Result<usize> {
    record.validate()?;
    let payload = record.payload();
    let len = u32::try_from(payload.len()).map_err(|_| Error::Invalid("record larger than 4 GiB".into()))?;
    sink.write_all(&DATASET_VERSION.to_le_bytes())?;
    sink.write_all(&len.to_le_bytes())?;
    sink.write_all(&payload)?;
    sink.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
    Ok(payload.len() + 12)
}

/// Read bytes until `buf` is full or the source ends; returns the count.
fn fill(source: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match source.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

/// Read the next record, or `None` at a clean end of stream.
pub fn read_frame(source: &mut impl Read) -> Result<Option<FrameRecord>> {
    let mut head = [0u8; 8];
    let got = fill(source, &mut head)?;
    if got == 0 {
        return Ok(None);
    }
    if got < head.len() {
        return Err(FormatError::Truncated { needed: head.len(), available: got }.into());
    }
    let version = u32::from_le_bytes(head[..4].try_into().unwrap());
    if version != DATASET_VERSION {
        return Err(FormatError::VersionMismatch { found: version, expected: DATASET_VERSION }.into());
    }
    let len = u32::from_le_bytes(head[4..].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    let got = source.take(len as u64 + 4).read_to_end(&mut body)?;
    if got < len + 4 {
        return Err(FormatError::Truncated { needed: len + 12, available: got + 8 }.into());
    }
    let (payload, crc) = body.split_at(len);
    let stored = u32::from_le_bytes(crc.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed }.into());
    }
    Ok(Some(FrameRecord::from_payload(payload)?))
}

fn write_file_header(sink: &mut impl Write) -> io::Result<()> {
    sink.write_all(&DATASET_MAGIC)?;
    sink.write_all(&DATASET_VERSION.to_le_bytes())
}

fn read_file_header(source: &mut impl Read) -> Result<()> {
    let mut head = [0u8; 12];
    let got = fill(source, &mut head)?;
    if got < 8 || head[..8] != DATASET_MAGIC {
        return Err(FormatError::BadMagic.into());
    }
    if got < 12 {
        return Err(FormatError::Truncated { needed: 12, available: got }.into());
    }
    let version = u32::from_le_bytes(head[8..].try_into().unwrap());
    if version != DATASET_VERSION {
        return Err(FormatError::VersionMismatch { found: version, expected: DATASET_VERSION }.into());
    }
    Ok(())
}

/// Summary written next to a dataset file as `key=value` lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub version: u32,
    pub frames: u64,
    /// Scene name, scene file path, seed.
    pub scene: String,
    pub source: String,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dt: f64,
    pub rho: f64,
    pub channels: usize,
    /// Distinct viscosity values present, ascending.
    pub mu: Vec<f64>,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mu: Vec<String> = self.mu.iter().map(|m| m.to_string()).collect();
        format!(
            "format=VFDATA1\nversion={}\nframes={}\nscene={}\nsource={}\nseed={}\ngrid={}x{}\ndx={}\ndt={}\nrho={}\nchannels={}\nmu={}\n",
            self.version,
            self.frames,
            self.scene,
            self.source,
            self.seed,
            self.nx,
            self.ny,
            self.dx,
            self.dt,
            self.rho,
            self.channels,
            mu.join(",")
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Invalid(format!("bad manifest line: {line:?}"));
        let mut m = DatasetManifest::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line.split_once('=').ok_or_else(|| bad(line))?;
            match key {
                "format" if value == "VFDATA1" => {}
                "version" => m.version = value.parse().map_err(|_| bad(line))?,
                "frames" => m.frames = value.parse().map_err(|_| bad(line))?,
                "scene" => m.scene = value.to_string(),
                "source" => m.source = value.to_string(),
                "seed" => m.seed = value.parse().map_err(|_| bad(line))?,
                "grid" => {
                    let (a, b) = value.split_once('x').ok_or_else(|| bad(line))?;
                    m.nx = a.parse().map_err(|_| bad(line))?;
                    m.ny = b.parse().map_err(|_| bad(line))?;
                }
                "dx" => m.dx = value.parse().map_err(|_| bad(line))?,
                "dt" => m.dt = value.parse().map_err(|_| bad(line))?,
                "rho" => m.rho = value.parse().map_err(|_| bad(line))?,
                "channels" => m.channels = value.parse().map_err(|_| bad(line))?,
                "mu" => {
                    m.mu = value
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse().map_err(|_| bad(line)))
                        .collect::<Result<_>>()?
                }
                _ => return Err(bad(line)),
            }
        }
        if m.version != DATASET_VERSION {
            return Err(FormatError::VersionMismatch { found: m.version, expected: DATASET_VERSION }.into());
        }
        Ok(m)
    }
}

/// Path of the manifest belonging to a dataset file.
pub fn manifest_path(data: &Path) -> PathBuf {
    let mut name = data.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

/// Streams records to a file; the manifest is written by [`finish`](Self::finish).
pub struct DatasetWriter {
    path: PathBuf,
    sink: BufWriter<File>,
    manifest: DatasetManifest,
}

impl DatasetWriter {
    /// `manifest` supplies the provenance fields; counts and grid data are
    /// filled in from the records.
    pub fn create(path: impl AsRef<Path>, manifest: DatasetManifest) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(Error::io(&path))?;
        let mut sink = BufWriter::new(file);
        write_file_header(&mut sink).map_err(Error::io(&path))?;
        Ok(Self {
            path,
            sink,
            manifest: DatasetManifest { version: DATASET_VERSION, frames: 0, mu: Vec::new(), ..manifest },
        })
    }

    pub fn append(&mut self, record: &FrameRecord) -> Result<usize> {
        let m = &mut self.manifest;
        if m.frames == 0 {
            (m.nx, m.ny, m.dx, m.dt, m.rho, m.channels) =
                (record.dims.nx, record.dims.ny, record.dims.dx, record.dt, record.rho, record.input.channels);
        } else if (m.nx, m.ny, m.channels) != (record.dims.nx, record.dims.ny, record.input.channels) {
            return Err(Error::Invalid("record grid differs from earlier records".into()));
        }
        let n = write_frame(record, &mut self.sink)?;
        let m = &mut self.manifest;
        m.frames += 1;
        for &mu in record.mu.as_slice() {
            if let Err(at) = m.mu.binary_search_by(|x| x.total_cmp(&mu)) {
                m.mu.insert(at, mu);
            }
        }
        Ok(n)
    }

    pub fn finish(mut self) -> Result<DatasetManifest> {
        self.sink.flush().map_err(Error::io(&self.path))?;
        let mpath = manifest_path(&self.path);
        fs::write(&mpath, self.manifest.to_text()).map_err(Error::io(&mpath))?;
        Ok(self.manifest)
    }
}

/// Sequential reader over a dataset file.
pub struct DatasetReader {
    source: BufReader<File>,
}

impl DatasetReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut source = BufReader::new(File::open(path).map_err(Error::io(path))?);
        read_file_header(&mut source)?;
        Ok(Self { source })
    }

    pub fn next_record(&mut self) -> Result<Option<FrameRecord>> {
        read_frame(&mut self.source)
    }

    pub fn read_all(mut self) -> Result<Vec<FrameRecord>> {
        let mut out = Vec::new();
        while let Some(r) = self.next_record()? {
            out.push(r);
        }
        Ok(out)
    }
}

/// Read every record and check the count against the manifest.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<FrameRecord>)> {
    let path = path.as_ref();
    let mpath = manifest_path(path);
    let manifest = DatasetManifest::parse(&fs::read_to_string(&mpath).map_err(Error::io(&mpath))?)?;
    let records = DatasetReader::open(path)?.read_all()?;
    if records.len() as u64 != manifest.frames {
        return Err(Error::Invalid(format!("manifest lists {} frames, file holds {}", manifest.frames, records.len())));
    }
    Ok((manifest, records))
}
