use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Array shapes disagree with each other or with the grid.
    Shape(String),
    /// A parameter is outside its valid range.
    InvalidInput(String),
    /// An iterative solve stopped at `max_iter` without reaching tolerance.
    NotConverged { iterations: usize, residual: f64 },
    /// Assembled operator failed the symmetry check.
    AsymmetricAssembly { max_asymmetry: f64, max_entry: f64 },
    /// Weight manifest bytes could not be decoded.
    Format(FormatError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormatError {
    BadMagic,
    VersionMismatch { found: u32, expected: u32 },
    Truncated { needed: usize, available: usize },
    Checksum { stored: u32, computed: u32 },
    ShapeChain(String),
    Malformed(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            CoreError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            CoreError::NotConverged { iterations, residual } => {
                write!(f, "solver did not converge after {iterations} iterations (relative residual {residual:e})")
            }
            CoreError::AsymmetricAssembly { max_asymmetry, max_entry } => write!(
                f,
                "assembled operator is not symmetric: max |A - A^T| = {max_asymmetry:e}, max |A| = {max_entry:e}"
            ),
            CoreError::Format(e) => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::BadMagic => write!(f, "bad magic bytes"),
            FormatError::VersionMismatch { found, expected } => {
                write!(f, "unsupported format version {found} (expected {expected})")
            }
            FormatError::Truncated { needed, available } => {
                write!(f, "truncated input: needed {needed} bytes, {available} available")
            }
            FormatError::Checksum { stored, computed } => {
                write!(f, "checksum mismatch: stored {stored:08x}, computed {computed:08x}")
            }
            FormatError::ShapeChain(msg) => write!(f, "layer shapes do not chain: {msg}"),
            FormatError::Malformed(msg) => write!(f, "malformed header: {msg}"),
        }
    }
}

impl core::error::Error for CoreError {}
impl core::error::Error for FormatError {}

impl From<FormatError> for CoreError {
    fn from(e: FormatError) -> Self {
        CoreError::Format(e)
    }
}
