use core::fmt;

/// Errors surfaced by setup and configuration paths. Contract violations
/// (width mismatches, out-of-range parameters on internal operations) panic
/// instead; they indicate caller bugs, not recoverable conditions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Error {
    /// Modulus is even, too small, or otherwise unusable.
    InvalidModulus(String),
    /// Modulus does not leave the required two bits of headroom at this width.
    ModulusTooWide { bits: u32, capacity: u32 },
    /// Malformed hexadecimal input.
    InvalidHex(String),
    /// Invalid run configuration (bounds, lane counts, ...).
    InvalidConfig(String),
    /// Invalid input to a top-level entry point.
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidModulus(msg) => write!(f, "invalid modulus: {}", msg),
            Error::ModulusTooWide { bits, capacity } => write!(
                f,
                "modulus of {} bits exceeds the usable capacity of {} bits",
                bits, capacity
            ),
            Error::InvalidHex(msg) => write!(f, "invalid hex: {}", msg),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {}", msg),
            Error::InvalidInput(msg) => write!(f, "invalid input: {}", msg),
        }
    }
}

impl std::error::Error for Error {}
