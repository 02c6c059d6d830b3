//! Flat binary dump of `δψ`: site count (u64), time (f64), then interleaved
//! real and imaginary parts, all little-endian.

use std::path::Path;

use nanopulse_core::Complex64;

use crate::error::AppError;
use crate::output::write_atomic;

pub fn encode(time: f64, delta: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 16 * delta.len());
    out.extend_from_slice(&(delta.len() as u64).to_le_bytes());
    out.extend_from_slice(&time.to_le_bytes());
    for d in delta {
        out.extend_from_slice(&d.re.to_le_bytes());
        out.extend_from_slice(&d.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Option<(f64, Vec<Complex64>)> {
    let word = |i: usize| -> Option<[u8; 8]> { bytes.get(8 * i..8 * i + 8)?.try_into().ok() };
    let n = usize::try_from(u64::from_le_bytes(word(0)?)).ok()?;
    if bytes.len() != 16 + 16 * n {
        return None;
    }
    let time = f64::from_le_bytes(word(1)?);
    let delta = (0..n)
        .map(|j| {
            Some(Complex64::new(
                f64::from_le_bytes(word(2 + 2 * j)?),
                f64::from_le_bytes(word(3 + 2 * j)?),
            ))
        })
        .collect::<Option<Vec<_>>>()?;
    Some((time, delta))
}

pub fn write(path: &Path, time: f64, delta: &[Complex64]) -> Result<(), AppError> {
    write_atomic(path, &encode(time, delta))
}

pub fn read(path: &Path) -> Result<(f64, Vec<Complex64>), AppError> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(&bytes).ok_or_else(|| {
        AppError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, "malformed checkpoint"),
        )
    })
}
