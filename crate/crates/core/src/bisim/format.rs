use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DISTANCE_MAGIC: &[u8; 8] = b"HPLBDM01";

/// Writes a row-major matrix: magic, `rows` and `cols` as little-endian u32,
/// then `rows * cols` little-endian f64 values.
pub fn write_distance_matrix<T: Scalar>(path: &Path, rows: usize, cols: usize, values: &[T]) -> Result<()> {
    if values.len() != rows * cols {
        return Err(Error::Dimension { context: "distance matrix", expected: rows * cols, got: values.len() });
    }
    let (r, c) = match (u32::try_from(rows), u32::try_from(cols)) {
        (Ok(r), Ok(c)) => (r, c),
        _ => return Err(Error::InvalidArgument("matrix too large for the binary format".into())),
    };
    let mut buf = Vec::with_capacity(16 + values.len() * 8);
    buf.extend_from_slice(DISTANCE_MAGIC);
    buf.extend_from_slice(&r.to_le_bytes());
    buf.extend_from_slice(&c.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads a matrix written by [`write_distance_matrix`], returning `(rows, cols, values)`.
pub fn read_distance_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != DISTANCE_MAGIC {
        return Err(Error::Format(format!("{}: missing distance matrix header", path.display())));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != rows * cols * 8 {
        return Err(Error::Format(format!("{}: expected {} values, found {} bytes", path.display(), rows * cols, body.len())));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((rows, cols, values))
}
