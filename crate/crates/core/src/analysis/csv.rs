use std::fmt::Display;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes a header record and one record per row.
pub(crate) fn write_rows<R, I, D>(path: &Path, header: &[String], rows: R) -> Result<()>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = D>,
    D: Display,
{
    let to_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(row.into_iter().map(|c| c.to_string())).map_err(to_err)?;
    }
    w.flush()?;
    Ok(())
}
