//! CSV export of filter magnitudes: one row per frequency bin, one column per
//! frame, preceded by a `bin,frame_0,…` header.

use std::io::{Read, Write};

use crate::envelope::FilterSpec;
use crate::{Error, Result};

/// Writes `|m[k, bin]|` as 32-bit floats in shortest round-trip form.
pub fn write_filter_csv<W: Write>(writer: W, filter: &FilterSpec) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["bin".to_string()];
    header.extend((0..filter.frames()).map(|k| format!("frame_{k}")));
    w.write_record(&header)?;
    for b in 0..filter.bins() {
        let mut row = vec![b.to_string()];
        row.extend((0..filter.frames()).map(|k| (filter.frame(k)[b].norm() as f32).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a filter CSV back as `bins × frames` magnitudes.
pub fn read_filter_csv<R: Read>(reader: R) -> Result<Vec<Vec<f32>>> {
    let mut r = csv::Reader::from_reader(reader);
    let frames = r.headers()?.len().saturating_sub(1);
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != frames + 1 {
            return Err(Error::Format(format!("row {i} has {} fields", record.len())));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<f32>().map_err(|_| Error::Format(format!("bad value `{v}` in row {i}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    Ok(rows)
}
