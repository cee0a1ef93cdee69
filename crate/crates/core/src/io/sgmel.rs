//! `SGMEL1` binary log-mel tensors.
//!
//! Layout: 6-byte ASCII magic `SGMEL1`, `F` and `K` as little-endian `u32`,
//! then `K × F` little-endian `f32` values, frame-major. Total size is
//! `14 + 4·F·K` bytes.

use std::fs;
use std::path::Path;

use crate::mel::LogMelSpectrogram;
use crate::{Error, Result};

pub const SGMEL_MAGIC: &[u8; 6] = b"SGMEL1";

const HEADER_LEN: usize = 14;

pub fn encode_sgmel(c: &LogMelSpectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * c.data().len());
    out.extend_from_slice(SGMEL_MAGIC);
    out.extend_from_slice(&(c.n_mels() as u32).to_le_bytes());
    out.extend_from_slice(&(c.frames() as u32).to_le_bytes());
    for &v in c.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_sgmel(bytes: &[u8]) -> Result<LogMelSpectrogram> {
    if bytes.len() < HEADER_LEN || &bytes[..6] != SGMEL_MAGIC {
        return Err(Error::Format("missing SGMEL1 header".into()));
    }
    let n_mels = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let frames = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if n_mels == 0 || frames == 0 {
        return Err(Error::Format(format!("empty tensor F={n_mels}, K={frames}")));
    }
    let expected = n_mels
        .checked_mul(frames)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("tensor dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "file has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    LogMelSpectrogram::new(frames, n_mels, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_sgmel(path: impl AsRef<Path>, c: &LogMelSpectrogram) -> Result<()> {
    fs::write(path, encode_sgmel(c))?;
    Ok(())
}

pub fn read_sgmel(path: impl AsRef<Path>) -> Result<LogMelSpectrogram> {
    decode_sgmel(&fs::read(path)?)
}
