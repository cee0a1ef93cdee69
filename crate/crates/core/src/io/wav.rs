use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

/// Reads a mono WAV at exactly `sample_rate` Hz.
///
/// 16-bit PCM maps to `[-1, 1)` by division by 32768; 32-bit float is taken
/// as is. Anything else, including a rate mismatch, is rejected: no
/// resampling or downmixing is ever performed.
pub fn read_wav(path: impl AsRef<Path>, sample_rate: u32) -> Result<Vec<f64>> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "expected mono audio, found {} channels",
            spec.channels
        )));
    }
    if spec.sample_rate != sample_rate {
        return Err(Error::UnsupportedFormat(format!(
            "expected {sample_rate} Hz, found {} Hz",
            spec.sample_rate
        )));
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| Ok(s? as f64 / 32768.0))
            .collect(),
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| Ok(s? as f64))
            .collect(),
        (fmt, bits) => Err(Error::UnsupportedFormat(format!(
            "{bits}-bit {fmt:?} samples (expected 16-bit PCM or 32-bit float)"
        ))),
    }
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32, encoding: WavEncoding) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in samples {
        match encoding {
            WavEncoding::Pcm16 => {
                let q = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64);
                writer.write_sample(q as i16)?;
            }
            WavEncoding::Float32 => writer.write_sample(s as f32)?,
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let x: Vec<f64> = (0..500).map(|i| ((i as f32) * 0.013).sin() as f64).collect();
        write_wav(&path, &x, 24_000, WavEncoding::Float32).unwrap();
        assert_eq!(read_wav(&path, 24_000).unwrap(), x);
    }

    #[test]
    fn pcm16_roundtrip_after_quantisation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.wav");
        let x = vec![-1.0, -0.5, 0.0, 0.123456, 0.999];
        write_wav(&path, &x, 24_000, WavEncoding::Pcm16).unwrap();
        let once = read_wav(&path, 24_000).unwrap();
        assert_eq!(once[0], -1.0);
        write_wav(&path, &once, 24_000, WavEncoding::Pcm16).unwrap();
        assert_eq!(read_wav(&path, 24_000).unwrap(), once);
        for (a, b) in x.iter().zip(&once) {
            assert!((a - b).abs() <= 0.5 / 32768.0 + 1e-12);
        }
    }

    #[test]
    fn wrong_rate_or_channels_are_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.wav");
        write_wav(&path, &[0.0; 10], 48_000, WavEncoding::Pcm16).unwrap();
        assert!(matches!(read_wav(&path, 24_000), Err(Error::UnsupportedFormat(_))));

        let stereo = hound::WavSpec {
            channels: 2,
            sample_rate: 24_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, stereo).unwrap();
        for _ in 0..8 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path, 24_000), Err(Error::UnsupportedFormat(_))));
    }
}
