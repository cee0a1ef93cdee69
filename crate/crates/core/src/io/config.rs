//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys that are absent
//! keep their default value; unknown keys are an error.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::envelope::EnvelopeConfig;
use crate::mel::MelConfig;
use crate::prior::PriorKind;
use crate::stft::StftConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub envelope: EnvelopeConfig,
    /// Schedule name (`WG-3`, …) or an inline beta list / `linspace(...)`.
    pub schedule: String,
    pub prior: PriorKind,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            mel: MelConfig::default(),
            envelope: EnvelopeConfig::default(),
            schedule: "WG-50".into(),
            prior: PriorKind::Envelope,
            seed: 0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Format(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("sample_rate", &self.stft.sample_rate);
        put("window_length", &self.stft.window_length);
        put("hop", &self.stft.hop);
        put("fft_size", &self.stft.fft_size);
        put("n_mels", &self.mel.n_mels);
        put("f_min", &self.mel.f_min);
        put("f_max", &self.mel.f_max);
        put("lifter_order", &self.envelope.lifter_order);
        put("stabilizer", &self.envelope.stabilizer);
        put("schedule", &self.schedule);
        put("prior", &self.prior);
        put("seed", &self.seed);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "sample_rate" => cfg.stft.sample_rate = parse_value(key, value)?,
                "window_length" => cfg.stft.window_length = parse_value(key, value)?,
                "hop" => cfg.stft.hop = parse_value(key, value)?,
                "fft_size" => cfg.stft.fft_size = parse_value(key, value)?,
                "n_mels" => cfg.mel.n_mels = parse_value(key, value)?,
                "f_min" => cfg.mel.f_min = parse_value(key, value)?,
                "f_max" => cfg.mel.f_max = parse_value(key, value)?,
                "lifter_order" => cfg.envelope.lifter_order = parse_value(key, value)?,
                "stabilizer" => cfg.envelope.stabilizer = parse_value(key, value)?,
                "schedule" => cfg.schedule = value.to_string(),
                "prior" => cfg.prior = value.parse().map_err(|e: Error| Error::Format(e.to_string()))?,
                "seed" => cfg.seed = parse_value(key, value)?,
                other => return Err(Error::Format(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.mel.validate(&self.stft)?;
        self.envelope.validate(self.stft.fft_size)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}
