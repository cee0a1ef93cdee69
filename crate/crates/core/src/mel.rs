//! HTK mel filterbank, log-mel analysis and pseudoinversion to linear power.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::stft::{Stft, StftConfig};
use crate::{Error, Result};

/// Floor applied to mel energies before the logarithm.
pub const LOG_MEL_FLOOR: f64 = 1e-10;

/// Floor applied to pseudoinverted power values.
pub const POWER_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 128,
            f_min: 20.0,
            f_max: 12_000.0,
        }
    }
}

impl MelConfig {
    pub fn validate(&self, stft: &StftConfig) -> Result<()> {
        let nyquist = stft.sample_rate as f64 / 2.0;
        if self.n_mels < 2 {
            return Err(Error::invalid(format!("n_mels {} < 2", self.n_mels)));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max) {
            return Err(Error::invalid(format!(
                "mel band [{}, {}] Hz is empty or negative",
                self.f_min, self.f_max
            )));
        }
        if self.f_max > nyquist {
            return Err(Error::invalid(format!(
                "f_max {} Hz exceeds Nyquist {nyquist} Hz",
                self.f_max
            )));
        }
        Ok(())
    }
}

/// Natural-log mel power, `frames × n_mels`, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelSpectrogram {
    frames: usize,
    n_mels: usize,
    data: Vec<f64>,
}

impl LogMelSpectrogram {
    pub fn new(frames: usize, n_mels: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || n_mels == 0 {
            return Err(Error::invalid("log-mel spectrogram must have at least one frame and one band"));
        }
        if data.len() != frames * n_mels {
            return Err(Error::invalid(format!(
                "log-mel data has {} entries, expected {frames}×{n_mels}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("log-mel spectrogram contains non-finite values"));
        }
        Ok(Self { frames, n_mels, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_mels..(k + 1) * self.n_mels]
    }
}

/// Linear power spectrogram, `frames × bins`, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<f64>,
}

impl PowerSpectrogram {
    pub fn frame(&self, k: usize) -> &[f64] {
        &self.data[k * self.bins..(k + 1) * self.bins]
    }
}

/// Triangular filters on the HTK mel scale, each peak-normalised to 1.
///
/// Returns an `n_mels × (fft_size/2 + 1)` matrix.
pub fn mel_filterbank(cfg: &MelConfig, stft: &StftConfig) -> Result<DMatrix<f64>> {
    cfg.validate(stft)?;
    let bins = stft.bins();
    let edges = band_edges(cfg);
    let bin_hz = stft.sample_rate as f64 / stft.fft_size as f64;
    let mut fb = DMatrix::zeros(cfg.n_mels, bins);
    for m in 0..cfg.n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut peak = 0.0f64;
        for b in 0..bins {
            let f = b as f64 * bin_hz;
            let w = ((f - lo) / (mid - lo)).min((hi - f) / (hi - mid)).max(0.0);
            fb[(m, b)] = w;
            peak = peak.max(w);
        }
        if peak <= 0.0 {
            return Err(Error::invalid(format!(
                "mel filter {m} ({lo:.1}–{hi:.1} Hz) contains no FFT bin"
            )));
        }
        fb.row_mut(m).scale_mut(1.0 / peak);
    }
    Ok(fb)
}

/// `n_mels + 2` band edges in Hz, equally spaced on the mel axis.
fn band_edges(cfg: &MelConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.f_min);
    let hi = hz_to_mel(cfg.f_max);
    let step = (hi - lo) / (cfg.n_mels + 1) as f64;
    (0..cfg.n_mels + 2).map(|i| mel_to_hz(lo + step * i as f64)).collect()
}

/// Centre frequency of each mel filter in Hz.
pub fn center_frequencies(cfg: &MelConfig) -> Vec<f64> {
    let edges = band_edges(cfg);
    edges[1..=cfg.n_mels].to_vec()
}

/// Moore–Penrose pseudoinverse of a full-row-rank matrix via SVD.
pub fn pseudo_inverse(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = matrix.shape();
    let svd = matrix.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = rows.max(cols) as f64 * f64::EPSILON * s_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < rows.min(cols) {
        return Err(Error::NumericalRank(format!(
            "matrix {rows}×{cols} has numerical rank {rank} (tolerance {tol:.3e})"
        )));
    }
    let u = svd.u.as_ref().expect("SVD computed with U");
    let v_t = svd.v_t.as_ref().expect("SVD computed with Vᵀ");
    let inv_s = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    Ok(v_t.transpose() * inv_s * u.transpose())
}

/// Filterbank and its pseudoinverse for one analysis configuration.
#[derive(Debug, Clone)]
pub struct MelBank {
    mel: MelConfig,
    stft: StftConfig,
    filterbank: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

type BankKey = (usize, u64, u64, StftConfig);

impl MelBank {
    pub fn new(mel: MelConfig, stft: StftConfig) -> Result<Self> {
        stft.validate()?;
        let filterbank = mel_filterbank(&mel, &stft)?;
        let pinv = pseudo_inverse(&filterbank)?;
        Ok(Self {
            mel,
            stft,
            filterbank,
            pinv,
        })
    }

    /// Shared instance per configuration; the SVD runs once per process.
    pub fn cached(mel: MelConfig, stft: StftConfig) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<BankKey, Arc<MelBank>>>> = OnceLock::new();
        let key = (mel.n_mels, mel.f_min.to_bits(), mel.f_max.to_bits(), stft);
        let cache = CACHE.get_or_init(Default::default);
        if let Some(bank) = cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(bank));
        }
        let bank = Arc::new(Self::new(mel, stft)?);
        cache.lock().unwrap().insert(key, Arc::clone(&bank));
        Ok(bank)
    }

    pub fn mel_config(&self) -> &MelConfig {
        &self.mel
    }

    pub fn stft_config(&self) -> &StftConfig {
        &self.stft
    }

    pub fn filterbank(&self) -> &DMatrix<f64> {
        &self.filterbank
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    /// Mel energies `Mel · power` for one frame.
    pub fn mel_energies(&self, power: &[f64]) -> DVector<f64> {
        &self.filterbank * DVector::from_column_slice(power)
    }

    /// `c = ln(max(Mel · |STFT(x)|², 1e-10))`.
    pub fn log_mel(&self, op: &Stft, x: &[f64]) -> Result<LogMelSpectrogram> {
        if op.config() != &self.stft {
            return Err(Error::invalid("STFT operator does not match the mel bank configuration"));
        }
        let spec = op.stft(x)?;
        let power = spec.power();
        let mut data = Vec::with_capacity(spec.frames() * self.mel.n_mels);
        for frame in power.chunks_exact(spec.bins()) {
            let energies = self.mel_energies(frame);
            data.extend(energies.iter().map(|&e| e.max(LOG_MEL_FLOOR).ln()));
        }
        LogMelSpectrogram::new(spec.frames(), self.mel.n_mels, data)
    }

    /// `P = max(pinv · exp(c), 1e-10)` per frame.
    pub fn mel_to_power(&self, c: &LogMelSpectrogram) -> Result<PowerSpectrogram> {
        if c.n_mels() != self.mel.n_mels {
            return Err(Error::invalid(format!(
                "log-mel has {} bands, filterbank has {}",
                c.n_mels(),
                self.mel.n_mels
            )));
        }
        let bins = self.stft.bins();
        let mut data = Vec::with_capacity(c.frames() * bins);
        for k in 0..c.frames() {
            let energies = DVector::from_iterator(c.n_mels(), c.frame(k).iter().map(|v| v.exp()));
            let p = &self.pinv * energies;
            data.extend(p.iter().map(|&v| v.max(POWER_FLOOR)));
        }
        Ok(PowerSpectrogram {
            frames: c.frames(),
            bins,
            data,
        })
    }
}
