//! Cepstral spectral envelopes and the minimum-phase time-varying filter `M`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::mel::{LogMelSpectrogram, MelBank};
use crate::{Error, Result};

/// Lifter order and amplitude stabiliser used when building a [`FilterSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeConfig {
    pub lifter_order: usize,
    pub stabilizer: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            lifter_order: 24,
            stabilizer: 0.01,
        }
    }
}

impl EnvelopeConfig {
    pub fn validate(&self, fft_size: usize) -> Result<()> {
        if self.lifter_order == 0 || self.lifter_order >= fft_size / 2 {
            return Err(Error::invalid(format!(
                "lifter order {} must lie in 1..{}",
                self.lifter_order,
                fft_size / 2
            )));
        }
        if !(self.stabilizer > 0.0 && self.stabilizer.is_finite()) {
            return Err(Error::invalid(format!("stabilizer {} must be positive", self.stabilizer)));
        }
        Ok(())
    }
}

/// Per-bin complex gains of a time-varying filter: the diagonal of `M`.
///
/// Only the one-sided half is stored; DC and Nyquist entries are always real.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    frames: usize,
    bins: usize,
    responses: Vec<Complex64>,
    normalization_gain: f64,
}

impl FilterSpec {
    /// Wraps raw responses, projecting DC and Nyquist to their real parts.
    pub fn new(frames: usize, bins: usize, responses: Vec<Complex64>) -> Result<Self> {
        Self::with_gain(frames, bins, responses, 1.0)
    }

    fn with_gain(frames: usize, bins: usize, mut responses: Vec<Complex64>, gain: f64) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidFilter(format!("filter needs at least 2 bins, got {bins}")));
        }
        if responses.len() != frames * bins {
            return Err(Error::InvalidFilter(format!(
                "filter has {} responses, expected {frames}×{bins}",
                responses.len()
            )));
        }
        if let Some(i) = responses.iter().position(|m| !(m.norm() > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidFilter(format!(
                "response at frame {}, bin {} is zero or non-finite",
                i / bins,
                i % bins
            )));
        }
        for frame in responses.chunks_exact_mut(bins) {
            frame[0].im = 0.0;
            frame[bins - 1].im = 0.0;
        }
        // Projection may have zeroed a purely imaginary edge entry.
        if responses
            .chunks_exact(bins)
            .any(|f| f[0].re == 0.0 || f[bins - 1].re == 0.0)
        {
            return Err(Error::InvalidFilter("DC or Nyquist response has zero real part".into()));
        }
        Ok(Self {
            frames,
            bins,
            responses,
            normalization_gain: gain,
        })
    }

    /// All-ones filter; `G⁺ M G` reduces to the identity.
    pub fn unit(frames: usize, bins: usize) -> Self {
        Self {
            frames,
            bins,
            responses: vec![Complex64::new(1.0, 0.0); frames * bins],
            normalization_gain: 1.0,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn responses(&self) -> &[Complex64] {
        &self.responses
    }

    pub fn frame(&self, k: usize) -> &[Complex64] {
        &self.responses[k * self.bins..(k + 1) * self.bins]
    }

    /// Scale applied to reach unit mean power (1 for unnormalised filters).
    pub fn normalization_gain(&self) -> f64 {
        self.normalization_gain
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.responses.iter().map(|m| m.norm()).collect()
    }

    /// Mean of `|m|²` over all stored bins.
    pub fn mean_power(&self) -> f64 {
        self.responses.iter().map(|m| m.norm_sqr()).sum::<f64>() / self.responses.len() as f64
    }

    pub fn is_identity(&self) -> bool {
        self.responses.iter().all(|m| m.re == 1.0 && m.im == 0.0)
    }

    /// Entry-wise reciprocal, the diagonal of `M⁻¹`.
    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .responses
            .iter()
            .map(|m| {
                if m.norm() > 0.0 {
                    Ok(m.inv())
                } else {
                    Err(Error::InvalidFilter("cannot invert a zero response".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_gain(self.frames, self.bins, inv, 1.0 / self.normalization_gain)
    }
}

/// FFT plans for cepstral processing on a fixed `fft_size` grid.
#[derive(Clone)]
pub struct Cepstrum {
    fft_size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Cepstrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cepstrum").field("fft_size", &self.fft_size).finish()
    }
}

impl Cepstrum {
    pub fn new(fft_size: usize) -> Result<Self> {
        if fft_size < 4 || !fft_size.is_multiple_of(2) {
            return Err(Error::invalid(format!("FFT size {fft_size} must be even and ≥ 4")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            fft_size,
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Real cepstrum of a one-sided real log spectrum, mirrored to full length.
    fn real_cepstrum(&self, log_half: impl Iterator<Item = f64>) -> Vec<f64> {
        let n = self.fft_size;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (b, v) in log_half.enumerate() {
            buf[b] = Complex64::new(v, 0.0);
            if b > 0 && b < n / 2 {
                buf[n - b] = Complex64::new(v, 0.0);
            }
        }
        self.inverse.process(&mut buf);
        buf.iter().map(|z| z.re / n as f64).collect()
    }

    fn check_positive(&self, values: &[f64], what: &str) -> Result<()> {
        if values.len() != self.bins() {
            return Err(Error::invalid(format!(
                "{what} has {} bins, expected {}",
                values.len(),
                self.bins()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!("{what} is not strictly positive at bin {i}")));
        }
        Ok(())
    }

    /// Amplitude envelope of a power frame via a rectangular lifter of order `r`.
    pub fn spectral_envelope(&self, power: &[f64], lifter_order: usize) -> Result<Vec<f64>> {
        self.check_positive(power, "power frame")?;
        let n = self.fft_size;
        if lifter_order >= n / 2 {
            return Err(Error::invalid(format!("lifter order {lifter_order} ≥ {}", n / 2)));
        }
        let ceps = self.real_cepstrum(power.iter().map(|p| 0.5 * p.ln()));
        let mut buf: Vec<Complex64> = ceps
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                let quefrency = i.min(n - i);
                Complex64::new(if quefrency <= lifter_order { q } else { 0.0 }, 0.0)
            })
            .collect();
        self.forward.process(&mut buf);
        Ok(buf[..self.bins()].iter().map(|z| z.re.exp()).collect())
    }

    /// Minimum-phase response with magnitude `envelope`, by cepstral folding.
    pub fn minimum_phase_response(&self, envelope: &[f64]) -> Result<Vec<Complex64>> {
        self.check_positive(envelope, "envelope")?;
        let n = self.fft_size;
        let half = n / 2;
        let ceps = self.real_cepstrum(envelope.iter().map(|a| a.ln()));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0].re = ceps[0];
        for i in 1..half {
            buf[i].re = 2.0 * ceps[i];
        }
        buf[half].re = ceps[half];
        self.forward.process(&mut buf);
        let mut resp: Vec<Complex64> = buf[..=half].iter().map(|z| z.exp()).collect();
        resp[0].im = 0.0;
        resp[half].im = 0.0;
        Ok(resp)
    }

    /// Builds the normalised time-varying filter `M` from a log-mel spectrogram.
    ///
    /// Per frame: pseudoinverse to power, lifter to an amplitude envelope, add
    /// the stabiliser, synthesise the minimum-phase response. The whole
    /// utterance is then scaled to unit mean `|m|²`.
    pub fn build_filter_spec(
        &self,
        c: &LogMelSpectrogram,
        bank: &MelBank,
        cfg: &EnvelopeConfig,
    ) -> Result<FilterSpec> {
        cfg.validate(self.fft_size)?;
        if bank.stft_config().fft_size != self.fft_size {
            return Err(Error::invalid("mel bank FFT size differs from cepstrum FFT size"));
        }
        let power = bank.mel_to_power(c)?;
        let bins = self.bins();
        let mut responses = Vec::with_capacity(power.frames * bins);
        for k in 0..power.frames {
            let mut env = self.spectral_envelope(power.frame(k), cfg.lifter_order)?;
            for a in &mut env {
                *a += cfg.stabilizer;
            }
            responses.extend(self.minimum_phase_response(&env)?);
        }
        let mean_power = responses.iter().map(|m| m.norm_sqr()).sum::<f64>() / responses.len() as f64;
        let gain = mean_power.sqrt().recip();
        for m in &mut responses {
            *m *= gain;
        }
        FilterSpec::with_gain(power.frames, bins, responses, gain)
    }
}
