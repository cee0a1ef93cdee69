//! Diffusion noise priors: standard Gaussian, diagonal covariance and
//! envelope-shaped `L = G⁺ M G`.
//!
//! Every prior is immutable; randomness comes only from an explicit
//! [`NoiseSeed`], so the same `(prior, len, seed)` always yields the same draw.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::envelope::{Cepstrum, EnvelopeConfig, FilterSpec};
use crate::mel::{LogMelSpectrogram, MelBank};
use crate::stft::Stft;
use crate::{Error, Result};

/// Floor on the diagonal prior's variance `σ²`.
pub const SIGMA2_FLOOR: f64 = 0.01;

/// Key and stream of the counter-based generator behind every noise draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseSeed {
    pub seed: u64,
    pub stream: u64,
}

impl NoiseSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    pub(crate) fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for NoiseSeed {
    fn from(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }
}

/// `len` i.i.d. standard normal samples.
pub fn standard_normal(len: usize, seed: NoiseSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Sampling and whitening for a zero-mean Gaussian `N(0, L Lᵀ)`.
pub trait NoiseModel {
    /// Draws `ε = L ε̃` with `ε̃ ~ N(0, I)`.
    fn sample_noise(&self, len: usize, seed: NoiseSeed) -> Result<Vec<f64>>;

    /// Applies (an approximation of) `L⁻¹`.
    fn whiten(&self, v: &[f64]) -> Result<Vec<f64>>;
}

/// Per-sample standard deviations, `Σ = diag(σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPrior {
    sigma: Vec<f64>,
}

impl DiagonalPrior {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::invalid("diagonal prior needs at least one sample"));
        }
        if let Some(d) = sigma.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("σ[{d}] = {} is not positive", sigma[d])));
        }
        Ok(Self { sigma })
    }

    /// Prior derived from the frame energies of a log-mel spectrogram.
    pub fn from_mel(c: &LogMelSpectrogram, hop: usize) -> Result<Self> {
        Self::new(diagonal_sigma_from_mel(c, hop)?)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.sigma.len() {
            return Err(Error::length(format!(
                "diagonal prior covers {} samples, got {len}",
                self.sigma.len()
            )));
        }
        Ok(())
    }
}

/// Time-varying filter prior `L = G⁺ M G` with `L⁻¹ ≈ G⁺ M⁻¹ G`.
#[derive(Debug, Clone)]
pub struct EnvelopePrior {
    stft: Stft,
    filter: FilterSpec,
    inverse: FilterSpec,
}

impl EnvelopePrior {
    pub fn new(stft: Stft, filter: FilterSpec) -> Result<Self> {
        if filter.bins() != stft.config().bins() {
            return Err(Error::InvalidFilter(format!(
                "filter has {} bins, STFT has {}",
                filter.bins(),
                stft.config().bins()
            )));
        }
        let inverse = filter.inverse()?;
        Ok(Self {
            stft,
            filter,
            inverse,
        })
    }

    pub fn filter(&self) -> &FilterSpec {
        &self.filter
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    /// Number of samples the filter covers.
    pub fn len(&self) -> usize {
        self.filter.frames() * self.stft.config().hop
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, v: &[f64], filter: &FilterSpec) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::length(format!(
                "envelope prior covers {} samples, got {}",
                self.len(),
                v.len()
            )));
        }
        // G⁺ G = I, so a unit filter is the identity exactly.
        if filter.is_identity() {
            return Ok(v.to_vec());
        }
        self.stft.apply_tf_filter(v, filter)
    }
}

#[derive(Debug, Clone)]
pub enum NoisePrior {
    Standard,
    Diagonal(DiagonalPrior),
    Envelope(EnvelopePrior),
}

/// Which prior to build from a conditioning spectrogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Standard,
    Diagonal,
    Envelope,
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(PriorKind::Standard),
            "diagonal" => Ok(PriorKind::Diagonal),
            "envelope" => Ok(PriorKind::Envelope),
            other => Err(Error::invalid(format!(
                "unknown prior `{other}` (expected standard, diagonal or envelope)"
            ))),
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorKind::Standard => "standard",
            PriorKind::Diagonal => "diagonal",
            PriorKind::Envelope => "envelope",
        })
    }
}

impl NoisePrior {
    /// Builds the requested prior from a log-mel spectrogram.
    pub fn from_mel(
        kind: PriorKind,
        c: &LogMelSpectrogram,
        stft: &Stft,
        bank: &MelBank,
        envelope: &EnvelopeConfig,
    ) -> Result<Self> {
        match kind {
            PriorKind::Standard => Ok(NoisePrior::Standard),
            PriorKind::Diagonal => Ok(NoisePrior::Diagonal(DiagonalPrior::from_mel(c, stft.config().hop)?)),
            PriorKind::Envelope => {
                let cep = Cepstrum::new(stft.config().fft_size)?;
                let filter = cep.build_filter_spec(c, bank, envelope)?;
                Ok(NoisePrior::Envelope(EnvelopePrior::new(stft.clone(), filter)?))
            }
        }
    }

    pub fn kind(&self) -> PriorKind {
        match self {
            NoisePrior::Standard => PriorKind::Standard,
            NoisePrior::Diagonal(_) => PriorKind::Diagonal,
            NoisePrior::Envelope(_) => PriorKind::Envelope,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoisePrior::Standard => "standard",
            NoisePrior::Diagonal(_) => "diagonal",
            NoisePrior::Envelope(_) => "envelope",
        }
    }
}

impl NoiseModel for NoisePrior {
    fn sample_noise(&self, len: usize, seed: NoiseSeed) -> Result<Vec<f64>> {
        match self {
            NoisePrior::Standard => Ok(standard_normal(len, seed)),
            NoisePrior::Diagonal(p) => {
                p.check_len(len)?;
                let mut eps = standard_normal(len, seed);
                for (e, s) in eps.iter_mut().zip(&p.sigma) {
                    *e *= s;
                }
                Ok(eps)
            }
            NoisePrior::Envelope(p) => {
                if len != p.len() {
                    return Err(Error::length(format!(
                        "envelope prior covers {} samples, got {len}",
                        p.len()
                    )));
                }
                p.apply(&standard_normal(len, seed), &p.filter)
            }
        }
    }

    fn whiten(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            NoisePrior::Standard => Ok(v.to_vec()),
            NoisePrior::Diagonal(p) => {
                p.check_len(v.len())?;
                Ok(v.iter().zip(&p.sigma).map(|(x, s)| x / s).collect())
            }
            NoisePrior::Envelope(p) => p.apply(v, &p.inverse),
        }
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::length(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

/// Whitened squared error `‖L⁻¹ (ε − ε̂)‖²`.
pub fn loss_specgrad<P: NoiseModel + ?Sized>(prior: &P, eps: &[f64], eps_hat: &[f64]) -> Result<f64> {
    check_pair(eps, eps_hat)?;
    let residual: Vec<f64> = eps.iter().zip(eps_hat).map(|(a, b)| a - b).collect();
    Ok(prior.whiten(&residual)?.iter().map(|r| r * r).sum())
}

/// Plain `ℓ1` error `Σ |ε − ε̂|`.
pub fn loss_wavegrad(eps: &[f64], eps_hat: &[f64]) -> Result<f64> {
    check_pair(eps, eps_hat)?;
    Ok(eps.iter().zip(eps_hat).map(|(a, b)| (a - b).abs()).sum())
}

/// Per-sample `σ` from max-normalised frame energies.
///
/// Frame energy is `Σ_f exp(c[k, f])`; `σ²` is interpolated linearly between
/// frame centres `k * hop`, held constant after the last centre, and floored
/// at [`SIGMA2_FLOOR`].
pub fn diagonal_sigma_from_mel(c: &LogMelSpectrogram, hop: usize) -> Result<Vec<f64>> {
    if hop == 0 {
        return Err(Error::invalid("hop must be positive"));
    }
    let frames = c.frames();
    let energy: Vec<f64> = (0..frames)
        .map(|k| c.frame(k).iter().map(|v| v.exp()).sum())
        .collect();
    let peak = energy.iter().cloned().fold(f64::MIN, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::invalid("frame energies are not finite and positive"));
    }
    let norm: Vec<f64> = energy.iter().map(|e| e / peak).collect();
    let len = frames * hop;
    Ok((0..len)
        .map(|d| {
            let k = d / hop;
            let var = if k + 1 >= frames {
                norm[frames - 1]
            } else {
                let frac = (d % hop) as f64 / hop as f64;
                norm[k] + frac * (norm[k + 1] - norm[k])
            };
            var.max(SIGMA2_FLOOR).sqrt()
        })
        .collect())
}
