//! Explicit-matrix STFT operators for small sizes.
//!
//! `G` is built with one row per (frame, full-spectrum bin) pair, i.e.
//! `fft_size · K × D`, directly from the DFT definition. `G⁺` is the matching
//! `D × fft_size · K` dual-window overlap-add. These are test oracles for the
//! FFT path; memory is quadratic in `D`, so keep `D ≤ 64`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::envelope::FilterSpec;
use crate::prior::{standard_normal, NoiseModel, NoiseSeed};
use crate::stft::{ComplexSpectrogram, StftConfig, WindowPair};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DenseStft {
    pub g: DMatrix<Complex64>,
    pub g_plus: DMatrix<Complex64>,
    frames: usize,
    fft_size: usize,
}

/// Builds `G` and `G⁺` for waveforms of `len` samples.
pub fn build_dense_stft(cfg: &StftConfig, pair: &WindowPair, len: usize) -> Result<DenseStft> {
    cfg.validate()?;
    let frames = cfg.frames_for(len)?;
    let n = cfg.fft_size;
    let w = pair.analysis();
    let dual = pair.dual();
    let half = (cfg.window_length / 2) as isize;

    // Window index of sample d inside frame k, if covered.
    let tap = |k: usize, d: usize| -> Option<usize> {
        let j = d as isize - (k * cfg.hop) as isize + half;
        (0..cfg.window_length as isize).contains(&j).then_some(j as usize)
    };

    let mut norm = vec![0.0; len];
    for (d, s) in norm.iter_mut().enumerate() {
        for k in 0..frames {
            if let Some(j) = tap(k, d) {
                *s += w[j] * dual[j];
            }
        }
        if !(*s > 0.0) {
            return Err(Error::DegenerateWindow(format!("sample {d} is not covered")));
        }
    }

    let mut g = DMatrix::zeros(n * frames, len);
    let mut g_plus = DMatrix::zeros(len, n * frames);
    for k in 0..frames {
        for d in 0..len {
            let Some(j) = tap(k, d) else { continue };
            for b in 0..n {
                let phase = 2.0 * PI * ((b * j) % n) as f64 / n as f64;
                let rot = Complex64::from_polar(1.0, phase);
                g[(k * n + b, d)] = rot.conj() * w[j];
                g_plus[(d, k * n + b)] = rot * (dual[j] / (n as f64 * norm[d]));
            }
        }
    }
    Ok(DenseStft {
        g,
        g_plus,
        frames,
        fft_size: n,
    })
}

impl DenseStft {
    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Full-spectrum vector from one-sided frames, by conjugate symmetry.
    ///
    /// DC and Nyquist entries are projected to their real parts.
    pub fn expand(&self, one_sided: &[Complex64]) -> DVector<Complex64> {
        let n = self.fft_size;
        let bins = n / 2 + 1;
        assert_eq!(one_sided.len(), self.frames * bins, "one-sided length mismatch");
        let mut full = DVector::zeros(n * self.frames);
        for k in 0..self.frames {
            let src = &one_sided[k * bins..(k + 1) * bins];
            let dst = k * n;
            full[dst] = Complex64::new(src[0].re, 0.0);
            full[dst + n / 2] = Complex64::new(src[n / 2].re, 0.0);
            for b in 1..n / 2 {
                full[dst + b] = src[b];
                full[dst + n - b] = src[b].conj();
            }
        }
        full
    }

    /// One-sided spectrogram from a full-spectrum vector such as `G x`.
    pub fn fold(&self, full: &DVector<Complex64>) -> ComplexSpectrogram {
        let n = self.fft_size;
        let bins = n / 2 + 1;
        let mut data = Vec::with_capacity(self.frames * bins);
        for k in 0..self.frames {
            data.extend(full.rows(k * n, bins).iter().copied());
        }
        ComplexSpectrogram::from_data(self.frames, bins, data).expect("consistent dimensions")
    }

    pub fn analyze(&self, x: &[f64]) -> DVector<Complex64> {
        let x = DVector::from_iterator(x.len(), x.iter().map(|&v| Complex64::new(v, 0.0)));
        &self.g * x
    }

    /// `G⁺ diag(M) G` as a complex matrix; its imaginary part is round-off.
    pub fn filter_operator_complex(&self, filter: &FilterSpec) -> DMatrix<Complex64> {
        let diag = self.expand(filter.responses());
        let mut mg = self.g.clone();
        for (mut row, m) in mg.row_iter_mut().zip(diag.iter()) {
            row *= *m;
        }
        &self.g_plus * mg
    }

    /// Real part of [`Self::filter_operator_complex`], the matrix `L`.
    pub fn filter_operator(&self, filter: &FilterSpec) -> DMatrix<f64> {
        self.filter_operator_complex(filter).map(|z| z.re)
    }
}

/// Gaussian with an explicit square-root factor `L` and its exact inverse.
#[derive(Debug, Clone)]
pub struct DenseCovariance {
    l: DMatrix<f64>,
    l_inv: DMatrix<f64>,
}

impl DenseCovariance {
    pub fn new(l: DMatrix<f64>) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::invalid("covariance factor must be square"));
        }
        let l_inv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericalRank("covariance factor is singular".into()))?;
        Ok(Self { l, l_inv })
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `Σ = L Lᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }

    /// Mahalanobis form `rᵀ Σ⁻¹ r`, solved through a Cholesky factor of `Σ`.
    pub fn mahalanobis(&self, r: &[f64]) -> Result<f64> {
        let r = DVector::from_column_slice(r);
        let chol = self
            .covariance()
            .cholesky()
            .ok_or_else(|| Error::NumericalRank("covariance is not positive definite".into()))?;
        Ok(r.dot(&chol.solve(&r)))
    }
}

impl NoiseModel for DenseCovariance {
    fn sample_noise(&self, len: usize, seed: NoiseSeed) -> Result<Vec<f64>> {
        if len != self.l.nrows() {
            return Err(Error::length(format!("dense prior covers {} samples", self.l.nrows())));
        }
        let z = DVector::from_vec(standard_normal(len, seed));
        Ok((&self.l * z).as_slice().to_vec())
    }

    fn whiten(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.l.nrows() {
            return Err(Error::length(format!("dense prior covers {} samples", self.l.nrows())));
        }
        Ok((&self.l_inv * DVector::from_column_slice(v)).as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_left_inverse() {
        let cfg = StftConfig::new(8, 4, 8, 16).unwrap();
        let pair = WindowPair::hann(&cfg).unwrap();
        let dense = build_dense_stft(&cfg, &pair, 32).unwrap();
        assert_eq!(dense.g.shape(), (64, 32));
        let prod = &dense.g_plus * &dense.g;
        let eye = DMatrix::<Complex64>::identity(32, 32);
        let dev = (prod - eye).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn dense_with_zero_padding() {
        let cfg = StftConfig::new(8, 2, 16, 16).unwrap();
        let pair = WindowPair::hann(&cfg).unwrap();
        let dense = build_dense_stft(&cfg, &pair, 24).unwrap();
        let prod = &dense.g_plus * &dense.g;
        let eye = DMatrix::<Complex64>::identity(24, 24);
        assert!((prod - eye).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn covariance_identity_factor() {
        let cov = DenseCovariance::new(DMatrix::identity(4, 4)).unwrap();
        let r = [1.0, 2.0, -1.0, 0.5];
        assert!((cov.mahalanobis(&r).unwrap() - 6.25).abs() < 1e-12);
        assert!(DenseCovariance::new(DMatrix::zeros(3, 3)).is_err());
    }
}
