//! Windowed STFT / iSTFT with exact perfect reconstruction.
//!
//! Frame `k` is centred on sample `k * hop`; samples falling outside the
//! waveform are treated as zeros. A waveform of `D` samples therefore yields
//! exactly `D / hop` frames, matching the frame count of the log-mel
//! conditioning. The analysis window occupies the first `window_length` slots
//! of each `fft_size` buffer.
//!
//! Synthesis overlap-adds with the canonical dual window and divides by the
//! per-sample sum of `analysis * dual` over the frames actually present, so
//! that `istft(stft(x)) == x` holds at the edges as well as in the interior.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::envelope::FilterSpec;
use crate::{Error, Result};

/// Framing parameters shared by analysis, synthesis and the mel front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    /// 50 ms Hann window, 12.5 ms shift and a 2048-point FFT at 24 kHz.
    fn default() -> Self {
        Self {
            window_length: 1200,
            hop: 300,
            fft_size: 2048,
            sample_rate: 24_000,
        }
    }
}

impl StftConfig {
    pub fn new(window_length: usize, hop: usize, fft_size: usize, sample_rate: u32) -> Result<Self> {
        let cfg = Self {
            window_length,
            hop,
            fft_size,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 || self.hop == 0 || self.fft_size == 0 || self.sample_rate == 0 {
            return Err(Error::invalid("STFT parameters must be strictly positive"));
        }
        if self.hop > self.window_length {
            return Err(Error::invalid(format!(
                "hop {} exceeds window length {}",
                self.hop, self.window_length
            )));
        }
        if self.window_length > self.fft_size {
            return Err(Error::invalid(format!(
                "window length {} exceeds FFT size {}",
                self.window_length, self.fft_size
            )));
        }
        if !self.window_length.is_multiple_of(self.hop) {
            return Err(Error::invalid(format!(
                "hop {} does not divide window length {}",
                self.hop, self.window_length
            )));
        }
        if !self.fft_size.is_multiple_of(2) {
            return Err(Error::invalid("FFT size must be even"));
        }
        Ok(())
    }

    /// Number of one-sided frequency bins, `fft_size / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frame count for a waveform of `len` samples.
    pub fn frames_for(&self, len: usize) -> Result<usize> {
        if len == 0 || !len.is_multiple_of(self.hop) {
            return Err(Error::length(format!(
                "waveform length {len} is not a positive multiple of hop {}",
                self.hop
            )));
        }
        Ok(len / self.hop)
    }

    /// Offset of the first window sample of frame `k` relative to the waveform.
    fn frame_start(&self, k: usize) -> isize {
        (k * self.hop) as isize - (self.window_length / 2) as isize
    }
}

/// Periodic Hann window, `0.5 * (1 - cos(2πn / length))`.
pub fn make_hann(length: usize) -> Result<Vec<f64>> {
    if length < 2 {
        return Err(Error::invalid(format!("Hann window length {length} < 2")));
    }
    let n = length as f64;
    Ok((0..length)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n).cos()))
        .collect())
}

/// Canonical dual window `w[n] / Σ_k w[n - k·hop]²`.
pub fn compute_dual(window: &[f64], hop: usize) -> Result<Vec<f64>> {
    if hop == 0 || hop > window.len() {
        return Err(Error::invalid(format!(
            "hop {hop} must lie in 1..={}",
            window.len()
        )));
    }
    // The overlap-sum is hop-periodic: accumulate squares per residue class.
    let mut residue = vec![0.0; hop];
    for (n, &w) in window.iter().enumerate() {
        residue[n % hop] += w * w;
    }
    if let Some(r) = residue.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateWindow(format!(
            "overlap-sum of squared window vanishes at residue {r} (hop {hop})"
        )));
    }
    Ok(window
        .iter()
        .enumerate()
        .map(|(n, &w)| w / residue[n % hop])
        .collect())
}

/// Analysis window together with a dual synthesis window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    analysis: Vec<f64>,
    dual: Vec<f64>,
}

impl WindowPair {
    pub fn new(analysis: Vec<f64>, dual: Vec<f64>) -> Result<Self> {
        if analysis.len() != dual.len() {
            return Err(Error::invalid(format!(
                "analysis window has {} samples, dual has {}",
                analysis.len(),
                dual.len()
            )));
        }
        if analysis.iter().chain(&dual).any(|v| !v.is_finite()) {
            return Err(Error::invalid("window contains non-finite values"));
        }
        Ok(Self { analysis, dual })
    }

    /// Periodic Hann analysis window with its canonical dual.
    pub fn hann(cfg: &StftConfig) -> Result<Self> {
        let analysis = make_hann(cfg.window_length)?;
        let dual = compute_dual(&analysis, cfg.hop)?;
        Self::new(analysis, dual)
    }

    pub fn analysis(&self) -> &[f64] {
        &self.analysis
    }

    pub fn dual(&self) -> &[f64] {
        &self.dual
    }
}

/// One-sided complex spectrogram, stored frame-major (`frames × bins`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            frames,
            bins,
            data: vec![Complex64::new(0.0, 0.0); frames * bins],
        }
    }

    pub fn from_data(frames: usize, bins: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != frames * bins {
            return Err(Error::invalid(format!(
                "spectrogram data has {} entries, expected {frames}×{bins}",
                data.len()
            )));
        }
        Ok(Self { frames, bins, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frame(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.bins..(k + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.bins..(k + 1) * self.bins]
    }

    /// Squared magnitudes, frame-major.
    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// STFT operator `G` and its left inverse `G⁺` for a fixed configuration.
#[derive(Clone)]
pub struct Stft {
    cfg: StftConfig,
    pair: WindowPair,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Stft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stft")
            .field("cfg", &self.cfg)
            .field("window_length", &self.pair.analysis.len())
            .finish()
    }
}

impl Stft {
    pub fn new(cfg: StftConfig, pair: WindowPair) -> Result<Self> {
        cfg.validate()?;
        if pair.analysis.len() != cfg.window_length {
            return Err(Error::invalid(format!(
                "window pair length {} does not match window_length {}",
                pair.analysis.len(),
                cfg.window_length
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(cfg.fft_size);
        let inverse = planner.plan_fft_inverse(cfg.fft_size);
        Ok(Self {
            cfg,
            pair,
            forward,
            inverse,
        })
    }

    /// Operator built on the periodic Hann window and its canonical dual.
    pub fn hann(cfg: StftConfig) -> Result<Self> {
        let pair = WindowPair::hann(&cfg)?;
        Self::new(cfg, pair)
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn windows(&self) -> &WindowPair {
        &self.pair
    }

    /// Per-sample `Σ_k analysis·dual` over the frames that cover each sample.
    pub fn synthesis_norm(&self, len: usize) -> Result<Vec<f64>> {
        let frames = self.cfg.frames_for(len)?;
        let mut norm = vec![0.0; len];
        for k in 0..frames {
            self.for_each_tap(k, len, |j, n| {
                norm[n] += self.pair.analysis[j] * self.pair.dual[j];
            });
        }
        if let Some(n) = norm.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::DegenerateWindow(format!(
                "sample {n} is not covered by any synthesis frame"
            )));
        }
        Ok(norm)
    }

    /// Calls `f(window_index, sample_index)` for every in-range tap of frame `k`.
    fn for_each_tap(&self, k: usize, len: usize, mut f: impl FnMut(usize, usize)) {
        let start = self.cfg.frame_start(k);
        let lo = (-start).max(0) as usize;
        let hi = ((len as isize - start).min(self.cfg.window_length as isize)).max(0) as usize;
        for j in lo..hi {
            f(j, (start + j as isize) as usize);
        }
    }

    /// Forward transform `G x`.
    pub fn stft(&self, x: &[f64]) -> Result<ComplexSpectrogram> {
        let frames = self.cfg.frames_for(x.len())?;
        let bins = self.cfg.bins();
        let mut out = ComplexSpectrogram::zeros(frames, bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.cfg.fft_size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for k in 0..frames {
            buf.fill(Complex64::new(0.0, 0.0));
            self.for_each_tap(k, x.len(), |j, n| {
                buf[j] = Complex64::new(x[n] * self.pair.analysis[j], 0.0);
            });
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            out.frame_mut(k).copy_from_slice(&buf[..bins]);
        }
        Ok(out)
    }

    /// Overlap-add inverse `G⁺ s`.
    ///
    /// Only the one-sided half is read; the imaginary parts of the DC and
    /// Nyquist bins do not contribute to the real output.
    pub fn istft(&self, spec: &ComplexSpectrogram, out_len: usize) -> Result<Vec<f64>> {
        let frames = self.cfg.frames_for(out_len)?;
        if spec.frames != frames || spec.bins != self.cfg.bins() {
            return Err(Error::invalid(format!(
                "spectrogram is {}×{}, expected {frames}×{} for {out_len} samples",
                spec.frames,
                spec.bins,
                self.cfg.bins()
            )));
        }
        let norm = self.synthesis_norm(out_len)?;
        let n_fft = self.cfg.fft_size;
        let half = n_fft / 2;
        let scale = 1.0 / n_fft as f64;
        let mut out = vec![0.0; out_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        for k in 0..frames {
            let frame = spec.frame(k);
            buf[0] = Complex64::new(frame[0].re, 0.0);
            buf[half] = Complex64::new(frame[half].re, 0.0);
            for b in 1..half {
                buf[b] = frame[b];
                buf[n_fft - b] = frame[b].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            self.for_each_tap(k, out_len, |j, n| {
                out[n] += self.pair.dual[j] * buf[j].re * scale;
            });
        }
        for (y, s) in out.iter_mut().zip(&norm) {
            *y /= s;
        }
        Ok(out)
    }

    /// Time-varying filter `G⁺ (M ⊙ G x)`.
    pub fn apply_tf_filter(&self, x: &[f64], filter: &FilterSpec) -> Result<Vec<f64>> {
        let mut spec = self.stft(x)?;
        if filter.frames() != spec.frames || filter.bins() != spec.bins {
            return Err(Error::InvalidFilter(format!(
                "filter is {}×{}, spectrogram is {}×{}",
                filter.frames(),
                filter.bins(),
                spec.frames,
                spec.bins
            )));
        }
        for (s, m) in spec.data.iter_mut().zip(filter.responses()) {
            *s *= m;
        }
        self.istft(&spec, x.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny() -> Stft {
        Stft::hann(StftConfig::new(8, 4, 8, 16).unwrap()).unwrap()
    }

    #[test]
    fn hann_closed_form() {
        for (w, e) in make_hann(4).unwrap().iter().zip([0.0, 0.5, 1.0, 0.5]) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-15);
        }
        let expected = [0.0, 0.1464, 0.5, 0.8536, 1.0, 0.8536, 0.5, 0.1464];
        for (w, e) in make_hann(8).unwrap().iter().zip(expected) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-4);
        }
        for len in [2, 3, 17, 1200] {
            assert_eq!(make_hann(len).unwrap()[0], 0.0);
        }
        assert!(make_hann(1).is_err());
    }

    #[test]
    fn dual_of_default_hann_is_scaled_window() {
        let w = make_hann(1200).unwrap();
        let dual = compute_dual(&w, 300).unwrap();
        // Overlap-sum computed directly over shifted copies.
        for n in 0..1200 {
            let mut s = 0.0;
            let mut m = n % 300;
            while m < 1200 {
                s += w[m] * w[m];
                m += 300;
            }
            assert_abs_diff_eq!(s, 1.5, epsilon = 1e-12);
            assert_abs_diff_eq!(dual[n], w[n] / 1.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn dual_of_rectangular_without_overlap() {
        let w = vec![1.0; 16];
        assert_eq!(compute_dual(&w, 16).unwrap(), w);
    }

    #[test]
    fn dual_of_hann8_hop4() {
        let w = make_hann(8).unwrap();
        let dual = compute_dual(&w, 4).unwrap();
        for n in 0..8 {
            let c = (2.0 * PI * n as f64 / 8.0).cos();
            assert_abs_diff_eq!(dual[n], w[n] / ((1.0 + c * c) / 2.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn degenerate_window_is_rejected() {
        let w = vec![1.0, 0.0, 1.0, 0.0];
        assert!(matches!(compute_dual(&w, 2), Err(Error::DegenerateWindow(_))));
    }

    #[test]
    fn config_invariants() {
        assert!(StftConfig::default().validate().is_ok());
        assert!(StftConfig::new(1200, 1300, 2048, 24000).is_err());
        assert!(StftConfig::new(2100, 300, 2048, 24000).is_err());
        assert!(StftConfig::new(1200, 350, 2048, 24000).is_err());
        assert!(StftConfig::new(0, 300, 2048, 24000).is_err());
    }

    #[test]
    fn zeros_in_zeros_out() {
        let op = Stft::hann(StftConfig::default()).unwrap();
        let s = op.stft(&vec![0.0; 1200]).unwrap();
        assert_eq!(s.frames(), 4);
        assert!(s.data().iter().all(|z| z.norm() == 0.0));
        let y = op.istft(&ComplexSpectrogram::zeros(4, 1025), 1200).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_at_origin_is_flat_in_frame_zero() {
        let op = Stft::hann(StftConfig::default()).unwrap();
        let mut x = vec![0.0; 1200];
        x[0] = 1.0;
        let s = op.stft(&x).unwrap();
        let w_mid = op.windows().analysis()[600];
        for z in s.frame(0) {
            assert_abs_diff_eq!(z.norm(), w_mid, epsilon = 1e-12);
        }
    }

    #[test]
    fn length_must_be_multiple_of_hop() {
        let op = tiny();
        assert!(matches!(op.stft(&[0.0; 30]), Err(Error::InvalidLength(_))));
        assert!(matches!(
            op.istft(&ComplexSpectrogram::zeros(7, 5), 32),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn perfect_reconstruction_tiny() {
        let op = tiny();
        let x: Vec<f64> = (0..32).map(|i| ((i * 7919) % 31) as f64 / 31.0 - 0.5).collect();
        let y = op.istft(&op.stft(&x).unwrap(), 32).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn unit_and_constant_filters() {
        let op = tiny();
        let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let ones = FilterSpec::unit(8, 5);
        let y = op.apply_tf_filter(&x, &ones).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let twos = FilterSpec::new(8, 5, vec![Complex64::new(2.0, 0.0); 40]).unwrap();
        let y = op.apply_tf_filter(&x, &twos).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_abs_diff_eq!(2.0 * a, b, epsilon = 1e-12);
        }
        let wrong = FilterSpec::unit(7, 5);
        assert!(matches!(op.apply_tf_filter(&x, &wrong), Err(Error::InvalidFilter(_))));
    }

    #[test]
    fn uncovered_tail_is_degenerate() {
        // Rectangular window with hop == window leaves the last half-window uncovered.
        let cfg = StftConfig::new(8, 8, 8, 16).unwrap();
        let op = Stft::new(cfg, WindowPair::new(vec![1.0; 8], vec![1.0; 8]).unwrap()).unwrap();
        assert!(matches!(op.synthesis_norm(32), Err(Error::DegenerateWindow(_))));
    }
}
