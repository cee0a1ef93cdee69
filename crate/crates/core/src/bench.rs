//! Wall-clock scaling of the time-varying filter in the number of frames.

use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::envelope::FilterSpec;
use crate::prior::standard_normal;
use crate::stft::{Stft, StftConfig};
use crate::{Error, Result};

/// Largest acceptable time ratio when the frame count doubles.
pub const MAX_DOUBLING_RATIO: f64 = 2.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub frames: usize,
    pub samples: usize,
    /// Fastest of the repeated runs.
    pub best: Duration,
    pub mean: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub fft_size: usize,
    pub window_length: usize,
    pub hop: usize,
    pub rows: [BenchRow; 2],
}

impl ScalingReport {
    /// Best-time ratio between `2K` and `K` frames.
    pub fn ratio(&self) -> f64 {
        self.rows[1].best.as_secs_f64() / self.rows[0].best.as_secs_f64()
    }

    pub fn within_bound(&self) -> bool {
        self.ratio() <= MAX_DOUBLING_RATIO
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "fft_size={} window={} hop={}\n{:>8} {:>10} {:>14} {:>14}\n",
            self.fft_size, self.window_length, self.hop, "frames", "samples", "best_ms", "mean_ms"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>8} {:>10} {:>14.4} {:>14.4}\n",
                r.frames,
                r.samples,
                r.best.as_secs_f64() * 1e3,
                r.mean.as_secs_f64() * 1e3
            ));
        }
        s.push_str(&format!("ratio(2K/K) = {:.3} (bound {MAX_DOUBLING_RATIO})\n", self.ratio()));
        s
    }
}

/// Framing used for a given FFT size: the default 1200/300 proportions.
pub fn bench_config(fft_size: usize) -> Result<StftConfig> {
    let window = (fft_size * 1200 / 2048) / 4 * 4;
    if window < 4 {
        return Err(Error::invalid(format!("FFT size {fft_size} too small to benchmark")));
    }
    StftConfig::new(window, window / 4, fft_size, 24_000)
}

fn time_filter(op: &Stft, frames: usize, repeat: usize) -> Result<BenchRow> {
    let cfg = op.config();
    let samples = frames * cfg.hop;
    let x = standard_normal(samples, 1.into());
    let resp: Vec<Complex64> = (0..frames * cfg.bins())
        .map(|i| Complex64::from_polar(1.0 + (i % 7) as f64 * 0.1, (i % 11) as f64 * 0.3))
        .collect();
    let filter = FilterSpec::new(frames, cfg.bins(), resp)?;
    // Warm-up pass to fault in buffers and FFT twiddles.
    std::hint::black_box(op.apply_tf_filter(&x, &filter)?);
    let mut best = Duration::MAX;
    let mut total = Duration::ZERO;
    for _ in 0..repeat {
        let start = Instant::now();
        std::hint::black_box(op.apply_tf_filter(std::hint::black_box(&x), &filter)?);
        let elapsed = start.elapsed();
        best = best.min(elapsed);
        total += elapsed;
    }
    Ok(BenchRow {
        frames,
        samples,
        best,
        mean: total / repeat as u32,
    })
}

/// Times `apply_tf_filter` at `frames` and `2 * frames`.
pub fn scaling_benchmark(frames: usize, fft_size: usize, repeat: usize) -> Result<ScalingReport> {
    if frames == 0 || repeat == 0 {
        return Err(Error::invalid("frames and repeat must be positive"));
    }
    let cfg = bench_config(fft_size)?;
    let op = Stft::hann(cfg)?;
    let rows = [time_filter(&op, frames, repeat)?, time_filter(&op, 2 * frames, repeat)?];
    Ok(ScalingReport {
        fft_size,
        window_length: cfg.window_length,
        hop: cfg.hop,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_fft_keeps_default_framing() {
        let cfg = bench_config(2048).unwrap();
        assert_eq!((cfg.window_length, cfg.hop), (1200, 300));
        assert!(bench_config(4).is_err());
    }

    #[test]
    fn report_has_two_rows() {
        let r = scaling_benchmark(4, 256, 2).unwrap();
        assert_eq!(r.rows[0].frames, 4);
        assert_eq!(r.rows[1].frames, 8);
        assert!(r.table().contains("ratio"));
    }
}
