//! DDPM noise schedules, closed-form forward diffusion, the training loss and
//! the ancestral sampler.
//!
//! Steps are 1-based throughout: `t ∈ 1..=T`, with `ᾱ_0 = 1`.

use rand::Rng;

use crate::mel::LogMelSpectrogram;
use crate::prior::{loss_specgrad, NoiseModel, NoiseSeed};
use crate::{Error, Result};

/// `β_t` with the derived `α_t`, `ᾱ_t` and posterior variance `γ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    gammas: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("noise schedule needs at least one step"));
        }
        if let Some(t) = betas.iter().position(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(Error::invalid(format!("β_{} = {} is outside (0, 1)", t + 1, betas[t])));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars: Vec<f64> = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        let gammas = (0..betas.len())
            .map(|i| {
                let prev = if i == 0 { 1.0 } else { alpha_bars[i - 1] };
                (1.0 - prev) / (1.0 - alpha_bars[i]) * betas[i]
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
            gammas,
        })
    }

    /// `steps` evenly spaced betas from `start` to `end` inclusive.
    pub fn linspace(start: f64, end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("linspace needs at least one step"));
        }
        if !(start > 0.0 && start <= end && end < 1.0) {
            return Err(Error::invalid(format!(
                "linspace bounds must satisfy 0 < start ≤ end < 1, got ({start}, {end})"
            )));
        }
        let betas = if steps == 1 {
            vec![start]
        } else {
            let step = (end - start) / (steps - 1) as f64;
            (0..steps)
                .map(|i| if i + 1 == steps { end } else { start + step * i as f64 })
                .collect()
        };
        Self::new(betas)
    }

    /// One of the inference schedules in [`NAMED_SCHEDULES`].
    pub fn named(name: &str) -> Result<Self> {
        NAMED_SCHEDULES
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSchedule(name.to_string()))?
            .build()
    }

    /// Parses a whitespace/comma separated list of betas, or `linspace(a, b, n)`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(args) = text.strip_prefix("linspace(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<&str> = args.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::invalid(format!("malformed linspace `{text}`")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number `{s}` in schedule")))
            };
            let steps = parts[2]
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad step count `{}`", parts[2])))?;
            return Self::linspace(num(parts[0])?, num(parts[1])?, steps);
        }
        let betas = text
            .trim_start_matches('[')
            .trim_end_matches(']')
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad beta `{s}` in schedule")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(betas)
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.len() {
            return Err(Error::UnknownStep(format!("t = {t} outside 1..={}", self.len())));
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// `ᾱ_t`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn gamma(&self, t: usize) -> f64 {
        self.gammas[t - 1]
    }
}

enum ScheduleLiteral {
    Betas(&'static [&'static str]),
    Linspace(&'static str, &'static str, usize),
}

/// Inference schedule exactly as tabulated, betas kept as their literal text.
pub struct NamedSchedule {
    pub name: &'static str,
    literal: ScheduleLiteral,
}

impl NamedSchedule {
    /// Literal text of the schedule, e.g. `3e-4 6e-2 9e-1`.
    pub fn describe(&self) -> String {
        match self.literal {
            ScheduleLiteral::Betas(betas) => betas.join(" "),
            ScheduleLiteral::Linspace(a, b, n) => format!("linspace({a}, {b}, {n})"),
        }
    }

    pub fn build(&self) -> Result<NoiseSchedule> {
        match self.literal {
            ScheduleLiteral::Betas(betas) => NoiseSchedule::new(
                betas
                    .iter()
                    .map(|s| s.parse::<f64>().expect("schedule literal"))
                    .collect(),
            ),
            ScheduleLiteral::Linspace(a, b, n) => {
                NoiseSchedule::linspace(a.parse().expect("schedule literal"), b.parse().expect("schedule literal"), n)
            }
        }
    }
}

pub const NAMED_SCHEDULES: &[NamedSchedule] = &[
    NamedSchedule {
        name: "WG-3",
        literal: ScheduleLiteral::Betas(&["3e-4", "6e-2", "9e-1"]),
    },
    NamedSchedule {
        name: "WG-6",
        literal: ScheduleLiteral::Betas(&["7e-6", "1.4e-4", "2.1e-3", "2.8e-2", "3.5e-1", "7e-1"]),
    },
    NamedSchedule {
        name: "PG-6",
        literal: ScheduleLiteral::Betas(&["1e-4", "1e-3", "1e-2", "5e-2", "2e-1", "5e-1"]),
    },
    NamedSchedule {
        name: "WG-50",
        literal: ScheduleLiteral::Linspace("1e-4", "0.05", 50),
    },
];

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::length(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

/// `x_t = √ᾱ_t · x0 + √(1 − ᾱ_t) · ε`.
pub fn forward_diffuse(x0: &[f64], t: usize, eps: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.check_step(t)?;
    check_lengths(x0, eps)?;
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

/// `μ_t = (x_t − β_t / √(1 − ᾱ_t) · ε̂) / √α_t`.
pub fn posterior_mean(x_t: &[f64], eps_hat: &[f64], t: usize, sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.check_step(t)?;
    check_lengths(x_t, eps_hat)?;
    let coef = sched.beta(t) / (1.0 - sched.alpha_bar(t)).sqrt();
    let inv_sqrt_alpha = 1.0 / sched.alpha(t).sqrt();
    Ok(x_t
        .iter()
        .zip(eps_hat)
        .map(|(x, e)| (x - coef * e) * inv_sqrt_alpha)
        .collect())
}

/// Noise estimator `ε̂ = F(x_t, c, β_t)`.
pub trait NoisePredictor {
    fn predict(&self, x_t: &[f64], cond: &LogMelSpectrogram, beta: f64) -> Result<Vec<f64>>;
}

/// Always predicts zero noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPredictor;

impl NoisePredictor for ZeroPredictor {
    fn predict(&self, x_t: &[f64], _cond: &LogMelSpectrogram, _beta: f64) -> Result<Vec<f64>> {
        Ok(vec![0.0; x_t.len()])
    }
}

/// Returns the exact noise that explains `x_t` given a known clean signal.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    x0: Vec<f64>,
    sched: NoiseSchedule,
}

impl OraclePredictor {
    pub fn new(x0: Vec<f64>, sched: NoiseSchedule) -> Result<Self> {
        let mut sorted = sched.betas().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("oracle predictor needs distinct betas to recover t"));
        }
        Ok(Self { x0, sched })
    }

    fn step_for(&self, beta: f64) -> Result<usize> {
        self.sched
            .betas()
            .iter()
            .position(|&b| b == beta)
            .map(|i| i + 1)
            .ok_or_else(|| Error::UnknownStep(format!("β = {beta} is not in the schedule")))
    }
}

impl NoisePredictor for OraclePredictor {
    fn predict(&self, x_t: &[f64], _cond: &LogMelSpectrogram, beta: f64) -> Result<Vec<f64>> {
        check_lengths(x_t, &self.x0)?;
        let ab = self.sched.alpha_bar(self.step_for(beta)?);
        let (a, inv_b) = (ab.sqrt(), 1.0 / (1.0 - ab).sqrt());
        Ok(x_t
            .iter()
            .zip(&self.x0)
            .map(|(x, x0)| (x - a * x0) * inv_b)
            .collect())
    }
}

/// Loss value of one training step together with the step it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingLoss {
    pub step: usize,
    pub loss: f64,
}

/// Stream reserved for drawing the training step.
const STEP_STREAM: u64 = u64::MAX;

/// One training step without the parameter update.
///
/// Draws `ε` from the prior, diffuses `x0` to step `t` (uniform over
/// `1..=T` when not given), and returns the whitened loss of the prediction.
pub fn training_step_loss<P, F>(
    x0: &[f64],
    cond: &LogMelSpectrogram,
    prior: &P,
    sched: &NoiseSchedule,
    step: Option<usize>,
    predictor: &F,
    seed: u64,
) -> Result<TrainingLoss>
where
    P: NoiseModel + ?Sized,
    F: NoisePredictor + ?Sized,
{
    let seed = NoiseSeed::from(seed);
    let t = match step {
        Some(t) => t,
        None => seed.with_stream(STEP_STREAM).rng().random_range(1..=sched.len()),
    };
    sched.check_step(t)?;
    let eps = prior.sample_noise(x0.len(), seed)?;
    let x_t = forward_diffuse(x0, t, &eps, sched)?;
    let eps_hat = predictor.predict(&x_t, cond, sched.beta(t))?;
    check_lengths(&x_t, &eps_hat)?;
    Ok(TrainingLoss {
        step: t,
        loss: loss_specgrad(prior, &eps, &eps_hat)?,
    })
}

/// Scale of the noise injected after each reverse step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScale {
    /// Standard deviation `√γ_t` of the reverse posterior.
    #[default]
    SqrtGamma,
    /// `γ_t` itself, as written in the sampling pseudocode.
    LiteralGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerOptions {
    pub inject_noise: bool,
    pub noise_scale: NoiseScale,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            inject_noise: true,
            noise_scale: NoiseScale::SqrtGamma,
        }
    }
}

/// Ancestral sampling from `x_T ~ prior` down to `x_0`.
///
/// `x_T` uses stream 0 of `seed`; the noise injected after step `t` uses
/// stream `t`.
pub fn sample<P, F>(
    cond: &LogMelSpectrogram,
    prior: &P,
    sched: &NoiseSchedule,
    predictor: &F,
    len: usize,
    seed: u64,
    opts: SamplerOptions,
) -> Result<Vec<f64>>
where
    P: NoiseModel + ?Sized,
    F: NoisePredictor + ?Sized,
{
    let seed = NoiseSeed::from(seed);
    let mut x = prior.sample_noise(len, seed)?;
    for t in (1..=sched.len()).rev() {
        let eps_hat = predictor.predict(&x, cond, sched.beta(t))?;
        x = posterior_mean(&x, &eps_hat, t, sched)?;
        if t > 1 && opts.inject_noise {
            let scale = match opts.noise_scale {
                NoiseScale::SqrtGamma => sched.gamma(t).sqrt(),
                NoiseScale::LiteralGamma => sched.gamma(t),
            };
            let z = prior.sample_noise(len, seed.with_stream(t as u64))?;
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += scale * zi;
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{standard_normal, NoisePrior};
    use approx::assert_abs_diff_eq;

    fn cond() -> LogMelSpectrogram {
        LogMelSpectrogram::new(1, 1, vec![0.0]).unwrap()
    }

    #[test]
    fn linspace_endpoints_and_spacing() {
        let s = NoiseSchedule::linspace(1e-4, 0.05, 50).unwrap();
        assert_eq!(s.len(), 50);
        assert_eq!(s.beta(1), 1e-4);
        assert_eq!(s.beta(50), 0.05);
        assert_abs_diff_eq!(s.beta(2) - s.beta(1), (0.05 - 1e-4) / 49.0, epsilon = 1e-15);
        assert_eq!(NoiseSchedule::linspace(0.3, 0.3, 1).unwrap().betas(), &[0.3]);
        assert!(NoiseSchedule::linspace(0.0, 0.1, 5).is_err());
        assert!(NoiseSchedule::linspace(0.2, 0.1, 5).is_err());
        assert!(NoiseSchedule::linspace(0.1, 1.0, 5).is_err());
    }

    #[test]
    fn training_schedule_alpha_bar_matches_product() {
        let s = NoiseSchedule::linspace(1e-6, 1e-2, 1000).unwrap();
        let mut prod = 1.0;
        for i in 0..1000 {
            let beta = 1e-6 + (1e-2 - 1e-6) * i as f64 / 999.0;
            prod *= 1.0 - beta;
        }
        assert_abs_diff_eq!(s.alpha_bar(1000), prod, epsilon = 1e-12);
    }

    #[test]
    fn derived_quantities() {
        for named in NAMED_SCHEDULES {
            let s = named.build().unwrap();
            assert_eq!(s.gamma(1), 0.0);
            assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
            assert!(s.gammas().iter().all(|&g| g >= 0.0));
            assert_eq!(s.alphas().len(), s.len());
            assert_eq!(s.gammas().len(), s.len());
        }
    }

    #[test]
    fn parse_lists_and_linspace() {
        let s = NoiseSchedule::parse("[3e-4, 6e-2, 9e-1]").unwrap();
        assert_eq!(s.betas(), &[3e-4, 6e-2, 9e-1]);
        let s = NoiseSchedule::parse("0.1 0.2\n0.3").unwrap();
        assert_eq!(s.betas(), &[0.1, 0.2, 0.3]);
        let s = NoiseSchedule::parse("linspace(1e-4, 0.05, 50)").unwrap();
        assert_eq!(s, NoiseSchedule::named("WG-50").unwrap());
        assert!(NoiseSchedule::parse("0.1 abc").is_err());
        assert!(matches!(NoiseSchedule::named("WG-7"), Err(Error::UnknownSchedule(_))));
    }

    #[test]
    fn forward_diffuse_limits() {
        let x0 = vec![0.5, -0.25, 1.0];
        let eps = vec![1.0, 2.0, -1.0];
        let tiny = NoiseSchedule::new(vec![1e-15; 4]).unwrap();
        let xt = forward_diffuse(&x0, 4, &eps, &tiny).unwrap();
        for (a, b) in xt.iter().zip(&x0) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        let s = NoiseSchedule::named("WG-3").unwrap();
        let xt = forward_diffuse(&x0, 2, &[0.0; 3], &s).unwrap();
        for (a, b) in xt.iter().zip(&x0) {
            assert_abs_diff_eq!(*a, s.alpha_bar(2).sqrt() * b, epsilon = 1e-15);
        }
        assert!(matches!(forward_diffuse(&x0, 0, &eps, &s), Err(Error::UnknownStep(_))));
        assert!(matches!(forward_diffuse(&x0, 4, &eps, &s), Err(Error::UnknownStep(_))));
    }

    #[test]
    fn posterior_mean_identity() {
        let s = NoiseSchedule::named("PG-6").unwrap();
        let x0 = standard_normal(16, 1.into());
        let eps = standard_normal(16, 2.into());
        for t in 1..=s.len() {
            let xt = forward_diffuse(&x0, t, &eps, &s).unwrap();
            let mu = posterior_mean(&xt, &eps, t, &s).unwrap();
            let ab_prev = s.alpha_bar(t - 1);
            let c_eps = s.alpha(t).sqrt() * (1.0 - ab_prev) / (1.0 - s.alpha_bar(t)).sqrt();
            for i in 0..16 {
                let expect = ab_prev.sqrt() * x0[i] + c_eps * eps[i];
                assert_abs_diff_eq!(mu[i], expect, epsilon = 1e-12);
            }
        }
        let xt = vec![1.0, 2.0];
        let mu = posterior_mean(&xt, &[0.0, 0.0], 2, &s).unwrap();
        assert_abs_diff_eq!(mu[1], 2.0 / s.alpha(2).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn oracle_predictor_inverts_forward() {
        let s = NoiseSchedule::named("WG-6").unwrap();
        let x0 = standard_normal(32, 4.into());
        let eps = standard_normal(32, 5.into());
        let oracle = OraclePredictor::new(x0.clone(), s.clone()).unwrap();
        for t in 1..=s.len() {
            let xt = forward_diffuse(&x0, t, &eps, &s).unwrap();
            let hat = oracle.predict(&xt, &cond(), s.beta(t)).unwrap();
            for (a, b) in hat.iter().zip(&eps) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
            let clean: Vec<f64> = x0.iter().map(|v| s.alpha_bar(t).sqrt() * v).collect();
            assert!(oracle.predict(&clean, &cond(), s.beta(t)).unwrap().iter().all(|v| v.abs() < 1e-12));
        }
        assert!(matches!(oracle.predict(&x0, &cond(), 0.123), Err(Error::UnknownStep(_))));
        assert!(OraclePredictor::new(x0, NoiseSchedule::new(vec![0.1, 0.1]).unwrap()).is_err());
    }

    #[test]
    fn training_loss_with_simple_predictors() {
        let s = NoiseSchedule::linspace(1e-4, 0.05, 50).unwrap();
        let x0 = standard_normal(64, 9.into());
        let oracle = OraclePredictor::new(x0.clone(), s.clone()).unwrap();
        let l = training_step_loss(&x0, &cond(), &NoisePrior::Standard, &s, Some(10), &oracle, 3).unwrap();
        assert!(l.loss < 1e-8);
        let l = training_step_loss(&x0, &cond(), &NoisePrior::Standard, &s, Some(10), &ZeroPredictor, 3).unwrap();
        let eps = standard_normal(64, 3.into());
        assert_abs_diff_eq!(l.loss, eps.iter().map(|e| e * e).sum::<f64>(), epsilon = 1e-9);
        let a = training_step_loss(&x0, &cond(), &NoisePrior::Standard, &s, None, &ZeroPredictor, 8).unwrap();
        let b = training_step_loss(&x0, &cond(), &NoisePrior::Standard, &s, None, &ZeroPredictor, 8).unwrap();
        assert_eq!(a, b);
        assert!((1..=50).contains(&a.step));
    }

    #[test]
    fn zero_predictor_without_noise_scales_x_t() {
        let s = NoiseSchedule::named("WG-3").unwrap();
        let opts = SamplerOptions {
            inject_noise: false,
            ..Default::default()
        };
        let out = sample(&cond(), &NoisePrior::Standard, &s, &ZeroPredictor, 20, 6, opts).unwrap();
        let x_t = standard_normal(20, 6.into());
        let ab = s.alpha_bar(3);
        for (o, x) in out.iter().zip(&x_t) {
            assert_abs_diff_eq!(*o, x / ab.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        let s = NoiseSchedule::named("PG-6").unwrap();
        let run = |seed, scale| {
            let opts = SamplerOptions {
                inject_noise: true,
                noise_scale: scale,
            };
            sample(&cond(), &NoisePrior::Standard, &s, &ZeroPredictor, 24, seed, opts).unwrap()
        };
        assert_eq!(run(1, NoiseScale::SqrtGamma), run(1, NoiseScale::SqrtGamma));
        assert_ne!(run(1, NoiseScale::SqrtGamma), run(2, NoiseScale::SqrtGamma));
        assert_ne!(run(1, NoiseScale::SqrtGamma), run(1, NoiseScale::LiteralGamma));
    }
}
