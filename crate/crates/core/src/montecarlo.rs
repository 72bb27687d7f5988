//! Seeded Monte Carlo estimation of rates and empirical distributions.
//!
//! Trial `t` draws from its own ChaCha stream keyed by `(seed, t)`, trials
//! run on the rayon pool, and results are reduced in trial order, so every
//! estimate is bit-identical for any number of worker threads.

use crate::channel::{
    received_snrs, sample_realization, trial_rng, ChannelRealization, SystemConfig,
};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

pub const DEFAULT_TRIALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Callback choosing RIS phases for one realization.
pub type PhaseOptimizer = dyn Fn(&SystemConfig, &ChannelRealization, &mut ChaCha8Rng) -> Result<Vec<f64>> + Sync;

/// How the RIS phases are chosen in each trial.
#[derive(Clone, Copy)]
pub enum PhasePolicy<'a> {
    /// Compensate the trusted cascaded phase, up to the sampled quantization error.
    Baseline,
    /// The same phases in every trial.
    Fixed(&'a [f64]),
    /// Independent uniform phases per trial.
    Random,
    PerTrial(&'a PhaseOptimizer),
}

impl std::fmt::Debug for PhasePolicy<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Baseline => f.write_str("Baseline"),
            Self::Fixed(v) => f.debug_tuple("Fixed").field(v).finish(),
            Self::Random => f.write_str("Random"),
            Self::PerTrial(_) => f.write_str("PerTrial(..)"),
        }
    }
}

/// Runs `f` for trials `0..trials`, each with its own RNG stream, and
/// returns the results in trial order.
pub fn map_trials<T, F>(trials: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    if trials == 0 {
        return Err(Error::Argument("trial count must be at least 1".into()));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            f(t, &mut rng)
        })
        .collect()
}

/// Mean and standard error of `values`, summed in order.
pub fn estimate(values: &[f64], seed: u64) -> McEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    McEstimate {
        mean,
        standard_error: (var / n as f64).sqrt(),
        trials: n,
        seed,
    }
}

fn policy_phases(
    config: &SystemConfig,
    real: &ChannelRealization,
    policy: PhasePolicy<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    match policy {
        PhasePolicy::Baseline => Ok(real.baseline_phases()),
        PhasePolicy::Fixed(v) => Ok(v.to_vec()),
        PhasePolicy::Random => Ok((0..config.elements).map(|_| 2.0 * PI * rng.gen::<f64>()).collect()),
        PhasePolicy::PerTrial(f) => f(config, real, rng),
    }
}

/// Per-trial achievable rates `(log2(1+gamma_u), log2(1+gamma_e))`.
pub fn mc_rate_samples(
    config: &SystemConfig,
    policy: PhasePolicy<'_>,
    trials: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    map_trials(trials, seed, |_, rng| {
        let real = sample_realization(config, rng);
        let phases = policy_phases(config, &real, policy, rng)?;
        let (gu, ge) = received_snrs(config, &real, &phases)?;
        Ok((gu.ln_1p() / std::f64::consts::LN_2, ge.ln_1p() / std::f64::consts::LN_2))
    })
}

/// Ergodic secrecy rate `[E R_u - E R_e]^+`.
///
/// The standard error is that of the mean of `R_u - R_e`.
pub fn mc_esr(config: &SystemConfig, policy: PhasePolicy<'_>, trials: usize, seed: u64) -> Result<McEstimate> {
    let samples = mc_rate_samples(config, policy, trials, seed)?;
    let diffs: Vec<f64> = samples.iter().map(|(u, e)| u - e).collect();
    let mut est = estimate(&diffs, seed);
    est.mean = est.mean.max(0.0);
    Ok(est)
}

/// Per-rate means `(E R_u, E R_e)`.
pub fn mc_ergodic_rates(
    config: &SystemConfig,
    policy: PhasePolicy<'_>,
    trials: usize,
    seed: u64,
) -> Result<(McEstimate, McEstimate)> {
    let samples = mc_rate_samples(config, policy, trials, seed)?;
    let u: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let e: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok((estimate(&u, seed), estimate(&e, seed)))
}

/// Mean of the per-trial clipped secrecy rate `[R_u - R_e]^+`.
pub fn mc_mean_instantaneous_sr(
    config: &SystemConfig,
    policy: PhasePolicy<'_>,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    let samples = mc_rate_samples(config, policy, trials, seed)?;
    let sr: Vec<f64> = samples.iter().map(|(u, e)| (u - e).max(0.0)).collect();
    Ok(estimate(&sr, seed))
}

/// Random quantities that can be sampled for distribution checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `|sum_n e^{j(eps_n + nu_n^u)}| / N`.
    RU,
    /// `|sum_n e^{j(theta_n^u - theta_n^e + eps_n + nu_n^e)}|`.
    RE,
    HU,
    HE,
    /// Turbulence on the trusted hop.
    T,
    /// Pointing loss on the trusted hop.
    P,
    /// Total phase error `eps + nu^u` of one element.
    EpsHat,
    /// `(theta^u - theta^e mod 2pi) + eps + nu^e` of one element.
    ThetaSre,
}

fn sample_quantity(q: Quantity, real: &ChannelRealization) -> f64 {
    let n = real.elements();
    let r_u = || {
        let (c, s) = (0..n).fold((0.0, 0.0), |(c, s), i| {
            let a = real.quantization[i] + real.estimation_u[i];
            (c + a.cos(), s + a.sin())
        });
        c.hypot(s) / n as f64
    };
    let r_e = || {
        let (c, s) = (0..n).fold((0.0, 0.0), |(c, s), i| {
            let a = real.theta_u[i] - real.theta_e[i] + real.quantization[i] + real.estimation_e[i];
            (c + a.cos(), s + a.sin())
        });
        c.hypot(s)
    };
    match q {
        Quantity::RU => r_u(),
        Quantity::RE => r_e(),
        Quantity::HU => real.turbulence_u * real.pointing_u * r_u(),
        Quantity::HE => real.turbulence_e * real.pointing_e * r_e(),
        Quantity::T => real.turbulence_u,
        Quantity::P => real.pointing_u,
        Quantity::EpsHat => real.quantization[0] + real.estimation_u[0],
        Quantity::ThetaSre => {
            (real.theta_u[0] - real.theta_e[0]).rem_euclid(2.0 * PI) + real.quantization[0] + real.estimation_e[0]
        }
    }
}

/// Sorted sample of a scalar statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsResult {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("empirical distribution needs finite, nonempty samples".into()));
        }
        samples.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Equal-width histogram over the sample range.
    pub fn histogram(&self, bins: usize) -> Vec<HistogramBin> {
        let bins = bins.max(1);
        let lo = self.samples[0];
        let hi = *self.samples.last().expect("nonempty");
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut out: Vec<HistogramBin> = (0..bins)
            .map(|k| HistogramBin {
                lo: lo + k as f64 * width,
                hi: lo + (k + 1) as f64 * width,
                count: 0,
            })
            .collect();
        for &x in &self.samples {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            out[k].count += 1;
        }
        out
    }

    /// Two-sided Kolmogorov-Smirnov test against a distribution function.
    pub fn ks_test<F: Fn(f64) -> f64>(&self, cdf: F) -> KsResult {
        let n = self.samples.len();
        let nf = n as f64;
        let mut d = 0.0f64;
        for (i, &x) in self.samples.iter().enumerate() {
            let f = cdf(x);
            d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
        }
        KsResult {
            statistic: d,
            p_value: kolmogorov_p_value(d, n),
            n,
        }
    }

    /// KS test against a density supported on `[lower, inf)`; the
    /// distribution function is tabulated by quadrature.
    pub fn ks_against_density<F: Fn(f64) -> f64>(&self, pdf: F, lower: f64) -> Result<KsResult> {
        let hi = *self.samples.last().expect("nonempty");
        let cdf = TabulatedCdf::new(&pdf, lower.min(self.samples[0]), hi, 4000)?;
        Ok(self.ks_test(|x| cdf.eval(x)))
    }
}

/// Piecewise-linear distribution function from cell-wise quadrature of a density.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl TabulatedCdf {
    pub fn new<F: Fn(f64) -> f64>(pdf: &F, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || cells == 0 {
            return Err(Error::Argument(format!("invalid tabulation range [{lo}, {hi}]")));
        }
        let step = (hi - lo) / cells as f64;
        let mut values = Vec::with_capacity(cells + 1);
        values.push(0.0);
        let opts = QuadOptions::new(1e-14, 1e-10);
        let mut acc = 0.0;
        for k in 0..cells {
            let a = lo + k as f64 * step;
            acc += integrate(pdf, a, a + step, opts)?.value;
            values.push(acc);
        }
        Ok(Self { lo, step, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.step;
        if t <= 0.0 {
            return 0.0;
        }
        let k = t.floor() as usize;
        if k + 1 >= self.values.len() {
            return *self.values.last().expect("nonempty");
        }
        let w = t - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Samples `quantity` over `trials` independent realizations.
pub fn empirical_distribution(
    quantity: Quantity,
    config: &SystemConfig,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    let samples = map_trials(trials, seed, |_, rng| {
        let real = sample_realization(config, rng);
        Ok(sample_quantity(quantity, &real))
    })?;
    EmpiricalDistribution::new(samples)
}
