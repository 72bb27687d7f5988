//! Property and oracle checks at the configured operating point.

use crate::config::{fmt_num, ExperimentConfig};
use crate::error::CliError;
use rand::Rng;
use ris_secrecy::analysis::{
    equivalent_stats, pdf_r_e, product_pdf_detailed, product_pdf_oracle, HopFading, Receiver, DEFAULT_MIXTURE_ORDER,
};
use ris_secrecy::channel::{
    pointing_pdf, sample_quantization_error, sample_realization, sample_von_mises, trial_rng, turbulence_pdf,
    SystemConfig, SystemParams,
};
use ris_secrecy::linalg::ComplexVector;
use ris_secrecy::montecarlo::{empirical_distribution, map_trials, EmpiricalDistribution, Quantity};
use ris_secrecy::optimize::{build_sdr, discretize_aligned, extract_rank_one, solve_sdp, SdpOptions};
use ris_secrecy::quadrature::{integrate_pieces, integrate_to_infinity, QuadOptions};
use ris_secrecy::specfun::bessel_i0;
use std::f64::consts::PI;
use std::fmt::Write as _;

const KS_LEVEL: f64 = 0.01;
const EXHAUSTIVE_INSTANCES: usize = 20;

/// Which side of `limit` a passing value lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub bound: Bound,
}

impl Check {
    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.value <= self.limit,
            Bound::AtLeast => self.value >= self.limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed()).map(|c| c.name.clone()).collect()
    }

    pub fn human(&self) -> String {
        let mut s = format!("validation at seed {}\n", self.seed);
        for c in &self.checks {
            let op = if c.bound == Bound::AtMost { "<=" } else { ">=" };
            let verdict = if c.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{verdict} {:<32} {:.6e} {op} {:.3e}", c.name, c.value, c.limit);
        }
        let failed = self.failures().len();
        let _ = writeln!(s, "{} of {} checks passed", self.checks.len() - failed, self.checks.len());
        s
    }

    pub fn csv(&self) -> String {
        let mut s = format!("# ris-secrecy validate\n# seed={}\ncheck,value,limit,bound,passed\n", self.seed);
        for c in &self.checks {
            let b = if c.bound == Bound::AtMost { "max" } else { "min" };
            let _ = writeln!(s, "{},{},{},{b},{}", c.name, fmt_num(c.value), fmt_num(c.limit), c.passed());
        }
        s
    }
}

fn density_mass<F: Fn(f64) -> f64>(pdf: F, scale: f64) -> Result<f64, CliError> {
    let pts: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0].iter().map(|f| f * scale).collect();
    let opts = QuadOptions::new(1e-10, 1e-8);
    let body = integrate_pieces(&pdf, &pts, opts)?;
    let tail = integrate_to_infinity(&pdf, *pts.last().expect("nonempty"), opts)?;
    Ok(body.value + tail.value)
}

fn ks(dist: &EmpiricalDistribution, pdf: impl Fn(f64) -> f64, lower: f64) -> Result<f64, CliError> {
    Ok(dist.ks_against_density(pdf, lower)?.p_value)
}

/// Exhaustive search over all `2^(b N)` discrete phase vectors.
fn exhaustive_best(problem: &ris_secrecy::optimize::SdrProblem, bits: u32) -> Result<f64, CliError> {
    let n = problem.dim();
    let levels = 1usize << bits;
    let step = 2.0 * PI / levels as f64;
    let mut best = 0.0f64;
    let mut idx = vec![0usize; n];
    loop {
        let phases: Vec<f64> = idx.iter().map(|&k| k as f64 * step).collect();
        best = best.max(problem.ratio(&ComplexVector::from_phases(&phases)?)?);
        let mut i = 0;
        while i < n {
            idx[i] += 1;
            if idx[i] < levels {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == n {
            return Ok(best);
        }
    }
}

/// Runs every check; `tolerance_scale` multiplies each upper limit (a test
/// hook: 0 makes every tolerance impossible to meet).
pub fn run_validation(config: &ExperimentConfig, tolerance_scale: f64) -> Result<ValidationReport, CliError> {
    let cfg: SystemConfig = config.params.build()?;
    let seed = config.seed;
    let samples = config.trials.max(1000);
    let mut checks = Vec::new();
    let mut push = |name: &str, value: f64, limit: f64, bound: Bound| {
        let limit = if bound == Bound::AtMost { limit * tolerance_scale } else { limit };
        checks.push(Check {
            name: name.to_string(),
            value,
            limit,
            bound,
        });
    };

    let stats = equivalent_stats(cfg.elements, &cfg.phase_error)?;
    let fading_u = HopFading::new(&cfg.turbulence_u, &cfg.pointing_u, DEFAULT_MIXTURE_ORDER)?;
    let fading_e = HopFading::new(&cfg.turbulence_e, &cfg.pointing_e, DEFAULT_MIXTURE_ORDER)?;

    // Normalization of the analytical densities.
    let m_u = density_mass(|h| fading_u.pdf(h).unwrap_or(0.0), fading_u.mean())?;
    push("fading_u_mass_error", (m_u - 1.0).abs(), 1e-3, Bound::AtMost);
    let m_e = density_mass(|h| fading_e.pdf(h).unwrap_or(0.0), fading_e.mean())?;
    push("fading_e_mass_error", (m_e - 1.0).abs(), 1e-3, Bound::AtMost);
    let mu_u = fading_u.mean() * stats.phi1;
    let mu_e = fading_e.mean() * (stats.var_ec * PI / 2.0).sqrt();
    let pu = |z: f64| product_pdf_detailed(z, &fading_u, &stats, Receiver::User).map_or(0.0, |d| d.value);
    let pe = |z: f64| product_pdf_detailed(z, &fading_e, &stats, Receiver::Eavesdropper).map_or(0.0, |d| d.value);
    push("h_u_density_mass_error", (density_mass(pu, mu_u)? - 1.0).abs(), 1e-3, Bound::AtMost);
    push("h_e_density_mass_error", (density_mass(pe, mu_e)? - 1.0).abs(), 1e-3, Bound::AtMost);

    // Closed form against the product-integral oracle on a 50-point grid.
    for (name, which, mu, fading) in [
        ("h_u_closed_form_rel_error", Receiver::User, mu_u, &fading_u),
        ("h_e_closed_form_rel_error", Receiver::Eavesdropper, mu_e, &fading_e),
    ] {
        let mut worst = 0.0f64;
        for k in 0..50 {
            let z = mu * (0.05 + 2.45 * k as f64 / 49.0);
            let d = product_pdf_detailed(z, fading, &stats, which)?.value;
            let o = product_pdf_oracle(z, fading, &stats, which)?;
            if o > 0.0 {
                worst = worst.max(((d - o) / o).abs());
            }
        }
        push(name, worst, 1e-6, Bound::AtMost);
    }

    // Samplers against their densities.
    if let Some((a, b)) = cfg.turbulence_u.shape {
        let t = empirical_distribution(Quantity::T, &cfg, samples, seed)?;
        push("ks_turbulence_p_value", ks(&t, |x| turbulence_pdf(x, a, b).unwrap_or(0.0), 0.0)?, KS_LEVEL, Bound::AtLeast);
    }
    let p = empirical_distribution(Quantity::P, &cfg, samples, seed)?;
    let pm = cfg.pointing_u;
    push("ks_pointing_p_value", ks(&p, |x| pointing_pdf(x, &pm), 0.0)?, KS_LEVEL, Bound::AtLeast);
    if let Some(bits) = cfg.phase_error.bits {
        let h = PI / 2f64.powi(bits as i32);
        let v = map_trials(samples, seed, |_, rng| Ok(sample_quantization_error(bits, rng)))?;
        let d = EmpiricalDistribution::new(v)?;
        let r = d.ks_test(|x| ((x + h) / (2.0 * h)).clamp(0.0, 1.0));
        push("ks_quantization_p_value", r.p_value, KS_LEVEL, Bound::AtLeast);
    }
    if cfg.phase_error.has_estimation_error() {
        let kappa = cfg.phase_error.kappa;
        let norm = 2.0 * PI * bessel_i0(kappa)?;
        let v = map_trials(samples, seed, |_, rng| Ok(sample_von_mises(kappa, rng)))?;
        let d = EmpiricalDistribution::new(v)?;
        let r = d.ks_against_density(|x| if x.abs() <= PI { (kappa * x.cos()).exp() / norm } else { 0.0 }, -PI)?;
        push("ks_von_mises_p_value", r.p_value, KS_LEVEL, Bound::AtLeast);
    }
    let re = empirical_distribution(Quantity::RE, &cfg, samples, seed)?;
    push("ks_r_e_rayleigh_p_value", ks(&re, |r| pdf_r_e(r, &stats), 0.0)?, KS_LEVEL, Bound::AtLeast);

    // In-phase / quadrature correlation of the coherent sums.
    let n = cfg.elements;
    let sums = map_trials(samples, seed, |_, rng| {
        let real = sample_realization(&cfg, rng);
        let (mut cu, mut su, mut ce, mut se) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let a = real.quantization[i] + real.estimation_u[i];
            let b = real.theta_u[i] - real.theta_e[i] + real.quantization[i] + real.estimation_e[i];
            cu += a.cos();
            su += a.sin();
            ce += b.cos();
            se += b.sin();
        }
        Ok([cu, su, ce, se])
    })?;
    for (name, i, j) in [("corr_c_u_s_u", 0, 1), ("corr_c_e_s_e", 2, 3)] {
        let x: Vec<f64> = sums.iter().map(|s| s[i]).collect();
        let y: Vec<f64> = sums.iter().map(|s| s[j]).collect();
        push(name, pearson(&x, &y).abs(), 0.02, Bound::AtMost);
    }

    // Relaxation against exhaustive discrete search on small arrays.
    let small = SystemParams {
        elements: 4,
        ..config.params
    }
    .build()?;
    let mut good = 0usize;
    let mut worst_residual = 0.0f64;
    let mut bound_violation = 0.0f64;
    for k in 0..EXHAUSTIVE_INSTANCES {
        let mut rng = trial_rng(seed, k as u64);
        let real = sample_realization(&small, &mut rng);
        let problem = build_sdr(&small, &real)?;
        let sdp = solve_sdp(&problem, SdpOptions::default())?;
        worst_residual = worst_residual.max(sdp.trace_residual).max(sdp.diagonal_residual);
        let t = extract_rank_one(&sdp)?;
        let (d, _) = discretize_aligned(&t, 1, &problem)?;
        let best = exhaustive_best(&problem, 1)?;
        let sr = |ratio: f64| ratio.log2().max(0.0);
        if sr(problem.ratio(&d)?) >= 0.95 * sr(best) {
            good += 1;
        }
        for _ in 0..50 {
            let phases: Vec<f64> = (0..4).map(|_| 2.0 * PI * rng.gen::<f64>()).collect();
            let r = problem.ratio(&ComplexVector::from_phases(&phases)?)?;
            bound_violation = bound_violation.max(r / sdp.objective - 1.0);
        }
    }
    push("sdr_fraction_within_95pct", good as f64 / EXHAUSTIVE_INSTANCES as f64, 0.95, Bound::AtLeast);
    push("sdp_feasibility_residual", worst_residual, 1e-6, Bound::AtMost);
    push("sdp_upper_bound_violation", bound_violation.max(0.0), 1e-6, Bound::AtMost);

    Ok(ValidationReport { seed, checks })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
