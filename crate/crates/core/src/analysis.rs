//! Statistical model of the end-to-end amplitudes and the ergodic rates.
//!
//! The received SNRs factor as `gamma_u = gamma_u^0 N^2 (h_u r_u)^2` and
//! `gamma_e = gamma_e^0 (h_e r_e)^2`, where `h = T P` is the combined
//! turbulence/pointing fade and `r` the normalized coherent sum over the
//! RIS elements. `h` uses a Gauss-Laguerre mixture-Gamma fit of the
//! Gamma-Gamma law; `r_u` is approximated as Nakagami and `r_e` as
//! Rayleigh. The density of the product `H = h r` is evaluated in closed
//! form (a `1F3` residue expansion) where that is numerically sound, and by
//! direct quadrature of the product-density integral otherwise.

use crate::channel::{pointing_pdf, ErrorMode, PhaseErrorModel, PointingModel, SystemConfig, TurbulenceModel};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_pieces, integrate_to_infinity, QuadOptions};
use crate::specfun::{
    bessel_i_ratio, erf, gamma_sign, gauss_laguerre, hyp1f3, ln_gamma, regularized_gamma_p, upper_incomplete_gamma,
};
use std::f64::consts::{LN_2, PI};

pub const DEFAULT_MIXTURE_ORDER: usize = 30;

/// Largest tolerated ratio between the biggest closed-form contribution and
/// the final sum before a mixture component is re-evaluated by quadrature.
pub const CLOSED_FORM_CONDITION_LIMIT: f64 = 1e7;

/// Gauss-Laguerre mixture-Gamma fit of a Gamma-Gamma law:
/// `f_T(t) ~= sum_i a_i t^{alpha-1} e^{-xi_i t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureGammaApprox {
    pub alpha: f64,
    pub beta: f64,
    pub a: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MixtureGammaApprox {
    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// The fitted turbulence density.
    pub fn pdf(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        let lt = t.ln();
        self.a
            .iter()
            .zip(&self.xi)
            .map(|(&a, &xi)| a * ((self.alpha - 1.0) * lt - xi * t).exp())
            .sum()
    }

    /// `P(T > t)` under the fitted law.
    pub fn survival(&self, t: f64) -> Result<f64> {
        let mut s = 0.0;
        for (&a, &xi) in self.a.iter().zip(&self.xi) {
            s += a * xi.powf(-self.alpha) * upper_incomplete_gamma(self.alpha, xi * t)?;
        }
        Ok(s)
    }

    /// `sum_i a_i Gamma(alpha) xi_i^{-alpha}`, equal to one by construction.
    pub fn total_mass(&self) -> Result<f64> {
        let g = ln_gamma(self.alpha)?;
        Ok(self
            .a
            .iter()
            .zip(&self.xi)
            .map(|(&a, &xi)| a * (g - self.alpha * xi.ln()).exp())
            .sum())
    }
}

pub fn mixture_gamma_fit(alpha: f64, beta: f64, order: usize) -> Result<MixtureGammaApprox> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Argument(format!("mixture fit needs alpha, beta > 0 (got {alpha}, {beta})")));
    }
    let rule = gauss_laguerre(order)?;
    let ab = alpha * beta;
    let lg_a = ln_gamma(alpha)?;
    let lg_b = ln_gamma(beta)?;
    let xi: Vec<f64> = rule.nodes.iter().map(|&c| ab / c).collect();
    let ln_eta: Vec<f64> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&c, &g)| alpha * ab.ln() + g.ln() + (beta - alpha - 1.0) * c.ln() - lg_a - lg_b)
        .collect();
    // a_i = eta_i / sum_j eta_j Gamma(alpha) xi_j^{-alpha}
    let ln_terms: Vec<f64> = ln_eta.iter().zip(&xi).map(|(&le, &x)| le + lg_a - alpha * x.ln()).collect();
    let lmax = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ln_norm = lmax + ln_terms.iter().map(|l| (l - lmax).exp()).sum::<f64>().ln();
    Ok(MixtureGammaApprox {
        alpha,
        beta,
        a: ln_eta.iter().map(|le| (le - ln_norm).exp()).collect(),
        xi,
        eta: ln_eta.iter().map(|le| le.exp()).collect(),
        nodes: rule.nodes,
        weights: rule.weights,
    })
}

/// Combined density of `h = T P` from the mixture fit and the pointing law.
pub fn combined_fading_pdf(h: f64, approx: &MixtureGammaApprox, pointing: &PointingModel) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("fading density requires h > 0, got {h}")));
    }
    let v2 = pointing.ratio_sq();
    let s = approx.alpha - v2;
    let mut sum = 0.0;
    for (&a, &xi) in approx.a.iter().zip(&approx.xi) {
        let g = upper_incomplete_gamma(s, xi * h / pointing.a0)?;
        sum += a * ((v2 - approx.alpha) * xi.ln()).exp() * g;
    }
    Ok(v2 * (-v2 * pointing.a0.ln() + (v2 - 1.0) * h.ln()).exp() * sum)
}

/// Fading law of one hop: mixture-Gamma turbulence (if any) times pointing loss.
#[derive(Debug, Clone, PartialEq)]
pub struct HopFading {
    pub turbulence: Option<MixtureGammaApprox>,
    pub pointing: PointingModel,
}

impl HopFading {
    pub fn new(turbulence: &TurbulenceModel, pointing: &PointingModel, order: usize) -> Result<Self> {
        let turbulence = match turbulence.shape {
            Some((a, b)) => Some(mixture_gamma_fit(a, b, order)?),
            None => None,
        };
        Ok(Self {
            turbulence,
            pointing: *pointing,
        })
    }

    pub fn pdf(&self, h: f64) -> Result<f64> {
        match &self.turbulence {
            Some(mix) => combined_fading_pdf(h, mix, &self.pointing),
            None => Ok(pointing_pdf(h, &self.pointing)),
        }
    }

    /// `E[h] = E[T] E[P]`.
    pub fn mean(&self) -> f64 {
        self.pointing.mean()
    }

    /// A level `x` with `P(h > x) <= tail`.
    fn upper_bound(&self, tail: f64) -> Result<f64> {
        let a0 = self.pointing.a0;
        let Some(mix) = &self.turbulence else {
            return Ok(a0);
        };
        // P(h > x) <= P(T > x / A) since P <= A.
        let mut hi = 2.0;
        while mix.survival(hi)? > tail {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Degenerate("turbulence tail does not decay".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mix.survival(mid)? > tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(a0 * hi)
    }
}

/// Characteristic-function evaluation for the total phase error under P2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CharFnMethod {
    /// `E[cos(p (eps + nu))] = phi_p I_p(kappa) / I_0(kappa)` with the exact
    /// Von Mises law of `nu`.
    #[default]
    ExactVonMises,
    /// Quadrature of `cos(p x)` against the truncated-Gaussian convolution
    /// density of [`total_phase_error_pdf`].
    TruncatedGaussian,
}

/// Quantization-only characteristic function `2^b sin(2^-b p pi) / (p pi)`.
fn quantization_charfun(bits: Option<u32>, p: u32) -> f64 {
    match bits {
        None => 1.0,
        Some(b) => {
            let scale = 2f64.powi(b as i32);
            let x = p as f64 * PI / scale;
            if x.sin().abs() < 1e-15 {
                0.0
            } else {
                x.sin() / x
            }
        }
    }
}

/// `E[cos(p eps_hat)]` for the total phase error of `model`.
pub fn phase_charfun(model: &PhaseErrorModel, p: u32) -> Result<f64> {
    phase_charfun_with(model, p, CharFnMethod::default())
}

pub fn phase_charfun_with(model: &PhaseErrorModel, p: u32, method: CharFnMethod) -> Result<f64> {
    if p == 0 {
        return Err(Error::Argument("characteristic function order must be >= 1".into()));
    }
    let q = quantization_charfun(model.bits, p);
    if !model.has_estimation_error() {
        return Ok(q);
    }
    match method {
        CharFnMethod::ExactVonMises => Ok(q * bessel_i_ratio(p, model.kappa)),
        CharFnMethod::TruncatedGaussian => {
            let h = model.quantization_half_width();
            let pf = p as f64;
            let mut pts = vec![-PI - h, -PI + h, 0.0, PI - h, PI + h];
            pts.sort_by(|a, b| a.total_cmp(b));
            pts.dedup();
            let opts = QuadOptions::new(1e-12, 1e-12);
            let r = integrate_pieces(
                |x| (pf * x).cos() * total_phase_error_pdf(x, model).unwrap_or(0.0),
                &pts,
                opts,
            )?;
            Ok(r.value)
        }
    }
}

/// Density of `eps + nu` with the Von Mises term replaced by a Gaussian of
/// variance `1/kappa` truncated (not renormalized) to `[-pi, pi)`.
///
/// Only meaningful for [`ErrorMode::P2`].
pub fn total_phase_error_pdf(x: f64, model: &PhaseErrorModel) -> Result<f64> {
    if model.mode != ErrorMode::P2 {
        return Err(Error::Argument("total phase error density is defined for the P2 error model".into()));
    }
    let k = (0.5 * model.kappa).sqrt();
    let edge = erf(k * PI);
    let Some(b) = model.bits else {
        if (-PI..PI).contains(&x) {
            return Ok((model.kappa / (2.0 * PI)).sqrt() * (-0.5 * model.kappa * x * x).exp());
        }
        return Ok(0.0);
    };
    let h = PI / 2f64.powi(b as i32);
    let c = 2f64.powi(b as i32 - 2) / PI;
    let v = if x < -PI - h || x >= PI + h {
        0.0
    } else if x < -PI + h {
        c * (edge + erf(k * (h + x)))
    } else if x < PI - h {
        c * (erf(k * (x + h)) - erf(k * (x - h)))
    } else {
        c * (edge - erf(k * (x - h)))
    };
    Ok(v)
}

/// Density of the per-element eavesdropper phase offset.
///
/// P1: uniform on `[0, 2pi)` convolved with the quantization error.
/// P2: uniform on `[0, 2pi)` convolved with the truncated Gaussian
/// estimation error.
pub fn theta_sre_pdf(theta: f64, model: &PhaseErrorModel) -> f64 {
    match model.mode {
        ErrorMode::P2 if model.kappa.is_finite() => {
            let k = (0.5 * model.kappa).sqrt();
            let edge = erf(k * PI);
            if (-PI..PI).contains(&theta) {
                (edge + erf(k * theta)) / (4.0 * PI)
            } else if (PI..3.0 * PI).contains(&theta) {
                (edge + erf(k * (2.0 * PI - theta))) / (4.0 * PI)
            } else {
                0.0
            }
        }
        _ => match model.bits {
            None => {
                if (0.0..2.0 * PI).contains(&theta) {
                    1.0 / (2.0 * PI)
                } else {
                    0.0
                }
            }
            Some(b) => {
                let scale = 2f64.powi(b as i32);
                let h = PI / scale;
                let slope = scale / (4.0 * PI * PI);
                if (-h..h).contains(&theta) {
                    slope * theta + 1.0 / (4.0 * PI)
                } else if (h..2.0 * PI - h).contains(&theta) {
                    1.0 / (2.0 * PI)
                } else if (2.0 * PI - h..2.0 * PI + h).contains(&theta) {
                    -slope * theta + (2.0 * scale + 1.0) / (4.0 * PI)
                } else {
                    0.0
                }
            }
        },
    }
}

/// Law of a normalized coherent amplitude.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialLaw {
    /// Point mass at one (no phase error on the trusted path).
    Unit,
    Nakagami {
        m: f64,
        omega: f64,
        /// Quantiles used as integration breakpoints.
        breakpoints: Vec<f64>,
    },
}

const RADIAL_PROBS: [f64; 13] = [
    1e-14,
    1e-9,
    1e-5,
    1e-3,
    0.02,
    0.16,
    0.5,
    0.84,
    0.98,
    0.999,
    1.0 - 1e-5,
    1.0 - 1e-9,
    1.0 - 1e-14,
];

impl RadialLaw {
    pub fn nakagami(m: f64, omega: f64) -> Result<Self> {
        if !(m > 0.0 && omega > 0.0) {
            return Err(Error::Argument(format!("Nakagami needs m, omega > 0 (got {m}, {omega})")));
        }
        if m.is_infinite() {
            return Ok(Self::Unit);
        }
        let mut breakpoints = Vec::with_capacity(RADIAL_PROBS.len());
        for &p in &RADIAL_PROBS {
            breakpoints.push(nakagami_quantile(m, omega, p)?);
        }
        breakpoints.dedup();
        Ok(Self::Nakagami { m, omega, breakpoints })
    }

    pub fn rayleigh(sigma2: f64) -> Result<Self> {
        Self::nakagami(1.0, 2.0 * sigma2)
    }

    pub fn pdf(&self, r: f64) -> f64 {
        match self {
            Self::Unit => 0.0,
            Self::Nakagami { m, omega, .. } => nakagami_pdf(r, *m, *omega),
        }
    }

    /// A level `r` with `P(R > r) <= tail`.
    fn upper_bound(&self, tail: f64) -> Result<f64> {
        match self {
            Self::Unit => Ok(1.0),
            Self::Nakagami { m, omega, .. } => nakagami_quantile(*m, *omega, 1.0 - tail),
        }
    }

    fn mean_estimate(&self) -> f64 {
        match self {
            Self::Unit => 1.0,
            Self::Nakagami { omega, .. } => omega.sqrt(),
        }
    }
}

fn nakagami_pdf(r: f64, m: f64, omega: f64) -> f64 {
    if !(r > 0.0) {
        return 0.0;
    }
    let lg = match ln_gamma(m) {
        Ok(v) => v,
        Err(_) => return 0.0,
    };
    (LN_2 + m * (m / omega).ln() - lg + (2.0 * m - 1.0) * r.ln() - m * r * r / omega).exp()
}

/// `r` with `P(R <= r) = p` for `R ~ Nakagami(m, omega)` (`R^2 ~ Gamma(m, omega/m)`).
fn nakagami_quantile(m: f64, omega: f64, p: f64) -> Result<f64> {
    let cdf = |r: f64| regularized_gamma_p(m, m * r * r / omega);
    let mut hi = omega.sqrt();
    while cdf(hi)? < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    // The lower tail can be extremely thin for large m; bisect in r.
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Moments of the coherent sums and the resulting amplitude laws.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannelStats {
    pub elements: usize,
    pub phi1: f64,
    pub phi2: f64,
    pub mu_uc: f64,
    pub mu_us: f64,
    pub var_uc: f64,
    pub var_us: f64,
    /// Nakagami shape (infinite when `r_u` is deterministic).
    pub m: f64,
    pub omega: f64,
    pub var_ec: f64,
    pub var_es: f64,
    /// Correlation of the in-phase and quadrature sums (zero analytically).
    pub rho: f64,
}

impl EquivalentChannelStats {
    pub fn radial_u(&self) -> Result<RadialLaw> {
        if self.m.is_infinite() {
            return Ok(RadialLaw::Unit);
        }
        RadialLaw::nakagami(self.m, self.omega)
    }

    pub fn radial_e(&self) -> Result<RadialLaw> {
        RadialLaw::rayleigh(self.var_ec)
    }
}

pub fn equivalent_stats(elements: usize, model: &PhaseErrorModel) -> Result<EquivalentChannelStats> {
    equivalent_stats_with(elements, model, CharFnMethod::default())
}

pub fn equivalent_stats_with(
    elements: usize,
    model: &PhaseErrorModel,
    method: CharFnMethod,
) -> Result<EquivalentChannelStats> {
    if elements == 0 {
        return Err(Error::Argument("element count must be at least 1".into()));
    }
    let n = elements as f64;
    let phi1 = phase_charfun_with(model, 1, method)?;
    let phi2 = phase_charfun_with(model, 2, method)?;
    let var_uc = ((1.0 + phi2 - 2.0 * phi1 * phi1) / (2.0 * n)).max(0.0);
    let var_us = (1.0 - phi2) / (2.0 * n);
    let m = if var_uc > 1e-300 {
        phi1 * phi1 / (4.0 * var_uc)
    } else {
        f64::INFINITY
    };
    let var_e = if model.has_estimation_error() {
        0.5 * n * erf((0.5 * model.kappa).sqrt() * PI)
    } else {
        0.5 * n
    };
    Ok(EquivalentChannelStats {
        elements,
        phi1,
        phi2,
        mu_uc: phi1,
        mu_us: 0.0,
        var_uc,
        var_us,
        m,
        omega: phi1 * phi1,
        var_ec: var_e,
        var_es: var_e,
        rho: 0.0,
    })
}

/// Nakagami density of `r_u`.
pub fn pdf_r_u(r: f64, stats: &EquivalentChannelStats) -> f64 {
    nakagami_pdf(r, stats.m, stats.omega)
}

/// Rayleigh density of `r_e`.
pub fn pdf_r_e(r: f64, stats: &EquivalentChannelStats) -> f64 {
    if !(r >= 0.0) {
        return 0.0;
    }
    let s2 = stats.var_ec;
    r / s2 * (-r * r / (2.0 * s2)).exp()
}

/// Which end-to-end amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    User,
    Eavesdropper,
}

/// Value of a product density together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductDensity {
    pub value: f64,
    /// Mixture components evaluated in closed form.
    pub closed_form: usize,
    /// Mixture components evaluated by quadrature.
    pub fallback: usize,
}

/// `sum_k s_k exp(l_k) F_k` with a relative condition estimate.
struct SignedLogSum {
    terms: Vec<(f64, f64, f64, f64)>,
}

impl SignedLogSum {
    fn new() -> Self {
        Self { terms: Vec::with_capacity(4) }
    }

    fn push(&mut self, sign: f64, log_mag: f64, factor: f64, factor_condition: f64) {
        self.terms.push((sign, log_mag, factor, factor_condition));
    }

    /// Returns `(log|sum|, sign, condition)`.
    fn evaluate(&self) -> (f64, f64, f64) {
        let lmax = self.terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let mut biggest = 0.0f64;
        for &(s, l, f, c) in &self.terms {
            let v = s * (l - lmax).exp() * f;
            sum += v;
            // A log magnitude `l` carries an absolute rounding error of order `|l| eps`.
            biggest = biggest.max(v.abs() * (c.max(1.0) + l.abs()));
        }
        let cond = if sum != 0.0 { biggest / sum.abs() } else { f64::INFINITY };
        (lmax + sum.abs().ln(), sum.signum(), cond)
    }
}

/// Closed form of
/// `int_0^inf x^{v2-1-2m} e^{-m z^2/(omega x^2)} Gamma(alpha - v2, k x) dx`
/// times the Nakagami normalization and `z^{2m-1}`, returned as
/// `(log value, condition)`.
fn closed_form_component(z: f64, m: f64, omega: f64, alpha: f64, v2: f64, k: f64) -> Result<(f64, f64)> {
    let lk = k.ln();
    let lq = omega.ln() - m.ln() - 2.0 * z.ln();
    let x = -k * k * m * z * z / (4.0 * omega);
    let s = alpha - v2;
    let mut acc = SignedLogSum::new();

    acc.push(
        gamma_sign(s) * gamma_sign(m - 0.5 * v2),
        -LN_2 + (m - 0.5 * v2) * lq + ln_gamma(s)? + ln_gamma(m - 0.5 * v2)?,
        1.0,
        1.0,
    );

    let f2 = hyp1f3(m - 0.5 * v2, 0.5 * (1.0 - alpha) + m, 1.0 - 0.5 * alpha + m, 1.0 + m - 0.5 * v2, x)?;
    if f2.low_confidence {
        return Err(Error::Degenerate("1F3 cancellation".into()));
    }
    acc.push(
        (v2 - 2.0 * m).signum() * gamma_sign(alpha - 2.0 * m),
        -(v2 - 2.0 * m).abs().ln() + (2.0 * m - v2) * lk + ln_gamma(alpha - 2.0 * m)?,
        f2.value,
        f2.max_term_ratio,
    );

    let f3 = hyp1f3(0.5 * s, 0.5, 1.0 + 0.5 * alpha - m, 1.0 + 0.5 * s, x)?;
    if f3.low_confidence {
        return Err(Error::Degenerate("1F3 cancellation".into()));
    }
    acc.push(
        -s.signum() * gamma_sign(m - 0.5 * alpha),
        s * lk + (m - 0.5 * alpha) * lq - LN_2 - s.abs().ln() + ln_gamma(m - 0.5 * alpha)?,
        f3.value,
        f3.max_term_ratio,
    );

    let f4 = hyp1f3(0.5 * (1.0 + s), 1.5, 0.5 * (3.0 + alpha) - m, 0.5 * (3.0 + s), x)?;
    if f4.low_confidence {
        return Err(Error::Degenerate("1F3 cancellation".into()));
    }
    acc.push(
        (1.0 + s).signum() * gamma_sign(m - 0.5 * (1.0 + alpha)),
        (1.0 + s) * lk + (m - 0.5 * (1.0 + alpha)) * lq - LN_2 - (1.0 + s).abs().ln()
            + ln_gamma(m - 0.5 * (1.0 + alpha))?,
        f4.value,
        f4.max_term_ratio,
    );

    let (log_sum, sign, cond) = acc.evaluate();
    if sign <= 0.0 || !log_sum.is_finite() {
        return Err(Error::Degenerate("closed form lost positivity".into()));
    }
    let ln_norm = LN_2 + m * (m / omega).ln() - ln_gamma(m)?;
    Ok((ln_norm + (2.0 * m - 1.0) * z.ln() + log_sum, cond))
}

fn radial_law(stats: &EquivalentChannelStats, which: Receiver) -> Result<RadialLaw> {
    match which {
        Receiver::User => stats.radial_u(),
        Receiver::Eavesdropper => stats.radial_e(),
    }
}

/// `int_0^inf g(z/r) f_r(r) / r dr` for a fading density `g`.
fn product_integral<G: Fn(f64) -> f64>(z: f64, g: G, law: &RadialLaw, fading: &HopFading, opts: QuadOptions) -> Result<f64> {
    match law {
        RadialLaw::Unit => Ok(g(z)),
        RadialLaw::Nakagami { breakpoints, .. } => {
            let integrand = |r: f64| {
                if !(r > 0.0) {
                    return 0.0;
                }
                let f = law.pdf(r);
                if f == 0.0 {
                    return 0.0;
                }
                g(z / r) * f / r
            };
            let mut pts = vec![0.0];
            pts.extend(breakpoints.iter().copied());
            // Support edge of the fading density (pointing-only hops).
            if fading.turbulence.is_none() {
                pts.push(z / fading.pointing.a0);
            }
            pts.sort_by(|a, b| a.total_cmp(b));
            pts.dedup();
            let last = *pts.last().expect("non-empty");
            let body = integrate_pieces(integrand, &pts, opts)?;
            let tail = integrate_to_infinity(integrand, last, opts)?;
            Ok(body.value + tail.value)
        }
    }
}

const ORACLE_QUAD: QuadOptions = QuadOptions {
    abs_tol: 0.0,
    rel_tol: 1e-10,
    max_intervals: 4000,
};

/// Density of `H = h r` by direct quadrature of `int f_h(x)/x f_r(z/x) dx`.
pub fn product_pdf_oracle(z: f64, fading: &HopFading, stats: &EquivalentChannelStats, which: Receiver) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("product density requires z > 0, got {z}")));
    }
    let law = radial_law(stats, which)?;
    product_integral(z, |x| fading.pdf(x).unwrap_or(0.0), &law, fading, ORACLE_QUAD)
}

/// Density of `H_u = h_u r_u`.
pub fn product_pdf_u(z: f64, fading: &HopFading, stats: &EquivalentChannelStats) -> Result<f64> {
    Ok(product_pdf_detailed(z, fading, stats, Receiver::User)?.value)
}

/// Density of `H_e = h_e r_e`.
pub fn product_pdf_e(z: f64, fading: &HopFading, stats: &EquivalentChannelStats) -> Result<f64> {
    Ok(product_pdf_detailed(z, fading, stats, Receiver::Eavesdropper)?.value)
}

/// Closed-form evaluation of the product density, falling back to quadrature
/// for each mixture component whose expansion is ill-conditioned.
pub fn product_pdf_detailed(
    z: f64,
    fading: &HopFading,
    stats: &EquivalentChannelStats,
    which: Receiver,
) -> Result<ProductDensity> {
    let law = radial_law(stats, which)?;
    product_pdf_with_law(z, fading, &law)
}

fn product_pdf_with_law(z: f64, fading: &HopFading, law: &RadialLaw) -> Result<ProductDensity> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("product density requires z > 0, got {z}")));
    }
    let Some(mix) = &fading.turbulence else {
        let value = product_integral(z, |x| fading.pdf(x).unwrap_or(0.0), law, fading, ORACLE_QUAD)?;
        return Ok(ProductDensity {
            value,
            closed_form: 0,
            fallback: 0,
        });
    };
    let RadialLaw::Nakagami { m, omega, .. } = law else {
        return Ok(ProductDensity {
            value: fading.pdf(z)?,
            closed_form: 0,
            fallback: 0,
        });
    };
    let p = &fading.pointing;
    let v2 = p.ratio_sq();
    let alpha = mix.alpha;
    let ln_front = v2.ln() - v2 * p.a0.ln();
    let mut value = 0.0;
    let mut failed = Vec::new();
    for (i, (&a, &xi)) in mix.a.iter().zip(&mix.xi).enumerate() {
        let ln_w = a.ln() + (v2 - alpha) * xi.ln();
        match closed_form_component(z, *m, *omega, alpha, v2, xi / p.a0) {
            Ok((l, cond)) if cond <= CLOSED_FORM_CONDITION_LIMIT => value += (ln_front + ln_w + l).exp(),
            _ => failed.push(i),
        }
    }
    let closed_form = mix.order() - failed.len();
    if !failed.is_empty() {
        let s = alpha - v2;
        let weights: Vec<(f64, f64)> = failed
            .iter()
            .map(|&i| ((mix.a[i].ln() + (v2 - alpha) * mix.xi[i].ln()).exp(), mix.xi[i] / p.a0))
            .collect();
        let partial = |h: f64| {
            if !(h > 0.0) {
                return 0.0;
            }
            let mut s_sum = 0.0;
            for &(w, k) in &weights {
                s_sum += w * upper_incomplete_gamma(s, k * h).unwrap_or(0.0);
            }
            (ln_front + (v2 - 1.0) * h.ln()).exp() * s_sum
        };
        value += product_integral(z, partial, law, fading, ORACLE_QUAD)?;
    }
    Ok(ProductDensity {
        value,
        closed_form,
        fallback: failed.len(),
    })
}

/// How the product densities are evaluated inside [`ergodic_rates_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityMethod {
    /// Closed form with per-component quadrature fallback.
    #[default]
    ClosedForm,
    /// Direct quadrature of the product integral.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub mixture_order: usize,
    pub charfun: CharFnMethod,
    pub density: DensityMethod,
    /// Probability mass allowed beyond the truncation point of each rate integral.
    pub tail_mass: f64,
    pub rate_quad: QuadOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            mixture_order: DEFAULT_MIXTURE_ORDER,
            charfun: CharFnMethod::default(),
            density: DensityMethod::default(),
            tail_mass: 1e-8,
            rate_quad: QuadOptions::new(1e-10, 1e-8),
        }
    }
}

/// Ergodic rates of both receivers and the resulting ergodic secrecy rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EsrReport {
    pub rate_u: f64,
    pub rate_e: f64,
    pub esr: f64,
    pub z_max_u: f64,
    pub z_max_e: f64,
    pub abs_error_u: f64,
    pub abs_error_e: f64,
    pub stats: EquivalentChannelStats,
}

pub fn ergodic_rates(config: &SystemConfig) -> Result<EsrReport> {
    ergodic_rates_with(config, &AnalysisOptions::default())
}

pub fn ergodic_rates_with(config: &SystemConfig, opts: &AnalysisOptions) -> Result<EsrReport> {
    let stats = equivalent_stats_with(config.elements, &config.phase_error, opts.charfun)?;
    let fading_u = HopFading::new(&config.turbulence_u, &config.pointing_u, opts.mixture_order)?;
    let fading_e = HopFading::new(&config.turbulence_e, &config.pointing_e, opts.mixture_order)?;
    let n = config.elements as f64;
    let law_u = stats.radial_u()?;
    let law_e = stats.radial_e()?;
    let (ru, re) = rayon::join(
        || ergodic_rate(config.gamma0_u() * n * n, &fading_u, &law_u, opts),
        || ergodic_rate(config.gamma0_e(), &fading_e, &law_e, opts),
    );
    let (rate_u, z_max_u, abs_error_u) = ru?;
    let (rate_e, z_max_e, abs_error_e) = re?;
    Ok(EsrReport {
        rate_u,
        rate_e,
        esr: (rate_u - rate_e).max(0.0),
        z_max_u,
        z_max_e,
        abs_error_u,
        abs_error_e,
        stats,
    })
}

/// `int_0^zmax log2(1 + g z^2) f_H(z) dz`; returns `(rate, zmax, error)`.
fn ergodic_rate(gain: f64, fading: &HopFading, law: &RadialLaw, opts: &AnalysisOptions) -> Result<(f64, f64, f64)> {
    let half_tail = 0.5 * opts.tail_mass;
    let z_max = fading.upper_bound(half_tail)? * law.upper_bound(half_tail)?;
    if gain == 0.0 {
        return Ok((0.0, z_max, 0.0));
    }
    let density = |z: f64| -> f64 {
        let r = match opts.density {
            DensityMethod::ClosedForm => product_pdf_with_law(z, fading, law).map(|d| d.value),
            DensityMethod::Oracle => match law {
                RadialLaw::Unit => fading.pdf(z),
                _ => product_integral(z, |x| fading.pdf(x).unwrap_or(0.0), law, fading, ORACLE_QUAD),
            },
        };
        r.unwrap_or(f64::NAN)
    };
    let integrand = |z: f64| {
        if !(z > 0.0) {
            return 0.0;
        }
        (gain * z * z).ln_1p() / LN_2 * density(z)
    };
    let mu = fading.mean() * law.mean_estimate();
    let mut pts = vec![0.0, z_max];
    for f in [0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 8.0, 13.0] {
        let p = f * mu;
        if p < z_max {
            pts.push(p);
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    let r = integrate_pieces(integrand, &pts, opts.rate_quad)?;
    if !r.value.is_finite() {
        return Err(Error::Quadrature {
            estimate: r.value,
            abs_error: r.abs_error,
        });
    }
    Ok((r.value, z_max, r.abs_error))
}

/// Expected fading amplitude from the fitted density (quadrature).
pub fn fading_mean_by_quadrature(fading: &HopFading) -> Result<f64> {
    let z_max = fading.upper_bound(1e-12)?;
    let r = integrate(|h| if h > 0.0 { h * fading.pdf(h).unwrap_or(0.0) } else { 0.0 }, 0.0, z_max, QuadOptions::new(1e-12, 1e-10))?;
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{aperture_radius, pointing_params, turbulence_pdf, SystemParams};

    fn default_pointing(sigma: f64) -> PointingModel {
        let l = aperture_radius(500e-6, 10f64.powf(5.5));
        pointing_params(l, 6.0 * l, sigma).unwrap()
    }

    #[test]
    fn mixture_reproduces_gamma_gamma() {
        let (a, b) = (5.8379, 4.2486);
        let mix = mixture_gamma_fit(a, b, 30).unwrap();
        assert!((mix.total_mass().unwrap() - 1.0).abs() < 1e-12);
        let mut worst = 0.0f64;
        for i in 0..=500 {
            let t = 0.01 + (5.0 - 0.01) * i as f64 / 500.0;
            worst = worst.max((mix.pdf(t) - turbulence_pdf(t, a, b).unwrap()).abs());
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn charfun_closed_forms() {
        let p1 = PhaseErrorModel::quantization_only(Some(1));
        assert!((phase_charfun(&p1, 1).unwrap() - 2.0 / PI).abs() < 1e-15);
        assert_eq!(phase_charfun(&p1, 2).unwrap(), 0.0);
        let fine = PhaseErrorModel::quantization_only(Some(30));
        assert!((phase_charfun(&fine, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nakagami_parameters_at_one_bit() {
        let s = equivalent_stats(100, &PhaseErrorModel::quantization_only(Some(1))).unwrap();
        assert!((s.omega - 4.0 / (PI * PI)).abs() < 1e-12);
        assert!((s.m - 106.97).abs() < 0.01, "{}", s.m);
        assert_eq!(s.var_ec, 50.0);
        let s = equivalent_stats(100, &PhaseErrorModel::quantization_only(None)).unwrap();
        assert!(s.m.is_infinite() && (s.omega - 1.0).abs() < 1e-15);
    }

    #[test]
    fn theta_sre_p1_shape() {
        let m = PhaseErrorModel::quantization_only(Some(2));
        assert!((theta_sre_pdf(3.0, &m) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(theta_sre_pdf(-PI / 4.0, &m), 0.0);
        assert!((theta_sre_pdf(0.0, &m) - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_high_precision_reference() {
        // Direct 50-digit quadrature of the defining integral.
        let (z, m, om, v2, al, a): (f64, f64, f64, f64, f64, f64) = (0.3, 3.3, 0.4, 1.86, 5.84, 0.054);
        let norm = LN_2 + m * (m / om).ln() - ln_gamma(m).unwrap();
        for (xi, want) in [(0.02, 0.008_514_741_414_988_271), (0.2, 0.006_407_942_629_268_017)] {
            let (l, cond) = closed_form_component(z, m, om, al, v2, xi / a).unwrap();
            assert!(cond < CLOSED_FORM_CONDITION_LIMIT);
            let i1 = (l - norm).exp();
            assert!(((i1 - want) / want).abs() < 1e-9, "xi={xi}: {i1} vs {want}");
        }
    }

    #[test]
    fn closed_form_flags_cancellation() {
        // The four terms are ~1e9 while the sum is ~1e-3.
        let (l, cond) = closed_form_component(0.3, 3.3, 0.4, 5.84, 1.86, 2.0 / 0.054).unwrap_or((0.0, f64::INFINITY));
        assert!(cond > CLOSED_FORM_CONDITION_LIMIT, "{l} {cond}");
    }

    #[test]
    fn product_density_closed_form_vs_oracle_small_array() {
        let cfg = SystemParams {
            elements: 4,
            ..Default::default()
        }
        .build()
        .unwrap();
        let fading = HopFading::new(&cfg.turbulence_u, &cfg.pointing_u, 30).unwrap();
        let stats = equivalent_stats(4, &cfg.phase_error).unwrap();
        for &z in &[0.005, 0.02, 0.05] {
            let d = product_pdf_detailed(z, &fading, &stats, Receiver::User).unwrap();
            let o = product_pdf_oracle(z, &fading, &stats, Receiver::User).unwrap();
            assert!(((d.value - o) / o).abs() < 1e-6, "z={z} {} {o} cf={}", d.value, d.closed_form);
        }
    }

    #[test]
    fn combined_density_normalizes() {
        let mix = mixture_gamma_fit(5.8379, 4.2486, 30).unwrap();
        let p = default_pointing(0.1);
        let r = integrate_to_infinity(|h| combined_fading_pdf(h, &mix, &p).unwrap_or(0.0), 0.0, QuadOptions::new(1e-12, 1e-10)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-4, "{}", r.value);
    }

    #[test]
    fn fading_mean_is_product_of_means() {
        let cfg = SystemParams::default().build().unwrap();
        let f = HopFading::new(&cfg.turbulence_u, &cfg.pointing_u, 30).unwrap();
        let p = &cfg.pointing_u;
        let v2 = p.ratio_sq();
        let want = p.a0 * v2 / (v2 + 1.0);
        let got = fading_mean_by_quadrature(&f).unwrap();
        assert!(((got - want) / want).abs() < 1e-3, "{got} {want}");
    }

    #[test]
    fn product_density_normalizes_and_degenerates() {
        let cfg = SystemParams {
            elements: 20,
            ..Default::default()
        }
        .build()
        .unwrap();
        let stats = equivalent_stats(20, &cfg.phase_error).unwrap();
        for (fading, which) in [
            (HopFading::new(&cfg.turbulence_u, &cfg.pointing_u, 30).unwrap(), Receiver::User),
            (HopFading::new(&cfg.turbulence_e, &cfg.pointing_e, 30).unwrap(), Receiver::Eavesdropper),
        ] {
            let r = integrate_to_infinity(
                |z| product_pdf_detailed(z, &fading, &stats, which).map(|d| d.value).unwrap_or(0.0),
                0.0,
                QuadOptions::new(1e-9, 1e-7),
            )
            .unwrap();
            assert!((r.value - 1.0).abs() < 1e-3, "{which:?} {}", r.value);
        }
        let fading = HopFading::new(&cfg.turbulence_u, &cfg.pointing_u, 30).unwrap();
        let cont = equivalent_stats(20, &PhaseErrorModel::quantization_only(None)).unwrap();
        for &z in &[0.01, 0.05, 0.1] {
            let a = product_pdf_oracle(z, &fading, &cont, Receiver::User).unwrap();
            assert_eq!(a, fading.pdf(z).unwrap());
        }
    }

    #[test]
    fn oracle_scales_with_radial_spread() {
        let cfg = SystemParams::default().build().unwrap();
        let fading = HopFading::new(&cfg.turbulence_e, &cfg.pointing_e, 30).unwrap();
        let s1 = equivalent_stats(10, &cfg.phase_error).unwrap();
        let mut s2 = s1.clone();
        s2.var_ec *= 4.0;
        for &z in &[0.05, 0.2, 0.6] {
            let a = product_pdf_oracle(z, &fading, &s2, Receiver::Eavesdropper).unwrap();
            let b = 0.5 * product_pdf_oracle(z / 2.0, &fading, &s1, Receiver::Eavesdropper).unwrap();
            assert!(((a - b) / b).abs() < 1e-7, "{a} {b}");
        }
    }

    #[test]
    fn p2_stats_approach_p1() {
        let p1 = equivalent_stats(50, &PhaseErrorModel::quantization_only(Some(2))).unwrap();
        let p2 = equivalent_stats(50, &PhaseErrorModel::new(Some(2), 1e9, ErrorMode::P2).unwrap()).unwrap();
        assert!((p1.phi1 - p2.phi1).abs() < 1e-6 && (p1.phi2 - p2.phi2).abs() < 1e-6);
        assert!(((p1.m - p2.m) / p1.m).abs() < 1e-6 && (p1.var_ec - p2.var_ec).abs() < 1e-6);
    }

    #[test]
    fn zero_power_gives_zero_rates() {
        let mut p = SystemParams::default();
        p.tx_snr_db = f64::NEG_INFINITY;
        let r = ergodic_rates(&p.build().unwrap()).unwrap();
        assert_eq!((r.rate_u, r.rate_e, r.esr), (0.0, 0.0, 0.0));
    }

    #[test]
    fn total_phase_error_density() {
        let m = PhaseErrorModel::new(Some(1), 5.0, ErrorMode::P2).unwrap();
        for &x in &[0.3, 1.2, 2.9, 4.0] {
            assert_eq!(total_phase_error_pdf(x, &m).unwrap(), total_phase_error_pdf(-x, &m).unwrap());
        }
        let r = integrate_pieces(|x| total_phase_error_pdf(x, &m).unwrap(), &[-1.5 * PI, -0.5 * PI, 0.0, 0.5 * PI, 1.5 * PI], QuadOptions::new(1e-13, 1e-12)).unwrap();
        let deficit = 1.0 - erf((2.5f64).sqrt() * PI);
        assert!((1.0 - r.value - deficit).abs() < 1e-4, "{} {deficit}", r.value);
        assert!(total_phase_error_pdf(0.0, &PhaseErrorModel::quantization_only(Some(1))).is_err());
        let sharp = PhaseErrorModel::new(Some(2), 1e8, ErrorMode::P2).unwrap();
        assert!((total_phase_error_pdf(0.3, &sharp).unwrap() - 2.0 / PI).abs() < 1e-9);
    }
}
