//! Link budget, fading laws, and per-interval channel sampling.
//!
//! The satellite-to-RIS hop only contributes path loss. The RIS-to-UAV hops
//! (trusted user `u`, eavesdropper `e`) additionally see Gamma-Gamma
//! scintillation and pointing-error loss. Element phases and phase errors
//! enter through the coherent sum in [`received_snrs`].

use crate::error::{Error, Result};
use crate::specfun::{bessel_k, erf, ln_gamma};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use std::f64::consts::PI;

/// Deterministic RNG for trial `trial` of a run seeded with `master_seed`.
///
/// Each trial owns a separate ChaCha stream, so results do not depend on
/// which worker evaluates which trial.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// Meters.
    pub wavelength: f64,
    /// Meters.
    pub distance: f64,
    /// Linear antenna gain.
    pub antenna_gain: f64,
}

impl LinkGeometry {
    pub fn new(wavelength: f64, distance: f64, antenna_gain: f64) -> Result<Self> {
        if !(wavelength > 0.0 && distance > 0.0 && antenna_gain > 0.0) {
            return Err(Error::Argument(format!(
                "link geometry needs positive fields (lambda={wavelength}, d={distance}, G={antenna_gain})"
            )));
        }
        Ok(Self {
            wavelength,
            distance,
            antenna_gain,
        })
    }

    pub fn path_loss(&self) -> f64 {
        path_loss(self)
    }
}

/// Free-space path loss `G (lambda / (4 pi d))^2`.
pub fn path_loss(link: &LinkGeometry) -> f64 {
    let r = link.wavelength / (4.0 * PI * link.distance);
    link.antenna_gain * r * r
}

/// Rytov variance `1.23 (2 pi / lambda)^{7/6} d^{11/6} Cn2`.
pub fn rytov_variance(wavelength: f64, distance: f64, cn2: f64) -> f64 {
    1.23 * (2.0 * PI / wavelength).powf(7.0 / 6.0) * distance.powf(11.0 / 6.0) * cn2
}

/// Large- and small-scale scintillation shapes `(alpha, beta)`.
///
/// `Cn2 = 0` yields [`Error::Degenerate`]: the link has no turbulence and
/// the fade should be taken as `T = 1`.
pub fn scintillation_params(wavelength: f64, distance: f64, cn2: f64) -> Result<(f64, f64)> {
    if !(wavelength > 0.0 && distance > 0.0) || !(cn2 >= 0.0) {
        return Err(Error::Argument(format!(
            "scintillation needs lambda, d > 0 and Cn2 >= 0 (got {wavelength}, {distance}, {cn2})"
        )));
    }
    if cn2 == 0.0 {
        return Err(Error::Degenerate("Cn2 = 0: no turbulence".into()));
    }
    let s2 = rytov_variance(wavelength, distance, cn2);
    let s125 = s2.powf(1.2);
    let alpha = 1.0 / ((0.49 * s2 / (1.0 + 1.11 * s125).powf(7.0 / 6.0)).exp_m1());
    let beta = 1.0 / ((0.51 * s2 / (1.0 + 0.69 * s125).powf(5.0 / 6.0)).exp_m1());
    Ok((alpha, beta))
}

/// Gamma-Gamma scintillation on one hop. `shape` is `None` without turbulence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbulenceModel {
    pub cn2: f64,
    pub rytov_variance: f64,
    pub shape: Option<(f64, f64)>,
}

impl TurbulenceModel {
    pub fn new(wavelength: f64, distance: f64, cn2: f64) -> Result<Self> {
        let shape = match scintillation_params(wavelength, distance, cn2) {
            Ok(s) => Some(s),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            cn2,
            rytov_variance: rytov_variance(wavelength, distance, cn2),
            shape,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.shape {
            Some((a, b)) => sample_turbulence(a, b, rng),
            None => 1.0,
        }
    }
}

/// Unit-mean Gamma-Gamma draw `X Y`, `X ~ Gamma(alpha, 1/alpha)`, `Y ~ Gamma(beta, 1/beta)`.
pub fn sample_turbulence<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let x = Gamma::new(alpha, 1.0 / alpha).expect("alpha > 0").sample(rng);
    let y = Gamma::new(beta, 1.0 / beta).expect("beta > 0").sample(rng);
    x * y
}

/// Normalized Gamma-Gamma density
/// `2 (ab)^{(a+b)/2} / (G(a) G(b)) T^{(a+b)/2 - 1} K_{a-b}(2 sqrt(ab T))`.
pub fn turbulence_pdf(t: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("turbulence_pdf requires T > 0, got {t}")));
    }
    let ab = alpha * beta;
    let k = bessel_k(alpha - beta, 2.0 * (ab * t).sqrt())?;
    if k == 0.0 {
        return Ok(0.0);
    }
    let half = 0.5 * (alpha + beta);
    let log = 2f64.ln() + half * ab.ln() - ln_gamma(alpha)? - ln_gamma(beta)? + (half - 1.0) * t.ln() + k.ln();
    Ok(log.exp())
}

/// Misalignment loss of one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingModel {
    /// Receiver aperture radius `l`, meters.
    pub aperture_radius: f64,
    /// Beam waist `w`, meters.
    pub beam_waist: f64,
    /// Jitter standard deviation, meters.
    pub jitter_std: f64,
    /// Fraction of power collected at zero displacement.
    pub a0: f64,
    /// Equivalent beam width `W`, meters.
    pub equivalent_width: f64,
    /// `W / (2 sigma_j)`.
    pub ratio: f64,
}

impl PointingModel {
    /// `varpi^2`, the exponent of the pointing density.
    pub fn ratio_sq(&self) -> f64 {
        self.ratio * self.ratio
    }

    pub fn pdf(&self, p: f64) -> f64 {
        pointing_pdf(p, self)
    }

    /// `E[P] = A varpi^2 / (varpi^2 + 1)`.
    pub fn mean(&self) -> f64 {
        let v2 = self.ratio_sq();
        self.a0 * v2 / (v2 + 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_pointing(self, rng).0
    }
}

/// Aperture radius `l = lambda sqrt(G) / (2 pi)` implied by a receive gain.
pub fn aperture_radius(wavelength: f64, gain: f64) -> f64 {
    wavelength * gain.sqrt() / (2.0 * PI)
}

pub fn pointing_params(l: f64, w: f64, jitter_std: f64) -> Result<PointingModel> {
    if !(l > 0.0 && w > 0.0 && jitter_std > 0.0) {
        return Err(Error::Argument(format!(
            "pointing model needs positive l, w, sigma_j (got {l}, {w}, {jitter_std})"
        )));
    }
    let v = PI.sqrt() * l / (2f64.sqrt() * w);
    let ev = erf(v);
    let a0 = ev * ev;
    let w_eq2 = w * w * ev / ((2f64.sqrt() * l / w) * (-v * v).exp());
    let w_eq = w_eq2.sqrt();
    Ok(PointingModel {
        aperture_radius: l,
        beam_waist: w,
        jitter_std,
        a0,
        equivalent_width: w_eq,
        ratio: w_eq / (2.0 * jitter_std),
    })
}

/// `varpi^2 / A^{varpi^2} p^{varpi^2 - 1}` on `[0, A]`.
pub fn pointing_pdf(p: f64, model: &PointingModel) -> f64 {
    if !(p > 0.0) || p > model.a0 {
        return 0.0;
    }
    let v2 = model.ratio_sq();
    v2 / model.a0 * (p / model.a0).powf(v2 - 1.0)
}

/// Inverse-CDF draw `P = A U^{1/varpi^2}`; also returns the radial jitter
/// displacement consistent with that `P` (`P = A exp(-2 j^2 / W^2)`).
pub fn sample_pointing<R: Rng + ?Sized>(model: &PointingModel, rng: &mut R) -> (f64, f64) {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v2 = model.ratio_sq();
    let p = model.a0 * u.powf(1.0 / v2);
    let jitter = model.equivalent_width * (-u.ln() / (2.0 * v2)).sqrt();
    (p, jitter)
}

/// Which phase impairments are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorMode {
    /// Quantization error only.
    P1,
    /// Quantization plus Von Mises estimation error.
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseErrorModel {
    /// Phase resolution in bits; `None` means continuous phases.
    pub bits: Option<u32>,
    /// Von Mises concentration, used only in [`ErrorMode::P2`].
    pub kappa: f64,
    pub mode: ErrorMode,
}

impl PhaseErrorModel {
    pub fn new(bits: Option<u32>, kappa: f64, mode: ErrorMode) -> Result<Self> {
        if bits == Some(0) {
            return Err(Error::Argument("quantization needs at least one bit".into()));
        }
        if mode == ErrorMode::P2 && !(kappa > 0.0) {
            return Err(Error::Argument(format!("P2 requires kappa > 0, got {kappa}")));
        }
        Ok(Self { bits, kappa, mode })
    }

    pub fn quantization_only(bits: Option<u32>) -> Self {
        Self {
            bits,
            kappa: f64::INFINITY,
            mode: ErrorMode::P1,
        }
    }

    /// Half-width `pi / 2^b` of the quantization error support (0 when continuous).
    pub fn quantization_half_width(&self) -> f64 {
        match self.bits {
            Some(b) => PI / 2f64.powi(b as i32),
            None => 0.0,
        }
    }

    pub fn has_estimation_error(&self) -> bool {
        self.mode == ErrorMode::P2 && self.kappa.is_finite()
    }
}

/// Uniform quantization error on `[-pi/2^b, pi/2^b)`.
pub fn sample_quantization_error<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> f64 {
    let h = PI / 2f64.powi(bits as i32);
    -h + 2.0 * h * rng.gen::<f64>()
}

/// Exact Von Mises draw on `[-pi, pi)` with zero mean (Best-Fisher).
///
/// For `kappa > 1e6` the wrapped-cauchy envelope loses precision and the
/// wrapped normal with variance `1/kappa` is used instead; the two laws
/// differ by `O(1/kappa)` there.
pub fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return PI * (2.0 * rng.gen::<f64>() - 1.0);
    }
    if kappa > 1e6 {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        return wrap_pi(z / kappa.sqrt());
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.gen();
            let theta = f.clamp(-1.0, 1.0).acos();
            return if u3 < 0.5 { -theta } else { theta };
        }
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Physical parameters of a scenario, before derived quantities are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub elements: usize,
    pub wavelength: f64,
    pub d_sr: f64,
    pub d_ru: f64,
    pub d_re: f64,
    pub gain_s_dbi: f64,
    pub gain_u_dbi: f64,
    pub gain_e_dbi: f64,
    pub cn2: f64,
    pub w_over_l: f64,
    pub sigma_j_u: f64,
    pub sigma_j_e: f64,
    pub tx_snr_db: f64,
    pub bits: Option<u32>,
    pub kappa: f64,
    pub mode: ErrorMode,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            elements: 100,
            wavelength: 500e-6,
            d_sr: 150e3,
            d_ru: 19e3,
            d_re: 20e3,
            gain_s_dbi: 69.0,
            gain_u_dbi: 55.0,
            gain_e_dbi: 55.0,
            cn2: 1e-13,
            w_over_l: 6.0,
            sigma_j_u: 0.1,
            sigma_j_e: 0.2,
            tx_snr_db: 260.0,
            bits: Some(1),
            kappa: 5.0,
            mode: ErrorMode::P1,
        }
    }
}

impl SystemParams {
    pub fn build(&self) -> Result<SystemConfig> {
        SystemConfig::from_params(self)
    }
}

/// Fully derived link parameters for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub params: SystemParams,
    pub elements: usize,
    /// Transmit SNR `P / delta^2`, linear, before path loss.
    pub tx_snr: f64,
    pub link_s: LinkGeometry,
    pub link_u: LinkGeometry,
    pub link_e: LinkGeometry,
    pub turbulence_u: TurbulenceModel,
    pub turbulence_e: TurbulenceModel,
    pub pointing_u: PointingModel,
    pub pointing_e: PointingModel,
    pub phase_error: PhaseErrorModel,
}

impl SystemConfig {
    pub fn from_params(p: &SystemParams) -> Result<Self> {
        if p.elements == 0 {
            return Err(Error::Argument("element count must be at least 1".into()));
        }
        if !p.tx_snr_db.is_finite() && p.tx_snr_db != f64::NEG_INFINITY {
            return Err(Error::Argument(format!("transmit SNR must be finite, got {}", p.tx_snr_db)));
        }
        if !(p.w_over_l > 0.0) {
            return Err(Error::Argument(format!("w/l must be positive, got {}", p.w_over_l)));
        }
        let g_s = db_to_linear(p.gain_s_dbi);
        let g_u = db_to_linear(p.gain_u_dbi);
        let g_e = db_to_linear(p.gain_e_dbi);
        let link_s = LinkGeometry::new(p.wavelength, p.d_sr, g_s)?;
        let link_u = LinkGeometry::new(p.wavelength, p.d_ru, g_u)?;
        let link_e = LinkGeometry::new(p.wavelength, p.d_re, g_e)?;
        let l_u = aperture_radius(p.wavelength, g_u);
        let l_e = aperture_radius(p.wavelength, g_e);
        Ok(Self {
            params: *p,
            elements: p.elements,
            tx_snr: db_to_linear(p.tx_snr_db),
            link_s,
            link_u,
            link_e,
            turbulence_u: TurbulenceModel::new(p.wavelength, p.d_ru, p.cn2)?,
            turbulence_e: TurbulenceModel::new(p.wavelength, p.d_re, p.cn2)?,
            pointing_u: pointing_params(l_u, p.w_over_l * l_u, p.sigma_j_u)?,
            pointing_e: pointing_params(l_e, p.w_over_l * l_e, p.sigma_j_e)?,
            phase_error: PhaseErrorModel::new(p.bits, p.kappa, p.mode)?,
        })
    }

    /// `gamma_u^0 = P L_s L_u / delta^2`.
    pub fn gamma0_u(&self) -> f64 {
        self.tx_snr * self.link_s.path_loss() * self.link_u.path_loss()
    }

    /// `gamma_e^0 = P L_s L_e / delta^2`.
    pub fn gamma0_e(&self) -> f64 {
        self.tx_snr * self.link_s.path_loss() * self.link_e.path_loss()
    }
}

/// All random quantities of one coherence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub theta_r: Vec<f64>,
    pub theta_u: Vec<f64>,
    pub theta_e: Vec<f64>,
    pub turbulence_u: f64,
    pub turbulence_e: f64,
    pub pointing_u: f64,
    pub pointing_e: f64,
    pub jitter_u: f64,
    pub jitter_e: f64,
    /// Quantization error per element (zero when phases are continuous).
    pub quantization: Vec<f64>,
    /// Estimation error on the trusted path (zero under P1).
    pub estimation_u: Vec<f64>,
    /// Independent estimation error on the eavesdropper path (zero under P1).
    pub estimation_e: Vec<f64>,
}

impl ChannelRealization {
    pub fn elements(&self) -> usize {
        self.theta_r.len()
    }

    /// Phases of the baseline configuration: cascaded phase of the trusted
    /// path compensated, up to the quantization error.
    pub fn baseline_phases(&self) -> Vec<f64> {
        (0..self.elements())
            .map(|n| self.theta_r[n] + self.theta_u[n] + self.quantization[n])
            .collect()
    }

    /// `(T_u P_u)^2`.
    pub fn fade_u_sq(&self) -> f64 {
        let h = self.turbulence_u * self.pointing_u;
        h * h
    }

    /// `(T_e P_e)^2`.
    pub fn fade_e_sq(&self) -> f64 {
        let h = self.turbulence_e * self.pointing_e;
        h * h
    }
}

/// Draws one realization. The draw order is fixed, so a given RNG state
/// always produces the same realization.
pub fn sample_realization<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let n = config.elements;
    let two_pi = 2.0 * PI;
    let uniform_phases = |rng: &mut R| (0..n).map(|_| two_pi * rng.gen::<f64>()).collect::<Vec<_>>();
    let theta_r = uniform_phases(rng);
    let theta_u = uniform_phases(rng);
    let theta_e = uniform_phases(rng);
    let turbulence_u = config.turbulence_u.sample(rng);
    let turbulence_e = config.turbulence_e.sample(rng);
    let (pointing_u, jitter_u) = sample_pointing(&config.pointing_u, rng);
    let (pointing_e, jitter_e) = sample_pointing(&config.pointing_e, rng);
    let pe = &config.phase_error;
    let quantization = match pe.bits {
        Some(b) => (0..n).map(|_| sample_quantization_error(b, rng)).collect(),
        None => vec![0.0; n],
    };
    let (estimation_u, estimation_e) = if pe.has_estimation_error() {
        let u = (0..n).map(|_| sample_von_mises(pe.kappa, rng)).collect();
        let e = (0..n).map(|_| sample_von_mises(pe.kappa, rng)).collect();
        (u, e)
    } else {
        (vec![0.0; n], vec![0.0; n])
    };
    ChannelRealization {
        theta_r,
        theta_u,
        theta_e,
        turbulence_u,
        turbulence_e,
        pointing_u,
        pointing_e,
        jitter_u,
        jitter_e,
        quantization,
        estimation_u,
        estimation_e,
    }
}

/// `|sum_n exp(j (v_n - a_n - b_n + c_n))|^2`.
fn coherent_gain(v: &[f64], a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let s: Complex64 = (0..v.len())
        .map(|n| Complex64::from_polar(1.0, v[n] - a[n] - b[n] + c[n]))
        .sum();
    s.norm_sqr()
}

/// Instantaneous SNRs `(gamma_u, gamma_e)` for RIS phases `phases`.
pub fn received_snrs(config: &SystemConfig, real: &ChannelRealization, phases: &[f64]) -> Result<(f64, f64)> {
    let n = real.elements();
    if phases.len() != n || config.elements != n {
        return Err(Error::Argument(format!(
            "phase vector has {} entries, realization has {n}, config has {}",
            phases.len(),
            config.elements
        )));
    }
    let gu = coherent_gain(phases, &real.theta_r, &real.theta_u, &real.estimation_u);
    let ge = coherent_gain(phases, &real.theta_r, &real.theta_e, &real.estimation_e);
    Ok((
        config.gamma0_u() * real.fade_u_sq() * gu,
        config.gamma0_e() * real.fade_e_sq() * ge,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn path_loss_examples() {
        let link = LinkGeometry::new(500e-6, 19_000.0, 10f64.powf(5.5)).unwrap();
        let l = path_loss(&link);
        assert!(rel(l, 1.386_8e-12) < 1e-4, "{l:e}");
        let far = LinkGeometry::new(500e-6, 38_000.0, 10f64.powf(5.5)).unwrap();
        assert!(rel(path_loss(&far), l / 4.0) < 1e-14);
        let unit = LinkGeometry::new(1.0, 1.0 / (4.0 * PI), 1.0).unwrap();
        assert!((path_loss(&unit) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scintillation_at_defaults() {
        let (a, b) = scintillation_params(500e-6, 19e3, 1e-13).unwrap();
        let s2 = rytov_variance(500e-6, 19e3, 1e-13);
        assert!((s2 - 0.5208).abs() < 1e-3, "{s2}");
        assert!((a - 5.838).abs() < 5e-3 && (b - 4.249).abs() < 5e-3, "{a} {b}");
        let ratio = rytov_variance(500e-6, 20e3, 1e-13) / s2;
        assert!(rel(ratio, (20.0f64 / 19.0).powf(11.0 / 6.0)) < 1e-14);
        assert!(matches!(scintillation_params(500e-6, 19e3, 0.0), Err(Error::Degenerate(_))));
        let (a, b) = scintillation_params(500e-6, 19e3, 1e-22).unwrap();
        assert!(a > 1e6 && b > 1e6);
    }

    #[test]
    fn gamma_gamma_unit_shapes() {
        // alpha = beta = 1: 2 K_0(2 sqrt(T))
        let v = turbulence_pdf(1.0, 1.0, 1.0).unwrap();
        assert!((v - 2.0 * 0.113_893_872_749_533_44).abs() < 1e-12, "{v}");
        assert!(turbulence_pdf(0.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn pointing_at_w_over_l_six() {
        let l = aperture_radius(500e-6, 10f64.powf(5.5));
        let m = pointing_params(l, 6.0 * l, 0.1).unwrap();
        assert!((m.a0 - 0.053_97).abs() < 1e-4, "{}", m.a0);
        assert!((m.ratio_sq() - 1.8556).abs() < 1e-3, "{}", m.ratio_sq());
        let tight = pointing_params(l, 6.0 * l, 1e-9).unwrap();
        assert!(tight.ratio > 1e6);
        let wide = pointing_params(l, 1e4 * l, 0.1).unwrap();
        assert!(wide.a0 < 1e-7);
    }

    #[test]
    fn pointing_draw_endpoint() {
        struct One;
        impl rand::RngCore for One {
            fn next_u32(&mut self) -> u32 {
                0
            }
            fn next_u64(&mut self) -> u64 {
                0
            }
            fn fill_bytes(&mut self, d: &mut [u8]) {
                d.fill(0)
            }
            fn try_fill_bytes(&mut self, d: &mut [u8]) -> std::result::Result<(), rand::Error> {
                d.fill(0);
                Ok(())
            }
        }
        let l = aperture_radius(500e-6, 10f64.powf(5.5));
        let m = pointing_params(l, 6.0 * l, 0.1).unwrap();
        // gen() == 0 means U = 1.
        let (p, j) = sample_pointing(&m, &mut One);
        assert_eq!(p, m.a0);
        assert_eq!(j, 0.0);
    }

    #[test]
    fn quantization_support_and_moments() {
        let mut rng = trial_rng(1, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| sample_quantization_error(3, &mut rng)).collect();
        let h = PI / 8.0;
        assert!(xs.iter().all(|&x| (-h..h).contains(&x)));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 2e-3);
        assert!(rel(var, h * h / 3.0) < 0.01);
    }

    #[test]
    fn von_mises_moments() {
        let mut rng = trial_rng(2, 0);
        let n = 1_000_000;
        let (mut c, mut s) = (0.0, 0.0);
        for _ in 0..n {
            let v = sample_von_mises(5.0, &mut rng);
            assert!((-PI..PI).contains(&v));
            c += v.cos();
            s += v.sin();
        }
        assert!(s.atan2(c).abs() < 0.01);
        let expect = crate::specfun::bessel_i_ratio(1, 5.0);
        assert!((c / n as f64 - expect).abs() < 0.005);
        let tight: f64 = (0..1000).map(|_| sample_von_mises(1e9, &mut rng).abs()).fold(0.0, f64::max);
        assert!(tight < 1e-3);
    }

    #[test]
    fn realization_is_reproducible() {
        let cfg = SystemParams {
            elements: 8,
            mode: ErrorMode::P2,
            ..Default::default()
        }
        .build()
        .unwrap();
        let a = sample_realization(&cfg, &mut trial_rng(9, 4));
        let b = sample_realization(&cfg, &mut trial_rng(9, 4));
        assert_eq!(a, b);
        assert_ne!(a.estimation_u, a.estimation_e);
        let c = sample_realization(&cfg, &mut trial_rng(9, 5));
        assert_ne!(a, c);
        let calm = SystemParams {
            cn2: 0.0,
            ..Default::default()
        }
        .build()
        .unwrap();
        let r = sample_realization(&calm, &mut trial_rng(1, 1));
        assert_eq!((r.turbulence_u, r.turbulence_e), (1.0, 1.0));
    }

    #[test]
    fn snr_examples() {
        let cfg = SystemParams {
            elements: 4,
            bits: None,
            ..Default::default()
        }
        .build()
        .unwrap();
        let real = sample_realization(&cfg, &mut trial_rng(3, 0));
        let perfect: Vec<f64> = (0..4).map(|n| real.theta_r[n] + real.theta_u[n]).collect();
        let (gu, _) = received_snrs(&cfg, &real, &perfect).unwrap();
        assert!(rel(gu, cfg.gamma0_u() * real.fade_u_sq() * 16.0) < 1e-12);

        let phases = [0.3, -1.2, 2.5, 4.0];
        let (gu, ge) = received_snrs(&cfg, &real, &phases).unwrap();
        // Direct evaluation: h_u^H Theta h_r with h = e^{j theta}.
        let mut su = Complex64::new(0.0, 0.0);
        let mut se = Complex64::new(0.0, 0.0);
        for n in 0..4 {
            let hr = Complex64::from_polar(1.0, -real.theta_r[n]);
            let hu = Complex64::from_polar(1.0, real.theta_u[n]);
            let he = Complex64::from_polar(1.0, real.theta_e[n]);
            let t = Complex64::from_polar(1.0, phases[n]);
            su += hu.conj() * t * hr;
            se += he.conj() * t * hr;
        }
        assert!(rel(gu, cfg.gamma0_u() * real.fade_u_sq() * su.norm_sqr()) < 1e-12);
        assert!(rel(ge, cfg.gamma0_e() * real.fade_e_sq() * se.norm_sqr()) < 1e-12);
        assert!(received_snrs(&cfg, &real, &phases[..3]).is_err());
    }

    #[test]
    fn default_snr_constants() {
        let cfg = SystemParams::default().build().unwrap();
        assert!(rel(cfg.gamma0_u(), 77.509) < 1e-4, "{}", cfg.gamma0_u());
        assert!(rel(cfg.gamma0_e(), 69.952) < 1e-4, "{}", cfg.gamma0_e());
    }
}
