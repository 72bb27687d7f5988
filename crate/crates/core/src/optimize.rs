//! RIS phase design.
//!
//! With statistical CSI of the eavesdropper, compensating the cascaded
//! phase of the trusted path is optimal. With perfect CSI the secrecy ratio
//! `(1 + gamma_u) / (1 + gamma_e)` is maximized by semidefinite relaxation:
//! the Charnes-Cooper transform turns the fractional program into
//!
//! ```text
//! maximize  tr(L_u F)
//! s.t.      tr(L_e F) = 1,  F_11 = F_22 = ... = F_NN,  F >= 0
//! ```
//!
//! which is solved over the Hermitian PSD cone (interior point by default,
//! ADMM on request), followed by rank-one extraction and discretization of
//! the phases.

use crate::channel::{received_snrs, ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, hermitian_eig, inverse_from_cholesky, psd_project_warm, trace_product, ComplexVector, Eigen, HermitianMatrix,
};
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

const TWO_PI: f64 = 2.0 * PI;

pub const DEFAULT_SDP_TOL: f64 = 1e-6;
pub const DEFAULT_SDP_MAX_ITERS: usize = 50_000;

/// Cascaded channel vectors `h_r`, `h_u`, `h_e` with entries `e^{j theta_n}`.
pub fn channel_vectors(real: &ChannelRealization) -> Result<(ComplexVector, ComplexVector, ComplexVector)> {
    Ok((
        ComplexVector::from_phases(&real.theta_r)?,
        ComplexVector::from_phases(&real.theta_u)?,
        ComplexVector::from_phases(&real.theta_e)?,
    ))
}

/// `|sum_n t_n conj(h_{r,n} h_{x,n})|`, the magnitude of the cascaded gain.
pub fn cascade_gain(h_r: &ComplexVector, h_x: &ComplexVector, t: &ComplexVector) -> Result<f64> {
    let v = steering(h_r, h_x)?;
    Ok(v.dot(t)?.norm())
}

/// `h_r .* h_x`, so that the cascaded gain is `v^H t`.
fn steering(h_r: &ComplexVector, h_x: &ComplexVector) -> Result<ComplexVector> {
    if h_r.len() != h_x.len() {
        return Err(Error::Argument(format!("channel lengths differ: {} vs {}", h_r.len(), h_x.len())));
    }
    ComplexVector::new(h_r.entries().iter().zip(h_x.entries()).map(|(a, b)| a * b).collect())
}

/// Continuous phases and their discretized counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSolution {
    pub continuous: ComplexVector,
    pub discrete: ComplexVector,
    /// Phases of `discrete`, each an element of `{0, 2pi/2^b, ...}`.
    pub discrete_phases: Vec<f64>,
    pub bits: Option<u32>,
    pub lower_bound_sr: f64,
    pub instantaneous_sr: f64,
    /// Instantaneous SR of the continuous phases.
    pub continuous_instantaneous_sr: f64,
}

/// Phases that make every summand of the trusted cascaded gain real and positive.
pub fn statistical_csi_phases(h_r: &ComplexVector, h_u: &ComplexVector) -> Result<ComplexVector> {
    let v = steering(h_r, h_u)?;
    ComplexVector::new(v.entries().iter().map(|z| Complex64::from_polar(1.0, z.arg())).collect())
}

/// `gamma_bar_u^0` and `gamma_bar_e^0`: received SNR scale including the fades.
pub fn effective_gains(config: &SystemConfig, real: &ChannelRealization) -> (f64, f64) {
    (config.gamma0_u() * real.fade_u_sq(), config.gamma0_e() * real.fade_e_sq())
}

/// `[log2((1 + gbu |h_u^H Theta h_r|^2) / (1 + gbe N))]^+`.
///
/// The trusted cascaded gain includes the realization's estimation error
/// (zero under P1).
pub fn lower_bound_sr(config: &SystemConfig, real: &ChannelRealization, phases: &ComplexVector) -> Result<f64> {
    let (h_r, h_u, _) = channel_vectors(real)?;
    let v = steering(&h_r, &h_u)?;
    if phases.len() != v.len() {
        return Err(Error::Argument(format!("phase vector has {} entries, realization has {}", phases.len(), v.len())));
    }
    let g = v
        .entries()
        .iter()
        .zip(phases.entries())
        .zip(&real.estimation_u)
        .map(|((a, t), nu)| a.conj() * t * Complex64::from_polar(1.0, *nu))
        .sum::<Complex64>()
        .norm();
    let (gbu, gbe) = effective_gains(config, real);
    let n = real.elements() as f64;
    Ok(((gbu * g * g).ln_1p() - (gbe * n).ln_1p()).max(0.0) / LN_2)
}

/// `[log2(1 + gamma_u) - log2(1 + gamma_e)]^+` including any estimation errors.
pub fn instantaneous_sr(config: &SystemConfig, real: &ChannelRealization, phases: &[f64]) -> Result<f64> {
    let (gu, ge) = received_snrs(config, real, phases)?;
    Ok((gu.ln_1p() - ge.ln_1p()).max(0.0) / LN_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrProblem {
    pub lambda_u: HermitianMatrix,
    pub lambda_e: HermitianMatrix,
    pub gain_u: f64,
    pub gain_e: f64,
    steer_u: ComplexVector,
    steer_e: ComplexVector,
}

impl SdrProblem {
    /// From steering vectors `v_x` and gains: `L_x = I/N + g_x v_x v_x^H`.
    pub fn new(steer_u: ComplexVector, steer_e: ComplexVector, gain_u: f64, gain_e: f64) -> Result<Self> {
        let n = steer_u.len();
        if steer_e.len() != n {
            return Err(Error::Argument("steering vectors differ in length".into()));
        }
        if !(gain_u >= 0.0 && gain_e >= 0.0) {
            return Err(Error::Argument("gains must be nonnegative".into()));
        }
        let base = HermitianMatrix::identity(n).scaled(1.0 / n as f64);
        Ok(Self {
            lambda_u: base.add_scaled(&steer_u.outer(), gain_u)?,
            lambda_e: base.add_scaled(&steer_e.outer(), gain_e)?,
            gain_u,
            gain_e,
            steer_u,
            steer_e,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambda_u.dim()
    }

    /// `(t^H L_u t) / (t^H L_e t)`; equals `(1 + gamma_u) / (1 + gamma_e)` for unit-modulus `t`.
    pub fn ratio(&self, t: &ComplexVector) -> Result<f64> {
        let gu = self.steer_u.dot(t)?.norm_sqr();
        let ge = self.steer_e.dot(t)?.norm_sqr();
        let n = self.dim() as f64;
        let s = t.norm().powi(2) / n;
        Ok((s + self.gain_u * gu) / (s + self.gain_e * ge))
    }
}

pub fn build_sdr(config: &SystemConfig, real: &ChannelRealization) -> Result<SdrProblem> {
    let (h_r, h_u, h_e) = channel_vectors(real)?;
    let (gbu, gbe) = effective_gains(config, real);
    SdrProblem::new(steering(&h_r, &h_u)?, steering(&h_r, &h_e)?, gbu, gbe)
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub phi: HermitianMatrix,
    pub eta: f64,
    /// `tr(L_u Phi)`.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|tr(L_e Phi) - 1|`.
    pub trace_residual: f64,
    /// `max_n |Phi_nn - eta|`.
    pub diagonal_residual: f64,
    pub min_eigenvalue: f64,
    /// Eigendecomposition of `phi`.
    pub eigen: Eigen,
}

impl SdpSolution {
    /// `Psi = Phi / eta`.
    pub fn psi(&self) -> HermitianMatrix {
        self.phi.scaled(1.0 / self.eta)
    }
}

/// Algorithm used by [`solve_sdp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdpMethod {
    /// Primal-dual interior point, HKM direction with Mehrotra correction.
    #[default]
    InteriorPoint,
    /// ADMM splitting between the affine constraints and the PSD cone.
    Admm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub method: SdpMethod,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_SDP_TOL,
            max_iters: DEFAULT_SDP_MAX_ITERS,
            method: SdpMethod::default(),
        }
    }
}

type C64 = Complex64;

fn frob_inner(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

fn frob_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn frob(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn matmul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == C64::new(0.0, 0.0) {
                continue;
            }
            let row = &b[k * n..(k + 1) * n];
            let o = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                o[j] += aik * row[j];
            }
        }
    }
    out
}

fn hermitian_part(a: &mut [C64], n: usize) {
    for i in 0..n {
        a[i * n + i].im = 0.0;
        for j in i + 1..n {
            let avg = 0.5 * (a[i * n + j] + a[j * n + i].conj());
            a[i * n + j] = avg;
            a[j * n + i] = avg.conj();
        }
    }
}

/// Scaled problem data: `min <c, X>` subject to `<a0, X> = 1` and
/// `X_00 - X_kk = 0` for `k = 1..n`.
struct ScaledSdp {
    n: usize,
    c: Vec<C64>,
    a0: Vec<C64>,
}

impl ScaledSdp {
    /// The problem is rescaled so that `I` is feasible and the objective has
    /// unit norm; neither changes the maximizer.
    fn new(problem: &SdrProblem) -> Self {
        let n = problem.dim();
        let tr_e = problem.lambda_e.trace();
        let lu_norm = problem.lambda_u.frobenius_norm();
        Self {
            n,
            c: problem.lambda_u.as_slice().iter().map(|z| -z / lu_norm).collect(),
            a0: problem.lambda_e.as_slice().iter().map(|z| z / tr_e).collect(),
        }
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.n];
        b[0] = 1.0;
        b
    }

    /// `Re tr(A_i G)` for each constraint; `G` need not be Hermitian.
    fn apply(&self, g: &[C64]) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n);
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                t += (self.a0[i * n + j] * g[j * n + i]).re;
            }
        }
        out.push(t);
        for k in 1..n {
            out.push(g[0].re - g[k * n + k].re);
        }
        out
    }

    /// `sum_i y_i A_i`.
    fn adjoint(&self, y: &[f64]) -> Vec<C64> {
        let n = self.n;
        let mut out: Vec<C64> = self.a0.iter().map(|z| z * y[0]).collect();
        for k in 1..n {
            out[0] += y[k];
            out[k * n + k] -= y[k];
        }
        out
    }

    /// Schur complement `M_ij = Re tr(A_i X A_j W)`.
    fn schur(&self, x: &[C64], w: &[C64]) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        let q = matmul(&matmul(w, &self.a0, n), x, n);
        let ax = matmul(&self.a0, x, n);
        let aw = matmul(&self.a0, w, n);
        let mut m00 = 0.0;
        for a in 0..n {
            for b in 0..n {
                m00 += (ax[a * n + b] * aw[b * n + a]).re;
            }
        }
        m[0] = m00;
        for j in 1..n {
            let v = (q[0] - q[j * n + j]).re;
            m[j] = v;
            m[j * n] = v;
        }
        for i in 1..n {
            for j in i..n {
                let v = (x[0] * w[0] - x[j] * w[j * n] - x[i * n] * w[i] + x[i * n + j] * w[j * n + i]).re;
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        m
    }
}

/// Solves the symmetric positive definite system `M x = r` in place.
fn spd_solve(m: &[f64], r: &mut [f64], n: usize) -> Result<()> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::Degenerate("Schur complement lost definiteness".into()));
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = r[i];
        for k in 0..i {
            s -= l[i * n + k] * r[k];
        }
        r[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = r[i];
        for k in i + 1..n {
            s -= l[k * n + i] * r[k];
        }
        r[i] = s / l[i * n + i];
    }
    Ok(())
}

/// Largest step in `[0, 1]` keeping `x + a dx` positive definite, damped by `0.98`.
fn step_length(x: &[C64], dx: &[C64], n: usize) -> f64 {
    let at = |a: f64| -> bool {
        let m: Vec<C64> = x.iter().zip(dx).map(|(p, q)| p + q * a).collect();
        cholesky(&m, n).is_some()
    };
    const DAMP: f64 = 0.98;
    if at(1.0 / DAMP) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0 / DAMP);
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if at(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    DAMP * lo
}

struct Direction {
    dx: Vec<C64>,
    dy: Vec<f64>,
    dz: Vec<C64>,
}

#[allow(clippy::too_many_arguments)]
fn newton_direction(
    sdp: &ScaledSdp,
    x: &[C64],
    w: &[C64],
    schur: &[f64],
    rp: &[f64],
    rd: &[C64],
    sigma_mu: f64,
    correction: Option<&Direction>,
) -> Result<Direction> {
    let n = sdp.n;
    // G = sigma mu W - X - X Rd W - dXa dZa W
    let mut g = matmul(&matmul(x, rd, n), w, n);
    if let Some(c) = correction {
        let extra = matmul(&matmul(&c.dx, &c.dz, n), w, n);
        for (gi, ei) in g.iter_mut().zip(&extra) {
            *gi += ei;
        }
    }
    for k in 0..n * n {
        g[k] = w[k] * sigma_mu - x[k] - g[k];
    }
    let ag = sdp.apply(&g);
    let mut dy: Vec<f64> = rp.iter().zip(&ag).map(|(p, a)| p - a).collect();
    spd_solve(schur, &mut dy, n)?;
    let aty = sdp.adjoint(&dy);
    let dz: Vec<C64> = rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
    let xaw = matmul(&matmul(x, &aty, n), w, n);
    let mut dx: Vec<C64> = g.iter().zip(&xaw).map(|(a, b)| a + b).collect();
    hermitian_part(&mut dx, n);
    Ok(Direction { dx, dy, dz })
}

/// Solves the relaxed problem and polishes the result into an exactly
/// feasible point.
pub fn solve_sdp(problem: &SdrProblem, opts: SdpOptions) -> Result<SdpSolution> {
    match opts.method {
        SdpMethod::InteriorPoint => solve_interior_point(problem, opts),
        SdpMethod::Admm => solve_admm(problem, opts),
    }
}

/// Largest eigenvalue of `L^{-1} (-c) L^{-H}` for a lower Cholesky factor `L`.
fn generalized_max_eig(c: &[C64], l: &[C64], n: usize) -> f64 {
    // Solve L T = -c column by column, then L S^H = T^H.
    let zero = C64::new(0.0, 0.0);
    let lower_solve = |rhs: &[C64]| -> Vec<C64> {
        let mut t = vec![zero; n * n];
        for col in 0..n {
            for i in 0..n {
                let mut s = rhs[i * n + col];
                for k in 0..i {
                    s -= l[i * n + k] * t[k * n + col];
                }
                t[i * n + col] = s / l[i * n + i];
            }
        }
        t
    };
    let neg: Vec<C64> = c.iter().map(|v| -v).collect();
    let t = lower_solve(&neg);
    let th: Vec<C64> = (0..n * n).map(|k| t[(k % n) * n + k / n].conj()).collect();
    let mut s = lower_solve(&th);
    hermitian_part(&mut s, n);
    match HermitianMatrix::new(n, s) {
        Ok(m) => hermitian_eig(&m).values[0],
        Err(_) => 1.0,
    }
}

fn solve_interior_point(problem: &SdrProblem, opts: SdpOptions) -> Result<SdpSolution> {
    let sdp = ScaledSdp::new(problem);
    let n = sdp.n;
    let nn = n * n;
    let b = sdp.rhs();
    // Start from the image of the identity under the congruence that maps
    // A0 to I/N; the HKM direction is invariant under that change of frame.
    let l0 = cholesky(&sdp.a0, n).ok_or_else(|| Error::Degenerate("constraint matrix is not definite".into()))?;
    let mut x: Vec<C64> = inverse_from_cholesky(&l0, n).iter().map(|v| v / n as f64).collect();
    let zeta = 2.0 * generalized_max_eig(&sdp.c, &l0, n).max(1e-12);
    let mut z: Vec<C64> = (0..nn).map(|k| sdp.c[k] + sdp.a0[k] * zeta).collect();
    hermitian_part(&mut x, n);
    hermitian_part(&mut z, n);
    let mut y = vec![0.0; n];
    y[0] = -zeta;
    let inner_tol = 1e-2 * opts.tol;
    let c_norm = frob(&sdp.c);
    let (mut pinf, mut dinf) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;
    let max_iters = opts.max_iters.min(200);

    while iterations < max_iters {
        let ax = sdp.apply(&x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let aty = sdp.adjoint(&y);
        let rd: Vec<C64> = (0..nn).map(|k| sdp.c[k] - z[k] - aty[k]).collect();
        let pobj = frob_inner(&sdp.c, &x);
        let dobj = y[0];
        let x_scale = (0..n).map(|i| x[i * n + i].re).fold(0.0, f64::max);
        pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + x_scale);
        dinf = frob(&rd) / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if pinf < inner_tol && dinf < inner_tol && gap < inner_tol {
            converged = true;
            break;
        }
        // Rounding can push a nearly singular dual iterate out of the cone
        // once the gap is at machine precision; stop with what we have.
        let Some(lz) = cholesky(&z, n) else {
            break;
        };
        iterations += 1;
        let w = inverse_from_cholesky(&lz, n);
        let mu = frob_inner(&x, &z) / n as f64;
        let schur = sdp.schur(&x, &w);

        let pred = newton_direction(&sdp, &x, &w, &schur, &rp, &rd, 0.0, None)?;
        let ap = step_length(&x, &pred.dx, n);
        let ad = step_length(&z, &pred.dz, n);
        let xa: Vec<C64> = (0..nn).map(|k| x[k] + pred.dx[k] * ap).collect();
        let za: Vec<C64> = (0..nn).map(|k| z[k] + pred.dz[k] * ad).collect();
        let mu_aff = frob_inner(&xa, &za) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let corr = newton_direction(&sdp, &x, &w, &schur, &rp, &rd, sigma * mu, Some(&pred))?;
        let ap = step_length(&x, &corr.dx, n);
        let ad = step_length(&z, &corr.dz, n);
        for k in 0..nn {
            x[k] += corr.dx[k] * ap;
            z[k] += corr.dz[k] * ad;
        }
        hermitian_part(&mut x, n);
        hermitian_part(&mut z, n);
        for (yi, di) in y.iter_mut().zip(&corr.dy) {
            *yi += di * ad;
        }
    }
    let x = HermitianMatrix::new(n, x)?;
    let phi = polish(&x, problem)?;
    finish(problem, phi, pinf, dinf, iterations, converged)
}

/// Projection onto `{X : diag(X) constant, <c, X> = 1}` where `c` already has
/// a constant diagonal.
fn project_affine(y: &mut [C64], n: usize, c: &[C64], c_norm_sq: f64) {
    let mean = (0..n).map(|i| y[i * n + i].re).sum::<f64>() / n as f64;
    for i in 0..n {
        y[i * n + i] = C64::new(mean, 0.0);
    }
    let t = (frob_inner(c, y) - 1.0) / c_norm_sq;
    for (yi, ci) in y.iter_mut().zip(c) {
        *yi -= ci * t;
    }
}

/// ADMM on `min <c, X>` with `X` in the affine set and `Z` in the PSD cone.
/// The penalty is rebalanced at geometrically spaced iterations only, which
/// avoids the limit cycles that frequent rebalancing can cause.
fn solve_admm(problem: &SdrProblem, opts: SdpOptions) -> Result<SdpSolution> {
    let sdp = ScaledSdp::new(problem);
    let n = sdp.n;
    let nn = n * n;
    let a0_norm_sq = frob_inner(&sdp.a0, &sdp.a0);

    let mut z = HermitianMatrix::identity(n);
    let mut u = vec![C64::new(0.0, 0.0); nn];
    let mut x = vec![C64::new(0.0, 0.0); nn];
    let mut rho = 1.0 / n as f64;
    let mut next_adapt = 50;
    let mut eig: Option<Eigen> = None;
    let mut converged = false;
    let mut iterations = 0;
    let (mut r_pri, mut r_dual) = (f64::INFINITY, f64::INFINITY);

    while iterations < opts.max_iters {
        iterations += 1;
        let zs = z.as_slice();
        for k in 0..nn {
            x[k] = zs[k] - u[k] - sdp.c[k] / rho;
        }
        project_affine(&mut x, n, &sdp.a0, a0_norm_sq);
        let mut v = HermitianMatrix::zeros(n);
        {
            let d = v.data_mut();
            for k in 0..nn {
                d[k] = x[k] + u[k];
            }
        }
        let (z_new, e) = psd_project_warm(&v, eig.as_ref());
        eig = Some(e);
        r_dual = rho * frob_diff(z_new.as_slice(), z.as_slice());
        z = z_new;
        let zs = z.as_slice();
        for k in 0..nn {
            u[k] += x[k] - zs[k];
        }
        r_pri = frob_diff(&x, zs);
        let scale = frob(&x).max(frob(zs)).max(1.0);
        let dual_scale = (rho * frob(&u)).max(1.0);
        if r_pri <= opts.tol * scale && r_dual <= opts.tol * dual_scale {
            converged = true;
            break;
        }
        if iterations >= next_adapt {
            next_adapt *= 2;
            let (rp, rd) = (r_pri / scale, r_dual / dual_scale);
            if rp > 10.0 * rd {
                rho *= 2.0;
                u.iter_mut().for_each(|w| *w *= 0.5);
            } else if rd > 10.0 * rp {
                rho *= 0.5;
                u.iter_mut().for_each(|w| *w *= 2.0);
            }
        }
    }
    let phi = polish(&z, problem)?;
    finish(problem, phi, r_pri, r_dual, iterations, converged)
}

/// Equalizes the diagonal by a diagonal congruence and rescales onto
/// `tr(L_e Phi) = 1`; both steps preserve positive semidefiniteness.
fn polish(z: &HermitianMatrix, problem: &SdrProblem) -> Result<HermitianMatrix> {
    let diag = z.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Degenerate("relaxed solution has a zero diagonal entry".into()));
    }
    let d: Vec<f64> = diag.iter().map(|&v| 1.0 / v.sqrt()).collect();
    let unit = z.congruence_diag(&d);
    let t = trace_product(&problem.lambda_e, &unit)?;
    Ok(unit.scaled(1.0 / t))
}

fn finish(
    problem: &SdrProblem,
    phi: HermitianMatrix,
    primal_residual: f64,
    dual_residual: f64,
    iterations: usize,
    converged: bool,
) -> Result<SdpSolution> {
    let diag = phi.diagonal();
    let eta = diag[0];
    let diagonal_residual = diag.iter().map(|d| (d - eta).abs()).fold(0.0, f64::max);
    let trace_residual = (trace_product(&problem.lambda_e, &phi)? - 1.0).abs();
    let objective = trace_product(&problem.lambda_u, &phi)?;
    let eigen = hermitian_eig(&phi);
    let min_eigenvalue = *eigen.values.last().expect("nonempty");
    Ok(SdpSolution {
        phi,
        eta,
        objective,
        primal_residual,
        dual_residual,
        iterations,
        converged,
        trace_residual,
        diagonal_residual,
        min_eigenvalue,
        eigen,
    })
}

/// Principal eigenvector of `Psi`, scaled by `sqrt(e_max)` and normalized to
/// unit modulus entrywise.
pub fn extract_rank_one(solution: &SdpSolution) -> Result<ComplexVector> {
    let eig = &solution.eigen;
    let e_max = eig.values[0] / solution.eta;
    if !(e_max > 0.0) || !e_max.is_finite() {
        return Err(Error::Degenerate("relaxed solution has no positive eigenvalue".into()));
    }
    let q = eig.vector(0);
    let entries = q
        .entries()
        .iter()
        .map(|z| {
            let w = z * e_max.sqrt();
            if w.norm() > 0.0 {
                w / w.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    ComplexVector::new(entries)
}

/// Numerical rank of `Psi` (eigenvalues above `1e-6 e_max`).
pub fn numerical_rank(solution: &SdpSolution) -> usize {
    let values = &solution.eigen.values;
    values.iter().filter(|&&e| e > 1e-6 * values[0]).count()
}

/// Index into `{0, 2pi/2^b, ...}` of the element nearest to `phase`;
/// ties go to the smaller element, and the top of the circle wraps to 0.
fn quantize_index(phase: f64, levels: u64) -> u64 {
    let step = TWO_PI / levels as f64;
    let x = phase.rem_euclid(TWO_PI) / step;
    let k = (x - 0.5).ceil().max(0.0) as u64;
    k % levels
}

/// Nearest-element discretization of each phase of `t`.
pub fn discretize_phases(t: &ComplexVector, bits: Option<u32>) -> Result<(ComplexVector, Vec<f64>)> {
    let phases: Vec<f64> = match bits {
        None => t.phases().iter().map(|p| p.rem_euclid(TWO_PI)).collect(),
        Some(0) => return Err(Error::Argument("quantization needs at least one bit".into())),
        Some(b) => {
            let levels = 1u64 << b;
            let step = TWO_PI / levels as f64;
            t.phases()
                .iter()
                .map(|&p| quantize_index(p, levels) as f64 * step)
                .collect()
        }
    };
    Ok((ComplexVector::from_phases(&phases)?, phases))
}

/// Discretizes `t` after the global rotation `e^{jc}` that maximizes the
/// secrecy ratio. The objective is invariant to the rotation before
/// discretization, so only the induced set of nearest elements matters;
/// every such set is visited once.
pub fn discretize_aligned(t: &ComplexVector, bits: u32, problem: &SdrProblem) -> Result<(ComplexVector, Vec<f64>)> {
    let levels = 1u64 << bits;
    let step = TWO_PI / levels as f64;
    let phases = t.phases();
    // Rotations at which some entry crosses a decision boundary, reduced to [0, step).
    let mut cuts: Vec<f64> = phases
        .iter()
        .map(|&p| (0.5 * step - p.rem_euclid(step)).rem_euclid(step))
        .collect();
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut best: Option<(f64, ComplexVector, Vec<f64>)> = None;
    for (i, &c) in cuts.iter().enumerate() {
        let next = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + step };
        let offset = 0.5 * (c + next);
        let rotated: Vec<f64> = phases.iter().map(|p| p + offset).collect();
        let (cand, cand_phases) = discretize_phases(&ComplexVector::from_phases(&rotated)?, Some(bits))?;
        let value = problem.ratio(&cand)?;
        if best.as_ref().is_none_or(|(v, _, _)| value > *v) {
            best = Some((value, cand, cand_phases));
        }
    }
    let (_, v, p) = best.expect("at least one element");
    Ok((v, p))
}

#[derive(Debug, Clone)]
pub struct PerfectCsiSolution {
    pub phases: PhaseSolution,
    pub sdp: SdpSolution,
    pub rank: usize,
}

/// Full pipeline: relaxation, SDP solve, rank-one extraction, discretization.
///
/// Evaluation uses the realization's estimation errors, so under P2 the
/// reported instantaneous SR includes the independent Von Mises perturbations.
pub fn optimize_perfect_csi(
    config: &SystemConfig,
    real: &ChannelRealization,
    bits: Option<u32>,
) -> Result<PerfectCsiSolution> {
    optimize_perfect_csi_with(config, real, bits, SdpOptions::default())
}

pub fn optimize_perfect_csi_with(
    config: &SystemConfig,
    real: &ChannelRealization,
    bits: Option<u32>,
    opts: SdpOptions,
) -> Result<PerfectCsiSolution> {
    let problem = build_sdr(config, real)?;
    let sdp = solve_sdp(&problem, opts)?;
    let t = extract_rank_one(&sdp)?;
    let rank = numerical_rank(&sdp);
    let (discrete, discrete_phases) = match bits {
        None => discretize_phases(&t, None)?,
        Some(b) => discretize_aligned(&t, b, &problem)?,
    };
    let cont_phases: Vec<f64> = t.phases();
    Ok(PerfectCsiSolution {
        phases: PhaseSolution {
            lower_bound_sr: lower_bound_sr(config, real, &discrete)?,
            instantaneous_sr: instantaneous_sr(config, real, &discrete_phases)?,
            continuous_instantaneous_sr: instantaneous_sr(config, real, &cont_phases)?,
            continuous: t,
            discrete,
            discrete_phases,
            bits,
        },
        sdp,
        rank,
    })
}

/// Statistical-CSI design for one realization, discretized to `bits`.
pub fn optimize_statistical_csi(
    config: &SystemConfig,
    real: &ChannelRealization,
    bits: Option<u32>,
) -> Result<PhaseSolution> {
    let (h_r, h_u, _) = channel_vectors(real)?;
    let t = statistical_csi_phases(&h_r, &h_u)?;
    let (discrete, discrete_phases) = discretize_phases(&t, bits)?;
    let cont_phases = t.phases();
    Ok(PhaseSolution {
        lower_bound_sr: lower_bound_sr(config, real, &discrete)?,
        instantaneous_sr: instantaneous_sr(config, real, &discrete_phases)?,
        continuous_instantaneous_sr: instantaneous_sr(config, real, &cont_phases)?,
        continuous: t,
        discrete,
        discrete_phases,
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_realization, trial_rng, SystemParams};

    fn random_problem(n: usize, seed: u64, gu: f64, ge: f64) -> SdrProblem {
        use rand::Rng;
        let mut rng = trial_rng(seed, 0);
        let mut ph = || (0..n).map(|_| TWO_PI * rng.gen::<f64>()).collect::<Vec<_>>();
        let u = ComplexVector::from_phases(&ph()).unwrap();
        let e = ComplexVector::from_phases(&ph()).unwrap();
        SdrProblem::new(u, e, gu, ge).unwrap()
    }

    #[test]
    fn quantize_ties_and_wrap() {
        let step = PI;
        assert_eq!(quantize_index(0.5 * step, 2), 0);
        assert_eq!(quantize_index(0.5 * step + 1e-12, 2), 1);
        assert_eq!(quantize_index(TWO_PI - PI / 4.0 + 1e-9, 4), 0);
        assert_eq!(quantize_index(TWO_PI - PI / 4.0 - 1e-9, 4), 3);
    }

    #[test]
    fn scalar_sdp() {
        let p = SdrProblem::new(
            ComplexVector::from_phases(&[0.3]).unwrap(),
            ComplexVector::from_phases(&[1.1]).unwrap(),
            3.0,
            0.5,
        )
        .unwrap();
        let s = solve_sdp(&p, SdpOptions::default()).unwrap();
        assert!((s.phi.get(0, 0).re - 1.0 / 1.5).abs() < 1e-12);
        assert!((s.objective - 4.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn sdp_bounds_feasible_points() {
        use rand::Rng;
        for seed in 0..10 {
            let p = random_problem(4, seed, 2.0, 1.5);
            let s = solve_sdp(&p, SdpOptions::default()).unwrap();
            assert!(s.converged, "seed {seed}: {} iterations", s.iterations);
            assert!(s.trace_residual < 1e-6 && s.diagonal_residual < 1e-6 && s.min_eigenvalue > -1e-8);
            let mut rng = trial_rng(seed, 99);
            for _ in 0..200 {
                let t = ComplexVector::from_phases(&(0..4).map(|_| TWO_PI * rng.gen::<f64>()).collect::<Vec<_>>()).unwrap();
                assert!(p.ratio(&t).unwrap() <= s.objective * (1.0 + 1e-6));
            }
        }
    }

    #[test]
    fn admm_agrees_with_interior_point() {
        for seed in 0..5 {
            let p = random_problem(5, seed, 3.0, 2.0);
            let a = solve_sdp(&p, SdpOptions { method: SdpMethod::Admm, ..Default::default() }).unwrap();
            let b = solve_sdp(&p, SdpOptions::default()).unwrap();
            assert!(a.converged && b.converged);
            assert!(((a.objective - b.objective) / b.objective).abs() < 1e-4, "{} {}", a.objective, b.objective);
        }
    }

    #[test]
    fn rank_one_recovery() {
        let v = ComplexVector::from_phases(&[0.0, 1.0, 2.5, -0.7]).unwrap();
        let p = random_problem(4, 1, 1.0, 1.0);
        let phi = v.outer().scaled(0.25);
        let sol = finish(&p, phi, 0.0, 0.0, 0, true).unwrap();
        let t = extract_rank_one(&sol).unwrap();
        let c = v.dot(&t).unwrap();
        assert!((c.norm() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn statistical_phases_align() {
        let cfg = SystemParams {
            elements: 16,
            ..Default::default()
        }
        .build()
        .unwrap();
        let real = sample_realization(&cfg, &mut trial_rng(5, 0));
        let (h_r, h_u, _) = channel_vectors(&real).unwrap();
        let t = statistical_csi_phases(&h_r, &h_u).unwrap();
        assert!((cascade_gain(&h_r, &h_u, &t).unwrap() - 16.0).abs() < 1e-12);
        for b in 1..=3 {
            let (d, _) = discretize_phases(&t, Some(b)).unwrap();
            let g = cascade_gain(&h_r, &h_u, &d).unwrap();
            assert!(g >= 16.0 * (PI / 2f64.powi(b as i32)).cos() - 1e-12);
        }
        let zero = ComplexVector::from_phases(&[0.0; 3]).unwrap();
        let t0 = statistical_csi_phases(&zero, &zero).unwrap();
        assert!(t0.entries().iter().all(|z| (z - 1.0).norm() < 1e-15));
    }

    #[test]
    fn lambda_u_quadratic_form_matches_snr() {
        let cfg = SystemParams {
            elements: 8,
            ..Default::default()
        }
        .build()
        .unwrap();
        let real = sample_realization(&cfg, &mut trial_rng(9, 0));
        let p = build_sdr(&cfg, &real).unwrap();
        let phases = [0.1, 0.7, 2.0, 3.3, 4.1, 5.0, 5.9, 1.4];
        let t = ComplexVector::from_phases(&phases).unwrap();
        let (gu, _) = received_snrs(&cfg, &real, &phases).unwrap();
        let q = p.lambda_u.quadratic_form(&t).unwrap();
        assert!(((q - 1.0) - gu).abs() < 1e-10 * gu.max(1.0));
    }
}
