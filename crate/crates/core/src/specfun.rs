//! Special functions and the Gauss-Laguerre rule used by the fading analysis.
//!
//! Everything here is plain `f64` arithmetic with no external numerics
//! dependency. Accuracy targets are noted per function.

use crate::error::{Error, Result};
use std::f64::consts::{FRAC_2_SQRT_PI, PI};

const EPS: f64 = f64::EPSILON;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

// Lanczos approximation, g = 607/128, 15 terms.
const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_091_82,
    57.156_235_665_862_923_517,
    -59.597_960_355_475_491_248,
    14.136_097_974_741_747_174,
    -0.491_913_816_097_620_199_78,
    0.339_946_499_848_118_886_99e-4,
    0.465_236_289_270_485_756_65e-4,
    -0.983_744_753_048_795_646_77e-4,
    0.158_088_703_224_912_488_84e-3,
    -0.210_264_441_724_104_883_19e-3,
    0.217_439_618_115_212_643_20e-3,
    -0.164_318_106_536_763_890_22e-3,
    0.844_182_239_838_527_432_93e-4,
    -0.261_908_384_015_814_086_70e-4,
    0.368_991_826_595_316_227_04e-5,
];

fn lanczos_sum(z: f64) -> f64 {
    let mut s = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (z + k as f64);
    }
    s
}

/// `sin(pi x)` with exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    if r < 0.5 {
        (PI * r).sin()
    } else if r < 1.5 {
        (PI * (1.0 - r)).sin()
    } else {
        (PI * (r - 2.0)).sin()
    }
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Gamma function. Negative non-integer arguments use the reflection formula.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("gamma of NaN".into()));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Domain(format!("gamma has a pole at {x}")));
    }
    if x < 0.5 {
        let s = sin_pi(x);
        let g = gamma_fn(1.0 - x)?;
        return Ok(PI / (s * g));
    }
    if x == x.floor() && x <= 171.0 {
        let mut p = 1.0;
        let mut k = 2.0;
        while k < x {
            p *= k;
            k += 1.0;
        }
        return Ok(p);
    }
    if x > 171.624_376_956_302_7 {
        return Err(Error::Overflow(format!("gamma({x}) exceeds f64 range")));
    }
    if x > 140.0 {
        return Ok(ln_gamma(x)?.exp());
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok((2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z))
}

/// Natural log of `|Gamma(x)|`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if is_nonpositive_integer(x) || x.is_nan() {
        return Err(Error::Domain(format!("ln_gamma has a pole at {x}")));
    }
    if x < 0.5 {
        let s = sin_pi(x).abs();
        return Ok(PI.ln() - s.ln() - ln_gamma(1.0 - x)?);
    }
    if x == 1.0 || x == 2.0 {
        return Ok(0.0);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(LN_SQRT_2PI + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// Sign of `Gamma(x)` (for `x` not a pole).
pub fn gamma_sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if (x.floor() as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Lower incomplete gamma by its power series, valid for `a > 0`.
/// Returns `sum` with `gamma(a, x) = sum * exp(-x + a ln x)`.
fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Continued fraction (modified Lentz) for `Gamma(a, x) * exp(x) * x^-a`.
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = if b == 0.0 { 1.0 / TINY } else { 1.0 / b };
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Exponential integral `E1(x)` for `x > 0`.
fn exp_integral_e1(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_860_606_512_090_082;
    if x < 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < EPS * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER - x.ln() - sum
    } else {
        // Gamma(0, x) via the general continued fraction.
        upper_gamma_cf(0.0, x) * (-x).exp()
    }
}

/// Upper incomplete gamma `Gamma(a, x) = int_x^inf t^(a-1) e^-t dt`.
///
/// `a` may be any real number, including negative values; `x = 0` is
/// only allowed for `a > 0`.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() || a.is_nan() {
        return Err(Error::Domain(format!("upper_incomplete_gamma({a}, {x}) requires x >= 0")));
    }
    if x == 0.0 {
        if a > 0.0 {
            return gamma_fn(a);
        }
        return Err(Error::Domain(format!("upper_incomplete_gamma({a}, 0) diverges")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x >= 1.0 && x >= a + 1.0 {
        return Ok(upper_gamma_cf(a, x) * (a * x.ln() - x).exp());
    }
    if a > 0.0 {
        let lower = lower_gamma_series(a, x) * (a * x.ln() - x).exp();
        if x < a + 1.0 {
            return Ok(gamma_fn(a)? - lower);
        }
    }
    // a <= 0 with 0 < x < 1: recur downward from a fractional start in (0, 1].
    let steps = (-a).floor() as i64 + 1;
    let start = a + steps as f64;
    let mut s = start;
    let mut value = if start >= 1.0 {
        // a was a non-positive integer: start from Gamma(1, x) = e^-x and
        // pass through Gamma(0, x) = E1(x).
        s = 0.0;
        exp_integral_e1(x)
    } else {
        gamma_fn(start)? - lower_gamma_series(start, x) * (start * x.ln() - x).exp()
    };
    // Gamma(s - 1, x) = (Gamma(s, x) - x^(s-1) e^-x) / (s - 1)
    while s - 1.0 >= a - 1e-12 {
        let sm1 = s - 1.0;
        value = (value - (sm1 * x.ln() - x).exp()) / sm1;
        s = sm1;
    }
    Ok(value)
}

/// Regularized lower incomplete gamma `P(a, x)` for `a > 0`.
pub fn regularized_gamma_p(a: f64, x: f64) -> Result<f64> {
    if a <= 0.0 || x < 0.0 {
        return Err(Error::Domain(format!("regularized_gamma_p({a}, {x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let lg = ln_gamma(a)?;
    if x < a + 1.0 {
        Ok((lower_gamma_series(a, x).ln() + a * x.ln() - x - lg).exp().min(1.0))
    } else {
        Ok(1.0 - (upper_gamma_cf(a, x).ln() + a * x.ln() - x - lg).exp())
    }
}

/// Error function, absolute error below 1e-15 over the real line.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax == 0.0 {
        return x;
    }
    let v = if ax < 2.5 {
        // erf(x) = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!  (no cancellation)
        let x2 = ax * ax;
        let mut term = ax;
        let mut sum = ax;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
            if term < EPS * sum {
                break;
            }
        }
        FRAC_2_SQRT_PI * (-x2).exp() * sum
    } else {
        1.0 - erfc_cf(ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Complementary error function, accurate in the far tail.
pub fn erfc(x: f64) -> f64 {
    if x < 2.5 {
        1.0 - erf(x)
    } else {
        erfc_cf(x)
    }
}

/// `erfc(x)` for `x >= 2` by Lentz evaluation of the Laplace continued fraction.
fn erfc_cf(x: f64) -> f64 {
    if x > 27.3 {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    // erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Modified Bessel function of the second kind `K_nu(x)` for real order.
///
/// Below `x = 20` the integral `int_0^inf e^{-x cosh t} cosh(nu t) dt` is
/// evaluated by step-halving trapezoid sums (the integrand is even and
/// analytic, so the rule converges geometrically). From `x = 20` on the
/// Hankel expansion is used whenever its smallest term is negligible.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || nu.is_nan() {
        return Err(Error::Domain(format!("bessel_k requires x > 0, got {x}")));
    }
    let nu = nu.abs();
    if x >= 20.0 {
        if let Some(v) = bessel_k_hankel(nu, x) {
            return Ok(v);
        }
    }
    Ok(bessel_k_integral(nu, x))
}

fn bessel_k_hankel(nu: f64, x: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kk = k as f64;
        let next = term * (mu - (2.0 * kk - 1.0).powi(2)) / (kk * 8.0 * x);
        if next.abs() > term.abs() && k > 1 {
            return None;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            return Some((PI / (2.0 * x)).sqrt() * (-x).exp() * sum);
        }
    }
    None
}

fn bessel_k_integral(nu: f64, x: f64) -> f64 {
    // Scaled integrand: exp(-x (cosh t - 1)) cosh(nu t); result times e^{-x}.
    let log_g = |t: f64| -x * (t.cosh() - 1.0) + nu * t + (0.5 * (1.0 + (-2.0 * nu * t).exp())).ln();
    // Locate the peak and the truncation point 40 e-folds below it.
    let mut peak = log_g(0.0);
    let mut t = 0.0;
    let upper = loop {
        t += 0.05;
        let v = log_g(t);
        if v > peak {
            peak = v;
        } else if v < peak - 40.0 || t > 800.0 {
            break t;
        }
    };
    let g = |t: f64| (log_g(t) - peak).exp();
    let mut n = 64usize;
    let mut h = upper / n as f64;
    let mut sum = 0.5 * g(0.0) + 0.5 * g(upper);
    for i in 1..n {
        sum += g(i as f64 * h);
    }
    let mut prev = sum * h;
    loop {
        // Add the midpoints of the current grid.
        let mut mid = 0.0;
        for i in 0..n {
            mid += g((i as f64 + 0.5) * h);
        }
        sum += mid;
        n *= 2;
        h *= 0.5;
        let cur = sum * h;
        if (cur - prev).abs() <= 1e-15 * cur.abs() || n > 1 << 20 {
            return cur * (peak - x).exp();
        }
        prev = cur;
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> Result<f64> {
    bessel_i(0, x)
}

/// Modified Bessel function of the first kind for integer order `n`.
pub fn bessel_i(n: u32, x: f64) -> Result<f64> {
    let ax = x.abs();
    if ax > 700.0 {
        return Err(Error::Overflow(format!("bessel_i({n}, {x}) exceeds f64 range")));
    }
    let v = if ax <= 30.0 + n as f64 {
        bessel_i_series(n, ax)
    } else {
        bessel_i_scaled_asymptotic(n, ax) * ax.exp()
    };
    if x < 0.0 && n % 2 == 1 {
        Ok(-v)
    } else {
        Ok(v)
    }
}

fn bessel_i_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + n as f64));
        sum += term;
        if term < EPS * sum {
            break;
        }
    }
    sum
}

/// `e^{-x} I_n(x)` from the large-argument expansion.
fn bessel_i_scaled_asymptotic(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        let kk = k as f64;
        let next = -term * (mu - (2.0 * kk - 1.0).powi(2)) / (kk * 8.0 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < EPS * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// `I_n(x) / I_0(x)` without overflow for large `x`.
pub fn bessel_i_ratio(n: u32, x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 30.0 + n as f64 {
        let r = bessel_i_series(n, ax) / bessel_i_series(0, ax);
        if x < 0.0 && n % 2 == 1 {
            -r
        } else {
            r
        }
    } else {
        let r = bessel_i_scaled_asymptotic(n, ax) / bessel_i_scaled_asymptotic(0, ax);
        if x < 0.0 && n % 2 == 1 {
            -r
        } else {
            r
        }
    }
}

/// Result of a `1F3` series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyp1F3 {
    pub value: f64,
    /// Largest `|term| / |sum|` seen; large values mean cancellation.
    pub max_term_ratio: f64,
    pub terms: usize,
    /// Set when cancellation exceeded [`HYP_CANCELLATION_LIMIT`] or the series did not settle.
    pub low_confidence: bool,
}

pub const HYP_CANCELLATION_LIMIT: f64 = 1e8;
const HYP_MAX_TERMS: usize = 10_000;
const HYP_REL_TOL: f64 = 1e-12;

/// Generalized hypergeometric `1F3(a; b1, b2, b3; x)` by its power series.
pub fn hyp1f3(a: f64, b1: f64, b2: f64, b3: f64, x: f64) -> Result<Hyp1F3> {
    for b in [b1, b2, b3] {
        if is_nonpositive_integer(b) {
            return Err(Error::Domain(format!("1F3 denominator parameter {b} is a pole")));
        }
    }
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut max_term = 1.0f64;
    let mut n = 0usize;
    let mut settled = false;
    let mut quiet = 0;
    while n < HYP_MAX_TERMS {
        let k = n as f64;
        let num = a + k;
        if num == 0.0 {
            settled = true;
            break;
        }
        term *= num / ((b1 + k) * (b2 + k) * (b3 + k) * (k + 1.0)) * x;
        n += 1;
        sum += term;
        max_term = max_term.max(term.abs());
        if !term.is_finite() || !sum.is_finite() {
            break;
        }
        // Converged once past the hump with two consecutive negligible terms.
        if term.abs() <= HYP_REL_TOL * 1e-4 * sum.abs() {
            quiet += 1;
            if quiet >= 2 {
                settled = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let ratio = if sum != 0.0 { max_term / sum.abs() } else { f64::INFINITY };
    Ok(Hyp1F3 {
        value: sum,
        max_term_ratio: ratio,
        terms: n + 1,
        low_confidence: !settled || !(ratio <= HYP_CANCELLATION_LIMIT) || !sum.is_finite(),
    })
}

/// Gauss-Laguerre rule for the weight `e^{-x}` on `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `sum_i w_i f(x_i)`, approximating `int_0^inf e^-x f(x) dx`.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

pub const MAX_LAGUERRE_ORDER: usize = 128;

/// Laguerre polynomials `(L_{n-1}(x), L_n(x))` by three-term recurrence.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = 1.0 - x;
    if n == 0 {
        return (0.0, 1.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0 - x) * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p0, p1)
}

/// Nodes and weights of the order-`m` Gauss-Laguerre rule.
///
/// Initial node estimates are the eigenvalues of the Jacobi matrix
/// (Golub-Welsch), each polished by Newton iteration on `L_m`.
pub fn gauss_laguerre(m: usize) -> Result<QuadratureRule> {
    if m == 0 || m > MAX_LAGUERRE_ORDER {
        return Err(Error::Argument(format!(
            "Gauss-Laguerre order must be in 1..={MAX_LAGUERRE_ORDER}, got {m}"
        )));
    }
    let mut diag: Vec<f64> = (0..m).map(|i| 2.0 * i as f64 + 1.0).collect();
    let mut off: Vec<f64> = (0..m).map(|i| i as f64).collect();
    symmetric_tridiagonal_eigenvalues(&mut diag, &mut off)?;
    diag.sort_by(|a, b| a.total_cmp(b));

    let mf = m as f64;
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for &guess in &diag {
        let mut x = guess.max(1e-300);
        for _ in 0..100 {
            let (pm1, p) = laguerre_pair(m, x);
            let dp = mf * (p - pm1) / x;
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 4.0 * EPS * x.abs() {
                break;
            }
        }
        let (pm1, p) = laguerre_pair(m, x);
        let dp = mf * (p - pm1) / x;
        nodes.push(x);
        weights.push(1.0 / (x * dp * dp));
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL with shifts).
/// `off[i]` couples rows `i-1` and `i`; `off[0]` is ignored.
fn symmetric_tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= EPS * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                return Err(Error::Degenerate("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_closed_forms() {
        assert!(rel(gamma_fn(0.5).unwrap(), PI.sqrt()) < 1e-14);
        assert_eq!(gamma_fn(5.0).unwrap(), 24.0);
        assert!(rel(gamma_fn(-0.5).unwrap(), -2.0 * PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(1.5).unwrap(), 0.5 * PI.sqrt()) < 1e-14);
    }

    #[test]
    fn gamma_poles_are_domain_errors() {
        for x in [0.0, -1.0, -7.0] {
            assert!(matches!(gamma_fn(x), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn gamma_recurrence_and_log() {
        for &x in &[0.1f64, 0.7, 2.3, 9.9, 33.3, 120.5, -2.5, -0.3] {
            let g = gamma_fn(x).unwrap();
            let g1 = gamma_fn(x + 1.0).unwrap();
            assert!(rel(g1, x * g) < 2e-14, "x={x}");
            assert!((ln_gamma(x).unwrap() - g.abs().ln()).abs() < 1e-13 * g.abs().ln().abs().max(1.0));
            assert_eq!(gamma_sign(x), g.signum());
        }
    }

    #[test]
    fn incomplete_gamma_closed_forms() {
        for &x in &[0.01f64, 0.5, 1.0, 3.0, 10.0, 40.0] {
            assert!(rel(upper_incomplete_gamma(1.0, x).unwrap(), (-x).exp()) < 1e-13);
            // Gamma(2, x) = (1 + x) e^-x
            assert!(rel(upper_incomplete_gamma(2.0, x).unwrap(), (1.0 + x) * (-x).exp()) < 1e-13);
            // Gamma(0, x) = E1(x); Gamma(-1, x) = e^-x / x - E1(x)
            let e1 = upper_incomplete_gamma(0.0, x).unwrap();
            assert!(rel(upper_incomplete_gamma(-1.0, x).unwrap(), (-x).exp() / x - e1) < 1e-11);
        }
        assert!(rel(upper_incomplete_gamma(3.7, 0.0).unwrap(), gamma_fn(3.7).unwrap()) < 1e-15);
        assert!(upper_incomplete_gamma(-2.0, 0.0).is_err());
        assert!(upper_incomplete_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn incomplete_gamma_half_integer() {
        // Gamma(1/2, x) = sqrt(pi) erfc(sqrt(x))
        for &x in &[0.05f64, 0.8, 2.0, 6.0, 20.0] {
            let expect = PI.sqrt() * erfc(x.sqrt());
            assert!(rel(upper_incomplete_gamma(0.5, x).unwrap(), expect) < 1e-12, "x={x}");
        }
        // Gamma(-1/2, x) = 2 e^-x / sqrt(x) - 2 sqrt(pi) erfc(sqrt(x))
        for &x in &[0.05f64, 0.8, 2.0, 6.0] {
            let expect = 2.0 * (-x).exp() / x.sqrt() - 2.0 * PI.sqrt() * erfc(x.sqrt());
            assert!(rel(upper_incomplete_gamma(-0.5, x).unwrap(), expect) < 1e-10, "x={x}");
        }
    }

    #[test]
    fn erf_values() {
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(30.0) - 1.0).abs() < 1e-16);
        assert!((erf(1.0) - 0.842_700_792_949_714_869_341_220_635_082_6).abs() < 1e-15);
        assert!((erf(3.0) - 0.999_977_909_503_001_414_558_627_223_870_4).abs() < 1e-15);
        assert!((erfc(5.0) - 1.537_459_794_428_034_850_188_343_485_383e-12).abs() < 1e-25);
        for &x in &[0.1f64, 0.9, 2.49, 2.51, 4.0] {
            assert_eq!(erf(-x), -erf(x));
        }
    }

    #[test]
    fn bessel_k_half_order_closed_form() {
        for &x in &[0.01f64, 0.3, 1.0, 5.0, 19.0, 21.0, 60.0] {
            let expect = (PI / (2.0 * x)).sqrt() * (-x).exp();
            assert!(rel(bessel_k(0.5, x).unwrap(), expect) < 1e-12, "x={x}");
            assert_eq!(bessel_k(-1.3, x).unwrap(), bessel_k(1.3, x).unwrap());
        }
        assert!(bessel_k(1.0, 0.0).is_err());
    }

    #[test]
    fn bessel_k_recurrence() {
        // K_{nu+1}(x) = K_{nu-1}(x) + (2 nu / x) K_nu(x)
        for &(nu, x) in &[(1.59, 2.0), (0.3, 0.05), (2.2, 25.0), (1.0, 19.99)] {
            let lhs = bessel_k(nu + 1.0, x).unwrap();
            let rhs = bessel_k(nu - 1.0, x).unwrap() + 2.0 * nu / x * bessel_k(nu, x).unwrap();
            assert!(rel(lhs, rhs) < 1e-12, "nu={nu} x={x}");
        }
    }

    #[test]
    fn bessel_i_values() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_i0(-3.2).unwrap(), bessel_i0(3.2).unwrap());
        assert!(rel(bessel_i0(1.0).unwrap(), 1.266_065_877_752_008_335_598_244_625_214_7) < 1e-15);
        // Continuity across the series/asymptotic switch.
        assert!(rel(bessel_i(1, 30.999_999).unwrap(), 2_055_970_771_654.297_7) < 1e-13);
        assert!(rel(bessel_i(1, 31.000_001).unwrap(), 2_055_974_818_936.824_6) < 1e-13);
        assert!(rel(bessel_i(1, 31.0).unwrap(), 2_055_972_795_294.563_2) < 1e-13);
        assert!(matches!(bessel_i0(800.0), Err(Error::Overflow(_))));
        // Wronskian-style identity I_2 = I_0 - (2/x) I_1
        for &x in &[0.5f64, 5.0, 50.0] {
            let i0 = bessel_i(0, x).unwrap();
            let i1 = bessel_i(1, x).unwrap();
            let i2 = bessel_i(2, x).unwrap();
            assert!(rel(i2, i0 - 2.0 / x * i1) < 1e-12, "x={x}");
            assert!(rel(bessel_i_ratio(1, x), i1 / i0) < 1e-13);
        }
    }

    #[test]
    fn hyp1f3_basic() {
        let r = hyp1f3(0.3, 1.2, 2.2, 3.2, 0.0).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(!r.low_confidence);
        assert!(matches!(hyp1f3(1.0, -2.0, 1.0, 1.0, 0.5), Err(Error::Domain(_))));
        // terminating series: a = -1 gives 1 + x / (b1 b2 b3)
        let r = hyp1f3(-1.0, 2.0, 3.0, 4.0, 5.0).unwrap();
        assert!((r.value - (1.0 - 5.0 / 24.0)).abs() < 1e-15);
    }

    #[test]
    fn hyp1f3_flags_cancellation() {
        let r = hyp1f3(0.5, 1.5, 2.0, 2.5, -1e7).unwrap();
        assert!(r.low_confidence);
        assert!(r.max_term_ratio > HYP_CANCELLATION_LIMIT);
    }

    #[test]
    fn laguerre_small_orders() {
        let r1 = gauss_laguerre(1).unwrap();
        assert!((r1.nodes[0] - 1.0).abs() < 1e-15 && (r1.weights[0] - 1.0).abs() < 1e-15);
        let r2 = gauss_laguerre(2).unwrap();
        let s = 2f64.sqrt();
        assert!((r2.nodes[0] - (2.0 - s)).abs() < 1e-14);
        assert!((r2.nodes[1] - (2.0 + s)).abs() < 1e-14);
        assert!((r2.weights[0] - (2.0 + s) / 4.0).abs() < 1e-14);
        assert!((r2.weights[1] - (2.0 - s) / 4.0).abs() < 1e-14);
        assert!(gauss_laguerre(0).is_err());
        assert!(gauss_laguerre(129).is_err());
    }

    #[test]
    fn laguerre_rule_invariants() {
        for m in [1usize, 3, 10, 30, 64, 100, 128] {
            let r = gauss_laguerre(m).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12, "m={m}");
            assert!(r.nodes[0] > 0.0);
            assert!(r.nodes.windows(2).all(|w| w[1] > w[0]));
            assert!(r.weights.iter().all(|&w| w > 0.0));
            // monomials x^k, k <= 2m-1, integrate to k! (checked in log space)
            for k in [1usize, m, 2 * m - 1] {
                let lk = ln_gamma(k as f64 + 1.0).unwrap();
                let s: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(&x, &w)| (w.ln() + k as f64 * x.ln() - lk).exp())
                    .sum();
                assert!((s - 1.0).abs() < 1e-10, "m={m} k={k} got {s}");
            }
        }
    }
}
