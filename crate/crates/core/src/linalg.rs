//! Dense complex linear algebra for the SDR optimizer.
//!
//! Matrices are small (N up to a few hundred), so everything is row-major
//! `Vec<Complex64>` with no blocking. The eigensolver is cyclic complex
//! Jacobi; it accepts an optional starting basis so that a sequence of
//! slowly-changing matrices (as produced inside an operator-splitting loop)
//! can be diagonalized in one or two sweeps.

use crate::error::{Error, Result};
use num_complex::Complex64;

const HERMITIAN_TOL: f64 = 1e-12;
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    entries: Vec<Complex64>,
}

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Argument("vector must have at least one entry".into()));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Argument("vector entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    /// Unit-modulus vector `[e^{j p_1}, ..., e^{j p_N}]`.
    pub fn from_phases(phases: &[f64]) -> Result<Self> {
        Self::new(phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.entries
    }

    pub fn phases(&self) -> Vec<f64> {
        self.entries.iter().map(|z| z.arg()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product `self^H other`.
    pub fn dot(&self, other: &ComplexVector) -> Result<Complex64> {
        if self.len() != other.len() {
            return Err(Error::Argument(format!("length mismatch: {} vs {}", self.len(), other.len())));
        }
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| a.conj() * b).sum())
    }

    /// Rank-one matrix `v v^H`.
    pub fn outer(&self) -> HermitianMatrix {
        let n = self.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.entries[i] * self.entries[j].conj();
            }
            data[i * n + i].im = 0.0;
        }
        HermitianMatrix { n, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Builds from row-major entries, rejecting anything that is not Hermitian
    /// to within `1e-12` (scaled by the largest entry when that exceeds one).
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::Argument(format!("expected {n}x{n} entries, got {}", data.len())));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Argument("matrix entries must be finite".into()));
        }
        let scale = data.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        for i in 0..n {
            for j in i..n {
                let d = (data[i * n + j] - data[j * n + i].conj()).norm();
                if d > HERMITIAN_TOL * scale {
                    return Err(Error::Argument(format!("matrix is not Hermitian at ({i}, {j}): mismatch {d:e}")));
                }
            }
        }
        let mut m = Self { n, data };
        m.symmetrize();
        Ok(m)
    }

    pub(crate) fn from_data(n: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        let mut m = Self { n, data };
        m.symmetrize();
        m
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_real_diagonal(&vec![1.0; n])
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(v, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.n + i].re).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &HermitianMatrix, s: f64) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b * s).collect(),
        })
    }

    /// Quadratic form `v^H A v` (real for Hermitian `A`).
    pub fn quadratic_form(&self, v: &ComplexVector) -> Result<f64> {
        if v.len() != self.n {
            return Err(Error::Argument(format!("length mismatch: {} vs {}", v.len(), self.n)));
        }
        let x = v.entries();
        let mut acc = 0.0;
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let ax: Complex64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            acc += (x[i].conj() * ax).re;
        }
        Ok(acc)
    }

    /// `D A D` for a real diagonal `D`.
    pub(crate) fn congruence_diag(&self, d: &[f64]) -> Self {
        let n = self.n;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] *= d[i] * d[j];
            }
        }
        out
    }

    fn check_dim(&self, other: &HermitianMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Argument(format!("dimension mismatch: {} vs {}", self.n, other.n)));
        }
        Ok(())
    }

    fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in i + 1..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }
}

/// Eigenpairs sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Row-major `n x n`; column `k` is the eigenvector for `values[k]`.
    basis: Vec<Complex64>,
    n: usize,
    pub sweeps: usize,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> ComplexVector {
        ComplexVector {
            entries: (0..self.n).map(|i| self.basis[i * self.n + k]).collect(),
        }
    }

    pub fn vectors(&self) -> Vec<ComplexVector> {
        (0..self.n).map(|k| self.vector(k)).collect()
    }

    /// `sum_k f(e_k) v_k v_k^H`.
    pub fn reconstruct_with<F: Fn(f64) -> f64>(&self, f: F) -> HermitianMatrix {
        let n = self.n;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for k in 0..n {
            let w = f(self.values[k]);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.basis[i * n + k] * w;
                for j in 0..n {
                    data[i * n + j] += vi * self.basis[j * n + k].conj();
                }
            }
        }
        HermitianMatrix::from_data(n, data)
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
pub fn hermitian_eig(a: &HermitianMatrix) -> Eigen {
    hermitian_eig_warm(a, None)
}

/// As [`hermitian_eig`], starting from the eigenbasis of a nearby matrix.
///
/// The starting basis only affects the number of sweeps; a basis of the
/// wrong dimension is ignored.
pub fn hermitian_eig_warm(a: &HermitianMatrix, start: Option<&Eigen>) -> Eigen {
    let n = a.n;
    let (mut m, mut v) = match start.filter(|e| e.n == n) {
        Some(e) => (similarity(&a.data, &e.basis, n), e.basis.clone()),
        None => {
            let mut id = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                id[i * n + i] = Complex64::new(1.0, 0.0);
            }
            (a.data.clone(), id)
        }
    };
    let fro = a.frobenius_norm();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * fro || fro == 0.0 {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, n, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].re.total_cmp(&m[i * n + i].re));
    let values = order.iter().map(|&k| m[k * n + k].re).collect();
    let mut basis = vec![Complex64::new(0.0, 0.0); n * n];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            basis[i * n + dst] = v[i * n + src];
        }
    }
    Eigen { values, basis, n, sweeps }
}

/// `Q^H A Q` for row-major `A`, `Q`.
fn similarity(a: &[Complex64], q: &[Complex64], n: usize) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let mut aq = vec![zero; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == zero {
                continue;
            }
            for j in 0..n {
                aq[i * n + j] += aik * q[k * n + j];
            }
        }
    }
    let mut out = vec![zero; n * n];
    for k in 0..n {
        for i in 0..n {
            let qki = q[k * n + i].conj();
            for j in 0..n {
                out[i * n + j] += qki * aq[k * n + j];
            }
        }
    }
    out
}

fn rotate(m: &mut [Complex64], v: &mut [Complex64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    let r = apq.norm();
    let app = m[p * n + p].re;
    let aqq = m[q * n + q].re;
    if r < 1e-300 {
        m[p * n + q] = Complex64::new(0.0, 0.0);
        m[q * n + p] = Complex64::new(0.0, 0.0);
        return;
    }
    let phase = apq / r;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // Columns p, q of the unitary: (c, -s e^{-i phi}) and (s, c e^{-i phi}).
    let vpp = Complex64::new(c, 0.0);
    let vqp = -phase.conj() * s;
    let vpq = Complex64::new(s, 0.0);
    let vqq = phase.conj() * c;

    for k in 0..n {
        let akp = m[k * n + p];
        let akq = m[k * n + q];
        m[k * n + p] = akp * vpp + akq * vqp;
        m[k * n + q] = akp * vpq + akq * vqq;
    }
    for k in 0..n {
        let apk = m[p * n + k];
        let aqk = m[q * n + k];
        m[p * n + k] = vpp.conj() * apk + vqp.conj() * aqk;
        m[q * n + k] = vpq.conj() * apk + vqq.conj() * aqk;
    }
    m[p * n + q] = Complex64::new(0.0, 0.0);
    m[q * n + p] = Complex64::new(0.0, 0.0);
    m[p * n + p].im = 0.0;
    m[q * n + q].im = 0.0;
    for k in 0..n {
        let ekp = v[k * n + p];
        let ekq = v[k * n + q];
        v[k * n + p] = ekp * vpp + ekq * vqp;
        v[k * n + q] = ekp * vpq + ekq * vqq;
    }
}

/// Frobenius-nearest positive semidefinite matrix (negative eigenvalues clipped).
pub fn psd_project(a: &HermitianMatrix) -> HermitianMatrix {
    psd_project_warm(a, None).0
}

/// PSD projection that also returns the eigendecomposition for reuse as a
/// warm start.
pub fn psd_project_warm(a: &HermitianMatrix, start: Option<&Eigen>) -> (HermitianMatrix, Eigen) {
    let eig = hermitian_eig_warm(a, start);
    let projected = eig.reconstruct_with(|e| e.max(0.0));
    (projected, eig)
}

/// `Re tr(AB)`; for Hermitian inputs the imaginary part vanishes.
pub fn trace_product(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    a.check_dim(b)?;
    let n = a.n;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            // tr(AB) = sum_ij A_ij B_ji
            acc += (a.data[i * n + j] * b.data[j * n + i]).re;
        }
    }
    Ok(acc)
}

/// Lower Cholesky factor (row-major) of a Hermitian positive definite
/// matrix given as raw row-major data; `None` if not positive definite.
pub(crate) fn cholesky(a: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(l)
}

/// Inverse of a Hermitian positive definite matrix from its Cholesky factor.
pub(crate) fn inverse_from_cholesky(l: &[Complex64], n: usize) -> Vec<Complex64> {
    // Invert L (lower triangular), then A^{-1} = L^{-H} L^{-1}.
    let zero = Complex64::new(0.0, 0.0);
    let mut li = vec![zero; n * n];
    for j in 0..n {
        li[j * n + j] = l[j * n + j].inv();
        for i in j + 1..n {
            let mut s = zero;
            for k in j..i {
                s -= l[i * n + k] * li[k * n + j];
            }
            li[i * n + j] = s / l[i * n + i];
        }
    }
    let mut out = vec![zero; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = zero;
            for k in i..n {
                s += li[k * n + i].conj() * li[k * n + j];
            }
            out[i * n + j] = s;
            out[j * n + i] = s.conj();
        }
    }
    out
}
