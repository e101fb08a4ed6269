//! Small dense linear-algebra helpers on top of nalgebra: a Householder QR
//! that keeps its reflectors, and a Cholesky wrapper with log-determinant and
//! triangular-solve shortcuts.

use crate::error::{Error, Result};
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
#[allow(unused_imports)]
use num_traits::Float;

/// Householder QR of an `n × p` matrix, `H = Q [R; 0]`, with the reflectors
/// kept so that `Q` and `Qᵀ` can be applied without forming them.
#[derive(Debug, Clone)]
pub struct Householder {
    n: usize,
    vs: Vec<DVector<f64>>,
    taus: Vec<f64>,
    r: DMatrix<f64>,
}

impl Householder {
    /// Factorizes `h`; a column with zero residual norm is reported as rank
    /// deficiency.
    pub fn new(h: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = h.shape();
        let mut a = h.clone();
        let mut vs = Vec::with_capacity(p);
        let mut taus = Vec::with_capacity(p);
        for k in 0..p {
            let x = a.view((k, k), (n - k, 1)).column(0).into_owned();
            let norm = x.norm();
            if norm == 0.0 || n <= k {
                return Err(Error::RankDeficient { rank: k, p });
            }
            let alpha = if x[0] > 0.0 { -norm } else { norm };
            let mut v = x;
            v[0] -= alpha;
            let tau = 2.0 / v.norm_squared();
            let mut block = a.view_mut((k, k), (n - k, p - k));
            let w = block.tr_mul(&v);
            block.ger(-tau, &v, &w, 1.0);
            vs.push(v);
            taus.push(tau);
        }
        let r = DMatrix::from_fn(p, p, |i, j| if i <= j { a[(i, j)] } else { 0.0 });
        Ok(Self { n, vs, taus, r })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.vs.len()
    }

    /// The upper-triangular `p × p` factor.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// `x ← Qᵀ x`.
    pub fn apply_qt(&self, x: &mut DVector<f64>) {
        for (k, (v, tau)) in self.vs.iter().zip(&self.taus).enumerate() {
            let mut seg = x.rows_mut(k, self.n - k);
            let s = v.dot(&seg);
            seg.axpy(-tau * s, v, 1.0);
        }
    }

    /// `x ← Q x`.
    pub fn apply_q(&self, x: &mut DVector<f64>) {
        for (k, (v, tau)) in self.vs.iter().zip(&self.taus).enumerate().rev() {
            let mut seg = x.rows_mut(k, self.n - k);
            let s = v.dot(&seg);
            seg.axpy(-tau * s, v, 1.0);
        }
    }

    /// `A ← Qᵀ A Q` for a square `n × n` matrix.
    pub fn sandwich(&self, a: &mut DMatrix<f64>) {
        let n = self.n;
        for (k, (v, tau)) in self.vs.iter().zip(&self.taus).enumerate() {
            {
                let mut rows = a.rows_mut(k, n - k);
                let w = rows.tr_mul(v);
                rows.ger(-tau, v, &w, 1.0);
            }
            let mut cols = a.columns_mut(k, n - k);
            let u = &cols * v;
            cols.ger(-tau, &u, v, 1.0);
        }
    }

    /// `C ← C Q` for a matrix with `n` columns.
    pub fn right_apply(&self, c: &mut DMatrix<f64>) {
        let n = self.n;
        for (k, (v, tau)) in self.vs.iter().zip(&self.taus).enumerate() {
            let mut cols = c.columns_mut(k, n - k);
            let u = &cols * v;
            cols.ger(-tau, &u, v, 1.0);
        }
    }

    /// The full orthogonal factor `Q` (`n × n`).
    pub fn q_full(&self) -> DMatrix<f64> {
        let mut q = DMatrix::identity(self.n, self.n);
        // Q = Q I, applied column by column through the transpose: (I Q)ᵀ = Qᵀ.
        self.right_apply(&mut q);
        q
    }
}

/// Cholesky factorization `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Chol {
    inner: Cholesky<f64, Dyn>,
}

impl Chol {
    pub fn new(m: DMatrix<f64>, what: &str) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization(String::from(what) + ": non-finite entries"));
        }
        Cholesky::new(m)
            .map(|inner| Self { inner })
            .ok_or_else(|| Error::Factorization(String::from(what) + ": not positive definite"))
    }

    pub fn dim(&self) -> usize {
        self.inner.l_dirty().nrows()
    }

    /// Lower factor; only the lower triangle is meaningful.
    pub fn l_dirty(&self) -> &DMatrix<f64> {
        self.inner.l_dirty()
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.inner.l()
    }

    pub fn ln_det(&self) -> f64 {
        2.0 * self.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Rough condition-number estimate `(max Lᵢᵢ / min Lᵢᵢ)²`.
    pub fn condition_estimate(&self) -> f64 {
        let d = self.l_dirty().diagonal();
        let (lo, hi) = d
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        (hi / lo).powi(2)
    }

    /// `1 / min_k L_kk²`. For a matrix with unit-sized entries this bounds
    /// from below how much rounding in the entries is amplified by a solve.
    pub fn rounding_gain(&self) -> f64 {
        let m = self.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &x| a.min(x));
        1.0 / (m * m)
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.inner.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.inner.solve(b)
    }

    /// `B ← L⁻¹ B`.
    pub fn lower_solve_mut(&self, b: &mut DMatrix<f64>) {
        self.l_dirty().solve_lower_triangular_mut(b);
    }

    /// `L⁻¹ x`.
    pub fn lower_solve_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut v = x.clone();
        self.l_dirty().solve_lower_triangular_mut(&mut v);
        v
    }

    /// `xᵀ M⁻¹ x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        self.lower_solve_vec(x).norm_squared()
    }
}

/// Numerical rank from singular values, relative threshold `n · ε · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = (m.nrows().max(m.ncols()) as f64) * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Averages a nearly symmetric matrix with its transpose in place.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
