#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refkrig_core::kernels::{DesignSet, KernelFamily, KernelSpec, LengthVector};
use refkrig_core::linear_model::{KrigingModel, TrendBasis};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_design(rng: &mut impl Rng, n: usize, r: usize) -> DesignSet {
    DesignSet::new(r, (0..n * r).map(|_| rng.random::<f64>()).collect()).unwrap()
}

pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn random_theta(rng: &mut impl Rng, r: usize, lo: f64, hi: f64) -> LengthVector {
    LengthVector::new((0..r).map(|_| log_uniform(rng, lo, hi)).collect()).unwrap()
}

pub fn basis_for(p: usize) -> TrendBasis {
    match p {
        0 => TrendBasis::None,
        1 => TrendBasis::Constant,
        _ => TrendBasis::Affine,
    }
}

pub fn model(design: DesignSet, nu: f64, basis: TrendBasis) -> KrigingModel {
    let spec = KernelSpec::new(KernelFamily::AnisotropicGeometric, nu, design.dim()).unwrap();
    KrigingModel::new(design, spec, basis).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Dense inverse through LU, for oracles that want the textbook formula.
pub fn inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

/// Composite Simpson rule on `[a, b]` with `k` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> f64 {
    let h = (b - a) / k as f64;
    let mut s = f(a) + f(b);
    for j in 1..k {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + j as f64 * h);
    }
    s * h / 3.0
}

/// `ln ∫∫ L(y | β, σ², Σ) / σ² dβ dσ²` for a single trend coefficient (`H`
/// is `n × 1`), by nested Simpson rules: β on a window of ±14 conditional
/// standard deviations, σ² on a log scale.
pub fn log_l1_by_quadrature(sigma: &DMatrix<f64>, h: &DMatrix<f64>, y: &[f64]) -> f64 {
    use nalgebra::DVector;
    let n = y.len();
    let si = inv(sigma);
    let ln_det = sigma.determinant().ln();
    let yv = DVector::from_column_slice(y);
    let hv = h.column(0).into_owned();
    // Quadratic (y - hβ)ᵀ Σ⁻¹ (y - hβ) = a β² - 2 b β + c.
    let a = hv.dot(&(&si * &hv));
    let b = hv.dot(&(&si * &yv));
    let c = yv.dot(&(&si * &yv));
    let centre = b / a;
    let min_q = c - b * b / a;
    let log_lik = |beta: f64, s2: f64| {
        let quad = a * beta * beta - 2.0 * b * beta + c;
        -0.5 * n as f64 * (2.0 * std::f64::consts::PI * s2).ln() - 0.5 * ln_det - quad / (2.0 * s2)
    };
    let u0 = (min_q / n as f64).ln();
    // Everything is scaled by exp(-shift) to stay in range.
    let shift = log_lik(centre, min_q / n as f64);
    let inner = |u: f64| {
        let s2 = u.exp();
        let sd = (s2 / a).sqrt();
        let f = |beta: f64| (log_lik(beta, s2) - shift).exp();
        // dσ²/σ² = du
        simpson(f, centre - 14.0 * sd, centre + 14.0 * sd, 400)
    };
    simpson(inner, u0 - 12.0, u0 + 40.0, 6000).ln() + shift
}

/// `n × n` random symmetric matrix with standard-normal-ish entries.
pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    (&a + a.transpose()) * 0.5
}

pub fn condition_number(s: &DMatrix<f64>) -> f64 {
    let ev = s.clone().symmetric_eigen().eigenvalues;
    ev.max() / ev.min()
}

/// Draws a one-dimensional θ log-uniformly in [0.05, 1] until the condition
/// number of Σ_θ falls in `[lo, hi)`; `None` after 2000 tries.
pub fn length_with_condition(rng: &mut impl Rng, m: &KrigingModel, lo: f64, hi: f64) -> Option<f64> {
    for _ in 0..2000 {
        let t = log_uniform(rng, 0.05, 1.0);
        let s = m.sigma(&LengthVector::new(vec![t]).unwrap()).unwrap();
        let c = condition_number(&s);
        if c >= lo && c < hi {
            return Some(t);
        }
    }
    None
}

/// One draw of the zero-mean unit-variance Gaussian process at the design.
pub fn gp_sample(rng: &mut impl Rng, m: &KrigingModel, theta: &LengthVector) -> Vec<f64> {
    use rand_distr::StandardNormal;
    let l = m.sigma(theta).unwrap().cholesky().unwrap().l();
    let z = nalgebra::DVector::from_iterator(m.n(), (0..m.n()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    (l * z).iter().copied().collect()
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.partial_cmp(q).unwrap());
    y.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Posterior of a one-dimensional model tabulated by brute force: the
/// likelihood from a full correlation state, the prior in its Berger form,
/// `points` nodes uniform in `ln θ` on `[lo, hi]`.
pub struct Quadrature1d {
    pub u: Vec<f64>,
    pub log_density: Vec<f64>,
    cum: Vec<f64>,
}

impl Quadrature1d {
    pub fn new(m: &KrigingModel, y: &[f64], lo: f64, hi: f64, points: usize) -> Self {
        use refkrig_core::linear_model::integrated_likelihood_l1;
        use refkrig_core::reference_prior::prior_1d_berger;
        let h = (hi.ln() - lo.ln()) / (points - 1) as f64;
        let u: Vec<f64> = (0..points).map(|k| lo.ln() + h * k as f64).collect();
        let log_density: Vec<f64> = u
            .iter()
            .map(|&x| {
                let t = x.exp();
                let st = m.state_light(&LengthVector::new(vec![t]).unwrap()).unwrap();
                integrated_likelihood_l1(y, &st, m.matrices()).unwrap() + prior_1d_berger(m, t).unwrap().ln() + x
            })
            .collect();
        let pk = log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut cum = vec![0.0];
        for k in 1..points {
            let a = (log_density[k - 1] - pk).exp();
            let b = (log_density[k] - pk).exp();
            cum.push(cum[k - 1] + 0.5 * h * (a + b));
        }
        Self { u, log_density, cum }
    }

    /// Drop in log-density from the peak to each end of the range.
    pub fn end_drops(&self) -> (f64, f64) {
        let pk = self.log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (pk - self.log_density[0], pk - self.log_density[self.log_density.len() - 1])
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let target = p * self.cum[self.cum.len() - 1];
        let k = self.cum.partition_point(|&c| c < target).clamp(1, self.cum.len() - 1);
        let f = (target - self.cum[k - 1]) / (self.cum[k] - self.cum[k - 1]);
        (self.u[k - 1] + f * (self.u[k] - self.u[k - 1])).exp()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|t| t)
    }

    /// Posterior expectation of `f(θ)` by Simpson's rule in `ln θ`.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let pk = self.log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for (k, (&x, &g)) in self.u.iter().zip(&self.log_density).enumerate() {
            let w = if k == 0 || k + 1 == self.u.len() { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let d = (g - pk).exp();
            num += w * d * f(x.exp());
            den += w * d;
        }
        num / den
    }
}
