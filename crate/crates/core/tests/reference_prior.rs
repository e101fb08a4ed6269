mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use refkrig_core::kernels::{corr_matrix, KernelFamily, KernelSpec, LengthVector};
use refkrig_core::linear_model::{KrigingModel, TrendBasis};
use refkrig_core::reference_prior::*;

/// Simple Kriging reference prior from dense inverses.
fn simple_prior_dense(s: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let a = d * inv(s);
    let n = s.nrows() as f64;
    ((&a * &a).trace() - a.trace().powi(2) / n).sqrt()
}

#[test]
fn p_zero_reduces_to_simple_form() {
    let mut g = rng(1);
    let m = model(uniform_design(&mut g, 9, 1), 2.5, TrendBasis::None);
    for &t in &[0.05, 0.3, 2.0] {
        let (s, d) = m.sigma_partial(&LengthVector::new(vec![t]).unwrap(), 0).unwrap();
        let want = simple_prior_dense(&s, &d);
        assert!(rel_err(prior_1d(&m, t).unwrap(), want) < 1e-9);
        assert!(rel_err(prior_1d_berger(&m, t).unwrap(), want) < 1e-9);
    }
}

#[test]
fn two_forms_agree() {
    let mut g = rng(2);
    for k in 0..100 {
        let n = 5 + k % 16;
        let p = k % 3;
        let nu = if k % 2 == 0 { 1.5 } else { 2.5 };
        let basis = match p {
            0 => TrendBasis::None,
            1 => TrendBasis::Constant,
            _ => TrendBasis::Affine,
        };
        let (m, t) = loop {
            let m = model(uniform_design(&mut g, n, 1), nu, basis.clone());
            if let Some(t) = length_with_condition(&mut g, &m, 0.0, 1e9) {
                break (m, t);
            }
        };
        let a = prior_1d(&m, t).unwrap();
        let b = prior_1d_berger(&m, t).unwrap();
        assert!(rel_err(a, b) < 1e-8, "instance {k}: {a} vs {b}");
        let c = conditional_prior(&m, 0, &LengthVector::new(vec![t]).unwrap()).unwrap();
        assert_eq!(c.value, a);
    }
}

#[test]
fn two_forms_near_singular_band() {
    // With cond(Σ) in [1e9, 1e10) both forms sit at the double-precision floor,
    // roughly 1e-18 · cond.
    let mut g = rng(22);
    let mut seen = 0;
    for k in 0..400 {
        let m = model(uniform_design(&mut g, 5 + k % 16, 1), 2.5, basis_for(k % 3));
        let Some(t) = length_with_condition(&mut g, &m, 1e9, 1e10) else { continue };
        let (a, b) = (prior_1d(&m, t).unwrap(), prior_1d_berger(&m, t).unwrap());
        assert!(rel_err(a, b) < 1e-6, "{a} vs {b}");
        seen += 1;
        if seen == 30 {
            break;
        }
    }
    assert!(seen >= 10);
}

#[test]
fn relabeling_invariance() {
    let mut g = rng(3);
    let d = uniform_design(&mut g, 10, 1);
    let m1 = model(d.clone(), 2.5, TrendBasis::Constant);
    let perm: Vec<usize> = (0..10).rev().collect();
    let m2 = model(d.select(&perm), 2.5, TrendBasis::Constant);
    for &t in &[0.1, 0.4] {
        assert!(rel_err(prior_1d_berger(&m1, t).unwrap(), prior_1d_berger(&m2, t).unwrap()) < 1e-10);
        assert!(rel_err(prior_1d(&m1, t).unwrap(), prior_1d(&m2, t).unwrap()) < 1e-10);
    }
}

#[test]
fn conditional_forms_agree_in_several_dimensions() {
    let mut g = rng(4);
    for _ in 0..20 {
        let m = model(uniform_design(&mut g, 15, 3), 2.5, TrendBasis::Constant);
        let th = random_theta(&mut g, 3, 0.1, 1.0);
        let st = m.state(&th).unwrap();
        for i in 0..3 {
            let a = conditional_prior(&m, i, &th).unwrap();
            let b = conditional_prior_berger(&m, i, &th).unwrap();
            let c = conditional_prior_from_state(&st, &m, i).unwrap();
            assert!(rel_err(a.value, b) < 1e-8);
            assert!(rel_err(a.value, c.value) < 1e-12);
            let rad = a.trace_sq_term - a.trace_term.powi(2) / 14.0;
            assert!(rel_err(a.value, rad.sqrt()) < 1e-12);
        }
    }
}

#[test]
fn mu_parametrization_jacobian() {
    // f in μ computed independently: ∂Σ/∂μ_i by central differences of Σ in μ.
    let mut g = rng(5);
    let m = model(uniform_design(&mut g, 12, 2), 2.5, TrendBasis::Constant);
    let spec = *m.spec();
    let th = LengthVector::new(vec![0.3, 0.7]).unwrap();
    let mu = th.mu();
    let w = m.matrices().w();
    for i in 0..2 {
        let at = |x: f64| {
            let mut v = mu.clone();
            v[i] = x;
            corr_matrix(m.design(), &LengthVector::from_mu(&v).unwrap(), &spec).unwrap()
        };
        let h = 1e-6 * mu[i];
        let dmu = (at(mu[i] + h) - at(mu[i] - h)) / (2.0 * h);
        let s = at(mu[i]);
        let sw = w.transpose() * &s * w;
        let a = inv(&sw) * (w.transpose() * dmu * w);
        let mm = sw.nrows() as f64;
        let f_mu = ((&a * &a).trace() - a.trace().powi(2) / mm).sqrt();
        let f_theta = conditional_prior(&m, i, &th).unwrap().value;
        // π(θ) dθ = π(μ) dμ with |dμ/dθ| = θ⁻².
        assert!(rel_err(f_theta, f_mu * th.theta()[i].powi(-2)) < 1e-6);
        assert!(rel_err(conditional_prior_mu(&m, i, &mu).unwrap(), f_mu) < 1e-6);
    }
}

#[test]
fn prior_bound_holds() {
    let mut g = rng(6);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let r = 1 + k % 3;
        let n = 6 + k % 15;
        let nu = if k % 2 == 0 { 1.5 } else { 2.5 };
        let fam = if k % 4 == 3 { KernelFamily::Tensorized } else { KernelFamily::AnisotropicGeometric };
        let spec = KernelSpec::new(fam, nu, r).unwrap();
        let m = KrigingModel::new(uniform_design(&mut g, n, r), spec, basis_for(k % 3)).unwrap();
        let th = random_theta(&mut g, r, 0.02, 5.0);
        for i in 0..r {
            let Ok(ev) = conditional_prior(&m, i, &th) else { continue };
            let ratio = ev.value * th.theta()[i] / prior_bound(&m);
            worst = worst.max(ratio);
            assert!(ratio < 1.0, "instance {k}: ratio {ratio}");
        }
    }
    assert!(worst > 0.0);
}

#[test]
fn sphere_variance_monte_carlo() {
    let mut g = rng(7);
    let n = 5;
    let mut ratios = vec![];
    for _ in 0..3 {
        let m = random_symmetric(&mut g, n);
        let draws = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let u = DVector::from_fn(n, |_, _| g.sample::<f64, _>(StandardNormal));
            let u = &u / u.norm();
            let v = u.dot(&(&m * &u));
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / draws as f64;
        let var = s2 / draws as f64 - mean * mean;
        ratios.push(var / sphere_quadratic_variance(&m).unwrap());
    }
    let c = sphere_variance_constant(n);
    for r in &ratios {
        assert!(rel_err(*r, c) < 0.03, "{r} vs {c}");
    }
}

#[test]
fn conditional_posterior_integrable_as_truncation_grows() {
    // ∫ L¹ f_i dθ_i over ln θ_i ∈ [-K, K]: converged once K is large.
    let mut g = rng(8);
    let m = model(uniform_design(&mut g, 20, 2), 2.5, TrendBasis::Constant);
    let y: Vec<f64> = m.design().points().map(|x| (6.0 * x[0]).sin() + x[1]).collect();
    let data = m.project(&y).unwrap();
    let th = LengthVector::new(vec![0.3, 0.5]).unwrap();
    let logf = |u: f64| {
        let t = th.with(0, u.exp()).unwrap();
        let (l1, ev) = log_l1_and_prior(&m, &data, &t, 0).unwrap();
        l1 + ev.value.ln() + u
    };
    let shift = logf(0.3f64.ln());
    let mass = |k: f64| simpson(|u| (logf(u) - shift).exp(), -k, k, 2000);
    let (a, b, c) = (mass(6.0), mass(9.0), mass(12.0));
    assert!(rel_err(b, c) < 1e-6 && rel_err(a, c) < 1e-3, "{a} {b} {c}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn radicand_nonnegative(seed in any::<u64>(), n in 5usize..15, r in 1usize..4) {
        let mut g = rng(seed);
        let m = model(uniform_design(&mut g, n, r), 2.5, TrendBasis::Constant);
        let th = random_theta(&mut g, r, 0.05, 1.0);
        for i in 0..r {
            let ev = conditional_prior(&m, i, &th).unwrap();
            let rad = ev.trace_sq_term - ev.trace_term.powi(2) / (n - 1) as f64;
            prop_assert!(rad >= -1e-12 * ev.trace_sq_term);
            prop_assert!(ev.value > 0.0);
        }
    }
}
