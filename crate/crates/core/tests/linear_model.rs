mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use refkrig_core::kernels::{DesignSet, LengthVector};
use refkrig_core::linear_model::*;
use refkrig_core::Error;
use std::f64::consts::PI;

fn identity_state(mm: &ModelMatrices) -> CorrelationState {
    CorrelationState::from_sigma(DMatrix::identity(mm.n(), mm.n()), vec![], mm).unwrap()
}

fn random_orthogonal(rng: &mut impl rand::Rng, k: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>() - 0.5);
    a.qr().q()
}

#[test]
fn affine_basis_columns() {
    let d = DesignSet::new(2, vec![0.1, 0.2, 0.3, 0.9, 0.5, 0.4, 0.8, 0.7]).unwrap();
    let h = build_basis_matrix(&TrendBasis::Affine, &d).unwrap();
    assert_eq!(h.shape(), (4, 3));
    for a in 0..4 {
        assert_eq!(h[(a, 0)], 1.0);
        assert_eq!(h[(a, 1)], d.point(a)[0]);
        assert_eq!(h[(a, 2)], d.point(a)[1]);
    }
    let tiny = DesignSet::new(2, vec![0.1, 0.2, 0.3, 0.9, 0.5, 0.4]).unwrap();
    assert!(matches!(build_basis_matrix(&TrendBasis::Affine, &tiny), Err(Error::TooFewPoints { n: 3, p: 3 })));
}

fn assert_split_invariants(mm: &ModelMatrices) {
    let n = mm.n();
    let p = mm.trend_dim();
    let (pm, w, h) = (mm.p(), mm.w(), mm.h());
    assert!((w.transpose() * h).amax() < 1e-12 * (1.0 + h.amax()));
    assert!((pm * pm.transpose() + w * w.transpose() - DMatrix::<f64>::identity(n, n)).amax() < 1e-12);
    assert!((pm.transpose() * pm - DMatrix::<f64>::identity(p, p)).amax() < 1e-12);
    assert!((w.transpose() * w - DMatrix::<f64>::identity(n - p, n - p)).amax() < 1e-12);
}

#[test]
fn split_examples() {
    let mut g = rng(1);
    let h = DMatrix::from_fn(10, 3, |_, _| g.random::<f64>());
    assert_split_invariants(&orthonormal_split(&h).unwrap());

    let e = DMatrix::<f64>::identity(6, 6).columns(0, 2).into_owned();
    let mm = orthonormal_split(&e).unwrap();
    assert_split_invariants(&mm);
    // span(P) = span(e1, e2): projector equals the coordinate projector.
    let proj = mm.p() * mm.p().transpose();
    let mut want = DMatrix::zeros(6, 6);
    want[(0, 0)] = 1.0;
    want[(1, 1)] = 1.0;
    assert!((proj - want).amax() < 1e-15);
}

use rand::Rng;

#[test]
fn l1_two_points_by_hand() {
    let d = DesignSet::new(1, vec![0.2, 0.7]).unwrap();
    let h = build_basis_matrix(&TrendBasis::Constant, &d).unwrap();
    let mm = orthonormal_split(&h).unwrap();
    let st = identity_state(&mm);
    let y = [1.3, -0.4];
    // W = (1, -1)/√2: ln L¹ = -½ ln 2 + lnΓ(½) - ½ ln π - ½ ln((y₁-y₂)²/2) = -ln|y₁ - y₂|.
    let l1 = integrated_likelihood_l1(&y, &st, &mm).unwrap();
    assert!((l1 + (1.7f64).ln()).abs() < 1e-13);
    let quad = log_l1_by_quadrature(&DMatrix::identity(2, 2), &h, &y);
    assert!((l1 - quad).abs() < 1e-6, "{l1} vs {quad}");
}

#[test]
fn l1_matches_quadrature_on_small_kriging_models() {
    let mut g = rng(2);
    for n in 2..=4 {
        let m = model(uniform_design(&mut g, n, 1), 2.5, TrendBasis::Constant);
        let th = LengthVector::new(vec![0.3]).unwrap();
        let st = m.state(&th).unwrap();
        let y: Vec<f64> = (0..n).map(|_| g.random::<f64>() * 2.0).collect();
        let l1 = integrated_likelihood_l1(&y, &st, m.matrices()).unwrap();
        let quad = log_l1_by_quadrature(st.sigma(), m.matrices().h(), &y);
        assert!((l1 - quad).abs() < 1e-4, "n={n}: {l1} vs {quad}");
    }
}

#[test]
fn degenerate_observation_rejected() {
    let d = DesignSet::new(1, vec![0.2, 0.5, 0.7]).unwrap();
    let m = model(d, 1.5, TrendBasis::Constant);
    let st = m.state(&LengthVector::new(vec![0.4]).unwrap()).unwrap();
    let err = integrated_likelihood_l1(&[2.0, 2.0, 2.0], &st, m.matrices());
    assert!(matches!(err, Err(Error::DegenerateObservation(_))));
}

#[test]
fn p_zero_is_simple_kriging() {
    let mut g = rng(3);
    let m = model(uniform_design(&mut g, 6, 2), 1.5, TrendBasis::None);
    let th = LengthVector::new(vec![0.4, 0.2]).unwrap();
    let st = m.state(&th).unwrap();
    let y: Vec<f64> = (0..6).map(|_| g.random::<f64>()).collect();
    let s = st.sigma();
    let yv = DVector::from_column_slice(&y);
    let q = yv.dot(&(inv(s) * &yv));
    let nf = 6.0;
    let want = statrs::function::gamma::ln_gamma(nf / 2.0) - nf / 2.0 * PI.ln() - 0.5 * s.determinant().ln()
        - nf / 2.0 * q.ln();
    let got = integrated_likelihood_l1(&y, &st, m.matrices()).unwrap();
    assert!((got - want).abs() < 1e-10);
    let sp = sigma2_posterior(&y, &st, m.matrices()).unwrap();
    assert!((sp.rate - q / 2.0).abs() < 1e-12 * q);
    assert_eq!(sp.shape, 3.0);
}

#[test]
fn identity_correlation_reductions() {
    let mut g = rng(4);
    let d = uniform_design(&mut g, 5, 1);
    let y: Vec<f64> = (0..5).map(|_| g.random::<f64>() * 3.0).collect();
    // p = 0, Σ = I: L⁰ is the iid normal likelihood at β = 0.
    let mm0 = orthonormal_split(&DMatrix::zeros(5, 0)).unwrap();
    let st0 = identity_state(&mm0);
    let s2 = 0.7;
    let want: f64 = y.iter().map(|v| -0.5 * (2.0 * PI * s2).ln() - v * v / (2.0 * s2)).sum();
    assert!((integrated_likelihood_l0(&y, s2, &st0, &mm0).unwrap() - want).abs() < 1e-12);
    let sp = sigma2_posterior(&y, &st0, &mm0).unwrap();
    assert!((sp.rate - y.iter().map(|v| v * v).sum::<f64>() / 2.0).abs() < 1e-12);
    assert_eq!(sp.shape, 2.5);

    // Σ = I, constant basis: β posterior is the sample mean with variance σ²/n.
    let h = build_basis_matrix(&TrendBasis::Constant, &d).unwrap();
    let mm = orthonormal_split(&h).unwrap();
    let st = identity_state(&mm);
    let bp = beta_posterior(&y, s2, &st, &mm).unwrap();
    let mean = y.iter().sum::<f64>() / 5.0;
    assert!((bp.mean[0] - mean).abs() < 1e-14);
    assert!((bp.covariance[(0, 0)] - s2 / 5.0).abs() < 1e-15);

    // Σ = I: Q is the Euclidean projector.
    let q = projector_q(&h, &st).unwrap();
    let want = DMatrix::<f64>::identity(5, 5) - DMatrix::from_element(5, 5, 0.2);
    assert!((q - want).amax() < 1e-14);
    assert_eq!(projector_q(&DMatrix::zeros(5, 0), &st0).unwrap(), DMatrix::identity(5, 5));
}

#[test]
fn l0_integrates_to_l1() {
    let mut g = rng(5);
    let m = model(uniform_design(&mut g, 7, 2), 2.5, TrendBasis::Affine);
    let st = m.state(&LengthVector::new(vec![0.5, 0.3]).unwrap()).unwrap();
    let y: Vec<f64> = (0..7).map(|_| g.random::<f64>()).collect();
    let mm = m.matrices();
    let l1 = integrated_likelihood_l1(&y, &st, mm).unwrap();
    let q = quadratic_form(&y, &st, mm).unwrap();
    let u0 = (q / 4.0).ln();
    let shift = integrated_likelihood_l0(&y, q / 4.0, &st, mm).unwrap();
    let f = |u: f64| (integrated_likelihood_l0(&y, u.exp(), &st, mm).unwrap() - shift).exp();
    let integral = simpson(f, u0 - 30.0, u0 + 60.0, 20000).ln() + shift;
    assert!(rel_err(integral, l1) < 1e-6, "{integral} {l1}");

    // Gaussian scaling: y → c y, σ² → c² σ² shifts ln L⁰ by -(n-p) ln|c|.
    let c = -2.5f64;
    let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
    let a = integrated_likelihood_l0(&y, 0.3, &st, mm).unwrap();
    let b = integrated_likelihood_l0(&ys, 0.3 * c * c, &st, mm).unwrap();
    assert!((b - a + 4.0 * c.abs().ln()).abs() < 1e-12);

    // The normalized L⁰/σ² is the inverse-gamma posterior.
    let sp = sigma2_posterior(&y, &st, mm).unwrap();
    for &s2 in &[0.01, 0.1, 0.5] {
        let post = integrated_likelihood_l0(&y, s2, &st, mm).unwrap() - s2.ln() - l1;
        assert!((post - sp.ln_pdf(s2)).abs() < 1e-10);
    }
    assert!(sp.mean().is_some());
}

#[test]
fn beta_posterior_matches_gls() {
    let mut g = rng(6);
    for &(n, basis) in &[(2usize, 1usize), (6, 1), (9, 2)] {
        let r = if basis == 2 { 2 } else { 1 };
        let m = model(uniform_design(&mut g, n, r), 1.5, basis_for(basis));
        let th = random_theta(&mut g, r, 0.1, 1.0);
        let st = m.state(&th).unwrap();
        let y: Vec<f64> = (0..n).map(|_| g.random::<f64>()).collect();
        let s2 = 0.8;
        let bp = beta_posterior(&y, s2, &st, m.matrices()).unwrap();
        let h = m.matrices().h();
        let si = inv(st.sigma());
        let info = h.transpose() * &si * h;
        let cov = inv(&info) * s2;
        let mean = inv(&info) * h.transpose() * &si * DVector::from_column_slice(&y);
        assert!((bp.mean - mean).amax() < 1e-9);
        assert!((&bp.covariance - &cov).amax() < 1e-9 * cov.amax());
        assert!((&bp.covariance - bp.covariance.transpose()).amax() < 1e-12);
        assert!(bp.covariance.clone().symmetric_eigen().eigenvalues.min() > -1e-10);
    }
}

#[test]
fn beta_posterior_reproduces_trend() {
    let mut g = rng(7);
    let m = model(uniform_design(&mut g, 8, 2), 2.5, TrendBasis::Affine);
    let st = m.state(&LengthVector::new(vec![0.3, 0.6]).unwrap()).unwrap();
    let beta = DVector::from_vec(vec![1.5, -2.0, 0.25]);
    let y = m.matrices().h() * &beta;
    let bp = beta_posterior(y.as_slice(), 1.0, &st, m.matrices()).unwrap();
    assert!((bp.mean - beta).amax() < 1e-12);
    let y2: Vec<f64> = (0..8).map(|_| g.random::<f64>()).collect();
    let bp2 = beta_posterior(&y2, 1.0, &st, m.matrices()).unwrap();
    assert!((bp.covariance - bp2.covariance).amax() < 1e-14);
}

#[test]
fn projector_properties() {
    let mut g = rng(8);
    let m = model(uniform_design(&mut g, 9, 2), 2.5, TrendBasis::Affine);
    let st = m.state(&LengthVector::new(vec![0.3, 0.6]).unwrap()).unwrap();
    let h = m.matrices().h();
    let q = projector_q(h, &st).unwrap();
    assert!((&q * &q - &q).amax() < 1e-10);
    assert!((&q * h).amax() < 1e-10);
}

#[test]
fn rotating_w_and_p_changes_nothing() {
    let mut g = rng(9);
    let m = model(uniform_design(&mut g, 8, 2), 2.5, TrendBasis::Affine);
    let th = LengthVector::new(vec![0.35, 0.5]).unwrap();
    let y: Vec<f64> = (0..8).map(|_| g.random::<f64>()).collect();
    let mm = m.matrices();
    let rot = ModelMatrices::from_parts(
        mm.h().clone(),
        mm.p() * random_orthogonal(&mut g, 3),
        mm.w() * random_orthogonal(&mut g, 5),
    )
    .unwrap();
    let s = m.sigma(&th).unwrap();
    let a = CorrelationState::from_sigma(s.clone(), vec![], mm).unwrap();
    let b = CorrelationState::from_sigma(s, vec![], &rot).unwrap();
    let la = integrated_likelihood_l1(&y, &a, mm).unwrap();
    let lb = integrated_likelihood_l1(&y, &b, &rot).unwrap();
    assert!(rel_err(lb, la) < 1e-10);
    let sa = sigma2_posterior(&y, &a, mm).unwrap();
    let sb = sigma2_posterior(&y, &b, &rot).unwrap();
    assert!(rel_err(sb.rate, sa.rate) < 1e-10);
    let ba = beta_posterior(&y, 0.5, &a, mm).unwrap();
    let bb = beta_posterior(&y, 0.5, &b, &rot).unwrap();
    assert!((ba.mean - bb.mean).amax() < 1e-10);
    assert!(ModelMatrices::from_parts(mm.h().clone(), mm.p().clone(), mm.p().clone()).is_err());
}

#[test]
fn fast_likelihood_matches_state_route() {
    let mut g = rng(10);
    let m = model(uniform_design(&mut g, 12, 3), 2.5, TrendBasis::Constant);
    let y: Vec<f64> = (0..12).map(|_| g.random::<f64>()).collect();
    let data = m.project(&y).unwrap();
    for _ in 0..10 {
        let th = random_theta(&mut g, 3, 0.05, 3.0);
        let a = m.log_l1(&data, &th).unwrap();
        let b = integrated_likelihood_l1(&y, &m.state(&th).unwrap(), m.matrices()).unwrap();
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn projector_identity(seed in any::<u64>(), n in 4usize..15, p in 0usize..3, nu_idx in 0usize..2) {
        let nu = [1.5, 2.5][nu_idx];
        let mut g = rng(seed);
        let r = 2;
        let m = model(uniform_design(&mut g, n, r), nu, basis_for(p));
        let th = random_theta(&mut g, r, 0.05, 0.5);
        let st = m.state(&th).unwrap();
        let w = m.matrices().w();
        let lhs = w * inv(&(w.transpose() * st.sigma() * w)) * w.transpose();
        let rhs = inv(st.sigma()) * projector_q(m.matrices().h(), &st).unwrap();
        prop_assert!((&lhs - &rhs).amax() <= 1e-10 * lhs.amax().max(1.0));
    }

    #[test]
    fn split_invariants_hold(seed in any::<u64>(), n in 2usize..20, p in 0usize..5) {
        prop_assume!(p < n);
        let mut g = rng(seed);
        let h = DMatrix::from_fn(n, p, |_, _| g.random::<f64>() - 0.5);
        assert_split_invariants(&orthonormal_split(&h).unwrap());
    }
}
