mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refkrig_core::gibbs::*;
use refkrig_core::kernels::{DesignSet, LengthVector};
use refkrig_core::linear_model::{KrigingModel, TrendBasis};
use refkrig_core::Error;

fn gp_instance(seed: u64, n: usize, r: usize, nu: f64, p: usize, theta: &[f64]) -> (KrigingModel, Vec<f64>) {
    let mut g = rng(seed);
    let m = model(uniform_design(&mut g, n, r), nu, basis_for(p));
    let y = gp_sample(&mut g, &m, &LengthVector::new(theta.to_vec()).unwrap());
    (m, y)
}

fn grid_for(m: &KrigingModel, y: &[f64], theta: &[f64], i: usize, spec: &GridSpec) -> ConditionalGrid {
    let d = m.project(y).unwrap();
    conditional_posterior_grid(i, &LengthVector::new(theta.to_vec()).unwrap(), &d, m, spec).unwrap()
}

#[test]
fn cdf_is_normalized_and_inverts_quantile() {
    let (m, y) = gp_instance(3, 10, 2, 2.5, 1, &[0.3, 0.5]);
    let g = grid_for(&m, &y, &[0.3, 0.5], 1, &GridSpec::default());
    assert_eq!(*g.cdf_nodes().last().unwrap(), 1.0);
    assert_eq!(g.cdf_nodes()[0], 0.0);
    let (lo, hi) = g.theta_range();
    assert_eq!(g.cdf(hi), 1.0);
    assert_eq!(g.cdf(lo * 0.5), 0.0);
    for k in 1..50 {
        let p = k as f64 / 50.0;
        assert!((g.cdf(g.quantile(p)) - p).abs() < 1e-10);
    }
}

#[test]
fn toy_posterior_mean_matches_dense_quadrature() {
    let mut checked = 0;
    for seed in 0..12 {
        let mut g = rng(seed);
        let m = model(uniform_design(&mut g, 4, 1), 2.5, TrendBasis::None);
        let y = gp_sample(&mut g, &m, &LengthVector::new(vec![0.3]).unwrap());
        // Upper end of the oracle: where Σ is still comfortably invertible.
        let mut hi = 1e-2;
        while condition_number(&m.sigma(&LengthVector::new(vec![hi * 1.1]).unwrap()).unwrap()) < 1e10 {
            hi *= 1.1;
        }
        let q = Quadrature1d::new(&m, &y, 1e-4, hi, 100_001);
        if q.end_drops().1 < 15.0 {
            continue;
        }
        let grid = grid_for(&m, &y, &[0.3], 0, &GridSpec::default());
        assert!(rel_err(grid.mean(), q.mean()) < 1e-3, "seed {seed}: {} vs {}", grid.mean(), q.mean());
        checked += 1;
    }
    assert!(checked >= 3, "only {checked} usable instances");
}

#[test]
fn grid_refinement_moves_quantiles_little() {
    let cases: [(u64, usize, usize, f64, usize); 4] =
        [(1, 4, 1, 2.5, 0), (2, 10, 1, 1.5, 1), (3, 12, 2, 2.5, 1), (4, 8, 3, 1.5, 0)];
    for (seed, n, r, nu, p) in cases {
        let th = vec![0.3; r];
        let (m, y) = gp_instance(seed, n, r, nu, p, &th);
        let coarse = grid_for(&m, &y, &th, r - 1, &GridSpec::default());
        let fine = grid_for(&m, &y, &th, r - 1, &GridSpec { grid_size: 1024, ..GridSpec::default() });
        for pr in [0.05, 0.25, 0.5, 0.75, 0.95] {
            let (a, b) = (coarse.quantile(pr), fine.quantile(pr));
            assert!(rel_err(a, b) < 5e-3, "case {seed}, p = {pr}: {a} vs {b}");
        }
    }
}

#[test]
fn small_grid_with_wide_extensions_stays_close() {
    let small = GridSpec { grid_size: 48, coarse_size: 32, extension_stride: 3, ..GridSpec::default() };
    let cases: [(u64, usize, usize, f64, usize); 3] = [(6, 30, 3, 2.5, 1), (7, 12, 2, 2.5, 1), (8, 10, 1, 1.5, 1)];
    for (seed, n, r, nu, p) in cases {
        let th: Vec<f64> = [0.4, 0.8, 0.2][..r].to_vec();
        let (m, y) = gp_instance(seed, n, r, nu, p, &th);
        for i in 0..r {
            let reference = grid_for(&m, &y, &th, i, &GridSpec { grid_size: 1024, ..GridSpec::default() });
            let g = grid_for(&m, &y, &th, i, &small);
            for pr in [0.025, 0.25, 0.5, 0.75, 0.975] {
                let (a, b) = (g.quantile(pr), reference.quantile(pr));
                assert!(rel_err(a, b) < 2e-2, "case {seed}, coordinate {i}, p = {pr}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn explicit_truncation_bounds_the_grid() {
    let (m, y) = gp_instance(5, 8, 1, 2.5, 1, &[0.3]);
    let spec = GridSpec { truncation: Truncation::Explicit { theta_min: 0.05, theta_max: 2.0 }, ..GridSpec::default() };
    let g = grid_for(&m, &y, &[0.3], 0, &spec);
    let (lo, hi) = g.theta_range();
    assert!(rel_err(lo, 0.05) < 1e-12 && rel_err(hi, 2.0) < 1e-12);
    assert_eq!(g.log_theta().len(), 512);
    let bad = GridSpec { truncation: Truncation::Explicit { theta_min: 2.0, theta_max: 1.0 }, ..GridSpec::default() };
    assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
}

#[test]
fn non_decaying_conditional_is_an_existence_violation() {
    // One residual degree of freedom: the reference prior vanishes identically.
    let d = DesignSet::new(1, vec![0.1, 0.5, 0.8]).unwrap();
    let m = model(d, 2.5, TrendBasis::Affine);
    let data = m.project(&[0.3, -1.0, 0.4]).unwrap();
    let t = LengthVector::new(vec![0.3]).unwrap();
    let err = conditional_posterior_grid(0, &t, &data, &m, &GridSpec::default()).unwrap_err();
    assert!(matches!(err, Error::ExistenceViolation(_)), "{err}");

    let e = conditional_posterior_grid(3, &t, &data, &m, &GridSpec::default()).unwrap_err();
    assert!(matches!(e, Error::IndexOutOfRange { index: 3, dim: 1 }));
}

#[test]
fn negligible_flat_tail_is_closed_at_the_wall() {
    // With a long range in x2 the x1 conditional keeps a flat far tail about
    // twenty log units below its peak until the correlation matrix degenerates.
    let x = [
        0.05, 0.62, 0.15, 0.21, 0.27, 0.88, 0.33, 0.45, 0.48, 0.07, 0.56, 0.71, 0.64, 0.33, 0.77, 0.95, 0.85,
        0.52, 0.96, 0.18,
    ];
    let y = [0.704920, 0.902427, 1.908190, 1.284938, 0.503519, 0.567425, -0.214099, 0.291765, -0.230415, 0.012758];
    let m = model(DesignSet::new(2, x.to_vec()).unwrap(), 2.5, TrendBasis::Constant);
    let g = grid_for(&m, &y, &[0.8773313303199581, 19.551224673260915], 0, &GridSpec::default());
    let ld = g.log_density();
    let peak = ld.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let last = *ld.last().unwrap();
    assert!(last < peak - WALL_LOG_DROP && last > peak - TAIL_LOG_DROP, "{last} vs {peak}");
    assert!(g.theta_range().1 > 1e4);
    assert!(g.quantile(0.999) < 100.0);
}

#[test]
fn steps_change_one_coordinate_and_are_reproducible() {
    let (m, y) = gp_instance(6, 12, 3, 2.5, 1, &[0.3, 0.5, 0.2]);
    let data = m.project(&y).unwrap();
    let t0 = LengthVector::new(vec![0.3, 0.5, 0.2]).unwrap();
    let spec = GridSpec::default();
    let mut a = ChaCha8Rng::seed_from_u64(99);
    let mut b = ChaCha8Rng::seed_from_u64(99);
    let mut ta = t0.clone();
    for _ in 0..30 {
        let (next, i) = gibbs_step(&ta, &data, &m, &spec, &mut a).unwrap();
        let (other, j) = gibbs_step(&ta, &data, &m, &spec, &mut b).unwrap();
        assert_eq!(i, j);
        assert_eq!(next.theta(), other.theta());
        for k in 0..3 {
            if k != i {
                assert_eq!(next.theta()[k], ta.theta()[k]);
            }
        }
        assert!(next.theta()[i] > 0.0);
        ta = next;
    }
}

#[test]
fn one_dimensional_steps_are_independent_draws() {
    let (m, y) = gp_instance(7, 8, 1, 2.5, 0, &[0.3]);
    let data = m.project(&y).unwrap();
    let mut g = ChaCha8Rng::seed_from_u64(1);
    let mut t = LengthVector::new(vec![0.3]).unwrap();
    let mut xs = Vec::new();
    for _ in 0..2000 {
        t = gibbs_step(&t, &data, &m, &GridSpec::default(), &mut g).unwrap().0;
        xs.push(t.theta()[0].ln());
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let lag1 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n * var);
    assert!(lag1.abs() < 4.0 / n.sqrt(), "lag-1 autocorrelation {lag1}");
}

#[test]
fn chain_bookkeeping() {
    let (m, y) = gp_instance(8, 12, 3, 2.5, 1, &[0.3, 0.5, 0.2]);
    let mut cfg = ChainConfig::new(11);
    cfg.n_iter = 1210;
    cfg.burn_in = 200;
    cfg.thin = 3;
    cfg.grid.grid_size = 128;
    let out = run_chain(&y, &m, &cfg).unwrap();
    assert_eq!(out.samples.len(), (1210 - 200) / 3);
    assert_eq!(out.samples.len(), cfg.retained());
    assert_eq!(out.log_l1.len(), out.samples.len());
    assert!(out.samples.iter().all(|s| s.theta().iter().all(|&v| v > 0.0)));
    assert!(out.log_l1.iter().all(|v| v.is_finite()));
    // Each coordinate is chosen with probability 1/3 among 3 * n_iter updates.
    let total: usize = out.update_counts.iter().sum();
    assert_eq!(total, 3 * 1210);
    let (e, sd) = (total as f64 / 3.0, (total as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt());
    for &c in &out.update_counts {
        assert!((c as f64 - e).abs() < 4.0 * sd, "{:?}", out.update_counts);
    }
    assert_eq!(out.ess.len(), 3);
    assert_eq!(out.split_rhat.len(), 3);

    let again = run_chain(&y, &m, &cfg).unwrap();
    assert_eq!(out, again);
}

#[test]
fn chain_config_validation() {
    let (m, y) = gp_instance(9, 6, 1, 2.5, 0, &[0.3]);
    let mut cfg = ChainConfig::new(0);
    cfg.burn_in = cfg.n_iter;
    assert!(matches!(run_chain(&y, &m, &cfg), Err(Error::InvalidConfig(_))));
    let mut cfg = ChainConfig::new(0);
    cfg.thin = 0;
    assert!(matches!(run_chain(&y, &m, &cfg), Err(Error::InvalidConfig(_))));
    let mut cfg = ChainConfig::new(0);
    cfg.init = Some(LengthVector::new(vec![0.1, 0.2]).unwrap());
    assert!(run_chain(&y, &m, &cfg).is_err());
    // Observations in the span of the trend are rejected before sampling.
    let m1 = model(m.design().clone(), 2.5, TrendBasis::Constant);
    assert!(matches!(run_chain(&[2.0; 6], &m1, &ChainConfig::new(0)), Err(Error::DegenerateObservation(_))));
}

#[test]
fn one_dimensional_chain_quantiles_match_quadrature() {
    let (m, y) = gp_instance(9, 4, 1, 2.5, 0, &[0.3]);
    let q = Quadrature1d::new(&m, &y, 1e-4, 22.0, 20_001);
    assert!(q.end_drops().1 > 15.0);
    let mut cfg = ChainConfig::new(5);
    cfg.n_iter = 5100;
    cfg.burn_in = 100;
    let out = run_chain(&y, &m, &cfg).unwrap();
    let mut xs = out.coordinate(0);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Order-statistic standard error of a quantile, in relative terms, is a
    // few percent at 5000 draws; allow 4 of them.
    for p in [0.05, 0.5, 0.95] {
        let emp = xs[(p * xs.len() as f64) as usize];
        assert!(rel_err(emp, q.quantile(p)) < 0.06, "p = {p}: {emp} vs {}", q.quantile(p));
    }
}

fn ln_mean_and_se(out: &ChainOutput, i: usize) -> (f64, f64) {
    let xs: Vec<f64> = out.coordinate(i).iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / out.ess[i]).sqrt())
}

#[test]
fn dispersed_chains_agree() {
    let (m, y) = gp_instance(10, 12, 2, 2.5, 1, &[0.3, 0.6]);
    let run = |init: f64, seed: u64| {
        let mut cfg = ChainConfig::new(seed);
        cfg.n_iter = 2500;
        cfg.burn_in = 250;
        cfg.grid.grid_size = 256;
        cfg.init = Some(LengthVector::new(vec![init; 2]).unwrap());
        run_chain(&y, &m, &cfg).unwrap()
    };
    let (a, b) = (run(0.1, 1), run(10.0, 2));
    for i in 0..2 {
        let (ma, sa) = ln_mean_and_se(&a, i);
        let (mb, sb) = ln_mean_and_se(&b, i);
        assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "coordinate {i}: {ma} ± {sa} vs {mb} ± {sb}");
        assert!(a.split_rhat[i] < 1.05 && b.split_rhat[i] < 1.05);
    }
}

#[test]
fn one_sweep_preserves_the_marginals() {
    let (m, y) = gp_instance(12, 10, 2, 2.5, 0, &[0.3, 0.6]);
    let mut cfg = ChainConfig::new(4);
    cfg.n_iter = 4200;
    cfg.burn_in = 200;
    cfg.thin = 5;
    cfg.grid.grid_size = 256;
    let out = run_chain(&y, &m, &cfg).unwrap();
    let data = m.project(&y).unwrap();
    let mut g = ChaCha8Rng::seed_from_u64(77);
    let mut counts = [0usize; 2];
    let moved: Vec<LengthVector> = out
        .samples
        .iter()
        .map(|s| gibbs_sweep(s, &data, &m, &cfg.grid, &mut g, &mut counts).unwrap())
        .collect();
    for i in 0..2 {
        let before: Vec<f64> = out.samples.iter().map(|s| s.theta()[i]).collect();
        let after: Vec<f64> = moved.iter().map(|s| s.theta()[i]).collect();
        let (d, p) = ks_two_sample(&before, &after);
        assert!(p > 0.01, "coordinate {i}: D = {d}, p = {p}");
    }
}

#[test]
fn ess_and_rhat_on_known_sequences() {
    let mut g = rng(21);
    let iid: Vec<f64> = (0..20_000).map(|_| g.random::<f64>()).collect();
    let e = effective_sample_size(&iid);
    assert!((e / 20_000.0 - 1.0).abs() < 0.15, "{e}");
    assert!((split_rhat_of(&iid) - 1.0).abs() < 0.01);

    let phi = 0.9;
    let mut x = 0.0;
    let ar: Vec<f64> = (0..50_000)
        .map(|_| {
            x = phi * x + (g.random::<f64>() - 0.5);
            x
        })
        .collect();
    let expected = 50_000.0 * (1.0 - phi) / (1.0 + phi);
    assert!((effective_sample_size(&ar) / expected - 1.0).abs() < 0.25);

    let shifted: Vec<f64> = (0..2000).map(|k| g.random::<f64>() + if k < 1000 { 0.0 } else { 1.0 }).collect();
    assert!(split_rhat_of(&shifted) > 1.05);
    assert_eq!(split_rhat_of(&[1.0; 100]), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_is_monotone_and_inside_the_grid(p in 0.0f64..1.0, q in 0.0f64..1.0, seed in 0u64..4) {
        let (m, y) = gp_instance(seed, 6, 1, 2.5, 0, &[0.3]);
        let g = grid_for(&m, &y, &[0.3], 0, &GridSpec { grid_size: 64, ..GridSpec::default() });
        let (lo, hi) = g.theta_range();
        let (a, b) = (g.quantile(p.min(q)), g.quantile(p.max(q)));
        prop_assert!(a <= b);
        prop_assert!(a >= lo * (1.0 - 1e-12) && b <= hi * (1.0 + 1e-12));
        prop_assert!((g.cdf(a) - p.min(q)).abs() < 1e-9);
    }
}
