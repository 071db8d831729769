use frontier_core::simlab::{generate, DgpKind, DgpSpec};
use frontier_core::smoothers::cbs::{cbs_fit, contraction_norm, CbsMode};
use frontier_core::smoothers::{cv_bandwidth, cv_score, equivalent_kernel, fit, local_linear, sbs_fit, SmootherSettings};
use frontier_core::{Bandwidths, Error, Kernel, Method};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dgp_ii(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let sim = generate(&DgpSpec { kind: DgpKind::Ii, p: 1.0, n, seed }).unwrap();
    (sim.data.column(0).to_vec(), sim.data.column(1).to_vec(), sim.data.z().to_vec())
}

#[test]
fn local_linear_exact_on_lines_over_random_designs() {
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(8..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..5.0)).collect();
        let (a, b) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let z: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let eval: Vec<f64> = (0..=10).map(|k| lo + (hi - lo) * k as f64 / 10.0).collect();
        for kernel in [Kernel::Epanechnikov, Kernel::Gaussian] {
            // wide enough that every window holds at least two distinct points
            let h = hi - lo;
            let g = local_linear(&x, &z, &kernel, h, &eval).unwrap();
            for (e, gv) in eval.iter().zip(&g) {
                let truth = a + b * e;
                assert!((gv - truth).abs() <= 1e-10 * truth.abs().max(1.0), "seed {seed}: {gv} vs {truth}");
            }
        }
    }
}

#[test]
fn cbs_explicit_matches_iterative_on_dgp_ii() {
    let (x1, x2, z) = dgp_ii(100, 11);
    let mut checked = 0;
    for &(a, b) in &[(0.2, 0.2), (0.3, 0.5), (0.5, 0.8), (0.8, 0.3)] {
        let h = Bandwidths::new(vec![a, b]).unwrap();
        let norm = contraction_norm(&x1, &x2, &Kernel::Epanechnikov, &h).unwrap();
        if norm >= 1.0 {
            continue;
        }
        checked += 1;
        let it = cbs_fit(&x1, &x2, &z, &Kernel::Epanechnikov, &h, CbsMode::Iterative).unwrap();
        let ex = cbs_fit(&x1, &x2, &z, &Kernel::Epanechnikov, &h, CbsMode::Explicit).unwrap();
        assert_eq!(ex.diagnostics.spectral_norm, Some(norm));
        for i in 0..z.len() {
            assert!((it.fitted[i] - ex.fitted[i]).abs() < 1e-8);
            for j in 0..2 {
                assert!((it.components[j][i] - ex.components[j][i]).abs() < 1e-8);
            }
        }
    }
    assert!(checked > 0, "no bandwidth pair satisfied the contraction condition");
}

#[test]
fn cbs_components_are_centred() {
    let (x1, x2, z) = dgp_ii(150, 5);
    let h = Bandwidths::new(vec![0.3, 0.4]).unwrap();
    let fit = cbs_fit(&x1, &x2, &z, &Kernel::Gaussian, &h, CbsMode::Iterative).unwrap();
    for c in &fit.components {
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        assert!(mean.abs() < 1e-8);
    }
}

#[test]
fn sbs_projects_constants_exactly() {
    let (x1, x2, _) = dgp_ii(80, 3);
    let z = vec![-0.75; 80];
    let h = Bandwidths::new(vec![0.25, 0.35]).unwrap();
    let fit = sbs_fit(&x1, &x2, &z, &Kernel::Epanechnikov, &h, 101).unwrap();
    for i in 0..80 {
        assert!((fit.fitted[i] + 0.75).abs() < 1e-8);
        assert!(fit.components[0][i].abs() < 1e-8 && fit.components[1][i].abs() < 1e-8);
    }
}

#[test]
fn sbs_tracks_the_additive_truth() {
    let sim = generate(&DgpSpec { kind: DgpKind::Ii, p: 8.0, n: 400, seed: 21 }).unwrap();
    let h = Bandwidths::new(vec![0.2, 0.2]).unwrap();
    let fit = sbs_fit(sim.data.column(0), sim.data.column(1), sim.data.z(), &Kernel::Epanechnikov, &h, 101).unwrap();
    for j in 0..2 {
        let ase = fit.components[j].iter().zip(&sim.components[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 400.0;
        let spread = sim.components[j].iter().map(|v| v * v).sum::<f64>() / 400.0;
        assert!(ase < 0.1 * spread, "component {j}: ase {ase}, signal {spread}");
    }
}

#[test]
fn predict_refuses_extrapolation() {
    let (x1, x2, z) = dgp_ii(60, 8);
    let settings = SmootherSettings::new(Method::Sbs, Kernel::Epanechnikov);
    let fit = fit(&[&x1, &x2], &z, &settings, &Bandwidths::new(vec![0.4, 0.4]).unwrap()).unwrap();
    assert!(matches!(fit.predict(&[0.5, 1.5]), Err(Error::OutOfDomain { axis: 0, .. })));
    assert!(fit.predict(&[1.5, 1.5]).is_ok());
}

#[test]
fn cv_picks_the_minimum_score() {
    let sim = generate(&DgpSpec { kind: DgpKind::I, p: 2.0, n: 120, seed: 4 }).unwrap();
    let x = sim.data.column(0);
    let settings = SmootherSettings::new(Method::Loclin, Kernel::Epanechnikov);
    let grid: Vec<Bandwidths> = [0.05, 0.1, 0.2, 0.4, 0.8].iter().map(|&h| Bandwidths::single(h).unwrap()).collect();
    let out = cv_bandwidth(&[x], sim.data.z(), &settings, &grid).unwrap();
    let scores: Vec<f64> = grid.iter().map(|h| cv_score(&[x], sim.data.z(), &settings, h).unwrap()).collect();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_score, min);
    assert_eq!(out.failures(), 0);
}

proptest! {
    #[test]
    fn equivalent_kernel_reproduces(
        xs in prop::collection::vec(0.0f64..1.0, 6..40),
        t in 0.0f64..1.0,
        h in 0.15f64..1.0,
        gaussian in any::<bool>(),
    ) {
        let kernel = if gaussian { Kernel::Gaussian } else { Kernel::Epanechnikov };
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let point = lo + t * (hi - lo);
        match equivalent_kernel(&xs, &kernel, h, point) {
            Ok(w) => {
                let s0: f64 = w.iter().sum();
                let s1: f64 = w.iter().zip(&xs).map(|(w, x)| w * (x - point)).sum();
                prop_assert!((s0 - 1.0).abs() < 1e-10);
                prop_assert!(s1.abs() < 1e-10);
            }
            Err(e) => {
                let singular = matches!(e, Error::SingularDesign { .. });
                prop_assert!(singular, "unexpected error {:?}", e);
            }
        }
    }
}
