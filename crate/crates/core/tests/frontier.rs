use frontier_core::frontier::{
    efficiency_scores, fit_p_oracle, plug_in, BandwidthChoice, Dataset, FrontierConfig, SNAPSHOT_GRID,
};
use frontier_core::simlab::{generate, DgpKind, DgpSpec};
use frontier_core::{fit_frontier, Bandwidths, Error, Kernel, Method};

fn fixed(method: Method, h: &[f64]) -> FrontierConfig {
    FrontierConfig::new(method, Kernel::Epanechnikov, BandwidthChoice::Fixed(Bandwidths::new(h.to_vec()).unwrap()))
}

#[test]
fn oracle_p_is_consistent() {
    // p̃ from the true errors, averaged over replicas, against a Monte Carlo target
    let mut total = 0.0;
    for seed in 0..200 {
        let sim = generate(&DgpSpec { kind: DgpKind::I, p: 2.0, n: 500, seed }).unwrap();
        total += fit_p_oracle(&sim.eps).unwrap();
    }
    let mean = total / 200.0;
    // sd of p̃ is about sqrt(1.5 p² / n) = 0.11, so the mean has SE below 0.01
    assert!((mean - 2.0).abs() < 0.03, "{mean}");
    assert_eq!(fit_p_oracle(&[0.0, 0.0]), Err(Error::ZeroResiduals));
    assert!(fit_p_oracle(&[]).is_err());
}

#[test]
fn plug_in_identity_is_exact() {
    let sim = generate(&DgpSpec { kind: DgpKind::Ii, p: 2.0, n: 120, seed: 9 }).unwrap();
    for method in [Method::Cbs, Method::Sbs] {
        let model = fit_frontier(&sim.data, &fixed(method, &[0.35, 0.45])).unwrap();
        for i in 0..sim.data.len() {
            assert_eq!(model.frontier_at_obs[i], plug_in(model.p_hat, model.fit.fitted[i]));
            assert_eq!(model.scores[i], sim.data.y()[i] / model.frontier_at_obs[i]);
        }
        for x in [[1.2, 1.7], [1.5, 1.5], [1.9, 1.1]] {
            let g = model.g(&x).unwrap();
            assert_eq!(model.frontier(&x).unwrap(), (1.5 / model.p_hat - g).exp());
            assert!(model.frontier(&x).unwrap() > 0.0);
        }
    }
}

#[test]
fn backfitting_residuals_are_centred() {
    let sim = generate(&DgpSpec { kind: DgpKind::Ii, p: 1.0, n: 100, seed: 2 }).unwrap();
    let cbs = fit_frontier(&sim.data, &fixed(Method::Cbs, &[0.4, 0.4])).unwrap();
    assert!(cbs.residuals.iter().sum::<f64>().abs() < 1e-8);
    // smooth backfitting centres against the smoothed marginal densities, so
    // the mean residual at the observations is small but not zero
    let sbs = fit_frontier(&sim.data, &fixed(Method::Sbs, &[0.4, 0.4])).unwrap();
    let mean = sbs.residuals.iter().sum::<f64>() / 100.0;
    assert!(mean.abs() < 0.05, "{mean}");
}

#[test]
fn snapshot_reproduces_the_model_on_its_grid() {
    let sim = generate(&DgpSpec { kind: DgpKind::Ii, p: 2.0, n: 100, seed: 6 }).unwrap();
    for method in [Method::Cbs, Method::Sbs] {
        let model = fit_frontier(&sim.data, &fixed(method, &[0.4, 0.5])).unwrap();
        let snap = model.snapshot().unwrap();
        snap.validate().unwrap();
        assert_eq!(snap.components.len(), 2);
        assert!(snap.components.iter().all(|c| c.x.len() == SNAPSHOT_GRID));
        for k in [0, 17, 50, 100] {
            let x = [snap.components[0].x[k], snap.components[1].x[100 - k]];
            let (a, b) = (snap.frontier(&x).unwrap(), model.frontier(&x).unwrap());
            assert!((a - b).abs() < 1e-12 * b, "{method:?} at {x:?}: {a} vs {b}");
        }
        // between nodes the snapshot interpolates; the model stays smooth
        let mid = [1.5, 1.5];
        assert!((snap.g(&mid).unwrap() - model.g(&mid).unwrap()).abs() < 1e-2);
        assert!(snap.g(&[0.9, 1.5]).is_err());
    }
}

#[test]
fn efficiency_scores_centre_on_the_mean_efficiency() {
    let p = 4.0;
    let sim = generate(&DgpSpec { kind: DgpKind::I, p, n: 2000, seed: 13 }).unwrap();
    let model = fit_frontier(&sim.data, &fixed(Method::Loclin, &[0.25])).unwrap();
    let report = efficiency_scores(&model);
    let mean = report.scores.iter().sum::<f64>() / report.scores.len() as f64;
    let target = (p / (p + 1.0)).powf(1.5);
    assert!((mean - target).abs() < 0.02, "{mean} vs {target}");
    assert_eq!(report.above_one, report.scores.iter().filter(|&&s| s > 1.0).count());
    assert!((model.p_hat - p).abs() < 0.4);
}

#[test]
fn perfect_fit_is_rejected() {
    let x: Vec<f64> = (0..30).map(|i| 1.0 + i as f64 / 29.0).collect();
    let y: Vec<f64> = x.iter().map(|v| (-(0.5 - 0.3 * v)).exp()).collect();
    let data = Dataset::new(y, vec![x]).unwrap();
    assert_eq!(fit_frontier(&data, &fixed(Method::Loclin, &[0.3])).unwrap_err(), Error::ZeroResiduals);
}

#[test]
fn dataset_validation() {
    let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
    assert!(Dataset::new(vec![1.0; 11], vec![x.clone()]).is_err());
    let mut y = vec![1.0; 12];
    y[4] = 0.0;
    assert!(Dataset::new(y, vec![x.clone()]).is_err());
    assert!(Dataset::new(vec![1.0; 5], vec![x[..5].to_vec()]).is_err());
    let d = Dataset::new(vec![std::f64::consts::E; 12], vec![x]).unwrap();
    assert!(d.z().iter().all(|&z| z == -1.0));
}

#[test]
fn dimension_mismatch_is_a_domain_error() {
    let sim = generate(&DgpSpec { kind: DgpKind::I, p: 2.0, n: 50, seed: 1 }).unwrap();
    assert!(matches!(fit_frontier(&sim.data, &fixed(Method::Sbs, &[0.3, 0.3])), Err(Error::Domain(_))));
}

#[test]
fn cv_default_grid_runs_end_to_end() {
    let sim = generate(&DgpSpec { kind: DgpKind::I, p: 8.0, n: 250, seed: 77 }).unwrap();
    let config = FrontierConfig::new(Method::Loclin, Kernel::Epanechnikov, BandwidthChoice::Cv { grid: None });
    let model = fit_frontier(&sim.data, &config).unwrap();
    let cv = model.cv.as_ref().unwrap();
    assert_eq!(cv.candidates.len(), 20);
    assert_eq!(model.bandwidths(), &cv.best);
    assert!(model.p_hat > 7.1 && model.p_hat < 9.3, "{}", model.p_hat);
}
