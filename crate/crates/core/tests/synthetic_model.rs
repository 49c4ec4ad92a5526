use privci::harness::stats::mean_variance;
use privci::krr::{fit_targets, FitConfig};
use privci::seed::seeded_rng;
use privci::synth::{f_s, fit_diagnostics, generate, SynthParams};

#[test]
fn conditional_covariance_at_fixed_z() {
    // Draw (X, Y) at a fixed z through the model equations with the same
    // noise the generator uses, then undo the rescaling.
    for (beta, cov) in [(0.0, 0.0), (0.5, 0.5)] {
        let p = SynthParams {
            var_z: 1e-12,
            ..SynthParams::new(100_000, 1, 2.0, beta)
        };
        let (ds, gt) = generate(&p, &mut seeded_rng(10)).unwrap();
        let raw = ds.unscaled();
        let f0 = f_s(0.0, 2.0);
        let prods: Vec<f64> = raw
            .x()
            .iter()
            .zip(raw.y())
            .map(|(x, y)| (x - f0) * (y + f0))
            .collect();
        let (mean, var) = mean_variance(&prods).unwrap();
        let se = (var / prods.len() as f64).sqrt();
        assert!((mean - cov).abs() < 4.0 * se, "β={beta}: {mean} vs {cov}");
        assert_eq!(gt.rho(), beta);
    }
}

#[test]
fn covariate_variance_and_clip_rate() {
    let (ds, _) = generate(&SynthParams::new(100_000, 1, 2.0, 1.5), &mut seeded_rng(11)).unwrap();
    let z1: Vec<f64> = ds.z().rows_iter().map(|r| r[0]).collect();
    let (_, var) = mean_variance(&z1).unwrap();
    assert!((var / 4.0 - 1.0).abs() < 0.02);
    // Y has variance up to 1 + β² + e^{-4}, so it dominates clipping.
    assert!((ds.clipped() as f64) / (2.0 * 100_000.0) < 1e-3);
}

#[test]
fn generation_is_reproducible() {
    let p = SynthParams::new(500, 5, 1.0, 0.5);
    let a = generate(&p, &mut seeded_rng(3)).unwrap();
    let b = generate(&p, &mut seeded_rng(3)).unwrap();
    assert_eq!(a, b);
    let c = generate(&p, &mut seeded_rng(4)).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn fit_quality_improves_with_n() {
    let mut products = Vec::new();
    for n in [250, 500, 1000, 2000] {
        // Average over a few datasets to smooth out sampling noise.
        let reps = 4;
        let mut acc = 0.0;
        for r in 0..reps {
            let mut rng = seeded_rng(1000 * n as u64 + r);
            let (ds, gt) = generate(&SynthParams::new(n, 1, 2.0, 0.0), &mut rng).unwrap();
            let fits = fit_targets(ds.z(), &[ds.x(), ds.y()], &FitConfig::cross_validated(0.1), &mut rng)
                .unwrap();
            let d = fit_diagnostics(&fits[0].regressor, &fits[1].regressor, &gt, ds.z()).unwrap();
            assert!(d.a_f >= 0.0 && d.b_f >= 0.0);
            acc += d.a_f * d.a_g;
        }
        products.push((n, acc / reps as f64));
    }
    for w in products.windows(2) {
        assert!(w[1].1 < w[0].1, "{products:?}");
    }
    let first = products[0].0 as f64 * products[0].1;
    let last = products[3].0 as f64 * products[3].1;
    assert!(last < first, "{products:?}");
}
