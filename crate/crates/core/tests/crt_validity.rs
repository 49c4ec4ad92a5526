use privci::crt::{crt_statistics, crt_test, priv_crt_test, ConditionalModel, CrtConfig};
use privci::dataset::{rescale, Dataset, RowMatrix};
use privci::harness::stats::uniformity_check;
use privci::krr::{sensitivity_crt, FitConfig};
use privci::seed::{derive_seed, seeded_rng};
use privci::synth::{f_s, generate, make_conditional_model, SynthParams};

#[test]
fn null_ranks_are_uniform() {
    let fit = FitConfig::fixed(10.0);
    let cfg = CrtConfig::new(fit);
    let p: Vec<f64> = (0..500)
        .map(|i| {
            let mut rng = seeded_rng(derive_seed(17, &[i]));
            let (ds, gt) = generate(&SynthParams::new(1000, 1, 2.0, 0.0), &mut rng).unwrap();
            let cond = make_conditional_model(&gt);
            crt_test(&ds, &cond, 19, &cfg, &mut rng).unwrap().p_value
        })
        .collect();
    let u = uniformity_check(&p, 19).unwrap();
    assert!(u.passed, "chi-square p-value {}", u.p_value);
}

#[test]
fn conditional_model_mean_and_tail() {
    let (_, gt) = generate(&SynthParams::new(1000, 1, 2.0, 0.0), &mut seeded_rng(0)).unwrap();
    let cond = make_conditional_model(&gt);
    assert_eq!(cond.mean(&[0.0]), 0.0);
    let z = [1.0];
    let mut rng = seeded_rng(2);
    let draws: Vec<f64> = (0..100_000).map(|_| cond.sample(&z, &mut rng)).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let se = (1.0 / gt.scale_x()) / (draws.len() as f64).sqrt();
    let truth = f_s(1.0, 2.0) / gt.scale_x();
    assert!((cond.mean(&z) - truth).abs() < 1e-15);
    assert!((mean - truth).abs() < 4.0 * se);
    // Exceedance of the unclipped residual: P(|N(0,1)| > sqrt(4 ln 1000)) ≈ 6e-4.
    let mut rng = seeded_rng(3);
    let bound = cond.residual_bound();
    let hits = (0..100_000)
        .filter(|_| {
            let r = (cond.sample(&z, &mut rng) - cond.mean(&z)).abs();
            r >= bound * (1.0 - 1e-12)
        })
        .count();
    assert!((hits as f64) / 1e5 < 1e-3);
}

#[test]
fn extreme_observed_statistic_ranks() {
    // x sits at the residual bound with the sign of r_Y, so T_0 is maximal;
    // flipping the sign makes it minimal.
    let n = 50;
    let z = RowMatrix::column((0..n).map(|i| i as f64 / 10.0).collect());
    let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.9 } else { -0.9 }).collect();
    let (_, gt) = generate(&SynthParams::new(n, 1, 2.0, 0.0), &mut seeded_rng(0)).unwrap();
    let cond = make_conditional_model(&gt);
    let fit = FitConfig::fixed(10.0);
    let cfg = CrtConfig::new(fit.clone()).retain_statistics(true);
    // Only the sign of r_Y matters; with λ ≥ 10 the fit cannot flip it.
    let mk = |sign: f64| -> Vec<f64> {
        z.rows_iter()
            .zip(&y)
            .map(|(zi, yi)| cond.mean(zi) + sign * yi.signum() * cond.residual_bound())
            .collect()
    };
    let top = rescale(Dataset::new(mk(1.0), y.clone(), z.clone()).unwrap(), 1.0, 1.0, true).unwrap();
    let r = crt_test(&top, &cond, 19, &cfg, &mut seeded_rng(1)).unwrap();
    assert_eq!(r.rank, 0);
    assert_eq!(r.p_value, 0.05);
    let bottom = rescale(Dataset::new(mk(-1.0), y, z).unwrap(), 1.0, 1.0, true).unwrap();
    let r = crt_test(&bottom, &cond, 19, &cfg, &mut seeded_rng(1)).unwrap();
    assert_eq!(r.rank, 19);
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn statistics_are_seed_deterministic() {
    let mut rng = seeded_rng(6);
    let (ds, gt) = generate(&SynthParams::new(200, 2, 2.0, 0.5), &mut rng).unwrap();
    let cond = make_conditional_model(&gt);
    let fit = FitConfig::fixed(10.0);
    let a = crt_statistics(&ds, &cond, 30, &fit, &mut seeded_rng(9)).unwrap();
    let b = crt_statistics(&ds, &cond, 30, &fit, &mut seeded_rng(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 31);
    // The first m copies do not depend on how many copies are drawn.
    let c = crt_statistics(&ds, &cond, 10, &fit, &mut seeded_rng(9)).unwrap();
    assert_eq!(&a[..11], &c[..]);
}

#[test]
fn private_result_reports_floor_sensitivity() {
    let mut rng = seeded_rng(1);
    let (ds, gt) = generate(&SynthParams::new(200, 1, 2.0, 0.0), &mut rng).unwrap();
    let cond = make_conditional_model(&gt);
    for floor in [2.0, 10.0] {
        let cfg = CrtConfig::new(FitConfig::cross_validated(floor));
        let r = priv_crt_test(&ds, &cond, 19, 2.0, &cfg, &mut rng).unwrap();
        assert_eq!(r.delta_t, Some(sensitivity_crt(floor).unwrap()));
        assert!((1..=20).any(|k| r.p_value == k as f64 / 20.0));
    }
}
