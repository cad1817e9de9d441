use ab_homotopy::forward::{design_fluxes, run_experiment, ClassAmplitudes};
use ab_homotopy::homotopy::{enumerate_classes, DEFAULT_CLASS_LIMIT};
use ab_homotopy::inversion::{identifiability_report, solve, twin_aligned_error, InversionProblem, SolveOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_truth(n_s: usize, n_cut: u32, seed: u64) -> ClassAmplitudes {
    let classes = enumerate_classes(n_s, n_cut, DEFAULT_CLASS_LIMIT).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = classes.iter().map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    ClassAmplitudes { classes, values }
}

fn recover(truth: &ClassAmplitudes, oversampling: f64, noise: f64, seed: u64) -> f64 {
    let d = design_fluxes(&truth.classes, oversampling, noise, seed).unwrap();
    let e = run_experiment(&d.design, truth).unwrap();
    let p = InversionProblem::from_experiment(&e, &truth.classes).unwrap();
    let r = solve(&p, &SolveOptions { seed, ..Default::default() }).unwrap();
    let a = r.gauge_anchor;
    assert!(r.amplitudes.values[a].im == 0.0 && r.amplitudes.values[a].re >= 0.0);
    twin_aligned_error(&r.amplitudes, &truth.values).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

#[test]
fn three_solenoid_round_trip() {
    let truth = random_truth(3, 1, 11);
    let d = design_fluxes(&truth.classes, 6.0, 0.0, 12).unwrap();
    assert!(identifiability_report(&d.design.sets, &truth.classes).unwrap().is_healthy());
    let err = recover(&truth, 6.0, 0.0, 12);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn one_percent_noise_mostly_below_five_percent() {
    let errs: Vec<f64> = (0..100).map(|s| recover(&random_truth(2, 1, 1000 + s), 2.5, 0.01, s)).collect();
    let good = errs.iter().filter(|&&e| e < 0.05).count();
    println!("trials below 5%: {good}/100, median {:.3e}", median(errs.clone()));
    let mut bad: Vec<(u64, f64)> = (0..100).zip(errs.iter().cloned()).filter(|p| p.1 >= 0.05).collect();
    bad.sort_by(|a, b| a.1.total_cmp(&b.1));
    println!("above 5% (seed, error): {bad:?}");
    assert!(good >= 95, "{good}");
}

#[test]
fn error_grows_at_most_linearly_with_noise() {
    let levels = [1e-4, 1e-3, 1e-2];
    let meds: Vec<f64> = levels
        .iter()
        .map(|&lvl| median((0..21).map(|s| recover(&random_truth(2, 1, 500 + s), 2.5, lvl, s)).collect()))
        .collect();
    let xs: Vec<f64> = levels.iter().map(|l: &f64| l.ln()).collect();
    let ys: Vec<f64> = meds.iter().map(|m| m.ln()).collect();
    let xm = xs.iter().sum::<f64>() / 3.0;
    let ym = ys.iter().sum::<f64>() / 3.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum::<f64>()
        / xs.iter().map(|x| (x - xm).powi(2)).sum::<f64>();
    println!("median errors {meds:?}, log-log slope {slope:.3}");
    assert!(slope <= 1.1, "{slope}");
}
