//! Synthetic experiment: detector intensities for a list of flux sets.
//!
//! `I = |Σ_h K_h · exp(i Σᵢ αᵢ(Δθᵢ + 2πnᵢ))|²`. The endpoint part
//! `exp(i Σᵢ αᵢΔθᵢ)` is common to all classes and drops out of the modulus, so
//! only `exp(2πi Σᵢ αᵢnᵢ)` is evaluated.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::csvio::num;
use crate::homotopy::{winding_phase, HomotopyClass};
use crate::seeds::splitmix64;

/// Designs whose lifted condition measure falls below this are rejected.
pub const DEGENERATE_CONDITION: f64 = 1e-8;
const DESIGN_ATTEMPTS: u64 = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForwardError {
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate design after {attempts} attempts (best condition measure {best:e})")]
    Design { attempts: u64, best: f64 },
}

/// Complex amplitudes indexed like `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAmplitudes {
    pub classes: Vec<HomotopyClass>,
    pub values: Vec<Complex64>,
}

impl ClassAmplitudes {
    pub fn new(classes: Vec<HomotopyClass>, values: Vec<Complex64>) -> Result<Self, ForwardError> {
        if classes.len() != values.len() {
            return Err(ForwardError::Consistency(format!(
                "{} classes but {} amplitudes",
                classes.len(),
                values.len()
            )));
        }
        Ok(Self { classes, values })
    }

    pub fn n_solenoids(&self) -> usize {
        self.classes.first().map_or(0, |c| c.winding.len())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxDesign {
    /// Each set holds one flux `φᵢ` per solenoid.
    pub sets: Vec<Vec<f64>>,
    pub noise_level: f64,
    pub seed: u64,
}

impl FluxDesign {
    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }
}

/// A design together with its lifted condition measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub design: FluxDesign,
    pub condition: f64,
    pub attempts: u64,
}

fn alphas(set: &[f64]) -> Vec<f64> {
    set.iter().map(|f| f / (2.0 * PI)).collect()
}

/// Detector amplitude `Σ_h K_h exp(2πi Σᵢ αᵢnᵢ)` for one flux set.
pub fn amplitude(flux_set: &[f64], amplitudes: &ClassAmplitudes) -> Result<Complex64, ForwardError> {
    if amplitudes.classes.len() != amplitudes.values.len() {
        return Err(ForwardError::Consistency("class/amplitude count mismatch".into()));
    }
    let a = alphas(flux_set);
    let mut total = Complex64::new(0.0, 0.0);
    for (c, k) in amplitudes.classes.iter().zip(&amplitudes.values) {
        if c.winding.len() != flux_set.len() {
            return Err(ForwardError::Consistency(format!(
                "class {} has {} winding components, flux set has {}",
                c.index,
                c.winding.len(),
                flux_set.len()
            )));
        }
        total += k * winding_phase(&c.winding, &a);
    }
    Ok(total)
}

pub fn intensity(flux_set: &[f64], amplitudes: &ClassAmplitudes) -> Result<f64, ForwardError> {
    if flux_set.iter().any(|f| !f.is_finite()) {
        return Err(ForwardError::Domain("fluxes must be finite".into()));
    }
    Ok(amplitude(flux_set, amplitudes)?.norm_sqr())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    /// Flux sets actually measured; set 0 is all-off.
    pub sets: Vec<Vec<f64>>,
    pub intensities: Vec<f64>,
}

/// Intensities for every set of `design`, with multiplicative noise `1 + ε`,
/// `ε ~ N(0, noise_level²)`, drawn from a per-set stream of the design seed.
/// If the first set is not all-off, an all-off set is prepended.
pub fn run_experiment(design: &FluxDesign, amplitudes: &ClassAmplitudes) -> Result<Experiment, ForwardError> {
    if !(design.noise_level >= 0.0 && design.noise_level.is_finite()) {
        return Err(ForwardError::Domain(format!("noise level must be >= 0, got {}", design.noise_level)));
    }
    let n_s = amplitudes.n_solenoids();
    let mut sets = design.sets.clone();
    if sets.first().is_none_or(|s| s.iter().any(|&f| f != 0.0)) {
        sets.insert(0, vec![0.0; n_s]);
    }
    let noise = Normal::new(0.0, design.noise_level).map_err(|e| ForwardError::Domain(e.to_string()))?;
    let intensities = sets
        .par_iter()
        .enumerate()
        .map(|(f, set)| {
            let exact = intensity(set, amplitudes)?;
            if design.noise_level == 0.0 {
                return Ok(exact);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
            rng.set_stream(f as u64);
            Ok(exact * (1.0 + noise.sample(&mut rng)))
        })
        .collect::<Result<Vec<_>, ForwardError>>()?;
    Ok(Experiment { sets, intensities })
}

/// Distinct non-zero winding differences, one representative of each `±d` pair.
pub fn difference_vectors(classes: &[HomotopyClass]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = Vec::new();
    for a in classes {
        for b in classes {
            let d: Vec<i64> = a.winding.iter().zip(&b.winding).map(|(x, y)| x - y).collect();
            // keep the representative whose first non-zero component is positive
            match d.iter().find(|&&x| x != 0) {
                Some(&x) if x > 0 => out.push(d),
                _ => {}
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Real matrix of the linear map from the autocorrelation `C_d = Σ K_h K̄_{h'}`
/// (`d = n_h − n_{h'}`) to intensities: columns `1`, then `2cos(2πα·d)` and
/// `−2sin(2πα·d)` for each half-space difference `d`.
pub fn lifted_matrix(sets: &[Vec<f64>], classes: &[HomotopyClass]) -> DMatrix<f64> {
    let diffs = difference_vectors(classes);
    let cols = 1 + 2 * diffs.len();
    DMatrix::from_fn(sets.len(), cols, |f, j| {
        if j == 0 {
            return 1.0;
        }
        let d = &diffs[(j - 1) / 2];
        let arg: f64 = sets[f].iter().zip(d).map(|(phi, &n)| phi * n as f64).sum();
        if (j - 1) % 2 == 0 {
            2.0 * arg.cos()
        } else {
            -2.0 * arg.sin()
        }
    })
}

/// `σ_min/σ_max` over the `min(N_F, columns)` singular values of the lifted map.
pub fn condition_measure(sets: &[Vec<f64>], classes: &[HomotopyClass]) -> f64 {
    let m = lifted_matrix(sets, classes);
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

/// `ceil(oversampling·N_H) + 1` sets; set 0 is all-off, the others uniform in
/// `[0, 2π)`. Retries with derived seeds while the design is degenerate.
pub fn design_fluxes(
    classes: &[HomotopyClass],
    oversampling: f64,
    noise_level: f64,
    seed: u64,
) -> Result<DesignReport, ForwardError> {
    if !(oversampling >= 2.0 && oversampling.is_finite()) {
        return Err(ForwardError::Domain(format!("oversampling must be >= 2, got {oversampling}")));
    }
    let n_s = classes.first().map_or(0, |c| c.winding.len());
    let n_f = n_sets(classes.len(), oversampling);
    let mut best = 0.0f64;
    for attempt in 0..DESIGN_ATTEMPTS {
        let s = if attempt == 0 { seed } else { splitmix64(seed.wrapping_add(attempt)) };
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut sets = vec![vec![0.0; n_s]];
        for _ in 1..n_f {
            sets.push((0..n_s).map(|_| rng.random_range(0.0..2.0 * PI)).collect());
        }
        let condition = condition_measure(&sets, classes);
        best = best.max(condition);
        if condition >= DEGENERATE_CONDITION || classes.len() <= 1 {
            return Ok(DesignReport {
                design: FluxDesign { sets, noise_level, seed: s },
                condition,
                attempts: attempt + 1,
            });
        }
    }
    Err(ForwardError::Design { attempts: DESIGN_ATTEMPTS, best })
}

/// `ceil(oversampling·N_H) + 1`.
pub fn n_sets(n_h: usize, oversampling: f64) -> usize {
    (oversampling * n_h as f64 - 1e-9).ceil() as usize + 1
}

pub fn write_intensities_csv<W: Write>(exp: &Experiment, mut out: W) -> io::Result<()> {
    let n_s = exp.sets.first().map_or(0, |s| s.len());
    let mut header = String::from("set_id");
    for i in 1..=n_s {
        header.push_str(&format!(",flux_{i}"));
    }
    header.push_str(",intensity");
    writeln!(out, "{header}")?;
    for (f, (set, y)) in exp.sets.iter().zip(&exp.intensities).enumerate() {
        let mut line = f.to_string();
        for phi in set {
            line.push(',');
            line.push_str(&num(*phi));
        }
        line.push(',');
        line.push_str(&num(*y));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parses the format written by [`write_intensities_csv`].
pub fn read_intensities_csv(text: &str) -> Result<Experiment, ForwardError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| ForwardError::Consistency("empty intensities file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "set_id" || cols[cols.len() - 1] != "intensity" {
        return Err(ForwardError::Consistency(format!("unexpected header `{header}`")));
    }
    let n_s = cols.len() - 2;
    let mut sets = Vec::new();
    let mut intensities = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(ForwardError::Consistency(format!("row {} has {} fields", k + 1, f.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| ForwardError::Consistency(format!("row {}: {e}", k + 1)));
        sets.push(f[1..=n_s].iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?);
        intensities.push(parse(f[n_s + 1])?);
    }
    Ok(Experiment { sets, intensities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homotopy::{enumerate_classes, generalized_phase, SolenoidArray, DEFAULT_CLASS_LIMIT};
    use proptest::{prop_assert, prop_assert_eq, proptest};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_amps(n_s: usize, n_cut: u32, seed: u64) -> ClassAmplitudes {
        let classes = enumerate_classes(n_s, n_cut, DEFAULT_CLASS_LIMIT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = classes.iter().map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        ClassAmplitudes::new(classes, values).unwrap()
    }

    #[test]
    fn all_off_is_modulus_of_sum() {
        let k = random_amps(2, 1, 1);
        assert_eq!(intensity(&[0.0, 0.0], &k).unwrap(), k.sum().norm_sqr());
    }

    #[test]
    fn single_class_is_flux_independent() {
        let h = HomotopyClass::from_winding(vec![2, -1], 2).unwrap();
        let k = ClassAmplitudes::new(vec![h], vec![c(0.3, -0.4)]).unwrap();
        for f in [[0.0, 0.0], [1.0, 2.0], [5.5, -0.1]] {
            assert!((intensity(&f, &k).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn two_class_hand_evaluation() {
        let classes = vec![
            HomotopyClass::from_winding(vec![0], 1).unwrap(),
            HomotopyClass::from_winding(vec![1], 1).unwrap(),
        ];
        let (a0, a1) = (c(1.0, 0.5), c(-0.25, 0.75));
        let k = ClassAmplitudes::new(classes, vec![a0, a1]).unwrap();
        // α = 0: |a0 + a1|², α = 1/4: |a0 + i a1|², α = 1/2: |a0 − a1|²
        let want = [
            (0.75f64).powi(2) + (1.25f64).powi(2),
            (1.0f64 - 0.75).powi(2) + (0.5f64 - 0.25).powi(2),
            (1.25f64).powi(2) + (0.5f64 - 0.75).powi(2),
        ];
        for (alpha, w) in [0.0, 0.25, 0.5].iter().zip(want) {
            let got = intensity(&[2.0 * PI * alpha], &k).unwrap();
            assert!((got - w).abs() < 1e-14, "α={alpha}: {got} vs {w}");
        }
    }

    #[test]
    fn endpoint_term_drops_out() {
        let a = SolenoidArray::grid(2, 1, 1.0, [0.0, 0.0], [-2.0, -0.3], [2.5, 0.4]).unwrap();
        let k = random_amps(2, 1, 4);
        let ang = a.endpoint_angles();
        let fl = [0.7, 2.9];
        let full: Complex64 = k
            .classes
            .iter()
            .zip(&k.values)
            .map(|(h, v)| v * generalized_phase(h, &fl, &ang).unwrap())
            .sum();
        assert!((full.norm_sqr() - intensity(&fl, &k).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn mismatch_is_reported() {
        let k = random_amps(2, 1, 2);
        assert!(matches!(intensity(&[0.0], &k), Err(ForwardError::Consistency(_))));
        assert!(ClassAmplitudes::new(k.classes.clone(), vec![]).is_err());
    }

    #[test]
    fn experiment_contains_reference_and_is_reproducible() {
        let k = random_amps(2, 1, 3);
        let r = design_fluxes(&k.classes, 2.5, 0.0, 11).unwrap();
        assert_eq!(r.design.n_sets(), 24);
        let e1 = run_experiment(&r.design, &k).unwrap();
        let e2 = run_experiment(&r.design, &k).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.intensities[0], k.sum().norm_sqr());
        let no_ref = FluxDesign { sets: vec![vec![1.0, 1.0]], noise_level: 0.0, seed: 0 };
        let e = run_experiment(&no_ref, &k).unwrap();
        assert_eq!(e.sets.len(), 2);
        assert_eq!(e.sets[0], vec![0.0, 0.0]);
    }

    #[test]
    fn noise_statistics() {
        let k = random_amps(1, 1, 5);
        let exact = intensity(&[1.3], &k).unwrap();
        let sets = vec![vec![0.0]].into_iter().chain(std::iter::repeat_n(vec![1.3], 1000)).collect();
        let d = FluxDesign { sets, noise_level: 0.01, seed: 99 };
        let e = run_experiment(&d, &k).unwrap();
        let ys = &e.intensities[1..];
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let se = 0.01 * exact / (ys.len() as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se);
    }

    #[test]
    fn design_sizes() {
        let one = enumerate_classes(1, 0, DEFAULT_CLASS_LIMIT).unwrap();
        assert!(design_fluxes(&one, 2.0, 0.0, 1).unwrap().design.n_sets() >= 3);
        assert_eq!(n_sets(9, 2.5), 24);
        assert!(design_fluxes(&one, 1.5, 0.0, 1).is_err());
    }

    #[test]
    fn random_designs_are_well_conditioned() {
        let classes = enumerate_classes(2, 1, DEFAULT_CLASS_LIMIT).unwrap();
        let mut failures = 0;
        for seed in 0..100 {
            let sets = {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut s = vec![vec![0.0, 0.0]];
                for _ in 1..24 {
                    s.push(vec![rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)]);
                }
                s
            };
            if condition_measure(&sets, &classes) <= 0.0 {
                failures += 1;
            }
        }
        assert!(failures <= 5, "{failures} degenerate designs");
    }

    #[test]
    fn csv_round_trip() {
        let k = random_amps(2, 1, 6);
        let r = design_fluxes(&k.classes, 2.5, 0.01, 3).unwrap();
        let e = run_experiment(&r.design, &k).unwrap();
        let mut buf = Vec::new();
        write_intensities_csv(&e, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("set_id,flux_1,flux_2,intensity\n"));
        assert_eq!(read_intensities_csv(&text).unwrap(), e);
    }

    proptest! {
        #[test]
        fn global_phase_invariance(seed in 0u64..1000, phase in 0.0f64..6.3, f1 in 0.0f64..6.3, f2 in 0.0f64..6.3) {
            let k = random_amps(2, 1, seed);
            let rot = ClassAmplitudes::new(k.classes.clone(), k.values.iter().map(|v| v * Complex64::from_polar(1.0, phase)).collect()).unwrap();
            let a = intensity(&[f1, f2], &k).unwrap();
            let b = intensity(&[f1, f2], &rot).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn flux_quantum_invariance(seed in 0u64..1000, f1 in 0.0f64..6.3, f2 in 0.0f64..6.3) {
            let k = random_amps(2, 1, seed);
            let a = intensity(&[f1, f2], &k).unwrap();
            let b = intensity(&[f1 + 2.0 * PI, f2], &k).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn permuted_sets_permute_results(seed in 0u64..1000, shift in 1usize..23) {
            let k = random_amps(2, 1, seed);
            let r = design_fluxes(&k.classes, 2.5, 0.0, seed).unwrap();
            let e = run_experiment(&r.design, &k).unwrap();
            let mut sets = r.design.sets.clone();
            sets[1..].rotate_left(shift % 23);
            let e2 = run_experiment(&FluxDesign { sets, ..r.design.clone() }, &k).unwrap();
            let mut want = e.intensities.clone();
            want[1..].rotate_left(shift % 23);
            prop_assert_eq!(want, e2.intensities);
        }
    }
}
