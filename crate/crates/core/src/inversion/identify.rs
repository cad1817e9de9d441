use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{phase_matrix, InversionError};
use crate::forward::{condition_measure, lifted_matrix};
use crate::homotopy::HomotopyClass;

const PROBE_SEED: u64 = 0x1D_E17F;
const RANK_RTOL: f64 = 1e-9;
const DUPLICATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignFlag {
    /// No more measurements than real unknowns.
    Underdetermined { n_sets: usize, n_params: usize },
    /// The intensity Jacobian at a generic point has a null space beyond the global phase.
    RankDeficient { rank: usize, needed: usize },
    DuplicateSets { pairs: usize },
    /// Every set applies the same phase to all classes, so only `|Σ K|²` is seen.
    ObservesOnlyTotal,
    /// Every set is accompanied by its negation, which adds no information.
    SymmetricDesign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    pub n_sets: usize,
    pub n_classes: usize,
    pub n_params: usize,
    pub jacobian_rank: usize,
    pub jacobian_singular_values: Vec<f64>,
    pub lifted_rank: usize,
    pub lifted_condition: f64,
    pub flags: Vec<DesignFlag>,
    /// Ambiguities no flux design can remove.
    pub inherent_ambiguities: Vec<String>,
}

impl IdentifiabilityReport {
    pub fn is_healthy(&self) -> bool {
        self.flags.is_empty()
    }
}

fn numerical_rank(sv: &[f64], rows: usize, cols: usize) -> usize {
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let tol = RANK_RTOL * max * rows.max(cols) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

fn jacobian_at(phases: &DMatrix<Complex64>, k: &[Complex64]) -> DMatrix<f64> {
    // anchor 0: its imaginary part is not a parameter
    let (nf, nh) = phases.shape();
    let mut jac = DMatrix::zeros(nf, 2 * nh - 1);
    for f in 0..nf {
        let a: Complex64 = (0..nh).map(|h| phases[(f, h)] * k[h]).sum();
        for h in 0..nh {
            let w = a.conj() * phases[(f, h)];
            jac[(f, h)] = 2.0 * w.re;
            if h > 0 {
                jac[(f, nh + h - 1)] = -2.0 * w.im;
            }
        }
    }
    jac
}

/// Structural diagnosis of a flux design for the given classes.
pub fn identifiability_report(sets: &[Vec<f64>], classes: &[HomotopyClass]) -> Result<IdentifiabilityReport, InversionError> {
    if classes.is_empty() {
        return Err(InversionError::Structural("no classes".into()));
    }
    let phases = phase_matrix(sets, classes)?;
    let nf = sets.len();
    let nh = classes.len();
    let n_params = 2 * nh - 1;
    let mut flags = Vec::new();
    if nf <= 2 * nh {
        flags.push(DesignFlag::Underdetermined { n_sets: nf, n_params });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut k: Vec<Complex64> =
        (0..nh).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    k[0] = Complex64::new(1.0, 0.0);
    let jac = jacobian_at(&phases, &k);
    let sv: Vec<f64> = if nf == 0 { Vec::new() } else { jac.clone().svd(false, false).singular_values.iter().cloned().collect() };
    let jacobian_rank = numerical_rank(&sv, nf, n_params);
    if jacobian_rank < n_params {
        flags.push(DesignFlag::RankDeficient { rank: jacobian_rank, needed: n_params });
    }

    let lifted = lifted_matrix(sets, classes);
    let lsv: Vec<f64> = if nf == 0 { Vec::new() } else { lifted.clone().svd(false, false).singular_values.iter().cloned().collect() };
    let lifted_rank = numerical_rank(&lsv, lifted.nrows(), lifted.ncols());
    let lifted_condition = condition_measure(sets, classes);

    let row_distance = |a: usize, b: usize, conj: bool| -> f64 {
        (0..nh)
            .map(|h| {
                let q = if conj { phases[(b, h)].conj() } else { phases[(b, h)] };
                (phases[(a, h)] - q).norm()
            })
            .fold(0.0, f64::max)
    };
    let mut pairs = 0;
    for a in 0..nf {
        for b in a + 1..nf {
            if row_distance(a, b, false) < DUPLICATE_TOL {
                pairs += 1;
            }
        }
    }
    if pairs > 0 {
        flags.push(DesignFlag::DuplicateSets { pairs });
    }
    if nh > 1 && (0..nf).all(|f| (0..nh).all(|h| (phases[(f, h)] - phases[(f, 0)]).norm() < DUPLICATE_TOL)) {
        flags.push(DesignFlag::ObservesOnlyTotal);
    }
    let informative: Vec<usize> =
        (0..nf).filter(|&f| (0..nh).any(|h| (phases[(f, h)] - phases[(f, 0)]).norm() >= DUPLICATE_TOL)).collect();
    if !informative.is_empty()
        && informative.iter().all(|&a| informative.iter().any(|&b| b != a && row_distance(a, b, true) < DUPLICATE_TOL))
    {
        flags.push(DesignFlag::SymmetricDesign);
    }

    let mut inherent = vec!["global phase".to_string()];
    let mirrored = classes.iter().all(|c| {
        let neg: Vec<i64> = c.winding.iter().map(|n| -n).collect();
        classes.iter().any(|d| d.winding == neg)
    });
    if nh > 1 && mirrored {
        inherent.push("conjugate twin K_n -> conj(K_-n)".to_string());
    }
    if nh > 2 && classes[0].winding.len() == 1 {
        inherent.push("reflection of roots of the winding polynomial through the unit circle".to_string());
    }

    Ok(IdentifiabilityReport {
        n_sets: nf,
        n_classes: nh,
        n_params,
        jacobian_rank,
        jacobian_singular_values: sv,
        lifted_rank,
        lifted_condition,
        flags,
        inherent_ambiguities: inherent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::design_fluxes;
    use crate::homotopy::{enumerate_classes, DEFAULT_CLASS_LIMIT};

    fn classes() -> Vec<HomotopyClass> {
        enumerate_classes(2, 1, DEFAULT_CLASS_LIMIT).unwrap()
    }

    #[test]
    fn random_designs_are_healthy() {
        let cl = classes();
        let healthy = (0..100)
            .filter(|&s| {
                let d = design_fluxes(&cl, 2.5, 0.0, s).unwrap();
                identifiability_report(&d.design.sets, &cl).unwrap().is_healthy()
            })
            .count();
        assert!(healthy >= 95, "{healthy}");
    }

    #[test]
    fn duplicate_sets_are_rank_deficient() {
        let cl = classes();
        let sets = vec![vec![0.7, 2.1]; 24];
        let r = identifiability_report(&sets, &cl).unwrap();
        assert!(r.flags.contains(&DesignFlag::DuplicateSets { pairs: 24 * 23 / 2 }));
        assert!(r.flags.iter().any(|f| matches!(f, DesignFlag::RankDeficient { rank: 1, .. })));
    }

    #[test]
    fn all_off_sees_only_the_total() {
        let cl = classes();
        let sets = vec![vec![0.0, 0.0]; 24];
        let r = identifiability_report(&sets, &cl).unwrap();
        assert!(r.flags.contains(&DesignFlag::ObservesOnlyTotal));
        assert_eq!(r.jacobian_rank, 1);
    }

    #[test]
    fn too_few_sets_and_symmetric_designs() {
        let cl = classes();
        let d = design_fluxes(&cl, 2.5, 0.0, 3).unwrap();
        let r = identifiability_report(&d.design.sets[..10], &cl).unwrap();
        assert!(matches!(r.flags[0], DesignFlag::Underdetermined { .. }));
        let mut sym = d.design.sets.clone();
        sym.extend(d.design.sets.iter().map(|s| s.iter().map(|x| -x).collect::<Vec<_>>()));
        let r = identifiability_report(&sym, &cl).unwrap();
        assert!(r.flags.contains(&DesignFlag::SymmetricDesign));
    }

    #[test]
    fn inherent_ambiguities_listed() {
        let cl = classes();
        let d = design_fluxes(&cl, 2.5, 0.0, 3).unwrap();
        let r = identifiability_report(&d.design.sets, &cl).unwrap();
        assert_eq!(r.inherent_ambiguities.len(), 2);
        let one = enumerate_classes(1, 1, DEFAULT_CLASS_LIMIT).unwrap();
        let d = design_fluxes(&one, 3.0, 0.0, 3).unwrap();
        let r = identifiability_report(&d.design.sets, &one).unwrap();
        assert_eq!(r.inherent_ambiguities.len(), 3);
    }
}
