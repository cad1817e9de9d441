//! Recovery of per-class amplitudes from intensities over many flux sets.
//!
//! The model `I_f = |Σ_h P_fh K_h|²` is fitted by damped least squares on
//! `2N_H − 1` real parameters: one class (the anchor) is held real, which fixes
//! the unobservable global phase. Data are normalised by their mean before
//! fitting.
//!
//! Besides the global phase, intensities never distinguish `K` from its
//! conjugate twin `K'_n = conj(K_{−n})`, because `Σ_n K'_n e^{iψ·n}` is the
//! complex conjugate of `Σ_n K_n e^{iψ·n}`. With a single solenoid the
//! intensities are samples of `|P(e^{iψ})|²` for a polynomial `P`, and each
//! root of `P` can additionally be reflected through the unit circle.

mod identify;
mod lm;
mod roots;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::csvio::num;
use crate::forward::{ClassAmplitudes, Experiment};
use crate::homotopy::{winding_phase, HomotopyClass};

pub use identify::{identifiability_report, DesignFlag, IdentifiabilityReport};
pub use roots::{equivalent_solutions_1d, polynomial_roots};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InversionError {
    #[error("underdetermined: {n_sets} flux sets for {n_classes} classes (need more than {needed})")]
    Underdetermined { n_sets: usize, n_classes: usize, needed: usize },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionProblem {
    pub intensities: Vec<f64>,
    /// `phases[(f, h)]`: interference phase of class `h` under flux set `f`.
    pub phases: DMatrix<Complex64>,
    pub classes: Vec<HomotopyClass>,
    /// Class held real and non-negative; chosen after initialisation when `None`.
    pub gauge_anchor: Option<usize>,
}

impl InversionProblem {
    pub fn new(intensities: Vec<f64>, phases: DMatrix<Complex64>, classes: Vec<HomotopyClass>) -> Result<Self, InversionError> {
        let p = Self { intensities, phases, classes, gauge_anchor: None };
        p.check_shape()?;
        Ok(p)
    }

    pub fn from_experiment(exp: &Experiment, classes: &[HomotopyClass]) -> Result<Self, InversionError> {
        if exp.sets.len() != exp.intensities.len() {
            return Err(InversionError::Structural("flux sets and intensities differ in length".into()));
        }
        let phases = phase_matrix(&exp.sets, classes)?;
        Self::new(exp.intensities.clone(), phases, classes.to_vec())
    }

    pub fn n_sets(&self) -> usize {
        self.intensities.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    fn check_shape(&self) -> Result<(), InversionError> {
        if self.phases.nrows() != self.intensities.len() || self.phases.ncols() != self.classes.len() {
            return Err(InversionError::Structural(format!(
                "phase matrix is {}x{}, expected {}x{}",
                self.phases.nrows(),
                self.phases.ncols(),
                self.intensities.len(),
                self.classes.len()
            )));
        }
        if self.classes.is_empty() {
            return Err(InversionError::Structural("no classes".into()));
        }
        if let Some(a) = self.gauge_anchor {
            if a >= self.classes.len() {
                return Err(InversionError::Structural(format!("anchor {a} out of range")));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), InversionError> {
        self.check_shape()?;
        let needed = 2 * self.n_classes();
        if self.n_sets() <= needed {
            return Err(InversionError::Underdetermined { n_sets: self.n_sets(), n_classes: self.n_classes(), needed });
        }
        if self.phases.iter().any(|p| (p.norm() - 1.0).abs() > 1e-12) {
            return Err(InversionError::Structural("phase entries must have unit modulus".into()));
        }
        if self.intensities.iter().any(|y| !y.is_finite()) {
            return Err(InversionError::Structural("intensities must be finite".into()));
        }
        if !(self.intensities.iter().sum::<f64>() > 0.0) {
            return Err(InversionError::Structural("intensities have non-positive mean".into()));
        }
        Ok(())
    }
}

/// `exp(2πi Σᵢ αᵢnᵢ)` for every (set, class).
pub fn phase_matrix(sets: &[Vec<f64>], classes: &[HomotopyClass]) -> Result<DMatrix<Complex64>, InversionError> {
    for (f, s) in sets.iter().enumerate() {
        if classes.iter().any(|c| c.winding.len() != s.len()) {
            return Err(InversionError::Structural(format!("flux set {f} does not match the class dimension")));
        }
    }
    Ok(DMatrix::from_fn(sets.len(), classes.len(), |f, h| {
        let alphas: Vec<f64> = sets[f].iter().map(|phi| phi / (2.0 * PI)).collect();
        winding_phase(&classes[h].winding, &alphas)
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    pub amplitudes: ClassAmplitudes,
    pub gauge_anchor: usize,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub multistart_best_of: usize,
    pub best_start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Bound on the gradient ∞-norm of the normalised problem. Rounding puts a
    /// floor near 1e-9 under non-zero-residual minima.
    pub tol: f64,
    pub max_iter: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, n_starts: 256, seed: 0 }
    }
}

/// Leading eigenvector of `Σ_f y_f p̄_f p_fᵀ / N_F` by power iteration, scaled to
/// `‖K‖² = mean(y)`.
pub fn spectral_init(problem: &InversionProblem) -> Vec<Complex64> {
    let nf = problem.n_sets();
    let nh = problem.n_classes();
    let mut m = DMatrix::<Complex64>::zeros(nh, nh);
    for f in 0..nf {
        let y = problem.intensities[f];
        for a in 0..nh {
            let pa = problem.phases[(f, a)].conj() * y;
            for b in 0..nh {
                m[(a, b)] += pa * problem.phases[(f, b)];
            }
        }
    }
    m /= Complex64::new(nf as f64, 0.0);
    let mut v = nalgebra::DVector::from_fn(nh, |k, _| Complex64::new(1.0 + 0.1 * k as f64, 0.05 * k as f64));
    for _ in 0..500 {
        let w = &m * &v;
        let n = w.norm();
        if n == 0.0 {
            break;
        }
        v = w / Complex64::new(n, 0.0);
    }
    let mean = problem.intensities.iter().sum::<f64>() / nf as f64;
    let scale = mean.max(0.0).sqrt();
    v.iter().map(|z| z * scale).collect()
}

fn anchor_of(v: &[Complex64]) -> usize {
    let mut best = 0;
    for (k, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() {
            best = k;
        }
    }
    best
}

fn rotate_to_anchor(v: &mut [Complex64], anchor: usize) {
    let a = v[anchor];
    if a.norm() > 0.0 {
        let rot = a.conj() / a.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
    v[anchor] = Complex64::new(v[anchor].re.abs(), 0.0);
}

/// Multi-start damped least squares.
pub fn solve(problem: &InversionProblem, options: &SolveOptions) -> Result<InversionResult, InversionError> {
    problem.validate()?;
    if !(options.tol > 0.0) {
        return Err(InversionError::Domain("tol must be > 0".into()));
    }
    let nf = problem.n_sets();
    let nh = problem.n_classes();
    let mean = problem.intensities.iter().sum::<f64>() / nf as f64;
    let y: Vec<f64> = problem.intensities.iter().map(|v| v / mean).collect();
    let scale = mean.sqrt();
    if nh == 1 {
        let k = Complex64::new(1.0, 0.0);
        let rms = (y.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() / nf as f64).sqrt() * mean;
        return Ok(InversionResult {
            amplitudes: ClassAmplitudes { classes: problem.classes.clone(), values: vec![k * scale] },
            gauge_anchor: 0,
            residual_rms: rms,
            iterations: 0,
            converged: true,
            multistart_best_of: 1,
            best_start: 0,
        });
    }
    let normalised = InversionProblem { intensities: y.clone(), ..problem.clone() };
    let init = spectral_init(&normalised);
    let anchor = problem.gauge_anchor.unwrap_or_else(|| anchor_of(&init));
    let n_starts = options.n_starts.max(1);
    let model = lm::Model { phases: &problem.phases, y: &y, anchor };
    let runs: Vec<lm::Outcome> = (0..n_starts)
        .into_par_iter()
        .map(|s| {
            let mut start = if s == 0 {
                init.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(s as u64);
                let sd = (0.5 / nh as f64).sqrt();
                (0..nh)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re * sd, im * sd)
                    })
                    .collect()
            };
            rotate_to_anchor(&mut start, anchor);
            model.fit(&start, options.tol, options.max_iter)
        })
        .collect();
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.cost < runs[best].cost {
            best = k;
        }
    }
    let r = &runs[best];
    let mut values: Vec<Complex64> = r.amplitudes.iter().map(|z| z * scale).collect();
    if values[anchor].re < 0.0 {
        for z in values.iter_mut() {
            *z = -*z;
        }
    }
    values[anchor].im = 0.0;
    let residual_rms = (2.0 * r.cost / nf as f64).sqrt() * mean;
    Ok(InversionResult {
        amplitudes: ClassAmplitudes { classes: problem.classes.clone(), values },
        gauge_anchor: anchor,
        residual_rms,
        iterations: r.iterations,
        converged: r.converged,
        multistart_best_of: n_starts,
        best_start: best,
    })
}

fn check_pair(a: &[Complex64], b: &[Complex64]) -> Result<f64, InversionError> {
    if a.len() != b.len() {
        return Err(InversionError::Domain(format!("{} vs {} amplitudes", a.len(), b.len())));
    }
    let n = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(InversionError::Domain("truth has zero norm".into()));
    }
    Ok(n)
}

/// `min_γ ‖e^{iγ} estimate − truth‖ / ‖truth‖`, with `γ = arg Σ truth·conj(estimate)`.
pub fn aligned_error(estimate: &[Complex64], truth: &[Complex64]) -> Result<f64, InversionError> {
    let n = check_pair(estimate, truth)?;
    let overlap: Complex64 = truth.iter().zip(estimate).map(|(t, e)| t * e.conj()).sum();
    let rot = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    let d = estimate.iter().zip(truth).map(|(e, t)| (rot * e - t).norm_sqr()).sum::<f64>().sqrt();
    Ok(d / n)
}

/// Conjugate twin `K'_n = conj(K_{−n})`; every class's negation must be present.
pub fn conjugate_twin(amps: &ClassAmplitudes) -> Result<ClassAmplitudes, InversionError> {
    let mut values = Vec::with_capacity(amps.values.len());
    for c in &amps.classes {
        let neg: Vec<i64> = c.winding.iter().map(|n| -n).collect();
        let j = amps
            .classes
            .iter()
            .position(|d| d.winding == neg)
            .ok_or_else(|| InversionError::Domain(format!("class set lacks the mirror of {:?}", c.winding)))?;
        values.push(amps.values[j].conj());
    }
    Ok(ClassAmplitudes { classes: amps.classes.clone(), values })
}

/// Smaller of the aligned errors of `estimate` and of its conjugate twin.
pub fn twin_aligned_error(estimate: &ClassAmplitudes, truth: &[Complex64]) -> Result<f64, InversionError> {
    let direct = aligned_error(&estimate.values, truth)?;
    let twin = aligned_error(&conjugate_twin(estimate)?.values, truth)?;
    Ok(direct.min(twin))
}

/// Smallest aligned error over every amplitude vector producing the same
/// intensities as `estimate` that this crate can enumerate: the conjugate twin
/// and, for one solenoid, all root reflections.
pub fn equivalence_aligned_error(estimate: &ClassAmplitudes, truth: &[Complex64]) -> Result<f64, InversionError> {
    let mut best = twin_aligned_error(estimate, truth)?;
    if estimate.n_solenoids() == 1 && estimate.values.len() >= 3 {
        for alt in equivalent_solutions_1d(estimate)? {
            best = best.min(aligned_error(&alt.values, truth)?);
        }
    }
    Ok(best)
}

/// Among `estimate` and the equivalent solutions this crate can enumerate (the
/// conjugate twin, and root reflections for one solenoid), the one with the
/// smallest `Σ_h |K_h|² L(h)`: longer classes are expected to carry less weight.
/// Classes without a length do not contribute.
pub fn resolve_by_length_prior(estimate: &ClassAmplitudes, lengths: &[Option<f64>]) -> Result<ClassAmplitudes, InversionError> {
    if lengths.len() != estimate.values.len() {
        return Err(InversionError::Domain("one length entry per class required".into()));
    }
    let cost = |a: &ClassAmplitudes| {
        a.values.iter().zip(lengths).filter_map(|(k, l)| l.map(|l| k.norm_sqr() * l)).sum::<f64>()
    };
    let mut candidates = vec![estimate.clone(), conjugate_twin(estimate)?];
    if estimate.n_solenoids() == 1 && estimate.values.len() >= 3 {
        candidates.extend(equivalent_solutions_1d(estimate)?);
    }
    let mut best = 0;
    for (k, c) in candidates.iter().enumerate() {
        if cost(c) < cost(&candidates[best]) {
            best = k;
        }
    }
    Ok(candidates.swap_remove(best))
}

/// Candidate costs within this factor of the best fit count as indistinguishable.
pub const NEAR_EQUIVALENT_COST_RATIO: f64 = 2.0;
/// Shift candidates are generated only up to this many solenoids (3^N_S shifts).
pub const MAX_SHIFT_SOLENOIDS: usize = 4;

/// `K'_n = K_{n−s}`, with classes shifted out of the truncation box dropped.
pub fn shift_windings(amps: &ClassAmplitudes, shift: &[i64]) -> ClassAmplitudes {
    let values = amps
        .classes
        .iter()
        .map(|c| {
            let src: Vec<i64> = c.winding.iter().zip(shift).map(|(n, s)| n - s).collect();
            amps.classes.iter().position(|d| d.winding == src).map_or(Complex64::new(0.0, 0.0), |j| amps.values[j])
        })
        .collect();
    ClassAmplitudes { classes: amps.classes.clone(), values }
}

/// Length-prior resolution that also considers near-equivalent solutions.
///
/// A uniform winding shift `K'_n = K_{n−s}` multiplies every detector amplitude
/// by a unit phase, so it changes intensities only through the classes pushed
/// across the truncation boundary. When those carry little weight the shifted
/// vector fits noisy data as well as the truth. Each shift of `result` and of
/// its twin is refitted; refits whose cost is within
/// [`NEAR_EQUIVALENT_COST_RATIO`] of the best join the candidates of
/// [`resolve_by_length_prior`].
pub fn resolve_near_equivalents(
    problem: &InversionProblem,
    result: &InversionResult,
    lengths: &[Option<f64>],
    options: &SolveOptions,
) -> Result<ClassAmplitudes, InversionError> {
    let n_s = result.amplitudes.n_solenoids();
    let nh = problem.n_classes();
    if nh == 1 || n_s == 0 || n_s > MAX_SHIFT_SOLENOIDS {
        return resolve_by_length_prior(&result.amplitudes, lengths);
    }
    problem.validate()?;
    let nf = problem.n_sets();
    let mean = problem.intensities.iter().sum::<f64>() / nf as f64;
    let y: Vec<f64> = problem.intensities.iter().map(|v| v / mean).collect();
    let scale = mean.sqrt();
    let shifts: Vec<Vec<i64>> = (0..3usize.pow(n_s as u32))
        .map(|mut k| {
            (0..n_s)
                .map(|_| {
                    let d = (k % 3) as i64 - 1;
                    k /= 3;
                    d
                })
                .collect()
        })
        .filter(|s: &Vec<i64>| s.iter().any(|d| *d != 0))
        .collect();
    let bases = [result.amplitudes.clone(), conjugate_twin(&result.amplitudes)?];
    let jobs: Vec<(usize, &Vec<i64>)> = (0..bases.len()).flat_map(|b| shifts.iter().map(move |s| (b, s))).collect();
    let base_cost = {
        let start: Vec<Complex64> = result.amplitudes.values.iter().map(|z| z / scale).collect();
        let model = lm::Model { phases: &problem.phases, y: &y, anchor: result.gauge_anchor };
        model.fit(&start, options.tol, 0).cost
    };
    let refits: Vec<(ClassAmplitudes, f64)> = jobs
        .par_iter()
        .filter_map(|&(b, s)| {
            let shifted = shift_windings(&bases[b], s);
            let mut start: Vec<Complex64> = shifted.values.iter().map(|z| z / scale).collect();
            if start.iter().all(|z| z.norm() == 0.0) {
                return None;
            }
            let anchor = anchor_of(&start);
            rotate_to_anchor(&mut start, anchor);
            let model = lm::Model { phases: &problem.phases, y: &y, anchor };
            let fit = model.fit(&start, options.tol, options.max_iter);
            let sign = if fit.amplitudes[anchor].re < 0.0 { -scale } else { scale };
            let values = fit.amplitudes.iter().map(|z| z * sign).collect();
            Some((ClassAmplitudes { classes: problem.classes.clone(), values }, fit.cost))
        })
        .collect();
    let best_cost = refits.iter().map(|r| r.1).fold(base_cost, f64::min);
    // absolute slack for noiseless data, where both costs sit at rounding level
    let accept = NEAR_EQUIVALENT_COST_RATIO * best_cost + 1e-20;
    let prior = |a: &ClassAmplitudes| a.values.iter().zip(lengths).filter_map(|(k, l)| l.map(|l| k.norm_sqr() * l)).sum::<f64>();
    let mut candidates = Vec::new();
    if base_cost <= accept {
        candidates.push(resolve_by_length_prior(&result.amplitudes, lengths)?);
    }
    for (cand, cost) in &refits {
        if *cost <= accept {
            candidates.push(resolve_by_length_prior(cand, lengths)?);
        }
    }
    let mut picked = candidates.swap_remove(0);
    for c in candidates {
        if prior(&c) < prior(&picked) {
            picked = c;
        }
    }
    Ok(picked)
}

pub fn write_amplitudes_csv<W: Write>(amps: &ClassAmplitudes, mut out: W) -> io::Result<()> {
    writeln!(out, "class_index,winding_vector,re,im")?;
    for (c, v) in amps.classes.iter().zip(&amps.values) {
        writeln!(out, "{},{},{},{}", c.index, c.label(), num(v.re), num(v.im))?;
    }
    Ok(())
}
