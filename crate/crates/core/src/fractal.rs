//! Resolution-dependent expected path length and its power-law scaling.
//!
//! `⟨L(Δx)⟩ = Σ_h L(h) K_h / Σ_h K_h` is complex in general; its modulus is
//! reported as the length and the complex value is kept alongside. A power law
//! `L(ε) = L₀ ε^{−α}` with `ε = Δx/l₀` gives the Hausdorff dimension `d_H = α + 1`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use std::io::{self, Write};

use crate::csvio::num;
use crate::forward::{design_fluxes, run_experiment, ClassAmplitudes};
use crate::homotopy::{representative_paths, Point, SolenoidArray};
use crate::inversion::{resolve_near_equivalents, solve, InversionProblem, SolveOptions};
use crate::oracle::{free_class_amplitudes, monitored_length_with, LatticeSpec, MonitorSpec};
use crate::propagator::PropagatorParams;
use crate::seeds;

/// Default floor on `|Σ K| / Σ |K|`.
pub const DEFAULT_NORMALIZATION_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FractalError {
    #[error("degenerate normalisation: |sum K| / sum |K| = {ratio:e} is below {floor:e}")]
    Degenerate { ratio: f64, floor: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("power-law fit needs at least 3 points, got {0}")]
    Arity(usize),
    #[error("at delta_x = {delta_x}: {stage} failed: {message}")]
    Stage { delta_x: f64, stage: &'static str, message: String, structural: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthEstimate {
    pub value: Complex64,
    /// `|value|`.
    pub reported: f64,
    /// `Σ_excluded |K| / Σ_all |K|`.
    pub excluded_weight: f64,
}

/// Weighted class length. Classes with `None` length and the `overflow`
/// amplitude are excluded from both sums; their share of `Σ|K|` is reported.
pub fn expected_length(
    amplitudes: &[Complex64],
    lengths: &[Option<f64>],
    overflow: Complex64,
    floor: f64,
) -> Result<LengthEstimate, FractalError> {
    if amplitudes.len() != lengths.len() {
        return Err(FractalError::Domain(format!("{} amplitudes for {} lengths", amplitudes.len(), lengths.len())));
    }
    if lengths.iter().flatten().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(FractalError::Domain("class lengths must be finite and non-negative".into()));
    }
    let mut num_sum = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    let mut kept_abs = 0.0;
    let mut excluded_abs = overflow.norm();
    for (k, l) in amplitudes.iter().zip(lengths) {
        match l {
            Some(l) => {
                num_sum += k * l;
                den += k;
                kept_abs += k.norm();
            }
            None => excluded_abs += k.norm(),
        }
    }
    let ratio = if kept_abs > 0.0 { den.norm() / kept_abs } else { 0.0 };
    if !(ratio >= floor) {
        return Err(FractalError::Degenerate { ratio, floor });
    }
    let value = num_sum / den;
    Ok(LengthEstimate { value, reported: value.norm(), excluded_weight: excluded_abs / (kept_abs + excluded_abs) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub delta_x: f64,
    pub epsilon: f64,
    pub length: f64,
    pub value: Complex64,
    pub excluded_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "alpha")]
    pub exponent_alpha: f64,
    #[serde(rename = "d_H")]
    pub d_h: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSeries {
    /// Sorted by decreasing `delta_x`.
    pub points: Vec<ScalingPoint>,
    pub unit_length: f64,
    pub fit: Option<PowerLawFit>,
}

impl ScalingSeries {
    pub fn new(mut points: Vec<ScalingPoint>, unit_length: f64) -> Result<Self, FractalError> {
        if !(unit_length > 0.0 && unit_length.is_finite()) {
            return Err(FractalError::Domain(format!("unit length must be > 0, got {unit_length}")));
        }
        for p in points.iter_mut() {
            if !(p.delta_x > 0.0 && p.delta_x.is_finite()) {
                return Err(FractalError::Domain(format!("delta_x must be > 0, got {}", p.delta_x)));
            }
            p.epsilon = p.delta_x / unit_length;
        }
        points.sort_by(|a, b| b.delta_x.total_cmp(&a.delta_x));
        Ok(Self { points, unit_length, fit: None })
    }

    /// Points with exactly `length = l0 · ε^{−exponent}`.
    pub fn synthetic(delta_xs: &[f64], unit_length: f64, l0: f64, exponent: f64) -> Result<Self, FractalError> {
        let points = delta_xs
            .iter()
            .map(|&dx| {
                let length = l0 * (dx / unit_length).powf(-exponent);
                ScalingPoint { delta_x: dx, epsilon: 0.0, length, value: Complex64::new(length, 0.0), excluded_weight: 0.0 }
            })
            .collect();
        Self::new(points, unit_length)
    }

    pub fn excluded_weight(&self) -> f64 {
        self.points.iter().map(|p| p.excluded_weight).fold(0.0, f64::max)
    }
}

/// Ordinary least squares of `ln L` on `ln ε`.
pub fn fit_power_law(series: &ScalingSeries) -> Result<ScalingSeries, FractalError> {
    let n = series.points.len();
    if n < 3 {
        return Err(FractalError::Arity(n));
    }
    if let Some(p) = series.points.iter().find(|p| !(p.length > 0.0 && p.length.is_finite())) {
        return Err(FractalError::Domain(format!("length at delta_x = {} is not positive: {}", p.delta_x, p.length)));
    }
    let xs: Vec<f64> = series.points.iter().map(|p| p.epsilon.ln()).collect();
    let ys: Vec<f64> = series.points.iter().map(|p| p.length.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n as f64;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FractalError::Domain("all points share one epsilon".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_tot: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let exponent_alpha = -slope;
    let mut out = series.clone();
    out.fit = Some(PowerLawFit { l0: intercept.exp(), exponent_alpha, d_h: exponent_alpha + 1.0, r_squared });
    Ok(out)
}

/// `Δx_k = Δx₀ · 2^{−k}`.
pub fn geometric_ladder(delta_x0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| delta_x0 * 0.5f64.powi(k as i32)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    /// Lattice amplitudes weighted by representative-path lengths.
    Oracle,
    /// Lattice amplitudes → intensities → inversion → weighted lengths.
    Experiment,
    /// Mean length of position-monitored free paths.
    Monitored,
    /// Exact power law, for checking the fitter end to end.
    Synthetic,
}

impl PipelineMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Experiment => "experiment",
            Self::Monitored => "monitored",
            Self::Synthetic => "synthetic",
        }
    }
}

/// How the solenoid array is regenerated at each spacing: as many solenoids at
/// pitch `Δx` as fit in `extent` along each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrayLayout {
    Column { center: Point, extent: f64 },
    Grid { center: Point, extent: [f64; 2] },
}

impl ArrayLayout {
    pub fn build(&self, delta_x: f64, source: Point, detector: Point) -> Result<SolenoidArray, FractalError> {
        let fit = |e: f64| (e / delta_x + 1e-9).floor() as usize;
        let array = match *self {
            Self::Column { center, extent } => SolenoidArray::column(fit(extent), delta_x, center, source, detector),
            Self::Grid { center, extent } => SolenoidArray::grid(fit(extent[0]), fit(extent[1]), delta_x, center, source, detector),
        };
        array.map_err(|e| FractalError::Stage { delta_x, stage: "array", message: e.to_string(), structural: true })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub source: Point,
    pub detector: Point,
    pub layout: ArrayLayout,
    pub params: PropagatorParams,
    pub n_cut: u32,
    pub lattice: LatticeSpec,
    pub oversampling: f64,
    pub noise_level: f64,
    pub inversion: SolveOptions,
    pub monitor_steps: usize,
    pub monitor_samples: usize,
    pub kick_scale: f64,
    pub synthetic_l0: f64,
    pub synthetic_exponent: f64,
    pub unit_length: f64,
    pub normalization_floor: f64,
    pub seed: u64,
}

impl ScanConfig {
    pub fn chord_length(&self) -> f64 {
        let d = [self.detector[0] - self.source[0], self.detector[1] - self.source[1]];
        d[0].hypot(d[1])
    }
}

fn stage<E: std::fmt::Display>(delta_x: f64, stage: &'static str, structural: bool) -> impl FnOnce(E) -> FractalError {
    move |e| FractalError::Stage { delta_x, stage, message: e.to_string(), structural }
}

fn scan_point(cfg: &ScanConfig, k: usize, delta_x: f64, mode: PipelineMode) -> Result<ScalingPoint, FractalError> {
    let point = |est: LengthEstimate| ScalingPoint {
        delta_x,
        epsilon: delta_x / cfg.unit_length,
        length: est.reported,
        value: est.value,
        excluded_weight: est.excluded_weight,
    };
    match mode {
        PipelineMode::Synthetic => {
            let length = cfg.synthetic_l0 * (delta_x / cfg.unit_length).powf(-cfg.synthetic_exponent);
            let v = Complex64::new(length, 0.0);
            return Ok(point(LengthEstimate { value: v, reported: length, excluded_weight: 0.0 }));
        }
        PipelineMode::Monitored => {
            let displacement = [cfg.detector[0] - cfg.source[0], cfg.detector[1] - cfg.source[1]];
            let spec = MonitorSpec {
                delta_x,
                n_steps: cfg.monitor_steps,
                samples: cfg.monitor_samples,
                seed: seeds::derive(cfg.seed, &format!("monitored/{k}")),
                kick_scale: cfg.kick_scale,
                displacement,
            };
            let m = monitored_length_with(&spec, &cfg.params).map_err(stage(delta_x, "monitored sampler", false))?;
            let v = Complex64::new(m.mean_length, 0.0);
            return Ok(point(LengthEstimate { value: v, reported: m.mean_length, excluded_weight: 0.0 }));
        }
        PipelineMode::Oracle | PipelineMode::Experiment => {}
    }
    let array = cfg.layout.build(delta_x, cfg.source, cfg.detector)?;
    if array.is_empty() {
        let l = cfg.chord_length();
        return Ok(point(LengthEstimate { value: Complex64::new(l, 0.0), reported: l, excluded_weight: 0.0 }));
    }
    let lattice = free_class_amplitudes(&array, &cfg.params, &cfg.lattice, cfg.n_cut).map_err(stage(delta_x, "lattice oracle", true))?;
    let paths = representative_paths(&lattice.classes, &array).map_err(stage(delta_x, "representative paths", true))?;
    let lengths: Vec<Option<f64>> = paths.iter().map(|p| p.as_ref().map(|p| p.length())).collect();
    let amplitudes = match mode {
        PipelineMode::Oracle => lattice.amplitudes.clone(),
        _ => {
            let truth = ClassAmplitudes { classes: lattice.classes.clone(), values: lattice.amplitudes.clone() };
            experiment_amplitudes(cfg, k, delta_x, &truth, &lengths)?.values
        }
    };
    let overflow = if mode == PipelineMode::Oracle { lattice.overflow } else { Complex64::new(0.0, 0.0) };
    let est = expected_length(&amplitudes, &lengths, overflow, cfg.normalization_floor).map_err(|e| match e {
        FractalError::Stage { .. } => e,
        other => FractalError::Stage { delta_x, stage: "expected length", message: other.to_string(), structural: false },
    })?;
    Ok(point(est))
}

/// Simulated measurement and inversion of `truth`, with the inherent
/// ambiguities resolved by the length prior.
pub fn experiment_amplitudes(
    cfg: &ScanConfig,
    k: usize,
    delta_x: f64,
    truth: &ClassAmplitudes,
    lengths: &[Option<f64>],
) -> Result<ClassAmplitudes, FractalError> {
    let design = design_fluxes(&truth.classes, cfg.oversampling, cfg.noise_level, seeds::derive(cfg.seed, &format!("design/{k}")))
        .map_err(stage(delta_x, "flux design", true))?;
    let exp = run_experiment(&design.design, truth).map_err(stage(delta_x, "forward model", true))?;
    let problem = InversionProblem::from_experiment(&exp, &truth.classes).map_err(stage(delta_x, "inversion", true))?;
    let opts = SolveOptions { seed: seeds::derive(cfg.seed, &format!("inversion/{k}")), ..cfg.inversion };
    let result = solve(&problem, &opts).map_err(stage(delta_x, "inversion", true))?;
    if !result.converged {
        return Err(FractalError::Stage { delta_x, stage: "inversion", message: "did not converge".into(), structural: false });
    }
    resolve_near_equivalents(&problem, &result, lengths, &opts).map_err(stage(delta_x, "ambiguity resolution", false))
}

/// Runs the chosen pipeline at every spacing; points are computed in parallel.
pub fn length_scan(cfg: &ScanConfig, spacings: &[f64], mode: PipelineMode) -> Result<ScalingSeries, FractalError> {
    if spacings.len() < 3 {
        return Err(FractalError::Arity(spacings.len()));
    }
    if let Some(dx) = spacings.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(FractalError::Domain(format!("spacing must be > 0, got {dx}")));
    }
    let points = spacings
        .par_iter()
        .enumerate()
        .map(|(k, &dx)| scan_point(cfg, k, dx, mode))
        .collect::<Result<Vec<_>, _>>()?;
    ScalingSeries::new(points, cfg.unit_length)
}

pub fn write_scaling_csv<W: Write>(series: &ScalingSeries, mut out: W) -> io::Result<()> {
    writeln!(out, "delta_x,epsilon,length_re,length_im,length_abs")?;
    for p in &series.points {
        writeln!(out, "{},{},{},{},{}", num(p.delta_x), num(p.epsilon), num(p.value.re), num(p.value.im), num(p.length))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FitRecord {
    #[serde(rename = "L0")]
    l0: f64,
    alpha: f64,
    #[serde(rename = "d_H")]
    d_h: f64,
    r_squared: f64,
    n_points: usize,
    excluded_weight: f64,
}

pub fn fit_json(series: &ScalingSeries) -> Result<String, FractalError> {
    let fit = series.fit.ok_or_else(|| FractalError::Domain("series has no fit".into()))?;
    let rec = FitRecord {
        l0: fit.l0,
        alpha: fit.exponent_alpha,
        d_h: fit.d_h,
        r_squared: fit.r_squared,
        n_points: series.points.len(),
        excluded_weight: series.excluded_weight(),
    };
    serde_json::to_string_pretty(&rec).map_err(|e| FractalError::Domain(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);

    #[test]
    fn single_class_and_equal_lengths() {
        let e = expected_length(&[c(0.3, -2.0)], &[Some(4.5)], ZERO, 1e-8).unwrap();
        assert_eq!(e.reported, 4.5);
        let amps = [c(0.3, -2.0), c(-1.1, 0.4), c(0.2, 0.9)];
        let e = expected_length(&amps, &[Some(2.5); 3], ZERO, 1e-8).unwrap();
        assert!((e.reported - 2.5).abs() < 1e-14);
        assert_eq!(e.excluded_weight, 0.0);
    }

    #[test]
    fn cancelling_weights_are_degenerate() {
        let r = expected_length(&[c(1.0, 0.0), c(-1.0, 0.0)], &[Some(1.0), Some(2.0)], ZERO, 1e-8);
        assert!(matches!(r, Err(FractalError::Degenerate { .. })));
        assert!(expected_length(&[c(1.0, 0.0)], &[None], ZERO, 1e-8).is_err());
    }

    proptest! {
        #[test]
        fn exclusion_moves_length_by_at_most_weight_times_max(
            ks in proptest::collection::vec(0.01f64..1.0, 4),
            ls in proptest::collection::vec(0.5f64..10.0, 4),
            drop in 0usize..4,
        ) {
            // positive weights make the average a convex combination
            let amps: Vec<Complex64> = ks.iter().map(|&k| c(k, 0.0)).collect();
            let all: Vec<Option<f64>> = ls.iter().map(|&l| Some(l)).collect();
            let mut some = all.clone();
            some[drop] = None;
            let full = expected_length(&amps, &all, ZERO, 1e-8).unwrap();
            let part = expected_length(&amps, &some, ZERO, 1e-8).unwrap();
            let lmax = ls.iter().cloned().fold(0.0, f64::max);
            prop_assert!((part.reported - full.reported).abs() <= part.excluded_weight * lmax * (1.0 + 1e-12));
            prop_assert!((part.excluded_weight - ks[drop] / ks.iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn overflow_counts_as_excluded() {
        let e = expected_length(&[c(3.0, 0.0)], &[Some(1.0)], c(0.0, 1.0), 1e-8).unwrap();
        assert!((e.excluded_weight - 0.25).abs() < 1e-15);
        assert_eq!(e.reported, 1.0);
    }

    #[test]
    fn exact_power_law() {
        let s = ScalingSeries::synthetic(&[1.0, 0.5, 0.25], 1.0, 3.0, 1.0).unwrap();
        let f = fit_power_law(&s).unwrap().fit.unwrap();
        assert!((f.l0 - 3.0).abs() < 1e-12);
        assert!((f.exponent_alpha - 1.0).abs() < 1e-12);
        assert_eq!(f.d_h, f.exponent_alpha + 1.0);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let flat = ScalingSeries::synthetic(&[0.3, 0.2, 0.1, 0.05], 1.0, 2.0, 0.0).unwrap();
        let f = fit_power_law(&flat).unwrap().fit.unwrap();
        assert!(f.exponent_alpha.abs() < 1e-12);
        assert!((f.d_h - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn unit_length_only_moves_prefactor(
            l0 in 0.1f64..10.0,
            alpha in -0.5f64..2.0,
            unit in 0.01f64..100.0,
        ) {
            let dx = geometric_ladder(0.4, 5);
            let a = fit_power_law(&ScalingSeries::synthetic(&dx, 1.0, l0, alpha).unwrap()).unwrap();
            let mut rescaled = a.clone();
            rescaled.fit = None;
            let b = fit_power_law(&ScalingSeries::new(rescaled.points, unit).unwrap()).unwrap();
            let (fa, fb) = (a.fit.unwrap(), b.fit.unwrap());
            prop_assert!((fa.exponent_alpha - fb.exponent_alpha).abs() < 1e-12);
            prop_assert!((fa.d_h - fb.d_h).abs() < 1e-12);
            prop_assert!((fb.l0 - fa.l0 * unit.powf(-alpha)).abs() < 1e-9 * fa.l0.max(fb.l0));
            prop_assert!((fb.r_squared - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_rejects_bad_series() {
        let s = ScalingSeries::synthetic(&[1.0, 0.5], 1.0, 3.0, 1.0).unwrap();
        assert!(matches!(fit_power_law(&s), Err(FractalError::Arity(2))));
        let mut s = ScalingSeries::synthetic(&[1.0, 0.5, 0.25], 1.0, 3.0, 1.0).unwrap();
        s.points[1].length = 0.0;
        assert!(matches!(fit_power_law(&s), Err(FractalError::Domain(_))));
    }

    #[test]
    fn series_sorted_by_decreasing_spacing() {
        let s = ScalingSeries::synthetic(&[0.25, 1.0, 0.5], 2.0, 1.0, 1.0).unwrap();
        let dx: Vec<f64> = s.points.iter().map(|p| p.delta_x).collect();
        assert_eq!(dx, vec![1.0, 0.5, 0.25]);
        assert_eq!(s.points[0].epsilon, 0.5);
    }

    pub(crate) fn desk_config() -> ScanConfig {
        ScanConfig {
            source: [-1.0, -0.3],
            detector: [1.0, -0.3],
            layout: ArrayLayout::Column { center: [0.0, 0.0], extent: 0.3 },
            params: PropagatorParams { total_time: 2.0, time_rotation: PI / 2.0, ..Default::default() },
            n_cut: 1,
            lattice: LatticeSpec::new(12, 4.0, 41, 2),
            oversampling: 4.0,
            noise_level: 0.0,
            inversion: SolveOptions::default(),
            monitor_steps: 50,
            monitor_samples: 1000,
            kick_scale: 1.0,
            synthetic_l0: 2.0,
            synthetic_exponent: 1.0,
            unit_length: 1.0,
            normalization_floor: DEFAULT_NORMALIZATION_FLOOR,
            seed: 7,
        }
    }

    #[test]
    fn empty_array_gives_chord() {
        let cfg = desk_config();
        let s = length_scan(&cfg, &[0.5, 0.4, 0.35], PipelineMode::Oracle).unwrap();
        for p in &s.points {
            assert_eq!(p.length, 2.0);
        }
    }

    #[test]
    fn oracle_and_experiment_agree_noiseless() {
        let cfg = desk_config();
        let dx = [0.5, 0.3, 0.15];
        let a = length_scan(&cfg, &dx, PipelineMode::Oracle).unwrap();
        let b = length_scan(&cfg, &dx, PipelineMode::Experiment).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p.length - q.length).abs() < 1e-6 * p.length, "{} vs {} at {}", p.length, q.length, p.delta_x);
        }
    }

    #[test]
    fn monitored_lengths_grow_as_spacing_shrinks() {
        let mut cfg = desk_config();
        cfg.params = PropagatorParams { total_time: 10.0, ..Default::default() };
        cfg.detector = [1.0, -0.3];
        let s = length_scan(&cfg, &geometric_ladder(0.1, 4), PipelineMode::Monitored).unwrap();
        for w in s.points.windows(2) {
            assert!(w[1].length >= w[0].length);
        }
    }

    #[test]
    fn synthetic_mode_and_writers() {
        let cfg = desk_config();
        let s = fit_power_law(&length_scan(&cfg, &geometric_ladder(0.2, 4), PipelineMode::Synthetic).unwrap()).unwrap();
        let f = s.fit.unwrap();
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        write_scaling_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("delta_x,epsilon,length_re,length_im,length_abs\n"));
        assert_eq!(text.lines().count(), 5);
        let json: serde_json::Value = serde_json::from_str(&fit_json(&s).unwrap()).unwrap();
        for key in ["L0", "alpha", "d_H", "r_squared", "n_points", "excluded_weight"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
