//! Time-sliced path integral on a square grid, resolved by winding sheet.
//!
//! Each slice applies the exact free Gaussian kernel for the step
//! `Δτ = T e^{-iδ}/N_t`, truncated where `|G| < 10⁻¹² |G(0)|`. The first slice
//! starts at the source, the last one ends at the detector, the `N_t − 2`
//! slices in between map grid to grid. A hop carries sheet changes about every
//! solenoid whose branch cut it crosses; amplitude leaving the tracked sheet
//! box moves to an untracked overflow field, so tracked sheets plus overflow
//! always sum to the untracked propagation. Hops touching a solenoid are
//! dropped in every run.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::OracleError;
use crate::homotopy::{azimuth, enumerate_classes, point_segment_distance, segment_angle, HomotopyClass, Point, SolenoidArray, DEFAULT_CLASS_LIMIT};
use crate::propagator::PropagatorParams;

pub const DEFAULT_MEMORY_BUDGET: usize = 512 << 20;
const STENCIL_CUTOFF: f64 = 1e-12;
const ALIAS_LIMIT: f64 = 1e-8;
const GRID_SHIFT: [f64; 2] = [0.37, 0.29];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub time_steps: usize,
    /// Half-width of the square window.
    pub grid_extent: f64,
    pub grid_points_per_axis: usize,
    pub winding_clamp: u32,
    pub memory_budget: usize,
}

impl LatticeSpec {
    pub fn new(time_steps: usize, grid_extent: f64, grid_points_per_axis: usize, winding_clamp: u32) -> Self {
        Self { time_steps, grid_extent, grid_points_per_axis, winding_clamp, memory_budget: DEFAULT_MEMORY_BUDGET }
    }

    pub fn grid_spacing(&self) -> f64 {
        2.0 * self.grid_extent / (self.grid_points_per_axis - 1) as f64
    }
}

/// Amplitudes binned by class at the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeAmplitudes {
    pub classes: Vec<HomotopyClass>,
    pub amplitudes: Vec<Complex64>,
    /// Everything outside the `n_cut` box: sheets beyond the clamp and tracked
    /// sheets beyond `n_cut`.
    pub overflow: Complex64,
    /// `Σ path length × amplitude` per class when length tracking is on.
    pub path_length_moments: Option<Vec<Complex64>>,
    pub grid_spacing: f64,
    pub time_step: Complex64,
}

impl LatticeAmplitudes {
    pub fn total(&self) -> Complex64 {
        self.amplitudes.iter().sum::<Complex64>() + self.overflow
    }
}

/// Geometry and kernel data shared by tracked and untracked runs.
struct Plan {
    n: usize,
    a: f64,
    offsets: Vec<(i64, i64, Complex64, f64)>,
    /// Per (target, offset): 0 = plain hop, `u16::MAX` = dropped, else pattern id.
    hop: Vec<u16>,
    patterns: Vec<Vec<i64>>,
    first: Vec<(Complex64, u16)>,
    last: Vec<(Complex64, u16)>,
    source_distances: Vec<f64>,
    detector_distances: Vec<f64>,
}

fn check_inputs(array: &SolenoidArray, params: &PropagatorParams, lattice: &LatticeSpec) -> Result<(Complex64, [f64; 2]), OracleError> {
    params.validate()?;
    array.validate()?;
    if lattice.time_steps < 2 {
        return Err(OracleError::Domain(format!("time_steps must be >= 2, got {}", lattice.time_steps)));
    }
    if lattice.grid_points_per_axis < 2 || !(lattice.grid_extent > 0.0 && lattice.grid_extent.is_finite()) {
        return Err(OracleError::Domain("grid needs >= 2 points per axis and a positive extent".into()));
    }
    let mut pts = vec![array.source, array.detector];
    pts.extend_from_slice(&array.positions);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let margin = 2.0 * array.spacing;
    for p in &pts {
        for k in 0..2 {
            if (p[k] - center[k]).abs() > lattice.grid_extent - margin {
                return Err(OracleError::Geometry(format!(
                    "point {p:?} is closer than 2 spacings to the grid boundary (extent {})",
                    lattice.grid_extent
                )));
            }
        }
    }
    let dtau = Complex64::from_polar(params.total_time / lattice.time_steps as f64, -params.time_rotation);
    let a = lattice.grid_spacing();
    let alias = (-2.0 * PI * PI * params.hbar * (params.total_time / lattice.time_steps as f64) * params.time_rotation.sin()
        / (params.mass * a * a))
        .exp();
    if !(alias < ALIAS_LIMIT) {
        return Err(OracleError::Resolution(format!(
            "grid spacing {a} does not resolve the step kernel (aliasing {alias:.3e}); rotate the time or refine the grid"
        )));
    }
    Ok((dtau, center))
}

fn hop_sheets(array: &SolenoidArray, from: Point, to: Point, eps: f64) -> Option<Vec<i64>> {
    let mut v = Vec::with_capacity(array.len());
    for &c in &array.positions {
        if point_segment_distance(c, from, to) <= eps {
            return None;
        }
        let d = segment_angle(c, from, to) - (azimuth(c, to) - azimuth(c, from));
        v.push((d / (2.0 * PI)).round() as i64);
    }
    Some(v)
}

impl Plan {
    fn build(array: &SolenoidArray, params: &PropagatorParams, lattice: &LatticeSpec) -> Result<Self, OracleError> {
        let (dtau, center) = check_inputs(array, params, lattice)?;
        let n = lattice.grid_points_per_axis;
        let a = lattice.grid_spacing();
        let mu = params.mass;
        let hbar = params.hbar;
        let pref = mu / (Complex64::new(0.0, 2.0 * PI) * hbar * dtau);
        let kernel = move |d2: f64| pref * (Complex64::new(0.0, mu * d2 * 0.5) / (hbar * dtau)).exp();
        let decay = mu * params.time_rotation.sin() / (2.0 * hbar * dtau.norm());
        let r2max = -STENCIL_CUTOFF.ln() / decay;
        let rmax = (r2max.sqrt() / a).floor() as i64;
        let mut offsets = Vec::new();
        for di in -rmax..=rmax {
            for dj in -rmax..=rmax {
                let d2 = ((di * di + dj * dj) as f64) * a * a;
                if d2 <= r2max {
                    offsets.push((di, dj, kernel(d2) * (a * a), d2.sqrt()));
                }
            }
        }
        let mut coords = Vec::with_capacity(n * n);
        let half = 0.5 * (n - 1) as f64;
        for i in 0..n {
            for j in 0..n {
                coords.push([
                    center[0] + (i as f64 - half + GRID_SHIFT[0]) * a,
                    center[1] + (j as f64 - half + GRID_SHIFT[1]) * a,
                ]);
            }
        }
        let eps = 1e-9 * a;
        let mut pattern_ids: HashMap<Vec<i64>, u16> = HashMap::new();
        let mut patterns: Vec<Vec<i64>> = vec![vec![0; array.len()]];
        pattern_ids.insert(vec![0; array.len()], 0);
        let mut intern = |v: Option<Vec<i64>>| -> Result<u16, OracleError> {
            match v {
                None => Ok(u16::MAX),
                Some(v) => {
                    if let Some(&id) = pattern_ids.get(&v) {
                        return Ok(id);
                    }
                    let id = patterns.len();
                    if id >= u16::MAX as usize {
                        return Err(OracleError::Capacity { required: id, budget: u16::MAX as usize - 1 });
                    }
                    pattern_ids.insert(v.clone(), id as u16);
                    patterns.push(v);
                    Ok(id as u16)
                }
            }
        };
        let n_off = offsets.len();
        let bytes = estimate_bytes(n, n_off, 1, false);
        if bytes > lattice.memory_budget {
            return Err(OracleError::Capacity { required: bytes, budget: lattice.memory_budget });
        }
        let mut hop = vec![u16::MAX; n * n * n_off];
        for ti in 0..n {
            for tj in 0..n {
                let t = ti * n + tj;
                for (k, &(di, dj, _, _)) in offsets.iter().enumerate() {
                    let (si, sj) = (ti as i64 - di, tj as i64 - dj);
                    if si < 0 || sj < 0 || si >= n as i64 || sj >= n as i64 {
                        continue;
                    }
                    let s = si as usize * n + sj as usize;
                    hop[t * n_off + k] = intern(hop_sheets(array, coords[s], coords[t], eps))?;
                }
            }
        }
        let cut = |d2: f64| (-decay * d2).exp() >= STENCIL_CUTOFF;
        let mut first = Vec::with_capacity(n * n);
        let mut last = Vec::with_capacity(n * n);
        let source_distances = coords.iter().map(|&x| dist(x, array.source)).collect();
        let detector_distances = coords.iter().map(|&x| dist(x, array.detector)).collect();
        for &x in &coords {
            let d2s = (x[0] - array.source[0]).powi(2) + (x[1] - array.source[1]).powi(2);
            let d2d = (x[0] - array.detector[0]).powi(2) + (x[1] - array.detector[1]).powi(2);
            let ps = if cut(d2s) { intern(hop_sheets(array, array.source, x, eps))? } else { u16::MAX };
            let pd = if cut(d2d) { intern(hop_sheets(array, x, array.detector, eps))? } else { u16::MAX };
            first.push((kernel(d2s), ps));
            last.push((kernel(d2d) * (a * a), pd));
        }
        Ok(Self { n, a, offsets, hop, patterns, first, last, source_distances, detector_distances })
    }
}

fn estimate_bytes(n: usize, n_off: usize, sheet_states: usize, track_length: bool) -> usize {
    let fields = if track_length { 2 } else { 1 };
    let per_point = (sheet_states + 1) * 16 * 2 * fields;
    (n * n).saturating_mul(per_point).saturating_add((n * n).saturating_mul(n_off * 2 + 64))
}

/// Sheet-box bookkeeping: mixed-radix codes and per-pattern transition tables.
struct Sheets {
    clamp: i64,
    n_sol: usize,
    count: usize,
    /// `table[p][code]` is the new code, or `usize::MAX` if it leaves the box.
    table: Vec<Vec<usize>>,
}

impl Sheets {
    fn new(n_sol: usize, clamp: u32, patterns: &[Vec<i64>], budget: usize) -> Result<Self, OracleError> {
        let base = 2 * clamp as usize + 1;
        let count = (0..n_sol)
            .try_fold(1usize, |acc, _| acc.checked_mul(base))
            .filter(|&c| c.saturating_mul(patterns.len()).saturating_mul(8) <= budget)
            .ok_or(OracleError::Capacity { required: usize::MAX, budget })?;
        let clamp = clamp as i64;
        let mut table = Vec::with_capacity(patterns.len());
        for p in patterns {
            let mut row = Vec::with_capacity(count);
            for code in 0..count {
                let mut v = decode(code, n_sol, base, clamp);
                let mut inside = true;
                for (s, d) in v.iter_mut().zip(p) {
                    *s += d;
                    inside &= s.abs() <= clamp;
                }
                row.push(if inside { encode(&v, base, clamp) } else { usize::MAX });
            }
            table.push(row);
        }
        Ok(Self { clamp, n_sol, count, table })
    }

    fn zero(&self) -> usize {
        encode(&vec![0; self.n_sol], 2 * self.clamp as usize + 1, self.clamp)
    }
}

fn decode(mut code: usize, n: usize, base: usize, clamp: i64) -> Vec<i64> {
    let mut v = vec![0i64; n];
    for slot in v.iter_mut().rev() {
        *slot = (code % base) as i64 - clamp;
        code /= base;
    }
    v
}

fn encode(v: &[i64], base: usize, clamp: i64) -> usize {
    v.iter().fold(0usize, |acc, &s| acc * base + (s + clamp) as usize)
}

struct Fields {
    /// `[grid point][sheet code]`
    psi: Vec<Complex64>,
    overflow: Vec<Complex64>,
    len: Option<(Vec<Complex64>, Vec<Complex64>)>,
}

fn propagate(plan: &Plan, sheets: &Sheets, track_length: bool, steps: usize) -> Fields {
    let np = plan.n * plan.n;
    let s_count = sheets.count;
    let zero = sheets.zero();
    let c0 = Complex64::new(0.0, 0.0);
    let mut psi = vec![c0; np * s_count];
    let mut overflow = vec![c0; np];
    let mut len = track_length.then(|| (vec![c0; np * s_count], vec![c0; np]));
    for (g, &(w, p)) in plan.first.iter().enumerate() {
        if p == u16::MAX {
            continue;
        }
        let target = sheets.table[p as usize][zero];
        if target == usize::MAX {
            overflow[g] += w;
        } else {
            psi[g * s_count + target] += w;
        }
    }
    if let Some((lp, lo)) = len.as_mut() {
        // length of the first hop from the source
        for g in 0..np {
            let (w, p) = plan.first[g];
            if p == u16::MAX {
                continue;
            }
            let l = plan.source_distances[g];
            let target = sheets.table[p as usize][zero];
            if target == usize::MAX {
                lo[g] += w * l;
            } else {
                lp[g * s_count + target] += w * l;
            }
        }
    }
    let n = plan.n as i64;
    let n_off = plan.offsets.len();
    for _ in 0..steps {
        let mut next = vec![c0; np * s_count];
        let mut next_over = vec![c0; np];
        let mut next_len = len.as_ref().map(|_| (vec![c0; np * s_count], vec![c0; np]));
        let body = |t: usize, out: &mut [Complex64], out_over: &mut Complex64, out_len: Option<(&mut [Complex64], &mut Complex64)>| {
            let (ti, tj) = ((t / plan.n) as i64, (t % plan.n) as i64);
            let mut out_len = out_len;
            for (k, &(di, dj, w, d)) in plan.offsets.iter().enumerate() {
                let p = plan.hop[t * n_off + k];
                if p == u16::MAX {
                    continue;
                }
                let s = ((ti - di) * n + (tj - dj)) as usize;
                let src = &psi[s * s_count..(s + 1) * s_count];
                *out_over += w * overflow[s];
                if p == 0 {
                    for (o, v) in out.iter_mut().zip(src) {
                        *o += w * v;
                    }
                } else {
                    let row = &sheets.table[p as usize];
                    for (code, v) in src.iter().enumerate() {
                        let nc = row[code];
                        if nc == usize::MAX {
                            *out_over += w * v;
                        } else {
                            out[nc] += w * v;
                        }
                    }
                }
                if let (Some((ol, oo)), Some((lp, lo))) = (out_len.as_mut(), len.as_ref()) {
                    let lsrc = &lp[s * s_count..(s + 1) * s_count];
                    **oo += w * (lo[s] + overflow[s] * d);
                    let row = &sheets.table[p as usize];
                    for code in 0..s_count {
                        let contrib = w * (lsrc[code] + src[code] * d);
                        let nc = if p == 0 { code } else { row[code] };
                        if nc == usize::MAX {
                            **oo += contrib;
                        } else {
                            ol[nc] += contrib;
                        }
                    }
                }
            }
        };
        match next_len.as_mut() {
            None => {
                next.par_chunks_mut(s_count)
                    .zip(next_over.par_iter_mut())
                    .enumerate()
                    .for_each(|(t, (out, oo))| body(t, out, oo, None));
            }
            Some((nl, no)) => {
                next.par_chunks_mut(s_count)
                    .zip(next_over.par_iter_mut())
                    .zip(nl.par_chunks_mut(s_count).zip(no.par_iter_mut()))
                    .enumerate()
                    .for_each(|(t, ((out, oo), (ol, olo)))| body(t, out, oo, Some((ol, olo))));
            }
        }
        psi = next;
        overflow = next_over;
        len = next_len;
    }
    Fields { psi, overflow, len }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Detector amplitude per tracked sheet, plus overflow and optional length moments.
fn detect(plan: &Plan, sheets: &Sheets, f: &Fields) -> (Vec<Complex64>, Complex64, Option<(Vec<Complex64>, Complex64)>) {
    let c0 = Complex64::new(0.0, 0.0);
    let s_count = sheets.count;
    let mut amp = vec![c0; s_count];
    let mut over = c0;
    let mut lamp = f.len.as_ref().map(|_| (vec![c0; s_count], c0));
    for (g, &(w, p)) in plan.last.iter().enumerate() {
        if p == u16::MAX {
            continue;
        }
        let d = plan.detector_distances[g];
        over += w * f.overflow[g];
        if let (Some((la, lo)), Some((lp, lof))) = (lamp.as_mut(), f.len.as_ref()) {
            *lo += w * (lof[g] + f.overflow[g] * d);
            for code in 0..s_count {
                let contrib = w * (lp[g * s_count + code] + f.psi[g * s_count + code] * d);
                match sheets.table[p as usize][code] {
                    usize::MAX => *lo += contrib,
                    nc => la[nc] += contrib,
                }
            }
        }
        for code in 0..s_count {
            let v = w * f.psi[g * s_count + code];
            match sheets.table[p as usize][code] {
                usize::MAX => over += v,
                nc => amp[nc] += v,
            }
        }
    }
    (amp, over, lamp)
}

/// Free per-class amplitudes from the winding-resolved lattice.
pub fn free_class_amplitudes(
    array: &SolenoidArray,
    params: &PropagatorParams,
    lattice: &LatticeSpec,
    n_cut: u32,
) -> Result<LatticeAmplitudes, OracleError> {
    run_tracked(array, params, lattice, n_cut, false)
}

/// As [`free_class_amplitudes`], also accumulating `Σ (lattice path length) × amplitude`
/// per class.
pub fn free_class_amplitudes_with_lengths(
    array: &SolenoidArray,
    params: &PropagatorParams,
    lattice: &LatticeSpec,
    n_cut: u32,
) -> Result<LatticeAmplitudes, OracleError> {
    run_tracked(array, params, lattice, n_cut, true)
}

fn run_tracked(
    array: &SolenoidArray,
    params: &PropagatorParams,
    lattice: &LatticeSpec,
    n_cut: u32,
    track_length: bool,
) -> Result<LatticeAmplitudes, OracleError> {
    if lattice.winding_clamp < n_cut {
        return Err(OracleError::Domain(format!(
            "winding_clamp {} is below n_cut {n_cut}",
            lattice.winding_clamp
        )));
    }
    let plan = Plan::build(array, params, lattice)?;
    let sheets = Sheets::new(array.len(), lattice.winding_clamp, &plan.patterns, lattice.memory_budget)?;
    let bytes = estimate_bytes(plan.n, plan.offsets.len(), sheets.count, track_length);
    if bytes > lattice.memory_budget {
        return Err(OracleError::Capacity { required: bytes, budget: lattice.memory_budget });
    }
    let fields = propagate(&plan, &sheets, track_length, lattice.time_steps - 2);
    let (amp, mut overflow, lamp) = detect(&plan, &sheets, &fields);
    let classes = enumerate_classes(array.len(), n_cut, DEFAULT_CLASS_LIMIT)?;
    let base = 2 * sheets.clamp as usize + 1;
    let mut amplitudes = Vec::with_capacity(classes.len());
    let mut moments = lamp.as_ref().map(|_| Vec::with_capacity(classes.len()));
    let mut taken = vec![false; sheets.count];
    for c in &classes {
        let code = encode(&c.winding, base, sheets.clamp);
        taken[code] = true;
        amplitudes.push(amp[code]);
        if let (Some(m), Some((la, _))) = (moments.as_mut(), lamp.as_ref()) {
            m.push(la[code]);
        }
    }
    for (code, v) in amp.iter().enumerate() {
        if !taken[code] {
            overflow += v;
        }
    }
    Ok(LatticeAmplitudes {
        classes,
        amplitudes,
        overflow,
        path_length_moments: moments,
        grid_spacing: plan.a,
        time_step: Complex64::from_polar(params.total_time / lattice.time_steps as f64, -params.time_rotation),
    })
}

/// The same lattice propagation without any winding bookkeeping.
pub fn untracked_amplitude(array: &SolenoidArray, params: &PropagatorParams, lattice: &LatticeSpec) -> Result<Complex64, OracleError> {
    let plan = Plan::build(array, params, lattice)?;
    // a zero-width sheet box sends everything with a non-trivial sheet change to
    // overflow; with one sheet the sum over all states is the plain propagator
    let sheets = Sheets::new(array.len(), 0, &plan.patterns, lattice.memory_budget)?;
    let fields = propagate(&plan, &sheets, false, lattice.time_steps - 2);
    let (amp, over, _) = detect(&plan, &sheets, &fields);
    Ok(amp.iter().sum::<Complex64>() + over)
}

/// `|fine − coarse|` per class: the Richardson-style error estimate of a
/// two-resolution comparison.
pub fn richardson_error(coarse: &LatticeAmplitudes, fine: &LatticeAmplitudes) -> Vec<f64> {
    coarse.amplitudes.iter().zip(&fine.amplitudes).map(|(c, f)| (f - c).norm()).collect()
}
