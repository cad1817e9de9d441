//! Versioned JSON scenario files. Every field has a default except
//! `schema_version`; unknown fields are rejected, and validation runs before
//! any computation, naming the offending field path.

use serde::Deserialize;

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use crate::fractal::{geometric_ladder, ArrayLayout, PipelineMode, ScanConfig};
use crate::homotopy::{enumerate_classes, Point, SolenoidArray, DEFAULT_CLASS_LIMIT};
use crate::inversion::SolveOptions;
use crate::oracle::{LatticeSpec, DEFAULT_MEMORY_BUDGET};
use crate::propagator::{PropagatorParams, DEFAULT_TOLERANCE, FIG1_LENGTH};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ScenarioError {
    pub path: String,
    pub message: String,
}

fn invalid(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError { path: path.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub propagator: PropagatorSection,
    #[serde(default)]
    pub fig1: Fig1Section,
    #[serde(default)]
    pub array: ArraySection,
    #[serde(default = "default_n_cut")]
    pub n_cut: u32,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default)]
    pub inversion: InversionSection,
    #[serde(default)]
    pub hausdorff: HausdorffSection,
}

fn default_n_cut() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorSection {
    pub mass: f64,
    pub total_time: f64,
    pub hbar: f64,
    pub m_max: u32,
    pub tolerance: f64,
    pub time_rotation: f64,
}

impl Default for PropagatorSection {
    fn default() -> Self {
        Self { mass: 1.0, total_time: 10.0, hbar: 1.0, m_max: 50, tolerance: DEFAULT_TOLERANCE, time_rotation: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig1Section {
    pub h_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub length: f64,
}

impl Default for Fig1Section {
    fn default() -> Self {
        Self {
            h_grid: vec![0.5, 1.0, 2.0, 5.0, 10.0],
            alpha_grid: vec![0.0, 0.25, 0.5],
            length: FIG1_LENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Column,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySection {
    pub layout: LayoutKind,
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub center: Point,
    pub source: Point,
    pub detector: Point,
    pub fluxes: Option<Vec<f64>>,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            layout: LayoutKind::Grid,
            nx: 2,
            ny: 1,
            spacing: 0.4,
            center: [0.0, 0.0],
            source: [-1.0, -0.3],
            detector: [1.0, -0.3],
            fluxes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub time_steps: usize,
    pub grid_extent: f64,
    pub grid_points_per_axis: usize,
    pub winding_clamp: u32,
    /// The lattice needs `e^{−iδ}`-rotated time; `π/2` is imaginary time.
    pub time_rotation: f64,
    pub total_time: f64,
    pub memory_budget_mib: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            time_steps: 12,
            grid_extent: 4.0,
            grid_points_per_axis: 41,
            winding_clamp: 2,
            time_rotation: FRAC_PI_2,
            total_time: 2.0,
            memory_budget_mib: DEFAULT_MEMORY_BUDGET >> 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub oversampling: f64,
    pub noise_level: f64,
    /// Keep only the first `n_sets` flux sets of the design.
    pub n_sets: Option<usize>,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self { oversampling: 4.0, noise_level: 0.0, n_sets: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionSection {
    pub tol: f64,
    pub max_iter: usize,
    pub n_starts: usize,
}

impl Default for InversionSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self { tol: d.tol, max_iter: d.max_iter, n_starts: d.n_starts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Oracle,
    Experiment,
    Monitored,
    Synthetic,
}

impl From<ModeName> for PipelineMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Oracle => Self::Oracle,
            ModeName::Experiment => Self::Experiment,
            ModeName::Monitored => Self::Monitored,
            ModeName::Synthetic => Self::Synthetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub delta_x0: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HausdorffSection {
    pub mode: ModeName,
    pub spacings: Option<Vec<f64>>,
    pub ladder: Ladder,
    /// Arrangement regenerated at each spacing, centred on `array.center`.
    pub layout: LayoutKind,
    /// Region filled with solenoids at each spacing (width, height); a column
    /// uses the height.
    pub extent: [f64; 2],
    pub unit_length: f64,
    pub normalization_floor: f64,
    pub monitor_steps: usize,
    pub monitor_samples: usize,
    pub kick_scale: f64,
    pub synthetic_l0: f64,
    pub synthetic_exponent: f64,
}

impl Default for HausdorffSection {
    fn default() -> Self {
        Self {
            mode: ModeName::Oracle,
            spacings: None,
            ladder: Ladder { delta_x0: 0.5, count: 3 },
            layout: LayoutKind::Column,
            extent: [0.3, 0.3],
            unit_length: 1.0,
            normalization_floor: crate::fractal::DEFAULT_NORMALIZATION_FLOOR,
            monitor_steps: 100,
            monitor_samples: 10_000,
            kick_scale: 1.0,
            synthetic_l0: 2.0,
            synthetic_exponent: 1.0,
        }
    }
}

fn positive(path: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be finite and > 0, got {v}")))
    }
}

fn finite_point(path: &str, p: Point) -> Result<(), ScenarioError> {
    if p.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(path, "coordinates must be finite"))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "<root>" } else { &path }, e.into_inner().to_string())
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version)));
        }
        self.propagator_params()
            .validate()
            .map_err(|e| invalid("propagator", e.to_string()))?;
        let f = &self.fig1;
        positive("fig1.length", f.length)?;
        if f.h_grid.is_empty() || f.alpha_grid.is_empty() {
            return Err(invalid("fig1", "h_grid and alpha_grid must be non-empty"));
        }
        for (k, h) in f.h_grid.iter().enumerate() {
            positive(&format!("fig1.h_grid[{k}]"), *h)?;
        }
        for (k, a) in f.alpha_grid.iter().enumerate() {
            if !a.is_finite() {
                return Err(invalid(&format!("fig1.alpha_grid[{k}]"), "must be finite"));
            }
        }
        let a = &self.array;
        positive("array.spacing", a.spacing)?;
        finite_point("array.center", a.center)?;
        finite_point("array.source", a.source)?;
        finite_point("array.detector", a.detector)?;
        if a.source == a.detector {
            return Err(invalid("array.detector", "coincides with the source"));
        }
        if let Some(fl) = &a.fluxes {
            if fl.len() != self.array_size() {
                return Err(invalid("array.fluxes", format!("{} fluxes for {} solenoids", fl.len(), self.array_size())));
            }
        }
        self.build_array().map_err(|e| invalid("array", e.message))?;
        enumerate_classes(self.array_size(), self.n_cut, DEFAULT_CLASS_LIMIT).map_err(|e| invalid("n_cut", e.to_string()))?;
        let l = &self.lattice;
        if l.time_steps < 2 {
            return Err(invalid("lattice.time_steps", "must be >= 2"));
        }
        if l.grid_points_per_axis < 3 {
            return Err(invalid("lattice.grid_points_per_axis", "must be >= 3"));
        }
        positive("lattice.grid_extent", l.grid_extent)?;
        positive("lattice.total_time", l.total_time)?;
        if !(l.time_rotation > 0.0 && l.time_rotation <= FRAC_PI_2) {
            return Err(invalid("lattice.time_rotation", format!("must lie in (0, pi/2], got {}", l.time_rotation)));
        }
        if l.winding_clamp < self.n_cut {
            return Err(invalid("lattice.winding_clamp", format!("must be >= n_cut = {}", self.n_cut)));
        }
        if l.memory_budget_mib == 0 {
            return Err(invalid("lattice.memory_budget_mib", "must be > 0"));
        }
        let d = &self.design;
        if !(d.oversampling >= 2.0 && d.oversampling.is_finite()) {
            return Err(invalid("design.oversampling", format!("must be >= 2, got {}", d.oversampling)));
        }
        if !(d.noise_level >= 0.0 && d.noise_level.is_finite()) {
            return Err(invalid("design.noise_level", format!("must be >= 0, got {}", d.noise_level)));
        }
        if d.n_sets == Some(0) {
            return Err(invalid("design.n_sets", "must be > 0"));
        }
        let i = &self.inversion;
        positive("inversion.tol", i.tol)?;
        if i.max_iter == 0 {
            return Err(invalid("inversion.max_iter", "must be > 0"));
        }
        if i.n_starts == 0 {
            return Err(invalid("inversion.n_starts", "must be > 0"));
        }
        let h = &self.hausdorff;
        match &h.spacings {
            Some(s) => {
                if s.len() < 3 {
                    return Err(invalid("hausdorff.spacings", format!("at least 3 spacings required, got {}", s.len())));
                }
                for (k, v) in s.iter().enumerate() {
                    positive(&format!("hausdorff.spacings[{k}]"), *v)?;
                }
            }
            None => {
                positive("hausdorff.ladder.delta_x0", h.ladder.delta_x0)?;
                if h.ladder.count < 3 {
                    return Err(invalid("hausdorff.ladder.count", format!("must be >= 3, got {}", h.ladder.count)));
                }
            }
        }
        for (k, e) in h.extent.iter().enumerate() {
            if !(*e >= 0.0 && e.is_finite()) {
                return Err(invalid(&format!("hausdorff.extent[{k}]"), "must be finite and >= 0"));
            }
        }
        positive("hausdorff.unit_length", h.unit_length)?;
        positive("hausdorff.normalization_floor", h.normalization_floor)?;
        if h.monitor_steps == 0 {
            return Err(invalid("hausdorff.monitor_steps", "must be > 0"));
        }
        if h.monitor_samples < 100 {
            return Err(invalid("hausdorff.monitor_samples", "must be >= 100"));
        }
        if !(h.kick_scale >= 0.0 && h.kick_scale.is_finite()) {
            return Err(invalid("hausdorff.kick_scale", "must be finite and >= 0"));
        }
        positive("hausdorff.synthetic_l0", h.synthetic_l0)?;
        if !h.synthetic_exponent.is_finite() {
            return Err(invalid("hausdorff.synthetic_exponent", "must be finite"));
        }
        Ok(())
    }

    pub fn array_size(&self) -> usize {
        match self.array.layout {
            LayoutKind::Column => self.array.ny,
            LayoutKind::Grid => self.array.nx * self.array.ny,
        }
    }

    pub fn build_array(&self) -> Result<SolenoidArray, ScenarioError> {
        let a = &self.array;
        let built = match a.layout {
            LayoutKind::Column => SolenoidArray::column(a.ny, a.spacing, a.center, a.source, a.detector),
            LayoutKind::Grid => SolenoidArray::grid(a.nx, a.ny, a.spacing, a.center, a.source, a.detector),
        };
        let built = built.map_err(|e| invalid("array", e.to_string()))?;
        match &a.fluxes {
            Some(f) => built.with_fluxes(f.clone()).map_err(|e| invalid("array.fluxes", e.to_string())),
            None => Ok(built),
        }
    }

    /// Real-time parameters for the closed-form propagators.
    pub fn propagator_params(&self) -> PropagatorParams {
        let p = &self.propagator;
        PropagatorParams {
            mass: p.mass,
            total_time: p.total_time,
            alpha: 0.0,
            m_max: p.m_max,
            hbar: p.hbar,
            time_rotation: p.time_rotation,
            tolerance: p.tolerance,
        }
    }

    /// Rotated-time parameters for the lattice oracle.
    pub fn lattice_params(&self) -> PropagatorParams {
        PropagatorParams {
            total_time: self.lattice.total_time,
            time_rotation: self.lattice.time_rotation,
            ..self.propagator_params()
        }
    }

    pub fn lattice_spec(&self) -> LatticeSpec {
        let l = &self.lattice;
        LatticeSpec {
            memory_budget: l.memory_budget_mib << 20,
            ..LatticeSpec::new(l.time_steps, l.grid_extent, l.grid_points_per_axis, l.winding_clamp)
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        let i = &self.inversion;
        SolveOptions { tol: i.tol, max_iter: i.max_iter, n_starts: i.n_starts, seed: 0 }
    }

    pub fn spacings(&self) -> Vec<f64> {
        let h = &self.hausdorff;
        h.spacings.clone().unwrap_or_else(|| geometric_ladder(h.ladder.delta_x0, h.ladder.count))
    }

    pub fn scan_config(&self, mode: PipelineMode) -> ScanConfig {
        let h = &self.hausdorff;
        let layout = match h.layout {
            LayoutKind::Column => ArrayLayout::Column { center: self.array.center, extent: h.extent[1] },
            LayoutKind::Grid => ArrayLayout::Grid { center: self.array.center, extent: h.extent },
        };
        // the monitored sampler describes real-time motion
        let params = if mode == PipelineMode::Monitored { self.propagator_params() } else { self.lattice_params() };
        ScanConfig {
            source: self.array.source,
            detector: self.array.detector,
            layout,
            params,
            n_cut: self.n_cut,
            lattice: self.lattice_spec(),
            oversampling: self.design.oversampling,
            noise_level: self.design.noise_level,
            inversion: self.solve_options(),
            monitor_steps: h.monitor_steps,
            monitor_samples: h.monitor_samples,
            kick_scale: h.kick_scale,
            synthetic_l0: h.synthetic_l0,
            synthetic_exponent: h.synthetic_exponent,
            unit_length: h.unit_length,
            normalization_floor: h.normalization_floor,
            seed: self.seed,
        }
    }
}
