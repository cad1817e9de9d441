//! Solenoid arrays, winding numbers of polylines and homotopy classes.
//!
//! Angles about solenoid `i` are measured with `atan2`, i.e. on the principal
//! branch `(−π, π]`. Along a path the accumulated angle is continuous; the
//! winding about `i` is `round((accumulated − (θ′ᵢ − θᵢ)) / 2π)`.

mod paths;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use paths::{class_length, representative_path, representative_paths, waypoints, PathSearch};

/// Default upper bound on the number of enumerated classes.
pub const DEFAULT_CLASS_LIMIT: usize = 1_000_000;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HomotopyError {
    #[error("invalid array: {0}")]
    InvalidArray(String),
    #[error("segment {segment} passes through solenoid {solenoid}; winding undefined")]
    Topology { segment: usize, solenoid: usize },
    #[error("{what}: {requested} exceeds limit {limit}")]
    Capacity { what: &'static str, requested: usize, limit: usize },
    #[error("class {winding:?} is not reachable on the waypoint graph")]
    Unrepresentable { winding: Vec<i64> },
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidArray {
    pub positions: Vec<Point>,
    pub spacing: f64,
    /// Fluxes `φᵢ`; the flux parameter is `αᵢ = φᵢ/2π`.
    pub fluxes: Vec<f64>,
    pub source: Point,
    pub detector: Point,
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// Signed angle swept about `c` along the straight segment `a → b`, in `(−π, π]`.
pub fn segment_angle(c: Point, a: Point, b: Point) -> f64 {
    let u = [a[0] - c[0], a[1] - c[1]];
    let v = [b[0] - c[0], b[1] - c[1]];
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.atan2(dot)
}

/// Principal azimuth of `p` about `c`.
pub fn azimuth(c: Point, p: Point) -> f64 {
    (p[1] - c[1]).atan2(p[0] - c[0])
}

impl SolenoidArray {
    pub fn new(positions: Vec<Point>, spacing: f64, fluxes: Vec<f64>, source: Point, detector: Point) -> Result<Self, HomotopyError> {
        let a = Self { positions, spacing, fluxes, source, detector };
        a.validate()?;
        Ok(a)
    }

    /// `count` solenoids on the vertical line `x = center[0]`, centred on `center`.
    pub fn column(count: usize, spacing: f64, center: Point, source: Point, detector: Point) -> Result<Self, HomotopyError> {
        Self::grid(1, count, spacing, center, source, detector)
    }

    /// `nx × ny` square grid centred on `center`, row-major from the lowest row.
    pub fn grid(nx: usize, ny: usize, spacing: f64, center: Point, source: Point, detector: Point) -> Result<Self, HomotopyError> {
        let mut positions = Vec::with_capacity(nx * ny);
        let x0 = center[0] - 0.5 * (nx.max(1) - 1) as f64 * spacing;
        let y0 = center[1] - 0.5 * (ny.max(1) - 1) as f64 * spacing;
        for j in 0..ny {
            for i in 0..nx {
                positions.push([x0 + i as f64 * spacing, y0 + j as f64 * spacing]);
            }
        }
        let n = positions.len();
        Self::new(positions, spacing, vec![0.0; n], source, detector)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn with_fluxes(mut self, fluxes: Vec<f64>) -> Result<Self, HomotopyError> {
        self.fluxes = fluxes;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), HomotopyError> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(HomotopyError::InvalidArray(format!("spacing must be > 0, got {}", self.spacing)));
        }
        if self.fluxes.len() != self.positions.len() {
            return Err(HomotopyError::InvalidArray(format!(
                "{} fluxes for {} solenoids",
                self.fluxes.len(),
                self.positions.len()
            )));
        }
        let finite = |p: &Point| p[0].is_finite() && p[1].is_finite();
        if !self.positions.iter().all(finite) || !finite(&self.source) || !finite(&self.detector) {
            return Err(HomotopyError::InvalidArray("coordinates must be finite".into()));
        }
        if !self.fluxes.iter().all(|f| f.is_finite()) {
            return Err(HomotopyError::InvalidArray("fluxes must be finite".into()));
        }
        let eps = 1e-9 * self.spacing;
        for (i, p) in self.positions.iter().enumerate() {
            for q in &self.positions[i + 1..] {
                if dist(*p, *q) <= eps {
                    return Err(HomotopyError::InvalidArray(format!("duplicate solenoid position {p:?}")));
                }
            }
            if dist(*p, self.source) <= eps || dist(*p, self.detector) <= eps {
                return Err(HomotopyError::InvalidArray(format!("endpoint coincides with solenoid at {p:?}")));
            }
        }
        Ok(())
    }

    /// Flux parameters `αᵢ = φᵢ/2π`.
    pub fn alphas(&self) -> Vec<f64> {
        self.fluxes.iter().map(|f| f / (2.0 * PI)).collect()
    }

    /// `(θᵢ, θ′ᵢ)`: principal azimuths of source and detector about each solenoid.
    pub fn endpoint_angles(&self) -> Vec<(f64, f64)> {
        self.positions
            .iter()
            .map(|&c| (azimuth(c, self.source), azimuth(c, self.detector)))
            .collect()
    }

    pub fn chord_length(&self) -> f64 {
        dist(self.source, self.detector)
    }

    /// Smallest distance between a solenoid and any point of the polyline.
    pub fn clearance(&self, path: &Polyline) -> f64 {
        let mut best = f64::INFINITY;
        for w in path.vertices.windows(2) {
            for &c in &self.positions {
                best = best.min(point_segment_distance(c, w[0], w[1]));
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HomotopyClass {
    pub winding: Vec<i64>,
    pub cutoff: u32,
    /// 1-based position in the lexicographic enumeration.
    pub index: usize,
}

impl HomotopyClass {
    /// Builds the class for `winding`, computing its index within the cutoff box.
    pub fn from_winding(winding: Vec<i64>, cutoff: u32) -> Result<Self, HomotopyError> {
        let c = cutoff as i64;
        let base = 2 * c + 1;
        let mut idx: usize = 0;
        for &n in &winding {
            if n.abs() > c {
                return Err(HomotopyError::Domain(format!("winding {winding:?} outside cutoff {cutoff}")));
            }
            idx = idx * base as usize + (n + c) as usize;
        }
        Ok(Self { winding, cutoff, index: idx + 1 })
    }

    /// Winding vector rendered as `n1;n2;...`.
    pub fn label(&self) -> String {
        winding_label(&self.winding)
    }
}

pub fn winding_label(w: &[i64]) -> String {
    w.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub vertices: Vec<Point>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self, HomotopyError> {
        if vertices.len() < 2 {
            return Err(HomotopyError::Domain("a polyline needs at least 2 vertices".into()));
        }
        Ok(Self { vertices })
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| dist(w[0], w[1])).sum()
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self { vertices: v }
    }

    /// Joins `self` and `other`, which must start where `self` ends.
    pub fn concat(&self, other: &Polyline) -> Result<Self, HomotopyError> {
        let last = *self.vertices.last().expect("non-empty");
        if dist(last, other.vertices[0]) > 1e-12 {
            return Err(HomotopyError::Domain("polylines do not connect".into()));
        }
        let mut v = self.vertices.clone();
        v.extend_from_slice(&other.vertices[1..]);
        Ok(Self { vertices: v })
    }
}

/// Accumulated angles about each solenoid and the resulting winding numbers.
///
/// The endpoints used are the polyline's own first and last vertices.
pub fn winding_vector(path: &Polyline, array: &SolenoidArray) -> Result<(Vec<i64>, Vec<f64>), HomotopyError> {
    let eps = 1e-12 * array.spacing;
    let first = path.vertices[0];
    let last = *path.vertices.last().expect("non-empty");
    let mut winding = Vec::with_capacity(array.len());
    let mut acc = Vec::with_capacity(array.len());
    for (i, &c) in array.positions.iter().enumerate() {
        let mut total = 0.0;
        for (s, w) in path.vertices.windows(2).enumerate() {
            if point_segment_distance(c, w[0], w[1]) <= eps {
                return Err(HomotopyError::Topology { segment: s, solenoid: i });
            }
            total += segment_angle(c, w[0], w[1]);
        }
        let d = azimuth(c, last) - azimuth(c, first);
        winding.push(((total - d) / (2.0 * PI)).round() as i64);
        acc.push(total);
    }
    Ok((winding, acc))
}

/// All `(2·n_cut+1)^{N_S}` classes, lexicographic in the winding vector with
/// the first solenoid most significant and each component running `−n_cut..=n_cut`.
pub fn enumerate_classes(n_solenoids: usize, n_cut: u32, limit: usize) -> Result<Vec<HomotopyClass>, HomotopyError> {
    let base = 2 * n_cut as usize + 1;
    let mut count: usize = 1;
    for _ in 0..n_solenoids {
        count = count.checked_mul(base).filter(|&c| c <= limit).ok_or(HomotopyError::Capacity {
            what: "number of homotopy classes",
            requested: base.saturating_pow(n_solenoids as u32),
            limit,
        })?;
    }
    let c = n_cut as i64;
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut w = vec![0i64; n_solenoids];
        let mut rem = idx;
        for slot in w.iter_mut().rev() {
            *slot = (rem % base) as i64 - c;
            rem /= base;
        }
        out.push(HomotopyClass { winding: w, cutoff: n_cut, index: idx + 1 });
    }
    Ok(out)
}

/// `exp(i Σᵢ αᵢ((θ′ᵢ − θᵢ) + 2π nᵢ))` with `αᵢ = φᵢ/2π`.
pub fn generalized_phase(class: &HomotopyClass, fluxes: &[f64], endpoint_angles: &[(f64, f64)]) -> Result<Complex64, HomotopyError> {
    if class.winding.len() != fluxes.len() || fluxes.len() != endpoint_angles.len() {
        return Err(HomotopyError::Domain(format!(
            "class has {} components, {} fluxes, {} angle pairs",
            class.winding.len(),
            fluxes.len(),
            endpoint_angles.len()
        )));
    }
    let mut arg = 0.0;
    for ((&n, &phi), &(t, tp)) in class.winding.iter().zip(fluxes).zip(endpoint_angles) {
        arg += phi / (2.0 * PI) * ((tp - t) + 2.0 * PI * n as f64);
    }
    Ok(Complex64::from_polar(1.0, arg))
}

/// Interference part `exp(2πi Σᵢ αᵢ nᵢ)` of the generalized phase; the endpoint
/// term is common to all classes.
pub fn winding_phase(winding: &[i64], alphas: &[f64]) -> Complex64 {
    let arg: f64 = winding.iter().zip(alphas).map(|(&n, &a)| 2.0 * PI * a * n as f64).sum();
    Complex64::from_polar(1.0, arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single() -> SolenoidArray {
        SolenoidArray::new(vec![[0.0, 0.0]], 1.0, vec![0.0], [-2.0, -0.5], [2.0, -0.5]).unwrap()
    }

    fn pair() -> SolenoidArray {
        SolenoidArray::new(vec![[0.0, 0.0], [1.0, 0.0]], 1.0, vec![0.0, 0.0], [-2.0, -1.0], [3.0, -1.0]).unwrap()
    }

    fn loop_around(c: Point, r: f64, start: Point) -> Vec<Point> {
        // counter-clockwise square around c, entered and left at `start`
        vec![start, [c[0] + r, c[1] - r], [c[0] + r, c[1] + r], [c[0] - r, c[1] + r], [c[0] - r, c[1] - r], start]
    }

    #[test]
    fn straight_chord_outside_hull_has_zero_winding() {
        let a = pair();
        let p = Polyline::new(vec![a.source, a.detector]).unwrap();
        assert_eq!(winding_vector(&p, &a).unwrap().0, vec![0, 0]);
    }

    #[test]
    fn single_loop_counts_once() {
        let a = pair();
        let hub = [0.0, -0.4];
        let mut v = vec![a.source];
        v.extend(loop_around([0.0, 0.0], 0.4, hub));
        v.push(a.detector);
        let p = Polyline::new(v).unwrap();
        assert_eq!(winding_vector(&p, &a).unwrap().0, vec![1, 0]);
    }

    #[test]
    fn loop_order_does_not_matter() {
        let a = pair();
        let hub1 = [0.0, -0.4];
        let hub2 = [1.0, -0.4];
        let mut first = vec![a.source];
        first.extend(loop_around([0.0, 0.0], 0.4, hub1));
        first.extend(loop_around([1.0, 0.0], 0.4, hub2).iter().rev());
        first.push(a.detector);
        let mut second = vec![a.source, hub1];
        second.extend(loop_around([1.0, 0.0], 0.4, hub2).iter().rev());
        second.extend(loop_around([0.0, 0.0], 0.4, hub1));
        second.push(a.detector);
        let w1 = winding_vector(&Polyline::new(first).unwrap(), &a).unwrap().0;
        let w2 = winding_vector(&Polyline::new(second).unwrap(), &a).unwrap().0;
        assert_eq!(w1, vec![1, -1]);
        assert_eq!(w1, w2);
    }

    #[test]
    fn segment_through_solenoid_is_rejected() {
        let a = single();
        let p = Polyline::new(vec![[-1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(winding_vector(&p, &a), Err(HomotopyError::Topology { .. })));
    }

    #[test]
    fn enumeration_counts_and_order() {
        let c = enumerate_classes(1, 1, DEFAULT_CLASS_LIMIT).unwrap();
        let w: Vec<_> = c.iter().map(|h| h.winding.clone()).collect();
        assert_eq!(w, vec![vec![-1], vec![0], vec![1]]);
        assert_eq!(enumerate_classes(2, 1, DEFAULT_CLASS_LIMIT).unwrap().len(), 9);
        let c3 = enumerate_classes(3, 2, DEFAULT_CLASS_LIMIT).unwrap();
        assert_eq!(c3.len(), 125);
        for (k, h) in c3.iter().enumerate() {
            assert_eq!(h.index, k + 1);
            assert_eq!(HomotopyClass::from_winding(h.winding.clone(), 2).unwrap().index, h.index);
        }
        assert!(c3.windows(2).all(|p| p[0].winding < p[1].winding));
        assert!(matches!(enumerate_classes(20, 2, 1000), Err(HomotopyError::Capacity { .. })));
    }

    #[test]
    fn phase_special_cases() {
        let a = pair();
        let ang = a.endpoint_angles();
        let h = HomotopyClass::from_winding(vec![1, -2], 2).unwrap();
        assert_eq!(generalized_phase(&h, &[0.0, 0.0], &ang).unwrap(), Complex64::new(1.0, 0.0));
        let s = single();
        let sa = s.endpoint_angles();
        let alpha: f64 = 0.3;
        let phi = 2.0 * PI * alpha;
        let h1 = HomotopyClass::from_winding(vec![2], 2).unwrap();
        let want = Complex64::from_polar(1.0, alpha * (sa[0].1 - sa[0].0 + 4.0 * PI));
        assert!((generalized_phase(&h1, &[phi], &sa).unwrap() - want).norm() < 1e-15);
        let fa = [0.7, -1.1];
        let fb = [2.0, 0.4];
        let fab = [fa[0] + fb[0], fa[1] + fb[1]];
        let pa = generalized_phase(&h, &fa, &ang).unwrap();
        let pb = generalized_phase(&h, &fb, &ang).unwrap();
        let pab = generalized_phase(&h, &fab, &ang).unwrap();
        assert!((pa * pb - pab).norm() < 1e-14);
    }

    fn random_path() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y)| [x, y]), 2..9)
    }

    proptest! {
        #[test]
        fn deformation_leaves_winding_unchanged(v in random_path(), jitter in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9)) {
            let a = SolenoidArray::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 1.0, vec![0.0; 3], v[0], *v.last().unwrap());
            prop_assume!(a.is_ok());
            let a = a.unwrap();
            let p = Polyline::new(v.clone()).unwrap();
            let clear = a.clearance(&p);
            prop_assume!(clear > 1e-3);
            let (w0, _) = winding_vector(&p, &a).unwrap();
            let mut moved = v.clone();
            let n = moved.len();
            // a vertex moving by δ moves every segment point by at most δ
            let step = 0.49 * clear;
            for (k, vert) in moved.iter_mut().enumerate().take(n - 1).skip(1) {
                vert[0] += step * jitter[k].0 / 2f64.sqrt();
                vert[1] += step * jitter[k].1 / 2f64.sqrt();
            }
            let (w1, _) = winding_vector(&Polyline::new(moved).unwrap(), &a).unwrap();
            prop_assert_eq!(w0, w1);
        }

        #[test]
        fn reversal_negates(v in random_path()) {
            let a = SolenoidArray::new(vec![[0.0, 0.0], [0.5, 0.5]], 0.5, vec![0.0; 2], v[0], *v.last().unwrap());
            prop_assume!(a.is_ok());
            let a = a.unwrap();
            let p = Polyline::new(v).unwrap();
            prop_assume!(a.clearance(&p) > 1e-6);
            let (w, acc) = winding_vector(&p, &a).unwrap();
            let (wr, accr) = winding_vector(&p.reversed(), &a).unwrap();
            for i in 0..2 {
                prop_assert!((acc[i] + accr[i]).abs() < 1e-12);
                prop_assert_eq!(w[i], -wr[i]);
            }
        }

        #[test]
        fn concatenation_adds(v in random_path(), u in random_path()) {
            let a = SolenoidArray::new(vec![[0.1, 0.2], [-0.7, 0.4]], 0.5, vec![0.0; 2], v[0], *u.last().unwrap());
            prop_assume!(a.is_ok());
            let a = a.unwrap();
            let p = Polyline::new(v).unwrap();
            let mut uu = u.clone();
            uu[0] = *p.vertices.last().unwrap();
            let q = Polyline::new(uu).unwrap();
            let pq = p.concat(&q).unwrap();
            prop_assume!(a.clearance(&pq) > 1e-6);
            let (_, a1) = winding_vector(&p, &a).unwrap();
            let (_, a2) = winding_vector(&q, &a).unwrap();
            let (_, a12) = winding_vector(&pq, &a).unwrap();
            for i in 0..2 {
                prop_assert!((a1[i] + a2[i] - a12[i]).abs() < 1e-11);
            }
        }
    }
}
