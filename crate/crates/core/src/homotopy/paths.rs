//! Shortest representative paths on the waypoint covering graph.
//!
//! Waypoints: source, detector, and for every solenoid `p` the points
//! `p ± (Δx/2)e_x`, `p ± (Δx/2)e_y` (midpoints between neighbours, or bypass
//! points at the array boundary) and `p + (±Δx/2, ±Δx/2)` (cell centres and hull
//! corners). Edges join every pair of waypoints whose segment misses all
//! solenoids. Search states are `(waypoint, sheet vector)`: the sheet of
//! solenoid `i` at a point `x` is the integer `s` with
//! `accumulated angle = θᵢ(x) − θᵢ(source) + 2πs`, so at the detector it equals
//! the winding number.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use super::{azimuth, point_segment_distance, segment_angle, HomotopyClass, HomotopyError, Point, Polyline, SolenoidArray};

/// Upper bound on covering-graph states.
pub const DEFAULT_STATE_LIMIT: usize = 20_000_000;

/// Waypoint set in search order: source first, detector last, the rest sorted
/// by `(x, y)`.
pub fn waypoints(array: &SolenoidArray) -> Vec<Point> {
    let h = 0.5 * array.spacing;
    let q = |v: f64| (v / (1e-9 * array.spacing)).round() as i64;
    let mut pts: Vec<Point> = Vec::new();
    for &p in &array.positions {
        for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h, h), (h, -h), (-h, h), (-h, -h)] {
            pts.push([p[0] + dx, p[1] + dy]);
        }
    }
    pts.sort_by(|a, b| (q(a[0]), q(a[1])).cmp(&(q(b[0]), q(b[1]))));
    pts.dedup_by(|a, b| q(a[0]) == q(b[0]) && q(a[1]) == q(b[1]));
    let eps = 1e-9 * array.spacing;
    pts.retain(|w| {
        array.positions.iter().all(|c| (w[0] - c[0]).hypot(w[1] - c[1]) > eps)
            && (w[0] - array.source[0]).hypot(w[1] - array.source[1]) > eps
            && (w[0] - array.detector[0]).hypot(w[1] - array.detector[1]) > eps
    });
    let mut out = Vec::with_capacity(pts.len() + 2);
    out.push(array.source);
    out.extend(pts);
    out.push(array.detector);
    out
}

struct Edge {
    to: usize,
    len: f64,
    /// `(solenoid, sheet change)` for non-zero changes.
    sheets: Vec<(usize, i64)>,
}

#[derive(PartialEq)]
struct Item {
    dist: f64,
    state: usize,
}
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then(other.state.cmp(&self.state))
    }
}

/// Result of a single covering-graph search: the shortest path to every
/// detector sheet inside the clamp box.
pub struct PathSearch {
    points: Vec<Point>,
    n_solenoids: usize,
    clamp: i64,
    base: usize,
    dist: Vec<f64>,
    pred: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl PathSearch {
    /// Runs the search with sheet components confined to `[−clamp, clamp]`.
    pub fn run(array: &SolenoidArray, clamp: u32, state_limit: usize) -> Result<Self, HomotopyError> {
        array.validate()?;
        let points = waypoints(array);
        let n = array.len();
        let base = 2 * clamp as usize + 1;
        let sheet_states = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(base));
        let total = sheet_states.and_then(|s| s.checked_mul(points.len()));
        let total = match total {
            Some(t) if t <= state_limit => t,
            _ => {
                return Err(HomotopyError::Capacity {
                    what: "covering-graph states",
                    requested: total.unwrap_or(usize::MAX),
                    limit: state_limit,
                })
            }
        };
        let sheet_states = sheet_states.expect("checked above");
        let edges = build_edges(array, &points);
        let clamp = clamp as i64;
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * base;
        }
        let center: usize = strides.iter().map(|s| s * clamp as usize).sum();
        let mut dist = vec![f64::INFINITY; total];
        let mut pred = vec![NONE; total];
        let mut done = vec![false; total];
        let start = center;
        dist[start] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Item { dist: 0.0, state: start });
        let scale = array.chord_length() + array.spacing;
        let mut sheets = vec![0i64; n];
        while let Some(Item { dist: d, state }) = heap.pop() {
            if done[state] {
                continue;
            }
            done[state] = true;
            let w = state / sheet_states;
            let code = state % sheet_states;
            let mut rem = code;
            for (i, s) in sheets.iter_mut().enumerate() {
                *s = (rem / strides[i]) as i64 - clamp;
                rem %= strides[i];
            }
            'edges: for e in &edges[w] {
                let mut new_code = code as i64;
                for &(i, ds) in &e.sheets {
                    let ns = sheets[i] + ds;
                    if ns.abs() > clamp {
                        continue 'edges;
                    }
                    new_code += ds * strides[i] as i64;
                }
                let next = e.to * sheet_states + new_code as usize;
                if done[next] {
                    continue;
                }
                let nd = d + e.len;
                let tol = 1e-12 * scale;
                let better = if nd < dist[next] - tol {
                    true
                } else if nd <= dist[next] + tol && pred[next] != NONE {
                    // equal length: prefer the lexicographically smaller waypoint sequence
                    trace(&pred, state, sheet_states) < trace(&pred, pred[next], sheet_states)
                } else {
                    false
                };
                if better {
                    dist[next] = nd.min(dist[next]);
                    pred[next] = state;
                    heap.push(Item { dist: dist[next], state: next });
                }
            }
        }
        Ok(Self { points, n_solenoids: n, clamp, base, dist, pred })
    }

    fn sheet_states(&self) -> usize {
        self.base.pow(self.n_solenoids as u32)
    }

    fn detector_state(&self, winding: &[i64]) -> Option<usize> {
        if winding.len() != self.n_solenoids || winding.iter().any(|n| n.abs() > self.clamp) {
            return None;
        }
        let mut code = 0usize;
        for &n in winding {
            code = code * self.base + (n + self.clamp) as usize;
        }
        Some((self.points.len() - 1) * self.sheet_states() + code)
    }

    /// Shortest path realising `winding` at the detector.
    pub fn path(&self, winding: &[i64]) -> Result<Polyline, HomotopyError> {
        let unreachable = || HomotopyError::Unrepresentable { winding: winding.to_vec() };
        let s = self.detector_state(winding).ok_or_else(unreachable)?;
        if !self.dist[s].is_finite() {
            return Err(unreachable());
        }
        let seq = trace(&self.pred, s, self.sheet_states());
        Polyline::new(seq.into_iter().map(|w| self.points[w]).collect())
    }

    pub fn length(&self, winding: &[i64]) -> Result<f64, HomotopyError> {
        // re-summed along the path so the value matches Polyline::length exactly
        Ok(self.path(winding)?.length())
    }
}

fn trace(pred: &[usize], mut state: usize, sheet_states: usize) -> Vec<usize> {
    let mut seq = vec![state / sheet_states];
    while pred[state] != NONE {
        state = pred[state];
        seq.push(state / sheet_states);
    }
    seq.reverse();
    seq
}

fn build_edges(array: &SolenoidArray, points: &[Point]) -> Vec<Vec<Edge>> {
    let eps = 1e-9 * array.spacing;
    let angles: Vec<Vec<f64>> = points
        .iter()
        .map(|&p| array.positions.iter().map(|&c| azimuth(c, p)).collect())
        .collect();
    let mut edges: Vec<Vec<Edge>> = (0..points.len()).map(|_| Vec::new()).collect();
    for a in 0..points.len() {
        for b in 0..points.len() {
            if a == b {
                continue;
            }
            let (pa, pb) = (points[a], points[b]);
            if array.positions.iter().any(|&c| point_segment_distance(c, pa, pb) <= eps) {
                continue;
            }
            let mut sheets = Vec::new();
            for (i, &c) in array.positions.iter().enumerate() {
                let sweep = segment_angle(c, pa, pb);
                let ds = ((sweep - (angles[b][i] - angles[a][i])) / (2.0 * PI)).round() as i64;
                if ds != 0 {
                    sheets.push((i, ds));
                }
            }
            edges[a].push(Edge { to: b, len: (pa[0] - pb[0]).hypot(pa[1] - pb[1]), sheets });
        }
    }
    edges
}

/// Shortest polyline through the waypoint graph with the class's winding vector.
pub fn representative_path(class: &HomotopyClass, array: &SolenoidArray) -> Result<Polyline, HomotopyError> {
    PathSearch::run(array, class.cutoff + 1, DEFAULT_STATE_LIMIT)?.path(&class.winding)
}

/// Representative paths for many classes from a single search; unreachable
/// classes yield `None`.
pub fn representative_paths(classes: &[HomotopyClass], array: &SolenoidArray) -> Result<Vec<Option<Polyline>>, HomotopyError> {
    let clamp = classes.iter().map(|c| c.cutoff).max().unwrap_or(0) + 1;
    let search = PathSearch::run(array, clamp, DEFAULT_STATE_LIMIT)?;
    Ok(classes.iter().map(|c| search.path(&c.winding).ok()).collect())
}

/// Euclidean length of the representative path.
pub fn class_length(class: &HomotopyClass, array: &SolenoidArray) -> Result<f64, HomotopyError> {
    Ok(representative_path(class, array)?.length())
}
