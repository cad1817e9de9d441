//! Single-solenoid Aharonov–Bohm propagators in natural units (`c = q = 1`).
//!
//! With complex time `τ = T e^{-iδ}` (real time for `δ = 0`):
//!
//! * free kernel: `μ/(2πiħτ) · exp(iμd²/(2ħτ))`
//! * total: `pref · Σ_{|m|≤M} e^{imΔθ} I_{|m−α|}(z)`
//! * winding sector `n`: `pref · e^{iαΦ} · ∫ e^{iλΦ} I_{|λ|}(z) dλ`, `Φ = Δθ + 2πn`
//!
//! where `pref = μ/(2πiħτ) · exp(iμ(r²+r′²)/(2ħτ))` and `z = μrr′/(iħτ)`.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::csvio::num;
use crate::quadrature;
use crate::specfun::{self, bessel_i_negligible_order, magnitude_bound, SpecfunError};

/// Default absolute tolerance on the dimensionless Bessel sums.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Source–detector distance used by the Fig. 1 style scan.
pub const FIG1_LENGTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropagatorError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("estimated error {estimate:e} exceeds tolerance {tol:e}")]
    Precision { estimate: f64, tol: f64 },
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// Endpoints in polar coordinates about the solenoid. Angles are continuous,
/// never reduced modulo 2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarEndpoints {
    pub r: f64,
    pub theta: f64,
    pub r_prime: f64,
    pub theta_prime: f64,
}

impl PolarEndpoints {
    pub fn new(r: f64, theta: f64, r_prime: f64, theta_prime: f64) -> Result<Self, PropagatorError> {
        let e = Self { r, theta, r_prime, theta_prime };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<(), PropagatorError> {
        if !(self.r > 0.0 && self.r.is_finite() && self.r_prime > 0.0 && self.r_prime.is_finite()) {
            return Err(PropagatorError::Domain(format!(
                "radii must be finite and > 0, got r={} r'={}",
                self.r, self.r_prime
            )));
        }
        if !self.theta.is_finite() || !self.theta_prime.is_finite() {
            return Err(PropagatorError::Domain("angles must be finite".into()));
        }
        Ok(())
    }

    pub fn delta_theta(&self) -> f64 {
        self.theta_prime - self.theta
    }

    pub fn source(&self) -> [f64; 2] {
        [self.r * self.theta.cos(), self.r * self.theta.sin()]
    }

    pub fn detector(&self) -> [f64; 2] {
        [self.r_prime * self.theta_prime.cos(), self.r_prime * self.theta_prime.sin()]
    }

    /// Chord from source to detector.
    pub fn displacement(&self) -> [f64; 2] {
        let a = self.source();
        let b = self.detector();
        [b[0] - a[0], b[1] - a[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorParams {
    pub mass: f64,
    pub total_time: f64,
    pub alpha: f64,
    pub m_max: u32,
    pub hbar: f64,
    /// Rotation `δ` of the time into the lower half plane, `τ = T e^{-iδ}`.
    pub time_rotation: f64,
    pub tolerance: f64,
}

impl Default for PropagatorParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            total_time: 10.0,
            alpha: 0.0,
            m_max: 50,
            hbar: 1.0,
            time_rotation: 0.0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl PropagatorParams {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_m_max(mut self, m_max: u32) -> Self {
        self.m_max = m_max;
        self
    }

    pub fn validate(&self) -> Result<(), PropagatorError> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.total_time) {
            return Err(PropagatorError::Domain(format!("total_time must be > 0, got {}", self.total_time)));
        }
        if !pos(self.mass) {
            return Err(PropagatorError::Domain(format!("mass must be > 0, got {}", self.mass)));
        }
        if !pos(self.hbar) {
            return Err(PropagatorError::Domain(format!("hbar must be > 0, got {}", self.hbar)));
        }
        if !self.alpha.is_finite() {
            return Err(PropagatorError::Domain("alpha must be finite".into()));
        }
        if self.m_max < 1 {
            return Err(PropagatorError::Domain("m_max must be >= 1".into()));
        }
        if !(0.0..=PI / 2.0).contains(&self.time_rotation) {
            return Err(PropagatorError::Domain(format!(
                "time_rotation must lie in [0, pi/2], got {}",
                self.time_rotation
            )));
        }
        if !pos(self.tolerance) {
            return Err(PropagatorError::Domain(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        Ok(())
    }

    /// `ħτ` with the rotated time.
    pub fn hbar_time(&self) -> Complex64 {
        Complex64::from_polar(self.hbar * self.total_time, -self.time_rotation)
    }

    /// `μ/(2πiħτ)`.
    pub fn kernel_prefactor(&self) -> Complex64 {
        self.mass / (Complex64::new(0.0, 2.0 * PI) * self.hbar_time())
    }

    /// `exp(iμ s/(2ħτ))` for a squared length `s`.
    pub fn gaussian(&self, s: f64) -> Complex64 {
        (Complex64::new(0.0, self.mass * s * 0.5) / self.hbar_time()).exp()
    }

    /// Bessel argument `μrr′/(iħτ)`.
    pub fn bessel_argument(&self, r: f64, r_prime: f64) -> Complex64 {
        self.mass * r * r_prime / (Complex64::new(0.0, 1.0) * self.hbar_time())
    }
}

pub fn free_kernel_2d(displacement: [f64; 2], params: &PropagatorParams) -> Result<Complex64, PropagatorError> {
    params.validate()?;
    let d2 = displacement[0] * displacement[0] + displacement[1] * displacement[1];
    Ok(params.kernel_prefactor() * params.gaussian(d2))
}

fn radial_prefactor(e: &PolarEndpoints, p: &PropagatorParams) -> Complex64 {
    p.kernel_prefactor() * p.gaussian(e.r * e.r + e.r_prime * e.r_prime)
}

/// Truncated total propagator with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalEval {
    pub value: Complex64,
    /// Upper bound on the omitted `|m| > m_max` part of the Bessel sum.
    pub tail_bound: f64,
    /// `|S(m_max) − S(m_max/2)|` on the Bessel sum.
    pub guard_delta: f64,
    /// Accumulated Bessel evaluation error.
    pub bessel_error: f64,
}

fn tail_bound(alpha: f64, m_max: u32, z: Complex64) -> f64 {
    let mut tail = 0.0;
    let mut m = m_max as f64 + 1.0;
    let start = (0.5 * z.norm()).max(1.0);
    loop {
        let t = magnitude_bound((m - alpha).abs(), z) + magnitude_bound((m + alpha).abs(), z);
        tail += t;
        if (m > start + 2.0 && t <= 1e-3 * tail) || t == 0.0 || m > m_max as f64 + 10_000.0 {
            break;
        }
        m += 1.0;
    }
    // terms beyond the last one decay faster than geometrically with ratio < 1/2
    tail * (1.0 + 2e-3)
}

/// Evaluates the truncated m-sum without enforcing the tolerance.
pub fn ab_total_eval(endpoints: &PolarEndpoints, params: &PropagatorParams) -> Result<TotalEval, PropagatorError> {
    endpoints.validate()?;
    params.validate()?;
    let z = params.bessel_argument(endpoints.r, endpoints.r_prime);
    if z.norm() > specfun::MAX_ARGUMENT {
        return Err(SpecfunError::Range { argument: z.norm(), bound: specfun::MAX_ARGUMENT }.into());
    }
    let dth = endpoints.delta_theta();
    let m_max = params.m_max as i64;
    let half = m_max / 2;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut half_sum = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    // accumulate from the outside in so small terms are added first
    let mut ms: Vec<i64> = (-m_max..=m_max).collect();
    ms.sort_by_key(|m| std::cmp::Reverse(m.abs()));
    for m in ms {
        let (i, e) = specfun::eval_unchecked((m as f64 - params.alpha).abs(), z);
        let term = Complex64::from_polar(1.0, m as f64 * dth) * i;
        sum += term;
        if m.abs() <= half {
            half_sum += term;
        }
        err += e;
    }
    Ok(TotalEval {
        value: radial_prefactor(endpoints, params) * sum,
        tail_bound: tail_bound(params.alpha, params.m_max, z),
        guard_delta: (sum - half_sum).norm(),
        bessel_error: err,
    })
}

/// Total propagator, truncated at `|m| ≤ m_max`; errors if the omitted tail
/// cannot be bounded by `params.tolerance`.
pub fn ab_total(endpoints: &PolarEndpoints, params: &PropagatorParams) -> Result<Complex64, PropagatorError> {
    let ev = ab_total_eval(endpoints, params)?;
    let estimate = ev.tail_bound + ev.bessel_error;
    if !(estimate <= params.tolerance) {
        return Err(PropagatorError::Precision { estimate, tol: params.tolerance });
    }
    Ok(ev.value)
}

/// Winding-sector propagator at `α = 0`, i.e. without the Aharonov–Bohm factor.
pub fn ab_winding_free(
    n_w: i64,
    endpoints: &PolarEndpoints,
    params: &PropagatorParams,
    quad_tol: f64,
) -> Result<Complex64, PropagatorError> {
    endpoints.validate()?;
    params.validate()?;
    if !(quad_tol > 0.0) {
        return Err(PropagatorError::Domain(format!("quad_tol must be > 0, got {quad_tol}")));
    }
    let z = params.bessel_argument(endpoints.r, endpoints.r_prime);
    if z.norm() > specfun::MAX_ARGUMENT {
        return Err(SpecfunError::Range { argument: z.norm(), bound: specfun::MAX_ARGUMENT }.into());
    }
    let phi = endpoints.delta_theta() + 2.0 * PI * n_w as f64;
    let lambda_max = bessel_i_negligible_order(z, 1e-3 * quad_tol)?.max(1.0);
    // the folded integrand oscillates in λ with frequency up to |Φ| + π/2
    let freq = phi.abs() + 0.5 * PI;
    let panels = ((lambda_max * freq / PI).ceil() as usize).max(4);
    let res = quadrature::integrate(
        |lambda| {
            let (i, _) = specfun::eval_unchecked(lambda, z);
            i * (2.0 * (lambda * phi).cos())
        },
        0.0,
        lambda_max,
        quad_tol,
        panels,
        200_000,
    );
    if !res.converged {
        return Err(PropagatorError::Precision { estimate: res.abs_error, tol: quad_tol });
    }
    Ok(radial_prefactor(endpoints, params) * res.value)
}

/// `exp(iα(Δθ + 2πn))`.
pub fn winding_phase(n_w: i64, endpoints: &PolarEndpoints, alpha: f64) -> Complex64 {
    Complex64::from_polar(1.0, alpha * (endpoints.delta_theta() + 2.0 * PI * n_w as f64))
}

/// Winding-sector propagator: the `α = 0` integral times the analytic phase.
pub fn ab_winding(
    n_w: i64,
    endpoints: &PolarEndpoints,
    params: &PropagatorParams,
    quad_tol: f64,
) -> Result<Complex64, PropagatorError> {
    let free = ab_winding_free(n_w, endpoints, params, quad_tol)?;
    Ok(free * winding_phase(n_w, endpoints, params.alpha))
}

/// Free kernel times the Aharonov–Bohm phase of the straight chord.
pub fn semiclassical(endpoints: &PolarEndpoints, h: f64, params: &PropagatorParams) -> Result<Complex64, PropagatorError> {
    if !(h.is_finite() && h != 0.0) {
        return Err(PropagatorError::Degenerate(format!("classical path passes through the solenoid (h = {h})")));
    }
    endpoints.validate()?;
    let free = free_kernel_2d(endpoints.displacement(), params)?;
    Ok(free * winding_phase(0, endpoints, params.alpha))
}

/// Source `(−L/2, −h)` and detector `(L/2, −h)` around a solenoid at the origin.
pub fn fig1_endpoints(h: f64, length: f64) -> Result<PolarEndpoints, PropagatorError> {
    if !(length > 0.0 && length.is_finite() && h.is_finite()) {
        return Err(PropagatorError::Domain(format!("invalid geometry h={h}, L={length}")));
    }
    let half = 0.5 * length;
    let r = half.hypot(h);
    let theta = (-h).atan2(-half);
    // the chord never meets the negative x-axis, so principal angles are continuous along it
    let theta_prime = (-h).atan2(half);
    PolarEndpoints::new(r, theta, r, theta_prime)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig1Row {
    pub h: f64,
    pub alpha: f64,
    pub abs_re_diff: f64,
    pub abs_im_diff: f64,
}

pub fn fig1_scan(h_grid: &[f64], alpha_grid: &[f64], params: &PropagatorParams) -> Result<Vec<Fig1Row>, PropagatorError> {
    fig1_scan_with_length(h_grid, alpha_grid, params, FIG1_LENGTH)
}

pub fn fig1_scan_with_length(
    h_grid: &[f64],
    alpha_grid: &[f64],
    params: &PropagatorParams,
    length: f64,
) -> Result<Vec<Fig1Row>, PropagatorError> {
    if h_grid.is_empty() || alpha_grid.is_empty() {
        return Err(PropagatorError::Domain("h and alpha grids must be non-empty".into()));
    }
    params.validate()?;
    let cells: Vec<(f64, f64)> = h_grid
        .iter()
        .flat_map(|&h| alpha_grid.iter().map(move |&a| (h, a)))
        .collect();
    cells
        .par_iter()
        .map(|&(h, alpha)| {
            let p = params.with_alpha(alpha);
            let e = fig1_endpoints(h, length)?;
            let d = ab_total(&e, &p)? - semiclassical(&e, h, &p)?;
            Ok(Fig1Row { h, alpha, abs_re_diff: d.re.abs(), abs_im_diff: d.im.abs() })
        })
        .collect()
}

pub fn write_fig1_csv<W: Write>(rows: &[Fig1Row], mut out: W) -> io::Result<()> {
    writeln!(out, "h,alpha,abs_re_diff,abs_im_diff")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", num(r.h), num(r.alpha), num(r.abs_re_diff), num(r.abs_im_diff))?;
    }
    Ok(())
}
