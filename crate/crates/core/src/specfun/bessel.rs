//! Modified Bessel function of the first kind, `I_ν(z)`, for real `ν ≥ 0`
//! and complex `z`.
//!
//! Two evaluation routes:
//!
//! * `|z| ≤ SERIES_RADIUS`: the ascending power series.
//! * otherwise: Miller's backward recurrence started well above
//!   `max(ν, |z|)`, run down to the fractional base order `ν - ⌊ν⌋` and
//!   normalised with the Gegenbauer sum
//!   `Σ_k w_k I_{ν₀+k}(z) = e^z (z/2)^{ν₀} / (2 Γ(ν₀+1))`.
//!
//! The backward route is applied on the closed right half plane; the left half
//! plane is reached through `I_ν(z e^{±iπ}) = e^{±iνπ} I_ν(z)` and the lower
//! half plane through conjugation, so `I_ν(z̄) = conj(I_ν(z))` holds exactly.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::gamma::{gamma, ln_gamma};
use super::SpecfunError;

/// Arguments with `|z|` above this bound are rejected with a range error.
pub const MAX_ARGUMENT: f64 = 700.0;

const SERIES_RADIUS: f64 = 2.0;
const MAX_SERIES_TERMS: usize = 500;
const RESCALE_ABOVE: f64 = 1e250;

/// One evaluation of `I_ν(z)` together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub order: f64,
    pub argument: Complex64,
    pub value: Complex64,
    pub est_abs_error: f64,
}

/// `I_order(argument)`, failing if the estimated absolute error exceeds `tol`.
pub fn bessel_i(order: f64, argument: Complex64, tol: f64) -> Result<Complex64, SpecfunError> {
    bessel_i_eval(order, argument, tol).map(|e| e.value)
}

/// Like [`bessel_i`] but also returns the error estimate.
pub fn bessel_i_eval(order: f64, argument: Complex64, tol: f64) -> Result<BesselEval, SpecfunError> {
    if !order.is_finite() || order < 0.0 {
        return Err(SpecfunError::Domain(format!("order must be finite and >= 0, got {order}")));
    }
    if !argument.re.is_finite() || !argument.im.is_finite() {
        return Err(SpecfunError::Domain(format!("argument must be finite, got {argument}")));
    }
    if !(tol > 0.0) {
        return Err(SpecfunError::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    if argument.norm() > MAX_ARGUMENT {
        return Err(SpecfunError::Range { argument: argument.norm(), bound: MAX_ARGUMENT });
    }
    let (value, err) = eval_unchecked(order, argument);
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(SpecfunError::Range { argument: argument.norm(), bound: MAX_ARGUMENT });
    }
    if err > tol {
        return Err(SpecfunError::Precision { estimate: err, tol });
    }
    Ok(BesselEval { order, argument, value, est_abs_error: err })
}

/// Value and absolute error estimate, no input validation.
pub(crate) fn eval_unchecked(order: f64, z: Complex64) -> (Complex64, f64) {
    if z.im < 0.0 {
        let (v, e) = eval_unchecked(order, z.conj());
        return (v.conj(), e);
    }
    if z.norm() <= SERIES_RADIUS {
        return series(order, z);
    }
    if z.re < 0.0 {
        // z = (-z) e^{iπ} with Im z >= 0 keeps the principal branch.
        let (v, e) = miller(order, -z);
        let rot = Complex64::from_polar(1.0, PI * order);
        return (rot * v, e);
    }
    miller(order, z)
}

/// Ascending series `Σ_k (z/2)^{ν+2k} / (k! Γ(ν+k+1))`.
pub(crate) fn series(order: f64, z: Complex64) -> (Complex64, f64) {
    if z == Complex64::new(0.0, 0.0) {
        return if order == 0.0 { (Complex64::new(1.0, 0.0), 0.0) } else { (Complex64::new(0.0, 0.0), 0.0) };
    }
    let half = z * 0.5;
    let lead = if order == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        (half.ln() * order - ln_gamma(order + 1.0)).exp()
    };
    let q = half * half;
    let mut term = lead;
    let mut sum = term;
    let mut abs_sum = term.norm();
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        term = term * q / ((kf + 1.0) * (order + kf + 1.0));
        sum += term;
        abs_sum += term.norm();
        k += 1;
        // terms decrease geometrically once k(k+ν) > |z|²/4
        let ratio = q.norm() / ((kf + 2.0) * (order + kf + 2.0));
        if ratio < 0.5 && term.norm() <= f64::EPSILON * 1e-3 * sum.norm() {
            break;
        }
        if k >= MAX_SERIES_TERMS || term.norm() == 0.0 {
            break;
        }
    }
    let tail = term.norm();
    let err = tail + 4.0 * f64::EPSILON * abs_sum;
    (sum, err)
}

fn miller_run(order: f64, z: Complex64, top: usize) -> (Complex64, f64) {
    let n = order.floor() as usize;
    let base = order - n as f64;
    let mut vals = vec![Complex64::new(0.0, 0.0); top + 2];
    vals[top] = Complex64::new(1e-30, 0.0);
    for k in (1..=top).rev() {
        let next = vals[k] * (2.0 * (base + k as f64) / z) + vals[k + 1];
        vals[k - 1] = next;
        if next.norm() > RESCALE_ABOVE {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1.0 / RESCALE_ABOVE;
            }
        }
    }
    // Gegenbauer weights: w_0 = 1/2, w_k = (ν₀+k) Γ(2ν₀+k) / (k! Γ(2ν₀+1)).
    let mut g = 1.0;
    let mut norm_sum = vals[0] * 0.5;
    let mut abs_sum = 0.5 * vals[0].norm();
    for (k, v) in vals.iter().enumerate().take(top + 1).skip(1) {
        if k > 1 {
            g *= (2.0 * base + k as f64 - 1.0) / k as f64;
        }
        let w = (base + k as f64) * g;
        norm_sum += v * w;
        abs_sum += w * v.norm();
    }
    let rhs = if base == 0.0 {
        z.exp() * 0.5
    } else {
        z.exp() * ((z * 0.5).ln() * base).exp() / (2.0 * gamma(base + 1.0))
    };
    let value = vals[n] * (rhs / norm_sum);
    let cancellation = abs_sum / norm_sum.norm();
    (value, cancellation)
}

/// Backward recurrence; valid for `Re z >= 0`.
pub(crate) fn miller(order: f64, z: Complex64) -> (Complex64, f64) {
    let n = order.floor() as usize;
    let scale = (n as f64).max(z.norm());
    let top = scale.ceil() as usize + 20 + (4.0 * (scale + 1.0).sqrt()).ceil() as usize;
    let (v1, cancel) = miller_run(order, z, top);
    let (v2, _) = miller_run(order, z, top + 16);
    let rounding = 8.0 * f64::EPSILON * (cancel + top as f64) * v2.norm();
    (v2, (v1 - v2).norm() + rounding)
}

/// Upper bound `|(z/2)^ν| e^{|Re z|} / Γ(ν+1)` on `|I_ν(z)|`, valid for `ν ≥ 0`.
pub fn magnitude_bound(order: f64, z: Complex64) -> f64 {
    let r = z.norm();
    if r == 0.0 {
        return if order == 0.0 { 1.0 } else { 0.0 };
    }
    (order * (0.5 * r).ln() + z.re.abs() - ln_gamma(order + 1.0)).exp()
}

/// An order `ν*` such that `|I_ν(z)| < threshold` for every `ν ≥ ν*`.
///
/// Uses [`magnitude_bound`], which is decreasing in `ν` once
/// `ν ≥ |z|/2 - 1/2`, then bisects to within `1e-6` in order.
pub fn bessel_i_negligible_order(argument: Complex64, threshold: f64) -> Result<f64, SpecfunError> {
    if !(threshold > 0.0) {
        return Err(SpecfunError::Domain(format!("threshold must be > 0, got {threshold}")));
    }
    if !argument.re.is_finite() || !argument.im.is_finite() {
        return Err(SpecfunError::Domain(format!("argument must be finite, got {argument}")));
    }
    let r = argument.norm();
    if r == 0.0 {
        // I_ν(0) = 0 for every ν > 0.
        return Ok(f64::EPSILON);
    }
    let lo0 = (0.5 * r - 0.5).max(0.0);
    if magnitude_bound(lo0, argument) < threshold {
        return Ok(lo0);
    }
    let mut lo = lo0;
    let mut step = 1.0;
    let mut hi = lo + step;
    while magnitude_bound(hi, argument) >= threshold {
        lo = hi;
        step *= 2.0;
        hi = lo + step;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if magnitude_bound(mid, argument) < threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent oracle: plain ascending series with the gamma function
    /// evaluated by the product recurrence from Γ(ν₀+1).
    fn oracle_series(order: f64, z: Complex64, terms: usize) -> Complex64 {
        let mut k_fact = 1.0;
        let mut sum = c(0.0, 0.0);
        for k in 0..terms {
            if k > 0 {
                k_fact *= k as f64;
            }
            let g = gamma(order + k as f64 + 1.0);
            let p = (z * 0.5).powf(order + 2.0 * k as f64);
            sum += p / (k_fact * g);
        }
        sum
    }

    fn half_integer_closed_form(z: Complex64) -> Complex64 {
        (c(2.0 / PI, 0.0) / z).sqrt() * z.sinh()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn value_at_zero() {
        assert_eq!(bessel_i(0.0, c(0.0, 0.0), 1e-14).unwrap(), c(1.0, 0.0));
        assert_eq!(bessel_i(1.5, c(0.0, 0.0), 1e-14).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn half_order_at_one() {
        // sqrt(2/π) sinh(1) = 0.937674888245...
        let v = bessel_i(0.5, c(1.0, 0.0), 1e-12).unwrap();
        let expected = (2.0 / PI).sqrt() * 1f64.sinh();
        assert!((v.re - expected).abs() < 1e-14 && v.im.abs() < 1e-15);
        assert!((v.re - 0.937_674_888_245).abs() < 1e-12);
    }

    #[test]
    fn order_two_and_a_half_matches_series_oracle() {
        let z = c(0.3, 0.0);
        let v = bessel_i(2.5, z, 1e-14).unwrap();
        let o = oracle_series(2.5, z, 30);
        assert!((v - o).norm() < 1e-12);
    }

    #[test]
    fn miller_route_matches_series_in_overlap() {
        for &order in &[0.0, 0.25, 1.0, 3.7, 10.0] {
            for &(r, ang) in &[(2.5, 0.0), (3.0, 0.7), (4.0, 1.2), (3.5, -1.5707963267948966), (6.0, 0.3)] {
                let z = Complex64::from_polar(r, ang);
                let (m, _) = miller(order, if z.re < 0.0 { -z } else { z });
                let s = oracle_series(order, if z.re < 0.0 { -z } else { z }, 80);
                assert!(rel(m, s) < 1e-11, "ν={order} z={z}: {}", rel(m, s));
            }
        }
    }

    #[test]
    fn half_integer_closed_form_grid() {
        for &r in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 50.0] {
            for k in 0..12 {
                let ang = -PI + (k as f64 + 0.5) * PI / 6.0;
                let z = Complex64::from_polar(r, ang);
                let v = bessel_i(0.5, z, 1e-6 * (1.0 + z.re.abs().exp())).unwrap();
                let want = half_integer_closed_form(z);
                assert!(rel(v, want) < 1e-10, "z={z}: rel {}", rel(v, want));
            }
        }
    }

    #[test]
    fn recurrence_grid() {
        for &r in &[0.1, 0.7, 2.0, 5.0, 12.0, 30.0, 50.0] {
            for &ang in &[-PI / 2.0, -1.0, -0.3, 0.0, 0.6, PI / 2.0, 2.5] {
                let z = Complex64::from_polar(r, ang);
                for nu in [1.0, 1.5, 2.3, 5.0, 9.75, 14.0, 20.0] {
                    let (lo, _) = eval_unchecked(nu - 1.0, z);
                    let (mid, _) = eval_unchecked(nu, z);
                    let (hi, _) = eval_unchecked(nu + 1.0, z);
                    let lhs = lo - hi;
                    let rhs = mid * (2.0 * nu) / z;
                    let scale = lo.norm().max(hi.norm()).max(rhs.norm());
                    assert!((lhs - rhs).norm() <= 1e-8 * scale, "ν={nu} z={z}: {} vs {}", lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn conjugation_is_exact() {
        for &z in &[c(3.0, 4.0), c(-2.0, 7.5), c(0.4, -0.2), c(-30.0, 1.0)] {
            for nu in [0.0, 0.3, 2.0, 11.5] {
                let (a, _) = eval_unchecked(nu, z);
                let (b, _) = eval_unchecked(nu, z.conj());
                assert_eq!(a.conj(), b);
            }
        }
    }

    #[test]
    fn error_paths() {
        assert!(matches!(bessel_i(-1.0, c(1.0, 0.0), 1e-10), Err(SpecfunError::Domain(_))));
        assert!(matches!(bessel_i(f64::NAN, c(1.0, 0.0), 1e-10), Err(SpecfunError::Domain(_))));
        assert!(matches!(bessel_i(1.0, c(f64::INFINITY, 0.0), 1e-10), Err(SpecfunError::Domain(_))));
        assert!(matches!(bessel_i(1.0, c(0.0, 800.0), 1e-10), Err(SpecfunError::Range { .. })));
    }

    #[test]
    fn negligible_order_zero_argument() {
        let nu = bessel_i_negligible_order(c(0.0, 0.0), 1e-12).unwrap();
        assert!(nu > 0.0);
        assert!(matches!(bessel_i_negligible_order(c(1.0, 0.0), 0.0), Err(SpecfunError::Domain(_))));
    }

    #[test]
    fn negligible_order_real_argument_scan() {
        // scan ν on a fine grid and evaluate (|z|/2)^ν / Γ(ν+1) directly
        let z = c(1.0, 0.0);
        let nu_star = bessel_i_negligible_order(z, 1e-12).unwrap();
        let mut first = None;
        let mut nu = 0.0;
        while nu < 40.0 {
            if 0.5f64.powf(nu) * 1f64.exp() / gamma(nu + 1.0) < 1e-12 {
                first = Some(nu);
                break;
            }
            nu += 1e-4;
        }
        let first = first.unwrap();
        assert!((nu_star - first).abs() < 1e-3, "{nu_star} vs {first}");
        for k in 0..5 {
            let v = bessel_i(nu_star + k as f64, z, 1e-20).unwrap();
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn negligible_order_imaginary_argument() {
        let z = c(0.0, 0.1);
        let nu_star = bessel_i_negligible_order(z, 1e-10).unwrap();
        for k in 0..3 {
            let v = bessel_i(nu_star + k as f64, z, 1e-20).unwrap();
            assert!(v.norm() < 1e-10);
        }
    }

    #[test]
    fn negligible_order_monotone_in_modulus() {
        let mut prev = 0.0;
        for k in 1..60 {
            let z = Complex64::from_polar(k as f64 * 0.7, -1.2);
            let nu = bessel_i_negligible_order(z, 1e-10).unwrap();
            assert!(nu >= prev);
            prev = nu;
        }
    }
}
