//! Root reflections for one solenoid: `|P(w)|` on the unit circle is unchanged
//! when a factor `(w − r)` is replaced by `(r̄w − 1)`.

use num_complex::Complex64;

use super::InversionError;
use crate::forward::ClassAmplitudes;

const MAX_DEGREE: usize = 16;

/// Roots of `Σ_j c_j w^j` (ascending coefficients, non-zero leading term) by
/// Durand–Kerner iteration followed by Newton polishing.
pub fn polynomial_roots(coefficients: &[Complex64]) -> Result<Vec<Complex64>, InversionError> {
    let d = coefficients.len().saturating_sub(1);
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coefficients[d];
    if lead.norm() == 0.0 {
        return Err(InversionError::Domain("leading coefficient is zero".into()));
    }
    let monic: Vec<Complex64> = coefficients.iter().map(|c| c / lead).collect();
    let eval = |w: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * w + c);
    let deriv = |w: Complex64| {
        monic.iter().enumerate().skip(1).rev().fold(Complex64::new(0.0, 0.0), |acc, (j, c)| acc * w + c * j as f64)
    };
    let radius = 1.0 + monic[..d].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32) * (radius / 2.0)).collect();
    for _ in 0..2000 {
        let mut change = 0.0f64;
        for k in 0..d {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if j != k {
                    denom *= z[k] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                z[k] += Complex64::new(1e-8, 1e-8);
                change = f64::INFINITY;
                continue;
            }
            let dz = eval(z[k]) / denom;
            z[k] -= dz;
            change = change.max(dz.norm() / (1.0 + z[k].norm()));
        }
        if change < 1e-15 {
            break;
        }
    }
    for r in z.iter_mut() {
        for _ in 0..3 {
            let dp = deriv(*r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = eval(*r) / dp;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    Ok(z)
}

fn expand(lead: Complex64, factors: &[(Complex64, bool)], len: usize) -> Vec<Complex64> {
    let mut p = vec![Complex64::new(0.0, 0.0); len];
    p[0] = lead;
    for &(r, flipped) in factors {
        let old = p.clone();
        for i in 0..len {
            let shifted = if i > 0 { old[i - 1] } else { Complex64::new(0.0, 0.0) };
            p[i] = if flipped { r.conj() * shifted - old[i] } else { shifted - r * old[i] };
        }
    }
    p
}

/// Every amplitude vector, other than `amps` itself, obtained by reflecting a
/// non-empty subset of roots of `Σ_n K_n w^{n+n_cut}` through the unit circle.
/// All of them produce the same intensities for every flux.
pub fn equivalent_solutions_1d(amps: &ClassAmplitudes) -> Result<Vec<ClassAmplitudes>, InversionError> {
    if amps.n_solenoids() != 1 {
        return Err(InversionError::Domain("root reflections need exactly one solenoid".into()));
    }
    let lo = amps.classes.iter().map(|c| c.winding[0]).min().unwrap_or(0);
    let len = amps.values.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); len];
    for (c, v) in amps.classes.iter().zip(&amps.values) {
        let j = (c.winding[0] - lo) as usize;
        if j >= len {
            return Err(InversionError::Domain("windings are not a contiguous range".into()));
        }
        coeffs[j] = *v;
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut degree = len - 1;
    while degree > 0 && coeffs[degree].norm() <= 1e-14 * scale {
        degree -= 1;
    }
    if degree > MAX_DEGREE {
        return Err(InversionError::Domain(format!("degree {degree} exceeds {MAX_DEGREE}")));
    }
    let roots = polynomial_roots(&coeffs[..=degree])?;
    let lead = coeffs[degree];
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << degree) {
        let factors: Vec<(Complex64, bool)> =
            roots.iter().enumerate().map(|(k, &r)| (r, mask & (1 << k) != 0)).collect();
        let p = expand(lead, &factors, len);
        let values = amps.classes.iter().map(|c| p[(c.winding[0] - lo) as usize]).collect();
        out.push(ClassAmplitudes { classes: amps.classes.clone(), values });
    }
    Ok(out)
}
