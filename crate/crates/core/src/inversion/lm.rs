//! Levenberg–Marquardt with Nielsen damping updates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub(super) struct Model<'a> {
    pub phases: &'a DMatrix<Complex64>,
    pub y: &'a [f64],
    pub anchor: usize,
}

pub(super) struct Outcome {
    pub amplitudes: Vec<Complex64>,
    /// `½‖r‖²` on the normalised data.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Model<'_> {
    fn n_classes(&self) -> usize {
        self.phases.ncols()
    }

    fn unpack(&self, x: &DVector<f64>) -> Vec<Complex64> {
        let nh = self.n_classes();
        let mut k: Vec<Complex64> = (0..nh).map(|h| Complex64::new(x[h], 0.0)).collect();
        let mut j = nh;
        for (h, z) in k.iter_mut().enumerate() {
            if h != self.anchor {
                z.im = x[j];
                j += 1;
            }
        }
        k
    }

    fn pack(&self, k: &[Complex64]) -> DVector<f64> {
        let nh = self.n_classes();
        let mut x = DVector::zeros(2 * nh - 1);
        let mut j = nh;
        for (h, z) in k.iter().enumerate() {
            x[h] = z.re;
            if h != self.anchor {
                x[j] = z.im;
                j += 1;
            }
        }
        x
    }

    fn detector_amplitudes(&self, k: &[Complex64]) -> Vec<Complex64> {
        (0..self.phases.nrows())
            .map(|f| (0..k.len()).map(|h| self.phases[(f, h)] * k[h]).sum())
            .collect()
    }

    fn residual(&self, a: &[Complex64]) -> DVector<f64> {
        DVector::from_iterator(a.len(), a.iter().zip(self.y).map(|(a, y)| a.norm_sqr() - y))
    }

    fn jacobian(&self, a: &[Complex64]) -> DMatrix<f64> {
        let nh = self.n_classes();
        let mut jac = DMatrix::zeros(a.len(), 2 * nh - 1);
        for (f, af) in a.iter().enumerate() {
            let mut j = nh;
            for h in 0..nh {
                let w = af.conj() * self.phases[(f, h)];
                jac[(f, h)] = 2.0 * w.re;
                if h != self.anchor {
                    jac[(f, j)] = -2.0 * w.im;
                    j += 1;
                }
            }
        }
        jac
    }

    pub fn fit(&self, start: &[Complex64], tol: f64, max_iter: usize) -> Outcome {
        let mut x = self.pack(start);
        let n = x.len();
        let mut a = self.detector_amplitudes(&self.unpack(&x));
        let mut r = self.residual(&a);
        let mut cost = 0.5 * r.norm_squared();
        let mut jac = self.jacobian(&a);
        let mut normal = jac.tr_mul(&jac);
        let mut g = jac.tr_mul(&r);
        let mut mu = 1e-3 * (0..n).map(|i| normal[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut nu = 2.0;
        let mut iterations = 0;
        let mut converged = g.amax() <= tol;
        while !converged && iterations < max_iter {
            iterations += 1;
            let mut damped = normal.clone();
            for i in 0..n {
                damped[(i, i)] += mu;
            }
            let step = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match damped.lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => break,
                },
            };
            if step.norm() <= 1e-15 * (x.norm() + 1e-15) {
                break;
            }
            let x_new = &x + &step;
            let a_new = self.detector_amplitudes(&self.unpack(&x_new));
            let r_new = self.residual(&a_new);
            let cost_new = 0.5 * r_new.norm_squared();
            let predicted = 0.5 * step.dot(&(mu * &step - &g));
            let rho = if predicted > 0.0 { (cost - cost_new) / predicted } else { -1.0 };
            if rho > 0.0 {
                x = x_new;
                a = a_new;
                r = r_new;
                cost = cost_new;
                jac = self.jacobian(&a);
                normal = jac.tr_mul(&jac);
                g = jac.tr_mul(&r);
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                converged = g.amax() <= tol;
            } else {
                mu *= nu;
                nu *= 2.0;
                if !mu.is_finite() {
                    break;
                }
            }
        }
        Outcome { amplitudes: self.unpack(&x), cost, iterations, converged }
    }
}
