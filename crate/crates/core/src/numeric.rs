//! Small numerical kernels: adaptive quadrature and Levenberg-Marquardt.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Integrates piecewise over `breaks` so narrow features are not stepped over.
pub fn integrate_segments<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> f64 {
    breaks
        .windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol / breaks.len() as f64))
        .sum()
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub chi_square: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl FitResult {
    pub fn reduced_chi_square(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi_square / self.dof as f64
        }
    }
}

/// Weighted Levenberg-Marquardt on y_i ~ model(x_i; p) with per-point sigma.
/// Jacobians are central differences. Standard errors are the square roots of
/// the diagonal of (J^T W J)^-1, scaled by the reduced chi-square when
/// `scale_by_chi2` is set.
pub fn levenberg_marquardt<F>(
    model: F,
    xs: &[f64],
    ys: &[f64],
    sigmas: &[f64],
    init: &[f64],
    max_iter: usize,
    scale_by_chi2: bool,
) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let n = xs.len();
    let np = init.len();
    if n == 0 {
        return Err(Error::Empty("fit data"));
    }
    let weights: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    let chi2 = |p: &[f64]| -> f64 {
        xs.iter()
            .zip(ys)
            .zip(&weights)
            .map(|((&x, &y), &w)| {
                let r = y - model(x, p);
                w * r * r
            })
            .sum()
    };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(n, np);
        for k in 0..np {
            let h = 1e-6 * p[k].abs().max(1e-12);
            let mut up = p.to_vec();
            let mut dn = p.to_vec();
            up[k] += h;
            dn[k] -= h;
            for (i, &x) in xs.iter().enumerate() {
                j[(i, k)] = (model(x, &up) - model(x, &dn)) / (2.0 * h);
            }
        }
        j
    };

    let mut p = init.to_vec();
    let mut current = chi2(&p);
    if !current.is_finite() {
        return Err(Error::Domain("initial fit parameters give a non-finite residual".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let j = jacobian(&p);
        let mut jtwj = DMatrix::<f64>::zeros(np, np);
        let mut jtwr = DVector::<f64>::zeros(np);
        for i in 0..n {
            let r = ys[i] - model(xs[i], &p);
            for a in 0..np {
                jtwr[a] += j[(i, a)] * weights[i] * r;
                for b in 0..np {
                    jtwj[(a, b)] += j[(i, a)] * weights[i] * j[(i, b)];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtwj.clone();
            for k in 0..np {
                a[(k, k)] *= 1.0 + lambda;
            }
            let Some(step) = a.lu().solve(&jtwr) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let c = chi2(&trial);
            if c.is_finite() && c <= current {
                let rel = (current - c) / current.max(1e-300);
                let step_small = step
                    .iter()
                    .zip(&trial)
                    .all(|(s, t)| s.abs() <= 1e-10 * t.abs().max(1e-300));
                p = trial;
                current = c;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < 1e-12 || step_small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || converged {
            // no downhill step at any damping: at a minimum to working precision
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitNotConverged { iterations, chi_square: current });
    }

    let j = jacobian(&p);
    let mut jtwj = DMatrix::<f64>::zeros(np, np);
    for i in 0..n {
        for a in 0..np {
            for b in 0..np {
                jtwj[(a, b)] += j[(i, a)] * weights[i] * j[(i, b)];
            }
        }
    }
    let dof = n.saturating_sub(np);
    let mut covariance = jtwj
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular fit covariance".into()))?;
    if scale_by_chi2 && dof > 0 {
        covariance *= current / dof as f64;
    }
    let std_errors = (0..np).map(|k| covariance[(k, k)].max(0.0).sqrt()).collect();
    Ok(FitResult { params: p, std_errors, covariance, chi_square: current, dof, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_gaussian() {
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = adaptive_simpson(&f, -10.0, 10.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lm_recovers_exponential_decay() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let truth = [3.0, 1.7];
        let model = |x: f64, p: &[f64]| p[0] * (-p[1] * x).exp();
        let ys: Vec<f64> = xs.iter().map(|&x| model(x, &truth)).collect();
        let sig = vec![0.01; xs.len()];
        let fit = levenberg_marquardt(model, &xs, &ys, &sig, &[1.0, 0.5], 200, false).unwrap();
        assert!((fit.params[0] - 3.0).abs() < 1e-8);
        assert!((fit.params[1] - 1.7).abs() < 1e-8);
        assert!(fit.chi_square < 1e-12);
    }

    #[test]
    fn lm_reports_non_convergence() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [1.0, 2.0, 0.5];
        let model = |x: f64, p: &[f64]| (p[0] * x).sin() * p[1];
        let r = levenberg_marquardt(model, &xs, &ys, &[1.0; 3], &[0.3, 1.0], 1, false);
        assert!(matches!(r, Err(Error::FitNotConverged { .. })));
    }
}
