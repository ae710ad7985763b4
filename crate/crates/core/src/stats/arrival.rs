use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::reconstruct::ReconstructedDistribution;
use crate::constants::PhysicalConstants;
use crate::error::{require, Error, Result};
use crate::numeric::{integrate_segments, levenberg_marquardt};

/// Parameters of the thermal free-fall arrival-time density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModelParams {
    /// Amplitude; 1 gives a unit-normalized density.
    pub c: f64,
    /// Cloud temperature (K).
    pub temperature: f64,
    /// Fall distance to the detection plane (m).
    pub d: f64,
}

impl ArrivalModelParams {
    pub fn normalized(temperature: f64, d: f64) -> Self {
        ArrivalModelParams { c: 1.0, temperature, d }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.temperature > 0.0 && self.temperature.is_finite(), "temperature", "must be positive")?;
        require(self.d > 0.0 && self.d.is_finite(), "d", "must be positive")?;
        require(self.c.is_finite(), "c", "must be finite")
    }
}

impl Default for ArrivalModelParams {
    fn default() -> Self {
        ArrivalModelParams::normalized(83e-6, 4.80e-3)
    }
}

pub fn free_fall_time(d: f64, constants: &PhysicalConstants) -> f64 {
    (2.0 * d / constants.gravity).sqrt()
}

/// |det d(v_x, v_y, v_z)/d(x, y, t)| for ballistic flight to the plane z = -d.
pub fn jacobian(t: f64, d: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("jacobian needs t > 0, got {t}")));
    }
    Ok((0.5 * constants.gravity * t * t + d) / t.powi(4))
}

/// Arrival-time density at the plane for a point source of thermal atoms.
pub fn arrival_pdf(t: f64, params: &ArrivalModelParams, constants: &PhysicalConstants) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("arrival_pdf needs t > 0, got {t}")));
    }
    let a = constants.mass / (2.0 * constants.k_b * params.temperature);
    let g = constants.gravity;
    let u = 0.5 * g * t * t - params.d;
    let pref = (a / std::f64::consts::PI).sqrt();
    Ok(params.c * pref * (0.5 * g * t * t + params.d) / (t * t) * (-a * u * u / (t * t)).exp())
}

/// Draws one arrival time: Gaussian v_z, then ballistic flight to z = -d.
pub fn sample_arrival_time<R: Rng + ?Sized>(params: &ArrivalModelParams, constants: &PhysicalConstants, rng: &mut R) -> f64 {
    let sigma = (constants.k_b * params.temperature / constants.mass).sqrt();
    let vz: f64 = Normal::new(0.0, sigma).expect("positive sigma").sample(rng);
    let g = constants.gravity;
    (vz + (vz * vz + 2.0 * g * params.d).sqrt()) / g
}

/// (integral, mean, std) of the density by adaptive quadrature.
pub fn arrival_moments(params: &ArrivalModelParams, constants: &PhysicalConstants) -> Result<(f64, f64, f64)> {
    params.validate()?;
    let t_star = free_fall_time(params.d, constants);
    let sigma_v = (constants.k_b * params.temperature / constants.mass).sqrt();
    // time scale of the thermal spread around t*
    let width = (sigma_v / constants.gravity).max(1e-3 * t_star);
    let mut breaks = vec![1e-9];
    for k in -8..=40 {
        let b = t_star + k as f64 * width;
        if b > breaks[breaks.len() - 1] {
            breaks.push(b);
        }
    }
    let pdf = |t: f64| arrival_pdf(t, params, constants).unwrap_or(0.0);
    let tol = 1e-12 * params.c.abs().max(1.0);
    let mass = integrate_segments(&pdf, &breaks, tol);
    if !(mass > 0.0) {
        return Err(Error::Domain("arrival density has no mass".into()));
    }
    let mean = integrate_segments(&|t| t * pdf(t), &breaks, tol * t_star) / mass;
    let var = integrate_segments(&|t| (t - mean).powi(2) * pdf(t), &breaks, tol * t_star * t_star) / mass;
    Ok((mass, mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalFit {
    pub params: ArrivalModelParams,
    /// Standard errors of (c, T, d).
    pub std_errors: [f64; 3],
    pub chi_square: f64,
    pub dof: usize,
    pub iterations: usize,
}

/// Weighted least squares of the arrival density against the reconstructed
/// mean atom number per bin. The amplitude absorbs the bin width, so the model
/// per bin is c * P_1(t_center). Weights follow counting statistics,
/// sigma = sqrt(max(N, 1)) on the per-bin count N = M * mean: first the
/// observed N, then the model-predicted N until the parameters settle.
pub fn fit_arrival(
    hist: &ReconstructedDistribution,
    constants: &PhysicalConstants,
    init: &ArrivalModelParams,
) -> Result<ArrivalFit> {
    if hist.bins.is_empty() {
        return Err(Error::Empty("arrival histogram"));
    }
    init.validate()?;
    let m = hist.sequences as f64;
    let xs: Vec<f64> = hist.bins.iter().map(|b| b.center()).collect();
    if xs.iter().any(|&t| t <= 0.0) {
        return Err(Error::Domain("arrival histogram bins must lie at t > 0".into()));
    }
    let ys: Vec<f64> = hist.bins.iter().map(|b| b.mean_atoms).collect();
    let sig: Vec<f64> = ys.iter().map(|y| (y * m).max(1.0).sqrt() / m).collect();
    // fitted in (c, uK, mm) for conditioning
    let model = |t: f64, p: &[f64]| {
        let ap = ArrivalModelParams { c: p[0], temperature: p[1].abs() * 1e-6, d: p[2].abs() * 1e-3 };
        arrival_pdf(t, &ap, constants).unwrap_or(0.0)
    };
    let init_c = if init.c == 1.0 {
        // a unit amplitude is a placeholder; start from the histogram mass
        ys.iter().sum::<f64>() * hist.bin_time
    } else {
        init.c
    };
    let p0 = [init_c, init.temperature * 1e6, init.d * 1e3];
    let mut fit = levenberg_marquardt(model, &xs, &ys, &sig, &p0, 500, false)?;
    // Weights from the observed counts favour bins that fluctuated low and
    // bias the shape; refit with the counts the fitted model predicts.
    for _ in 0..5 {
        let sig: Vec<f64> = xs.iter().map(|&t| (model(t, &fit.params) * m).max(1.0).sqrt() / m).collect();
        let next = levenberg_marquardt(model, &xs, &ys, &sig, &fit.params, 500, false)?;

        let settled = next.params.iter().zip(&fit.params).all(|(a, b)| (a - b).abs() <= 1e-6 * b.abs());
        fit = next;
        if settled {
            break;
        }
    }
    let params = ArrivalModelParams { c: fit.params[0], temperature: fit.params[1].abs() * 1e-6, d: fit.params[2].abs() * 1e-3 };
    params.validate()?;
    Ok(ArrivalFit {
        params,
        std_errors: [fit.std_errors[0], fit.std_errors[1] * 1e-6, fit.std_errors[2] * 1e-3],
        chi_square: fit.chi_square,
        dof: fit.dof,
        iterations: fit.iterations,
    })
}
