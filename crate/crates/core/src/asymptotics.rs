//! Asymptotic delay theory: log-likelihood drifts, the delay lower bound,
//! and the per-sensor drift of the attenuating Gaussian model on a disk.
//!
//! All logarithms are natural; drifts are in nats per slot.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::geometry::{Domain, Point};
use crate::observation::{Clamp, ObservationModel, PathLoss};
use crate::quadrature::integrate;

/// `D(N(0, v1) || N(0, v0))`.
pub fn kl_gaussian_variance(v0: f64, v1: f64) -> f64 {
    let ratio = v1 / v0;
    0.5 * (ratio - ratio.ln() - 1.0)
}

/// Flat-model drift `L · D(f1 || f0)` with `phi = gamma2 / sigma2`.
pub fn flat_drift(sensors: usize, phi: f64) -> f64 {
    sensors as f64 * kl_gaussian_variance(1.0, 1.0 + phi)
}

/// Per-origin drifts together with the prior parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    pub sensors: usize,
    pub drifts: Vec<f64>,
    pub rho: f64,
}

impl DriftSpec {
    pub fn add_lower_bound(&self, alpha: f64) -> Result<f64> {
        add_lower_bound(alpha, self.rho, &self.drifts)
    }
}

fn check_alpha_rho(alpha: f64, rho: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("alpha", format!("must lie in (0,1], got {alpha}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid("rho", format!("must lie in (0,1), got {rho}")));
    }
    Ok(())
}

/// `(1/M) Σ_m |log α| / (q_m + |log(1-ρ)|)`.
pub fn add_lower_bound(alpha: f64, rho: f64, drifts: &[f64]) -> Result<f64> {
    check_alpha_rho(alpha, rho)?;
    if drifts.is_empty() {
        return Err(invalid("drifts", "need at least one origin"));
    }
    if let Some(q) = drifts.iter().find(|q| !(**q >= 0.0 && q.is_finite())) {
        return Err(invalid(
            "drifts",
            format!("must be finite and non-negative, got {q}"),
        ));
    }
    let num = alpha.ln().abs();
    let dr = (1.0 - rho).ln().abs();
    Ok(drifts.iter().map(|q| num / (q + dr)).sum::<f64>() / drifts.len() as f64)
}

/// `|log α| / (L q_φ + |log(1-ρ)|)`.
pub fn add_approx_attenuating(alpha: f64, rho: f64, sensors: usize, q_phi: f64) -> Result<f64> {
    add_lower_bound(alpha, rho, &[sensors as f64 * q_phi])
}

fn check_phi_r(phi: f64, r: f64) -> Result<()> {
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(invalid("phi", format!("must be non-negative, got {phi}")));
    }
    if !(r >= 1.0 && r.is_finite()) {
        return Err(invalid("R", format!("must be at least 1, got {r}")));
    }
    Ok(())
}

const QUAD_TOL: f64 = 1e-10;

/// Mean per-sensor drift for sensors uniform on a disk of radius `r`
/// around the source: `(1/R²) ∫₀^R s [φ/s~^θ − log(1 + φ/s~^θ)] ds`, i.e. the
/// KL divergence averaged over the radial density `2s/R²`.
pub fn q_phi_quadrature(phi: f64, r: f64, theta: f64, clamp: Clamp, d0: f64) -> Result<f64> {
    check_phi_r(phi, r)?;
    let pl = PathLoss { theta, d0, clamp };
    let f = |s: f64| {
        let g = phi / pl.clamped_distance(s).powf(theta);
        s * (g - g.ln_1p())
    };
    // Split at the clamp kink so each piece is smooth.
    let kink = match clamp {
        Clamp::UnitFloor => 1.0,
        Clamp::ReferenceScaled => d0,
        Clamp::ReferenceLiteral => d0 * d0,
    };
    let total = if kink > 0.0 && kink < r {
        integrate(f, 0.0, kink, QUAD_TOL)? + integrate(f, kink, r, QUAD_TOL)?
    } else {
        integrate(f, 0.0, r, QUAD_TOL)?
    };
    Ok(total / (r * r))
}

/// The integral read term by term as `(1/(2R²)) ∫₀^R [φ/s~^{θ-1} − s log(1+φ/s~^θ)] ds`
/// with the unit-floor clamp. Kept as a diagnostic: it agrees with
/// [`q_phi_closed`] only up to a factor and a unit-disk correction.
pub fn q_phi_printed_integrand(phi: f64, r: f64, theta: f64) -> Result<f64> {
    check_phi_r(phi, r)?;
    let f = |s: f64| {
        let st = s.max(1.0);
        phi / st.powf(theta - 1.0) - s * (phi / st.powf(theta)).ln_1p()
    };
    let total = if r > 1.0 {
        integrate(f, 0.0, 1.0, QUAD_TOL)? + integrate(f, 1.0, r, QUAD_TOL)?
    } else {
        integrate(f, 0.0, r, QUAD_TOL)?
    };
    Ok(total / (2.0 * r * r))
}

/// `(1/(2R²)) [φ + φ log(1+φ) − (φ+R²) log(1+φ/R²)]` for `θ = 2` and the unit-floor clamp.
pub fn q_phi_closed(phi: f64, r: f64) -> Result<f64> {
    check_phi_r(phi, r)?;
    let r2 = r * r;
    Ok((phi + phi * phi.ln_1p() - (phi + r2) * (phi / r2).ln_1p()) / (2.0 * r2))
}

/// Dense-network limit of `L q_φ` with `L / R² → λ`: `(λ/2) φ log(1+φ)`.
pub fn lambda_limit(lambda: f64, phi: f64) -> f64 {
    0.5 * lambda * phi * phi.ln_1p()
}

/// Least-squares slope of a trace against its index, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub slope: f64,
    pub std_err: f64,
}

/// Drift estimate from a cumulative log-likelihood-ratio trace. The slope
/// standard error comes from the increments, which are i.i.d. once every
/// sensor is exposed.
pub fn empirical_drift(trace: &[f64]) -> Result<DriftEstimate> {
    if trace.len() < 3 {
        return Err(invalid("trace", "need at least three points"));
    }
    let n = trace.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = trace.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in trace.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let inc: Vec<f64> = trace.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = inc.iter().sum::<f64>() / inc.len() as f64;
    let var = inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (inc.len() - 1) as f64;
    // The OLS slope of a random walk has variance about 6 var / (5 n).
    let std_err = (1.2 * var / n).sqrt();
    Ok(DriftEstimate { slope, std_err })
}

/// Cumulative log-likelihood-ratio `Z` over `slots` post-change slots with
/// every sensor exposed. Sensors are redrawn uniformly on `domain` each slot
/// and readings come from the alternative at their distance to `source`.
pub fn full_exposure_llr_trace<R: Rng + ?Sized>(
    model: &ObservationModel,
    domain: &Domain,
    source: Point,
    sensors: usize,
    slots: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut z = 0.0;
    let mut trace = Vec::with_capacity(slots + 1);
    trace.push(z);
    for _ in 0..slots {
        for _ in 0..sensors {
            let d = domain.sample_uniform(rng).distance(&source);
            let v1 = model.alt_variance(d);
            let e: f64 = StandardNormal.sample(rng);
            let x = e * v1.sqrt();
            z += model.log_likelihood_ratio(x, d);
        }
        trace.push(z);
    }
    trace
}
