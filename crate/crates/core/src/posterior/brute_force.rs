//! Verification oracle: enumerate every (origin, change slot, growth path)
//! and weight it by its prior probability times the full joint likelihood.
//! Exponential in the horizon, so only usable on tiny instances.

use super::{BeliefState, DetectorModel};
use crate::error::{Error, Result};
use crate::geometry::exposed_at;
use crate::observation::{loglik_alt, loglik_null, ObservationFrame};
use crate::state_model::Propagation;

const MAX_SLOTS: usize = 14;
const MAX_ORIGINS: usize = 8;

/// Posterior at slot `frames.len()` computed by direct enumeration.
/// `frames[i]` is the frame of slot `i + 1`.
pub fn brute_force_posterior(
    frames: &[ObservationFrame],
    detector: &DetectorModel,
) -> Result<BeliefState> {
    let horizon = frames.len();
    let origins = detector.origin_count();
    if horizon > MAX_SLOTS || origins > MAX_ORIGINS {
        return Err(Error::InstanceTooLarge(format!(
            "enumeration supports at most {MAX_SLOTS} slots and {MAX_ORIGINS} origins, got {horizon} and {origins}"
        )));
    }
    for f in frames {
        if f.sensors.len() != f.readings.len() {
            return Err(Error::FrameMismatch {
                slot: f.slot,
                sensors: f.sensors.len(),
                readings: f.readings.len(),
            });
        }
    }
    let r_max = detector.r_max();
    let width = r_max as usize + 1;
    let prior = detector.prior;
    let (rho, p_inf) = (prior.rho, prior.p_inf);

    // (state index, log weight) for every enumerated path.
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut radii = vec![0u32; horizon + 1];

    for m in 0..origins {
        let origin = detector.origins.points()[m];
        let log_lik = |radii: &[u32]| -> f64 {
            let mut total = 0.0;
            for (i, f) in frames.iter().enumerate() {
                let r = radii[i + 1];
                for (a, &x) in f.sensors.iter().zip(&f.readings) {
                    let d = a.distance(&origin);
                    total += if exposed_at(d, r, detector.unit_length) {
                        loglik_alt(x, detector.model.alt_variance(d))
                    } else {
                        loglik_null(x, detector.model.null_variance())
                    };
                }
            }
            total
        };
        let log_origin = -(origins as f64).ln();

        // No change through the horizon.
        radii.iter_mut().for_each(|r| *r = 0);
        let p_late = p_inf + (1.0 - p_inf) * (1.0 - rho).powi(horizon as i32 + 1);
        terms.push((m * width, log_origin + p_late.ln() + log_lik(&radii)));

        for k in 0..=horizon {
            let p_k = (1.0 - p_inf) * rho * (1.0 - rho).powi(k as i32);
            let tail = horizon - k;
            match detector.chain.propagation {
                Propagation::Instant => {
                    for (n, r) in radii.iter_mut().enumerate() {
                        *r = if n >= k { r_max } else { 0 };
                    }
                    terms.push((
                        m * width + r_max as usize,
                        log_origin + p_k.ln() + log_lik(&radii),
                    ));
                }
                Propagation::Growth { rho1 } => {
                    for pattern in 0u32..(1u32 << tail) {
                        radii.iter_mut().for_each(|r| *r = 0);
                        radii[k] = 1.min(r_max);
                        let mut log_p = p_k.ln();
                        let mut feasible = true;
                        for step in 0..tail {
                            let n = k + 1 + step;
                            let grow = pattern & (1 << step) != 0;
                            let prev = radii[n - 1];
                            if prev == r_max {
                                // Absorbing: only the "stay" branch exists.
                                if grow {
                                    feasible = false;
                                    break;
                                }
                                radii[n] = prev;
                            } else if grow {
                                log_p += rho1.ln();
                                radii[n] = prev + 1;
                            } else {
                                log_p += (1.0 - rho1).ln();
                                radii[n] = prev;
                            }
                        }
                        if feasible && log_p.is_finite() {
                            let s = m * width + radii[horizon] as usize;
                            terms.push((s, log_origin + log_p + log_lik(&radii)));
                        }
                    }
                }
            }
        }
    }

    let max = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; origins * width];
    for (s, lw) in terms {
        probs[s] += (lw - max).exp();
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    BeliefState::from_probs(horizon as u64, origins, r_max, probs)
}
