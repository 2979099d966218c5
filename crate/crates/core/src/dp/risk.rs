//! Monte Carlo Bayes risk of a stopping policy on a DP instance.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{instance_prior, DpInstance, ObservationSpec};
use crate::error::Result;
use crate::geometry::exposed_at;
use crate::observation::log_normal_density;
use crate::posterior::predict_into;
use crate::rng::{purpose, stream};
use crate::state_model::{sample_change_slot, Propagation, RadiusPath};
use crate::stats::MeanEstimate;

#[derive(Debug, Clone, PartialEq)]
pub struct RiskEstimate {
    pub estimate: MeanEstimate,
    /// Per-trial cost `1{T < t} + c (T - t)^+`, in trial order for pairing.
    pub costs: Vec<f64>,
}

/// Simulates the instance's generative model and applies `policy(n, belief)`
/// (true means stop) at `n = 0..`, stopping at the horizon regardless.
pub fn bayes_risk<P>(
    instance: &DpInstance,
    policy: P,
    trials: u64,
    seed: u64,
) -> Result<RiskEstimate>
where
    P: Fn(usize, &[f64]) -> bool + Sync,
{
    instance.validate()?;
    let det = &instance.detector;
    let states = det.state_count();
    let origins = det.origin_count();
    let width = det.chain.states();
    let r_max = det.r_max();
    let prior0 = instance_prior(instance);
    let origin_points = det.origins.points();
    let exposure: Vec<Vec<bool>> = (0..states)
        .map(|s| {
            let o = origin_points[s / width];
            instance
                .sensors
                .iter()
                .map(|a| exposed_at(a.distance(&o), (s % width) as u32, det.unit_length))
                .collect()
        })
        .collect();

    let costs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, &[k, purpose::TRUTH]);
            let change = sample_change_slot(&det.prior, &mut rng);
            let m = rng.random_range(0..origins);
            let mut path = match det.chain.propagation {
                Propagation::Growth { rho1 } => Some(RadiusPath::new(change, rho1, r_max)),
                Propagation::Instant => None,
            };
            let mut radius_at = |n: u64, rng: &mut _| match &mut path {
                Some(p) => p.advance(rng),
                None => match change {
                    Some(t) if n >= t => r_max,
                    _ => 0,
                },
            };
            let mut obs_rng = stream(seed, &[k, purpose::READINGS]);
            let mut belief = prior0.clone();
            let mut q = vec![0.0; states];
            radius_at(0, &mut rng);
            let mut n = 0usize;
            while n < instance.horizon && !policy(n, &belief) {
                n += 1;
                let r = radius_at(n as u64, &mut rng);
                let s_true = m * width + r as usize;
                predict_into(&belief, origins, &det.chain, &det.prior, n as u64, &mut q);
                let log_lik = sample_log_lik(instance, &exposure, s_true, &mut obs_rng);
                let top = log_lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for s in 0..states {
                    belief[s] = q[s] * (log_lik[s] - top).exp();
                    z += belief[s];
                }
                belief.iter_mut().for_each(|v| *v /= z);
            }
            let stop = n as u64;
            match change {
                Some(t) if stop >= t => instance.cost * (stop - t) as f64,
                _ => 1.0,
            }
        })
        .collect();
    Ok(RiskEstimate {
        estimate: MeanEstimate::from_samples(&costs),
        costs,
    })
}

/// Draws one frame from state `s_true` and returns its log-likelihood under every state.
fn sample_log_lik<R: Rng + ?Sized>(
    instance: &DpInstance,
    exposure: &[Vec<bool>],
    s_true: usize,
    rng: &mut R,
) -> Vec<f64> {
    let states = exposure.len();
    let det = &instance.detector;
    let width = det.chain.states();
    match &instance.observations {
        ObservationSpec::Finite { null, alt } => {
            let symbols: Vec<usize> = (0..instance.sensors.len())
                .map(|a| {
                    let pmf = if exposure[s_true][a] { alt } else { null };
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    pmf.iter()
                        .position(|&p| {
                            acc += p;
                            u < acc
                        })
                        .unwrap_or(pmf.len() - 1)
                })
                .collect();
            (0..states)
                .map(|s| {
                    symbols
                        .iter()
                        .enumerate()
                        .map(|(a, &x)| if exposure[s][a] { alt[x] } else { null[x] }.ln())
                        .sum()
                })
                .collect()
        }
        ObservationSpec::GaussHermite { .. } => {
            let var = |s: usize, a: usize| {
                if exposure[s][a] {
                    let o = det.origins.points()[s / width];
                    det.model.alt_variance(instance.sensors[a].distance(&o))
                } else {
                    det.model.null_variance()
                }
            };
            let x: Vec<f64> = (0..instance.sensors.len())
                .map(|a| {
                    let e: f64 = StandardNormal.sample(rng);
                    e * var(s_true, a).sqrt()
                })
                .collect();
            (0..states)
                .map(|s| {
                    x.iter()
                        .enumerate()
                        .map(|(a, &xa)| log_normal_density(xa, var(s, a)))
                        .sum()
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{backward_induction, binary_quantizer, dp_policy};
    use crate::geometry::{Domain, OriginSet, Point};
    use crate::observation::ObservationModel;
    use crate::posterior::DetectorModel;
    use crate::state_model::PriorParams;
    use crate::stopping::Decision;

    fn instance(rho: f64, horizon: usize) -> DpInstance {
        let domain = Domain::square(2.0);
        let prior = PriorParams::new(rho, 1.0, 0.0).unwrap();
        let model = ObservationModel::flat(1.0, 3.0).unwrap();
        let detector = DetectorModel::with_r_max(
            OriginSet::single(domain.center()),
            Propagation::Growth { rho1: 1.0 },
            1,
            prior,
            model,
            5.0,
        )
        .unwrap();
        DpInstance {
            detector,
            sensors: vec![Point::new(1.5, 1.0)],
            observations: ObservationSpec::Finite {
                null: binary_quantizer(1.0, 1.5).to_vec(),
                alt: binary_quantizer(4.0, 1.5).to_vec(),
            },
            cost: 0.02,
            horizon,
            resolution: 50,
        }
    }

    #[test]
    fn stop_at_zero_risk() {
        let inst = instance(0.2, 10);
        let r = bayes_risk(&inst, |_, _| true, 4000, 1).unwrap();
        let (lo, hi) = r.estimate.ci95();
        // Only t = 0 avoids a false alarm.
        assert!(lo - 0.01 <= 0.8 && 0.8 <= hi + 0.01, "{:?}", r.estimate);
    }

    #[test]
    fn never_stop_risk() {
        let rho: f64 = 0.2;
        let n = 30;
        let inst = instance(rho, n);
        let r = bayes_risk(&inst, |_, _| false, 4000, 2).unwrap();
        // E[(N - t)^+] for t ~ Geom(ρ) on {0, 1, ...}.
        let expect: f64 = (0..=n)
            .map(|k| rho * (1.0 - rho).powi(k as i32) * (n - k) as f64)
            .sum::<f64>()
            * inst.cost;
        let (lo, hi) = r.estimate.ci95();
        assert!(lo <= expect && expect <= hi, "{expect} vs {:?}", r.estimate);
    }

    #[test]
    fn dp_policy_beats_trivial_policies() {
        let inst = instance(0.1, 20);
        let t = backward_induction(&inst).unwrap();
        let dp = bayes_risk(&inst, |n, p| dp_policy(&t, n, p) == Decision::Stop, 3000, 3).unwrap();
        let never = bayes_risk(&inst, |_, _| false, 3000, 3).unwrap();
        assert!(dp.estimate.mean < never.estimate.mean);
        assert!(dp.estimate.mean < 0.9);
        // The table's prior value predicts the simulated risk.
        let j0 = t.value(0, &instance_prior(&inst));
        let (lo, hi) = dp.estimate.ci95();
        assert!(
            lo - 0.01 <= j0 && j0 <= hi + 0.01,
            "J0 {j0} vs {:?}",
            dp.estimate
        );
    }
}
