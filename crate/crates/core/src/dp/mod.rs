//! Finite-horizon dynamic program for the Bayes risk
//! `P(T < t) + c E[(T - t)^+]` on tiny instances.
//!
//! Value functions live on a simplex lattice over the `(origin, radius)`
//! belief. The cost-to-go obeys
//! `J_N = π_0` and `J_n = min(π_0, c (1 - π_0) + D_n)` where
//! `D_n(p) = E[J_{n+1}(p') | p]`; the expectation runs over a finite
//! observation alphabet or a Gauss-Hermite rule, and off-lattice successor
//! beliefs are interpolated.

mod lattice;
mod risk;

pub use lattice::SimplexLattice;
pub use risk::{bayes_risk, RiskEstimate};

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::geometry::{exposed_at, Point};
use crate::observation::log_normal_density;
use crate::posterior::{initial_belief, predict_into, DetectorModel};
use crate::quadrature::gaussian_expectation_rule;
use crate::stopping::Decision;

/// Largest belief dimension accepted.
pub const MAX_STATES: usize = 6;
const MAX_BRANCHES: usize = 1 << 14;

/// How the next observation is discretized for the expectation.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSpec {
    /// Each sensor emits a symbol with pmf `null` when unexposed and `alt` when exposed.
    Finite { null: Vec<f64>, alt: Vec<f64> },
    /// Gaussian readings from the detector model, integrated with `nodes` points per sensor.
    GaussHermite { nodes: usize },
}

/// Binary symbol `|x| > tau` for a zero-mean Gaussian reading: `[P(|x| <= tau), P(|x| > tau)]`.
pub fn binary_quantizer(variance: f64, tau: f64) -> [f64; 2] {
    let n = Normal::new(0.0, variance.sqrt()).expect("positive variance");
    let out = 2.0 * n.sf(tau);
    [1.0 - out, out]
}

#[derive(Debug, Clone)]
pub struct DpInstance {
    pub detector: DetectorModel,
    /// Sensor locations, the same every slot.
    pub sensors: Vec<Point>,
    pub observations: ObservationSpec,
    /// Delay cost `c` per slot.
    pub cost: f64,
    pub horizon: usize,
    pub resolution: u32,
}

/// One discretized observation outcome.
#[derive(Debug, Clone)]
struct Branch {
    /// For quadrature branches, the state whose density the nodes sample.
    source: Option<usize>,
    weight: f64,
    /// Likelihood of the outcome under each state (up to a common factor for quadrature branches).
    lik: Vec<f64>,
}

impl DpInstance {
    pub fn validate(&self) -> Result<()> {
        let s = self.detector.state_count();
        if s > MAX_STATES {
            return Err(Error::InstanceTooLarge(format!(
                "belief dimension {s} exceeds {MAX_STATES}"
            )));
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return Err(invalid(
                "cost",
                format!("must be non-negative, got {}", self.cost),
            ));
        }
        if self.resolution == 0 {
            return Err(invalid("resolution", "must be at least 1"));
        }
        if let ObservationSpec::Finite { null, alt } = &self.observations {
            if null.len() != alt.len() || null.is_empty() {
                return Err(invalid(
                    "alphabet",
                    "null and alt pmfs must share a non-empty alphabet",
                ));
            }
            for pmf in [null, alt] {
                if pmf.iter().any(|&q| q.is_nan() || q < 0.0)
                    || (pmf.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(invalid(
                        "alphabet",
                        "pmfs must be non-negative and sum to one",
                    ));
                }
            }
        }
        Ok(())
    }

    /// `exposed[s][a]` for state `s = m (R+1) + r` and sensor `a`.
    fn exposure(&self) -> Vec<Vec<bool>> {
        let w = self.detector.chain.states();
        (0..self.detector.state_count())
            .map(|s| {
                let o = self.detector.origins.points()[s / w];
                let r = (s % w) as u32;
                self.sensors
                    .iter()
                    .map(|a| exposed_at(a.distance(&o), r, self.detector.unit_length))
                    .collect()
            })
            .collect()
    }

    fn branches(&self) -> Result<Vec<Branch>> {
        let exposure = self.exposure();
        let states = exposure.len();
        let l = self.sensors.len();
        let mut out = Vec::new();
        match &self.observations {
            ObservationSpec::Finite { null, alt } => {
                let k = null.len();
                let count = k.checked_pow(l as u32).filter(|&c| c <= MAX_BRANCHES);
                let count = count.ok_or_else(|| {
                    Error::InstanceTooLarge("too many observation outcomes".into())
                })?;
                for code in 0..count {
                    let symbols: Vec<usize> =
                        (0..l).map(|a| (code / k.pow(a as u32)) % k).collect();
                    let lik = (0..states)
                        .map(|s| {
                            symbols
                                .iter()
                                .enumerate()
                                .map(|(a, &x)| if exposure[s][a] { alt[x] } else { null[x] })
                                .product()
                        })
                        .collect();
                    out.push(Branch {
                        source: None,
                        weight: 1.0,
                        lik,
                    });
                }
            }
            ObservationSpec::GaussHermite { nodes } => {
                let (z, w) = gaussian_expectation_rule(*nodes, 1.0)
                    .map_err(|e| Error::Quadrature(format!("node rule: {e}")))?;
                let g = z.len();
                let count = g
                    .checked_pow(l as u32)
                    .filter(|&c| c * states <= MAX_BRANCHES);
                let count = count.ok_or_else(|| {
                    Error::InstanceTooLarge("too many quadrature branches".into())
                })?;
                let model = &self.detector.model;
                let var = |s: usize, a: usize| {
                    if exposure[s][a] {
                        let o = self.detector.origins.points()[s / self.detector.chain.states()];
                        model.alt_variance(self.sensors[a].distance(&o))
                    } else {
                        model.null_variance()
                    }
                };
                for src in 0..states {
                    for code in 0..count {
                        let idx: Vec<usize> =
                            (0..l).map(|a| (code / g.pow(a as u32)) % g).collect();
                        let x: Vec<f64> = idx
                            .iter()
                            .enumerate()
                            .map(|(a, &j)| z[j] * var(src, a).sqrt())
                            .collect();
                        let weight: f64 = idx.iter().map(|&j| w[j]).product();
                        let logs: Vec<f64> = (0..states)
                            .map(|s| {
                                x.iter()
                                    .enumerate()
                                    .map(|(a, &xa)| log_normal_density(xa, var(s, a)))
                                    .sum()
                            })
                            .collect();
                        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        out.push(Branch {
                            source: Some(src),
                            weight,
                            lik: logs.iter().map(|v| (v - top).exp()).collect(),
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Cost-to-go and continuation values on the lattice.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub lattice: SimplexLattice,
    pub horizon: usize,
    pub cost: f64,
    /// Number of origins and the radius width, for reading `π_0` off a belief.
    origins: usize,
    width: usize,
    /// `j[n][i]` for `n = 0..=N`.
    pub j: Vec<Vec<f64>>,
    /// `d[n][i]` for `n = 0..N`.
    pub d: Vec<Vec<f64>>,
}

impl ValueTable {
    /// `π_0` of a belief vector.
    pub fn pi0(&self, p: &[f64]) -> f64 {
        (0..self.origins).map(|m| p[m * self.width]).sum()
    }

    pub fn value(&self, n: usize, p: &[f64]) -> f64 {
        self.lattice.interpolate(&self.j[n], p)
    }

    pub fn continuation(&self, n: usize, p: &[f64]) -> f64 {
        self.lattice.interpolate(&self.d[n], p)
    }
}

fn pi0_of(p: &[f64], origins: usize, width: usize) -> f64 {
    (0..origins).map(|m| p[m * width]).sum()
}

/// Backward induction from `J_N = π_0`.
pub fn backward_induction(instance: &DpInstance) -> Result<ValueTable> {
    instance.validate()?;
    let det = &instance.detector;
    let states = det.state_count();
    let origins = det.origin_count();
    let width = det.chain.states();
    let lattice = SimplexLattice::new(states, instance.resolution)?;
    let branches = instance.branches()?;
    let points: Vec<Vec<f64>> = lattice.points().collect();
    let pi0: Vec<f64> = points.iter().map(|p| pi0_of(p, origins, width)).collect();

    let n_max = instance.horizon;
    let mut j = vec![Vec::new(); n_max + 1];
    let mut d = vec![Vec::new(); n_max];
    j[n_max] = pi0.clone();
    for n in (0..n_max).rev() {
        let next = &j[n + 1];
        let dn: Vec<f64> = points
            .par_iter()
            .map(|p| {
                let mut q = vec![0.0; states];
                predict_into(p, origins, &det.chain, &det.prior, n as u64 + 1, &mut q);
                let mut post = vec![0.0; states];
                let mut acc = 0.0;
                for b in &branches {
                    let mut z = 0.0;
                    for s in 0..states {
                        post[s] = q[s] * b.lik[s];
                        z += post[s];
                    }
                    if z <= 0.0 {
                        continue;
                    }
                    let mass = match b.source {
                        None => b.weight * z,
                        Some(src) => b.weight * q[src],
                    };
                    if mass == 0.0 {
                        continue;
                    }
                    post.iter_mut().for_each(|v| *v /= z);
                    acc += mass * lattice.interpolate(next, &post);
                }
                acc
            })
            .collect();
        j[n] = pi0
            .iter()
            .zip(&dn)
            .map(|(&p0, &dv)| p0.min(instance.cost * (1.0 - p0) + dv))
            .collect();
        d[n] = dn;
    }
    Ok(ValueTable {
        lattice,
        horizon: n_max,
        cost: instance.cost,
        origins,
        width,
        j,
        d,
    })
}

/// Stop iff `π_0 <= c (1 - π_0) + D_n(p)`; always stop at the horizon.
pub fn dp_policy(table: &ValueTable, n: usize, belief: &[f64]) -> Decision {
    if n >= table.horizon {
        return Decision::Stop;
    }
    let p0 = table.pi0(belief);
    if p0 <= table.cost * (1.0 - p0) + table.continuation(n, belief) {
        Decision::Stop
    } else {
        Decision::Continue
    }
}

/// Initial belief of the instance, as a plain vector.
pub fn instance_prior(instance: &DpInstance) -> Vec<f64> {
    let det = &instance.detector;
    initial_belief(det.origin_count(), &det.chain, &det.prior)
        .probs()
        .to_vec()
}

/// Smallest fraction of points whose stop/continue label disagrees with a
/// single threshold rule `stop iff π_0 <= Q`.
pub fn threshold_misclassification(pi0: &[f64], stop: &[bool]) -> f64 {
    let n = pi0.len();
    if n == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pi0[a].total_cmp(&pi0[b]));
    // Threshold below everything: every "stop" label is wrong.
    let mut errors = stop.iter().filter(|&&s| s).count();
    let mut best = errors;
    let mut i = 0;
    while i < n {
        // Move the threshold past a whole block of tied π_0 values.
        let v = pi0[order[i]];
        while i < n && pi0[order[i]] == v {
            if stop[order[i]] {
                errors -= 1;
            } else {
                errors += 1;
            }
            i += 1;
        }
        best = best.min(errors);
    }
    best as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub rho: f64,
    pub misclassification: f64,
    /// Mean and max over lattice points of `|Ψ_0| / ρ`, `Ψ = D - (1 - ρ) π_0`.
    pub psi_over_rho_mean: f64,
    pub psi_over_rho_max: f64,
    pub stop_fraction: f64,
}

/// Classifies every lattice point at `n = 0` by the DP policy and by the
/// best single `π_0` threshold, for each `ρ` in the sweep.
pub fn threshold_diagnostic(instance: &DpInstance, rhos: &[f64]) -> Result<Vec<ThresholdReport>> {
    rhos.iter()
        .map(|&rho| {
            let mut inst = instance.clone();
            inst.detector.prior.rho = rho;
            inst.detector.prior.validate()?;
            let table = backward_induction(&inst)?;
            let points: Vec<Vec<f64>> = table.lattice.points().collect();
            let pi0: Vec<f64> = points.iter().map(|p| table.pi0(p)).collect();
            let stop: Vec<bool> = points
                .iter()
                .map(|p| dp_policy(&table, 0, p) == Decision::Stop)
                .collect();
            let psi: Vec<f64> = pi0
                .iter()
                .zip(&table.d[0])
                .map(|(&p0, &dv)| (dv - (1.0 - rho) * p0).abs() / rho)
                .collect();
            let n = points.len() as f64;
            Ok(ThresholdReport {
                rho,
                misclassification: threshold_misclassification(&pi0, &stop),
                psi_over_rho_mean: psi.iter().sum::<f64>() / n,
                psi_over_rho_max: psi.iter().copied().fold(0.0, f64::max),
                stop_fraction: stop.iter().filter(|&&s| s).count() as f64 / n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, OriginSet};
    use crate::observation::ObservationModel;
    use crate::state_model::{PriorParams, Propagation};

    fn instance(cost: f64, horizon: usize, obs: ObservationSpec) -> DpInstance {
        let domain = Domain::square(2.0);
        let prior = PriorParams::new(0.1, 0.5, 0.0).unwrap();
        let model = ObservationModel::flat(1.0, 3.0).unwrap();
        let detector = DetectorModel::with_r_max(
            OriginSet::single(domain.center()),
            Propagation::Growth { rho1: 0.5 },
            2,
            prior,
            model,
            1.0,
        )
        .unwrap();
        DpInstance {
            detector,
            sensors: vec![Point::new(1.2, 1.0), Point::new(1.0, 1.9)],
            observations: obs,
            cost,
            horizon,
            resolution: 8,
        }
    }

    fn binary() -> ObservationSpec {
        let null = binary_quantizer(1.0, 1.5).to_vec();
        let alt = binary_quantizer(4.0, 1.5).to_vec();
        ObservationSpec::Finite { null, alt }
    }

    #[test]
    fn huge_cost_stops_immediately() {
        let t = backward_induction(&instance(1e6, 4, binary())).unwrap();
        // Waiting is free only when a change is already certain.
        for (i, p) in t.lattice.points().enumerate() {
            if t.pi0(&p) < 1.0 {
                assert_eq!(t.j[0][i], t.pi0(&p));
                assert_eq!(dp_policy(&t, 0, &p), Decision::Stop);
            }
        }
    }

    #[test]
    fn zero_cost_waits_for_horizon() {
        // Free waiting: J_n equals the expected terminal π_0 and nothing stops early.
        let t = backward_induction(&instance(0.0, 3, binary())).unwrap();
        for (i, p) in t.lattice.points().enumerate() {
            assert!((t.j[0][i] - t.d[0][i].min(t.pi0(&p))).abs() < 1e-15);
            assert!(t.j[0][i] <= t.pi0(&p) + 1e-15);
        }
        // With growth certain to cover the sensors, π_0 after N slots is (1-ρ)^N times the start.
        let p = [1.0, 0.0, 0.0];
        let expect = 0.9f64.powi(3);
        assert!((t.value(0, &p) - expect).abs() < 1e-12);
    }

    #[test]
    fn values_bounded_and_monotone_in_horizon() {
        for obs in [binary(), ObservationSpec::GaussHermite { nodes: 6 }] {
            let a = backward_induction(&instance(0.05, 5, obs.clone())).unwrap();
            let b = backward_induction(&instance(0.05, 6, obs)).unwrap();
            for i in 0..a.lattice.len() {
                assert!((0.0..=1.0).contains(&a.j[0][i]));
                assert!(a.j[0][i] >= b.j[0][i]);
            }
        }
    }

    #[test]
    fn too_large_rejected() {
        let mut inst = instance(0.1, 2, binary());
        inst.detector.chain.r_max = 6;
        assert!(matches!(
            backward_induction(&inst),
            Err(Error::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn misclassification_examples() {
        assert_eq!(threshold_misclassification(&[0.3; 5], &[true; 5]), 0.0);
        assert_eq!(
            threshold_misclassification(&[0.1, 0.2, 0.3], &[true, true, false]),
            0.0
        );
        assert!(
            (threshold_misclassification(&[0.1, 0.2, 0.3, 0.4], &[true, false, true, false])
                - 0.25)
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn quantizer_sums_to_one() {
        let q = binary_quantizer(2.0, 0.7);
        assert!((q[0] + q[1] - 1.0).abs() < 1e-15);
        assert!(binary_quantizer(4.0, 1.0)[1] > binary_quantizer(1.0, 1.0)[1]);
    }
}
