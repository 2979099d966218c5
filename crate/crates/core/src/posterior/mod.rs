//! Exact recursive posterior over `(origin, radius)`.
//!
//! Each slot runs a prediction through the radius chain followed by a Bayes
//! update with the product likelihood of the frame. Only exposed sensors
//! contribute a likelihood ratio against the null, so the state weight for
//! origin `m` and radius `r` is the sum of log-ratios over sensors closer
//! than `r` units to `o_m`. Sensors are bucketed by the first radius that
//! exposes them and the bucket sums are prefix-accumulated, giving
//! `O(M·(L + ℜ))` work per slot independent of elapsed time.

mod brute_force;

pub use brute_force::brute_force_posterior;

use crate::error::{invalid, Error, Result};
use crate::geometry::{first_exposure_radius, max_radius, Domain, OriginSet, Point};
use crate::observation::{ObservationFrame, ObservationModel};
use crate::state_model::{PriorParams, Propagation, RadiusChain};

/// Everything a detector assumes about the world.
#[derive(Debug, Clone)]
pub struct DetectorModel {
    pub origins: OriginSet,
    pub chain: RadiusChain,
    pub prior: PriorParams,
    pub model: ObservationModel,
    /// Distance covered by one radius unit.
    pub unit_length: f64,
}

impl DetectorModel {
    /// Builds a detector whose covering radius is derived from the domain.
    pub fn new(
        domain: &Domain,
        origins: OriginSet,
        propagation: Propagation,
        prior: PriorParams,
        model: ObservationModel,
        unit_length: f64,
    ) -> Result<Self> {
        let r_max = max_radius(domain, &origins, unit_length)?;
        Self::with_r_max(origins, propagation, r_max, prior, model, unit_length)
    }

    pub fn with_r_max(
        origins: OriginSet,
        propagation: Propagation,
        r_max: u32,
        prior: PriorParams,
        model: ObservationModel,
        unit_length: f64,
    ) -> Result<Self> {
        prior.validate()?;
        model.validate()?;
        if r_max == 0 {
            return Err(invalid("r_max", "covering radius must be at least 1"));
        }
        if !(unit_length > 0.0 && unit_length.is_finite()) {
            return Err(invalid(
                "unit_length",
                format!("must be positive, got {unit_length}"),
            ));
        }
        if let Propagation::Growth { rho1 } = propagation {
            if !(rho1 > 0.0 && rho1 <= 1.0) {
                return Err(invalid("rho1", format!("must lie in (0,1], got {rho1}")));
            }
        }
        Ok(Self {
            origins,
            chain: RadiusChain { propagation, r_max },
            prior,
            model,
            unit_length,
        })
    }

    pub fn origin_count(&self) -> usize {
        self.origins.len()
    }

    pub fn r_max(&self) -> u32 {
        self.chain.r_max
    }

    pub fn state_count(&self) -> usize {
        self.origin_count() * self.chain.states()
    }
}

/// Posterior `p_{n,m,r}` stored row-major over `(m, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    n: u64,
    origins: usize,
    r_max: u32,
    probs: Vec<f64>,
    log_evidence: f64,
}

impl BeliefState {
    pub fn from_probs(n: u64, origins: usize, r_max: u32, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != origins * (r_max as usize + 1) {
            return Err(invalid(
                "probs",
                format!(
                    "expected {} entries, got {}",
                    origins * (r_max as usize + 1),
                    probs.len()
                ),
            ));
        }
        Ok(Self {
            n,
            origins,
            r_max,
            probs,
            log_evidence: 0.0,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn origin_count(&self) -> usize {
        self.origins
    }

    pub fn r_max(&self) -> u32 {
        self.r_max
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Accumulated log marginal likelihood ratio of all frames against the
    /// pure-noise hypothesis.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    #[inline]
    fn width(&self) -> usize {
        self.r_max as usize + 1
    }

    pub fn get(&self, m: usize, r: u32) -> f64 {
        self.probs[m * self.width() + r as usize]
    }

    pub fn origin_row(&self, m: usize) -> &[f64] {
        let w = self.width();
        &self.probs[m * w..(m + 1) * w]
    }

    /// `π_{n,r}`: posterior probability of radius `r`.
    pub fn radius_marginal(&self, r: u32) -> f64 {
        (0..self.origins).map(|m| self.get(m, r)).sum()
    }

    /// `π_{n,0}`: posterior probability that no event has started.
    pub fn change_posterior(&self) -> f64 {
        self.radius_marginal(0).clamp(0.0, 1.0)
    }

    pub fn origin_marginal(&self, m: usize) -> f64 {
        self.origin_row(m).iter().sum()
    }

    /// `W_n^{(m)} = P(t <= n | I_n, O = o_m)`.
    pub fn per_origin_posterior(&self, m: usize) -> Result<f64> {
        let row = self.origin_row(m);
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroOriginMass { origin: m });
        }
        let started: f64 = row[1..].iter().sum();
        Ok((started / total).clamp(0.0, 1.0))
    }

    /// Largest defined `W_n^{(m)}` across origins.
    pub fn max_per_origin_posterior(&self) -> Option<f64> {
        (0..self.origins)
            .filter_map(|m| self.per_origin_posterior(m).ok())
            .reduce(f64::max)
    }

    /// Absolute gap in `π_{n,0} = M / (M + Σ_m W/(1-W))`. `None` when an
    /// origin has no pre-change mass left (the odds are infinite).
    pub fn decomposition_residual(&self) -> Option<f64> {
        let mut odds_sum = 0.0;
        for m in 0..self.origins {
            let row = self.origin_row(m);
            if row[0] <= 0.0 {
                return None;
            }
            odds_sum += row[1..].iter().sum::<f64>() / row[0];
        }
        let m = self.origins as f64;
        Some((self.radius_marginal(0) - m / (m + odds_sum)).abs())
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Prior-only belief at slot 0, uniform over origins.
pub fn initial_belief(origins: usize, chain: &RadiusChain, prior: &PriorParams) -> BeliefState {
    let row = chain.initial_radius_pmf(prior);
    let inv = 1.0 / origins as f64;
    let probs = (0..origins)
        .flat_map(|_| row.iter().map(|p| p * inv))
        .collect();
    BeliefState {
        n: 0,
        origins,
        r_max: chain.r_max,
        probs,
        log_evidence: 0.0,
    }
}

/// `P(U_{n,m,r} | I_{n-1})` for `n = belief.n() + 1`.
pub fn predict(belief: &BeliefState, chain: &RadiusChain, prior: &PriorParams) -> Vec<f64> {
    let mut out = vec![0.0; belief.probs.len()];
    predict_into(
        &belief.probs,
        belief.origins,
        chain,
        prior,
        belief.n + 1,
        &mut out,
    );
    out
}

pub(crate) fn predict_into(
    probs: &[f64],
    origins: usize,
    chain: &RadiusChain,
    prior: &PriorParams,
    n: u64,
    out: &mut [f64],
) {
    let w = chain.states();
    out.iter_mut().for_each(|v| *v = 0.0);
    for m in 0..origins {
        let src = &probs[m * w..(m + 1) * w];
        let dst = &mut out[m * w..(m + 1) * w];
        for (r, &p) in src.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let step = chain.step_unchecked(r as u32, n, prior);
            dst[step.from as usize] += p * step.stay();
            dst[step.to as usize] += p * step.advance;
        }
    }
}

/// Per-(origin, sensor) constants for a fixed sensor layout.
#[derive(Debug, Clone)]
struct LayoutCache {
    sensors: Vec<Point>,
    /// Row-major `[m][a]`: first exposing radius (`u32::MAX` if never).
    first_radius: Vec<u32>,
    /// `llr = offset + slope * x²`, row-major `[m][a]`; empty for flat models.
    offset: Vec<f64>,
    slope: Vec<f64>,
}

impl LayoutCache {
    fn build(detector: &DetectorModel, sensors: &[Point]) -> Self {
        let l = sensors.len();
        let mm = detector.origin_count();
        let r_max = detector.r_max();
        let mut first_radius = Vec::with_capacity(mm * l);
        let attenuating = !detector.model.is_distance_free();
        let (mut offset, mut slope) = (Vec::new(), Vec::new());
        if attenuating {
            offset.reserve(mm * l);
            slope.reserve(mm * l);
        }
        let v0 = detector.model.null_variance();
        for o in detector.origins.points() {
            for a in sensors {
                let d = a.distance(o);
                let k = first_exposure_radius(d, detector.unit_length);
                first_radius.push(if k <= r_max { k } else { u32::MAX });
                if attenuating {
                    let v1 = detector.model.alt_variance(d);
                    offset.push(0.5 * (v0 / v1).ln());
                    slope.push(0.5 * (1.0 / v0 - 1.0 / v1));
                }
            }
        }
        Self {
            sensors: sensors.to_vec(),
            first_radius,
            offset,
            slope,
        }
    }
}

/// Computes the exposure log-weights `S_m(r)` into `out` (row-major).
fn exposure_log_weights(
    detector: &DetectorModel,
    cache: &LayoutCache,
    readings: &[f64],
    out: &mut [f64],
) {
    let w = detector.chain.states();
    let l = readings.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    let flat_llr: Option<Vec<f64>> = detector.model.is_distance_free().then(|| {
        let v0 = detector.model.null_variance();
        let v1 = detector.model.alt_variance(0.0);
        let (a, b) = (0.5 * (v0 / v1).ln(), 0.5 * (1.0 / v0 - 1.0 / v1));
        readings.iter().map(|x| a + b * x * x).collect()
    });
    for m in 0..detector.origin_count() {
        let row = &mut out[m * w..(m + 1) * w];
        for (a, &x) in readings.iter().enumerate() {
            let idx = m * l + a;
            let k = cache.first_radius[idx];
            if k == u32::MAX {
                continue;
            }
            let llr = match &flat_llr {
                Some(v) => v[a],
                None => cache.offset[idx] + cache.slope[idx] * x * x,
            };
            row[k as usize] += llr;
        }
        for r in 1..w {
            row[r] += row[r - 1];
        }
    }
}

/// Normalises `prior * exp(log_w)` in log space; returns the log normaliser.
fn normalize_log_space(pred: &[f64], log_w: &mut [f64], slot: u64) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for (lw, &p) in log_w.iter_mut().zip(pred) {
        *lw = if p > 0.0 {
            p.ln() + *lw
        } else {
            f64::NEG_INFINITY
        };
        if *lw > max {
            max = *lw;
        }
    }
    if !max.is_finite() {
        return Err(Error::DegeneratePosterior { slot });
    }
    let mut sum = 0.0;
    for lw in log_w.iter_mut() {
        *lw = (*lw - max).exp();
        sum += *lw;
    }
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::DegeneratePosterior { slot });
    }
    let inv = 1.0 / sum;
    log_w.iter_mut().for_each(|v| *v *= inv);
    Ok(max + sum.ln())
}

/// Bayes update of a predicted vector with one frame.
pub fn update(
    predicted: &[f64],
    n: u64,
    frame: &ObservationFrame,
    detector: &DetectorModel,
    prev_log_evidence: f64,
) -> Result<BeliefState> {
    if frame.sensors.len() != frame.readings.len() {
        return Err(Error::FrameMismatch {
            slot: frame.slot,
            sensors: frame.sensors.len(),
            readings: frame.readings.len(),
        });
    }
    if predicted.len() != detector.state_count() {
        return Err(invalid(
            "predicted",
            "length does not match detector state space",
        ));
    }
    let cache = LayoutCache::build(detector, &frame.sensors);
    let mut weights = vec![0.0; predicted.len()];
    exposure_log_weights(detector, &cache, &frame.readings, &mut weights);
    let log_norm = normalize_log_space(predicted, &mut weights, n)?;
    Ok(BeliefState {
        n,
        origins: detector.origin_count(),
        r_max: detector.r_max(),
        probs: weights,
        log_evidence: prev_log_evidence + log_norm,
    })
}

/// Running filter holding the current belief and a layout cache for
/// stationary sensors.
#[derive(Debug, Clone)]
pub struct PosteriorFilter {
    detector: DetectorModel,
    belief: BeliefState,
    predicted: Vec<f64>,
    cache: Option<LayoutCache>,
}

impl PosteriorFilter {
    pub fn new(detector: DetectorModel) -> Self {
        let belief = initial_belief(detector.origin_count(), &detector.chain, &detector.prior);
        let predicted = vec![0.0; belief.probs.len()];
        Self {
            detector,
            belief,
            predicted,
            cache: None,
        }
    }

    pub fn detector(&self) -> &DetectorModel {
        &self.detector
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    /// Advances one slot. Frames with no sensors reduce to prediction.
    pub fn step(&mut self, frame: &ObservationFrame) -> Result<&BeliefState> {
        if frame.sensors.len() != frame.readings.len() {
            return Err(Error::FrameMismatch {
                slot: frame.slot,
                sensors: frame.sensors.len(),
                readings: frame.readings.len(),
            });
        }
        let n = self.belief.n + 1;
        predict_into(
            &self.belief.probs,
            self.belief.origins,
            &self.detector.chain,
            &self.detector.prior,
            n,
            &mut self.predicted,
        );
        let stale = self
            .cache
            .as_ref()
            .is_none_or(|c| c.sensors != frame.sensors);
        if stale {
            self.cache = Some(LayoutCache::build(&self.detector, &frame.sensors));
        }
        let cache = self.cache.as_ref().expect("cache populated above");
        // Reuse the old probability buffer as the log-weight scratch.
        let mut weights = std::mem::take(&mut self.belief.probs);
        exposure_log_weights(&self.detector, cache, &frame.readings, &mut weights);
        let log_norm = normalize_log_space(&self.predicted, &mut weights, n)?;
        self.belief.probs = weights;
        self.belief.n = n;
        self.belief.log_evidence += log_norm;
        if let Some(res) = self.belief.decomposition_residual() {
            debug_assert!(
                res <= 1e-9,
                "per-origin decomposition violated by {res} at slot {n}"
            );
        }
        Ok(&self.belief)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_origin_grid, place_sensors, Domain, PlacementPolicy};
    use crate::observation::{sample_frame, Clamp, PathLoss, TrueState};
    use crate::rng::stream;
    use proptest::prelude::*;

    fn detector(m: usize, rho1: f64, gamma2: f64) -> DetectorModel {
        let d = Domain::square(10.0);
        let origins = build_origin_grid(&d, m).unwrap();
        DetectorModel::new(
            &d,
            origins,
            Propagation::Growth { rho1 },
            PriorParams::new(0.05, rho1, 0.0).unwrap(),
            ObservationModel::flat(1.0, gamma2).unwrap(),
            1.0,
        )
        .unwrap()
    }

    /// Explicit (ℜ+1)x(ℜ+1) transition matrix power, independent of `predict`.
    fn chain_marginal(prior: &PriorParams, rho1: f64, r_max: usize, steps: usize) -> Vec<f64> {
        let w = r_max + 1;
        let mut v = vec![0.0; w];
        v[0] = 1.0 - prior.rho;
        v[1] = prior.rho;
        for _ in 0..steps {
            let mut t = vec![vec![0.0; w]; w];
            t[0][0] = 1.0 - prior.rho;
            t[0][1] = prior.rho;
            for r in 1..r_max {
                t[r][r] = 1.0 - rho1;
                t[r][r + 1] = rho1;
            }
            t[r_max][r_max] = 1.0;
            v = (0..w)
                .map(|j| (0..w).map(|i| v[i] * t[i][j]).sum())
                .collect();
        }
        v
    }

    #[test]
    fn deterministic_growth_prediction() {
        let det = detector(2, 1.0, 1.0);
        let w = det.chain.states();
        let mut probs = vec![0.0; 2 * w];
        probs[w + 3] = 1.0;
        let b = BeliefState::from_probs(5, 2, det.r_max(), probs).unwrap();
        let p = predict(&b, &det.chain, &det.prior);
        assert_eq!(p[w + 4], 1.0);
        assert_eq!(p.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn covering_radius_is_absorbing() {
        let det = detector(1, 0.3, 1.0);
        let r_max = det.r_max();
        let mut probs = vec![0.0; det.chain.states()];
        probs[r_max as usize] = 1.0;
        let b = BeliefState::from_probs(5, 1, r_max, probs).unwrap();
        let p = predict(&b, &det.chain, &det.prior);
        assert_eq!(p[r_max as usize], 1.0);
    }

    #[test]
    fn no_observation_prediction_matches_matrix_power() {
        let det = detector(3, 0.4, 1.0);
        let mut f = PosteriorFilter::new(det.clone());
        for k in 1..=25 {
            let b = f.step(&ObservationFrame::empty(k)).unwrap().clone();
            let oracle = chain_marginal(&det.prior, 0.4, det.r_max() as usize, k as usize);
            for r in 0..=det.r_max() {
                assert!((b.radius_marginal(r) - oracle[r as usize]).abs() < 1e-13);
            }
            assert!((b.change_posterior() - oracle[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn null_equivalent_model_leaves_prediction_unchanged() {
        let det = detector(4, 0.5, 0.0);
        let d = Domain::square(10.0);
        let snaps = place_sensors(&d, 30, PlacementPolicy::PerSlotResample, 2, 8).unwrap();
        let mut f = PosteriorFilter::new(det.clone());
        let mut r = stream(3, &[]);
        let truth = TrueState {
            origin: Point::new(1.0, 2.0),
            radius: 5,
            unit_length: 1.0,
        };
        for s in snaps.iter().skip(1) {
            let pred = predict(f.belief(), &det.chain, &det.prior);
            let frame = sample_frame(&truth, s, &det.model, &mut r);
            let b = f.step(&frame).unwrap();
            for (a, b) in pred.iter().zip(b.probs()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn update_function_matches_filter() {
        let det = detector(5, 0.25, 1.5);
        let d = Domain::square(10.0);
        let snaps = place_sensors(&d, 12, PlacementPolicy::PerSlotResample, 8, 6).unwrap();
        let truth = TrueState {
            origin: Point::new(3.0, 7.0),
            radius: 4,
            unit_length: 1.0,
        };
        let mut r = stream(9, &[]);
        let mut f = PosteriorFilter::new(det.clone());
        for s in snaps.iter().skip(1) {
            let frame = sample_frame(&truth, s, &det.model, &mut r);
            let pred = predict(f.belief(), &det.chain, &det.prior);
            let expect = update(
                &pred,
                f.belief().n() + 1,
                &frame,
                &det,
                f.belief().log_evidence(),
            )
            .unwrap();
            let got = f.step(&frame).unwrap();
            for (a, b) in expect.probs().iter().zip(got.probs()) {
                assert!((a - b).abs() < 1e-14);
            }
            assert!((expect.log_evidence() - got.log_evidence()).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_mismatched_frame() {
        let mut f = PosteriorFilter::new(detector(1, 1.0, 1.0));
        let bad = ObservationFrame {
            slot: 1,
            sensors: vec![Point::new(1.0, 1.0)],
            readings: vec![],
        };
        assert!(matches!(f.step(&bad), Err(Error::FrameMismatch { .. })));
    }

    #[test]
    fn per_origin_posterior_single_origin() {
        let det = detector(1, 0.3, 2.0);
        let d = Domain::square(10.0);
        let snaps = place_sensors(&d, 10, PlacementPolicy::PerSlotResample, 1, 10).unwrap();
        let truth = TrueState {
            origin: Point::new(5.0, 5.0),
            radius: 3,
            unit_length: 1.0,
        };
        let mut r = stream(1, &[]);
        let mut f = PosteriorFilter::new(det.clone());
        for s in snaps.iter().skip(1) {
            let b = f
                .step(&sample_frame(&truth, s, &det.model, &mut r))
                .unwrap();
            let w = b.per_origin_posterior(0).unwrap();
            assert!((w - (1.0 - b.change_posterior())).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_origin_mass_is_reported() {
        let b = BeliefState::from_probs(0, 2, 1, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            b.per_origin_posterior(1),
            Err(Error::ZeroOriginMass { origin: 1 })
        ));
        assert_eq!(b.max_per_origin_posterior(), Some(0.5));
    }

    #[test]
    fn initial_belief_examples() {
        let chain = RadiusChain::growth(0.5, 3);
        let p = PriorParams::new(0.02, 0.5, 0.0).unwrap();
        let b = initial_belief(2, &chain, &p);
        assert_eq!(b.probs(), &[0.49, 0.01, 0.0, 0.0, 0.49, 0.01, 0.0, 0.0]);
        assert!((b.change_posterior() - 0.98).abs() < 1e-15);
    }

    fn attenuating_detector(m: usize) -> DetectorModel {
        let d = Domain::square(10.0);
        DetectorModel::new(
            &d,
            build_origin_grid(&d, m).unwrap(),
            Propagation::Growth { rho1: 0.6 },
            PriorParams::new(0.1, 0.6, 0.2).unwrap(),
            ObservationModel::attenuating(
                1.0,
                6.0,
                PathLoss {
                    theta: 2.0,
                    d0: 1.0,
                    clamp: Clamp::UnitFloor,
                },
            )
            .unwrap(),
            1.0,
        )
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn filter_invariants(seed in 0u64..10_000, m in 1usize..6, stationary in any::<bool>()) {
            let det = attenuating_detector(m);
            let d = Domain::square(10.0);
            let policy = if stationary { PlacementPolicy::UniformRandom } else { PlacementPolicy::PerSlotResample };
            let snaps = place_sensors(&d, 15, policy, seed, 20).unwrap();
            let mut r = stream(seed, &[1]);
            let truth = TrueState { origin: d.sample_uniform(&mut r), radius: 0, unit_length: 1.0 };
            let mut f = PosteriorFilter::new(det.clone());
            for (k, s) in snaps.iter().enumerate().skip(1) {
                let t = TrueState { radius: (k as u32).saturating_sub(4), ..truth };
                let b = f.step(&sample_frame(&t, s, &det.model, &mut r)).unwrap();
                prop_assert!((b.total_mass() - 1.0).abs() <= 1e-9);
                prop_assert!(b.probs().iter().all(|&p| p >= 0.0));
                for mm in 0..m {
                    for rr in (b.n() as u32 + 2)..=det.r_max() {
                        prop_assert_eq!(b.get(mm, rr), 0.0);
                    }
                }
                if let Some(res) = b.decomposition_residual() {
                    prop_assert!(res <= 1e-10);
                }
            }
        }
    }
}
