//! Stopping rules and their bookkeeping.
//!
//! Every procedure here is a posterior filter plus a threshold on a scalar
//! statistic: the RP family stops when `π_{n,0} <= α`; the per-origin rule
//! `T*` stops when some `W_n^{(m)} >= 1 - α/M`, which is recorded as the
//! statistic `M·(1 - max_m W_n^{(m)}) <= α` so both share one comparison.
//! Oracle, Instant and the mismatched rule differ only in the detector model
//! they filter with.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{build_origin_grid, Domain, OriginSet, Point};
use crate::observation::ObservationModel;
use crate::posterior::{BeliefState, DetectorModel};
use crate::state_model::{ChangeSlot, PriorParams, Propagation};
use crate::stats::{wilson_interval, MeanEstimate, Z95_TWO_SIDED};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Stop,
    Continue,
}

/// `T_RP`: stop once the no-change posterior is at or below `alpha`.
pub fn rp_decide(belief: &BeliefState, alpha: f64) -> Decision {
    if belief.change_posterior() <= alpha {
        Decision::Stop
    } else {
        Decision::Continue
    }
}

/// Statistic compared against `alpha` by `T*`: `M (1 - max_m W)`.
/// Origins with no posterior mass are skipped.
pub fn t_star_statistic(belief: &BeliefState) -> f64 {
    match belief.max_per_origin_posterior() {
        Some(w) => belief.origin_count() as f64 * (1.0 - w),
        None => f64::INFINITY,
    }
}

/// `T*`: stop once some per-origin posterior reaches `1 - alpha / M`.
pub fn t_star_decide(belief: &BeliefState, alpha: f64) -> Decision {
    let nu = 1.0 - alpha / belief.origin_count() as f64;
    match belief.max_per_origin_posterior() {
        Some(w) if w >= nu => Decision::Stop,
        _ => Decision::Continue,
    }
}

/// First slot whose statistic is at or below `threshold` (traces start at slot 0).
pub fn first_crossing(trace: &[f64], threshold: f64) -> Option<u64> {
    trace.iter().position(|&s| s <= threshold).map(|i| i as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Rp,
    Oracle,
    Instant,
    InstantOracle,
    RpMismatched,
    TStar,
}

impl RuleKind {
    /// Whether the rule thresholds `π_{n,0}` (as opposed to `T*`).
    pub fn uses_change_posterior(&self) -> bool {
        !matches!(self, RuleKind::TStar)
    }

    /// Whether the detector's origin set is a grid of `M_detector` points.
    pub fn uses_grid(&self) -> bool {
        matches!(
            self,
            RuleKind::Rp | RuleKind::RpMismatched | RuleKind::TStar
        )
    }
}

/// A configured detection procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    pub rule: RuleKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(rename = "M_detector", default)]
    pub m_detector: Option<usize>,
    #[serde(default = "default_increment")]
    pub mismatch_increment: u32,
    /// Slot count; absent means no deadline.
    #[serde(default)]
    pub deadline: Option<u64>,
    /// Alternative-variance multiplier applied to the detector's belief about `f_1`.
    #[serde(default)]
    pub alt_variance_scale: Option<f64>,
}

fn default_alpha() -> f64 {
    0.01
}

fn default_increment() -> u32 {
    1
}

impl RuleConfig {
    pub fn new(rule: RuleKind) -> Self {
        Self {
            rule,
            name: None,
            alpha: default_alpha(),
            m_detector: None,
            mismatch_increment: if rule == RuleKind::RpMismatched { 5 } else { 1 },
            deadline: None,
            alt_variance_scale: None,
        }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m_detector = Some(m);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(
                "alpha",
                format!("must lie in (0,1), got {}", self.alpha),
            ));
        }
        if self.mismatch_increment == 0 {
            return Err(invalid("mismatch_increment", "must be at least 1"));
        }
        if self.rule.uses_grid() && self.m_detector.is_none_or(|m| m == 0) {
            return Err(invalid(
                "M_detector",
                format!("rule {:?} needs M_detector >= 1", self.rule),
            ));
        }
        if let Some(s) = self.alt_variance_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(
                    "alt_variance_scale",
                    format!("must be positive, got {s}"),
                ));
            }
        }
        Ok(())
    }

    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let m = self.m_detector.unwrap_or(0);
        match self.rule {
            RuleKind::Rp => format!("rp-m{m}"),
            RuleKind::RpMismatched => format!("rp-mismatched-m{m}"),
            RuleKind::TStar => format!("t-star-m{m}"),
            RuleKind::Oracle => "oracle".into(),
            RuleKind::InstantOracle => "instant-oracle".into(),
            RuleKind::Instant => match self.m_detector {
                Some(m) if m > 1 => format!("instant-m{m}"),
                _ => "instant".into(),
            },
        }
    }
}

/// What detectors are told about the world they monitor.
#[derive(Debug, Clone)]
pub struct DetectorContext {
    pub domain: Domain,
    pub prior: PriorParams,
    pub model: ObservationModel,
    pub unit_length: f64,
}

/// RP detector over an explicit origin set.
pub fn make_rp(ctx: &DetectorContext, origins: OriginSet, increment: u32) -> Result<DetectorModel> {
    DetectorModel::new(
        &ctx.domain,
        origins,
        Propagation::Growth {
            rho1: ctx.prior.rho1,
        },
        ctx.prior,
        ctx.model,
        ctx.unit_length * increment as f64,
    )
}

/// RP restricted to the true origin.
pub fn make_oracle(ctx: &DetectorContext, true_origin: Point) -> Result<DetectorModel> {
    make_rp(ctx, OriginSet::single(true_origin), 1)
}

/// Full coverage at onset. With `origins = None` the detector is
/// origin-free: a single reference origin at the domain centre, which is
/// exact whenever the alternative does not depend on distance.
pub fn make_instant(ctx: &DetectorContext, origins: Option<OriginSet>) -> Result<DetectorModel> {
    let origins = origins.unwrap_or_else(|| OriginSet::single(ctx.domain.center()));
    DetectorModel::new(
        &ctx.domain,
        origins,
        Propagation::Instant,
        ctx.prior,
        ctx.model,
        ctx.unit_length,
    )
}

impl RuleConfig {
    /// Builds the detector for one trial; `true_origin` is only read by the
    /// oracle variants.
    pub fn build_detector(
        &self,
        ctx: &DetectorContext,
        true_origin: Point,
    ) -> Result<DetectorModel> {
        let mut ctx = ctx.clone();
        if let Some(s) = self.alt_variance_scale {
            let n = ctx.model.noise;
            // Scale the alternative variance at the reference distance.
            let alt = (n.sigma2 + n.gamma2) * s;
            ctx.model.noise.gamma2 = (alt - n.sigma2).max(0.0);
        }
        let grid = || build_origin_grid(&ctx.domain, self.m_detector.unwrap_or(1));
        match self.rule {
            RuleKind::Rp | RuleKind::TStar => make_rp(&ctx, grid()?, 1),
            RuleKind::RpMismatched => make_rp(&ctx, grid()?, self.mismatch_increment),
            RuleKind::Oracle => make_oracle(&ctx, true_origin),
            RuleKind::InstantOracle => make_instant(&ctx, Some(OriginSet::single(true_origin))),
            RuleKind::Instant => match self.m_detector {
                Some(m) if m > 1 => make_instant(&ctx, Some(grid()?)),
                _ => make_instant(&ctx, None),
            },
        }
    }
}

/// Outcome of one procedure at one threshold on one cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub cluster: usize,
    pub change: ChangeSlot,
    pub origin: Point,
    pub stop: Option<u64>,
    pub delay: f64,
    pub false_alarm: bool,
    /// The run ended (slot cap) before the statistic crossed.
    pub capped: bool,
}

impl TrialRecord {
    /// Builds a record from a statistic trace. `end` is the last simulated
    /// slot; `deadline` turns crossings at or after it into "no event".
    #[allow(clippy::too_many_arguments)]
    pub fn from_trace(
        trial: u64,
        cluster: usize,
        change: ChangeSlot,
        origin: Point,
        trace: &[f64],
        threshold: f64,
        end: u64,
        deadline: Option<u64>,
    ) -> Self {
        let crossing = first_crossing(trace, threshold);
        let stop = match (crossing, deadline) {
            (Some(s), Some(d)) if s >= d => None,
            (s, _) => s,
        };
        let capped = stop.is_none() && deadline.is_none();
        let horizon = stop.unwrap_or(match deadline {
            Some(d) => d.min(end + 1),
            None => end,
        });
        let delay = match change {
            Some(t) => horizon.saturating_sub(t) as f64,
            None => 0.0,
        };
        let false_alarm = match (stop, change) {
            (Some(s), Some(t)) => s < t,
            (Some(_), None) => true,
            (None, _) => false,
        };
        Self {
            trial,
            cluster,
            change,
            origin,
            stop,
            delay,
            false_alarm,
            capped,
        }
    }
}

/// Single-cluster aggregate over independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleSummary {
    pub trials: u64,
    pub false_alarms: u64,
    pub pfa: f64,
    pub pfa_ci: (f64, f64),
    pub add: MeanEstimate,
    pub mean_stop: f64,
    pub capped: u64,
}

pub fn summarize_single(records: &[TrialRecord]) -> SingleSummary {
    let trials = records.len() as u64;
    let false_alarms = records.iter().filter(|r| r.false_alarm).count() as u64;
    let delays: Vec<f64> = records.iter().map(|r| r.delay).collect();
    let stops: Vec<f64> = records
        .iter()
        .filter_map(|r| r.stop.map(|s| s as f64))
        .collect();
    SingleSummary {
        trials,
        false_alarms,
        pfa: if trials > 0 {
            false_alarms as f64 / trials as f64
        } else {
            f64::NAN
        },
        pfa_ci: wilson_interval(false_alarms, trials, Z95_TWO_SIDED),
        add: MeanEstimate::from_samples(&delays),
        mean_stop: if stops.is_empty() {
            f64::NAN
        } else {
            stops.iter().sum::<f64>() / stops.len() as f64
        },
        capped: records.iter().filter(|r| r.capped).count() as u64,
    }
}

/// One Monte Carlo run of `K` clusters under a deadline.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelRun {
    pub records: Vec<TrialRecord>,
    /// False discoveries: stopped before the change and before the deadline.
    pub false_discoveries: usize,
    /// Discoveries before the deadline.
    pub discoveries: usize,
    /// `V / max(R, 1)`.
    pub fdp: f64,
    /// Mean delay over clusters with a finite change; 0 when there are none.
    pub add: f64,
}

impl ParallelRun {
    pub fn from_records(records: Vec<TrialRecord>) -> Self {
        let false_discoveries = records.iter().filter(|r| r.false_alarm).count();
        let discoveries = records.iter().filter(|r| r.stop.is_some()).count();
        let finite: Vec<f64> = records
            .iter()
            .filter(|r| r.change.is_some())
            .map(|r| r.delay)
            .collect();
        let add = if finite.is_empty() {
            0.0
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        Self {
            records,
            false_discoveries,
            discoveries,
            fdp: false_discoveries as f64 / discoveries.max(1) as f64,
            add,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelSummary {
    pub runs: usize,
    pub fdr: MeanEstimate,
    pub add: MeanEstimate,
    pub pfa: f64,
    pub pfa_ci: (f64, f64),
    pub mean_stop: f64,
}

pub fn summarize_parallel(runs: &[ParallelRun]) -> ParallelSummary {
    let fdp: Vec<f64> = runs.iter().map(|r| r.fdp).collect();
    let add: Vec<f64> = runs.iter().map(|r| r.add).collect();
    let all: Vec<&TrialRecord> = runs.iter().flat_map(|r| r.records.iter()).collect();
    let fa = all.iter().filter(|r| r.false_alarm).count() as u64;
    let n = all.len() as u64;
    let stops: Vec<f64> = all
        .iter()
        .filter_map(|r| r.stop.map(|s| s as f64))
        .collect();
    ParallelSummary {
        runs: runs.len(),
        fdr: MeanEstimate::from_samples(&fdp),
        add: MeanEstimate::from_samples(&add),
        pfa: if n > 0 {
            fa as f64 / n as f64
        } else {
            f64::NAN
        },
        pfa_ci: wilson_interval(fa, n, Z95_TWO_SIDED),
        mean_stop: if stops.is_empty() {
            f64::NAN
        } else {
            stops.iter().sum::<f64>() / stops.len() as f64
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::initial_belief;
    use crate::state_model::RadiusChain;

    #[test]
    fn prior_alone_can_stop() {
        let p = PriorParams::new(0.5, 1.0, 0.0).unwrap();
        let b = initial_belief(3, &RadiusChain::growth(1.0, 4), &p);
        assert_eq!(rp_decide(&b, 0.6), Decision::Stop);
        assert_eq!(rp_decide(&b, 0.4), Decision::Continue);
    }

    #[test]
    fn first_crossing_semantics() {
        let mut trace = vec![0.9; 17];
        trace.push(0.05);
        trace.push(0.5);
        trace.push(0.01);
        assert_eq!(first_crossing(&trace, 0.1), Some(17));
        assert_eq!(first_crossing(&trace, 0.02), Some(19));
        assert_eq!(first_crossing(&trace, 0.001), None);
        assert_eq!(first_crossing(&trace, 0.05), Some(17));
    }

    #[test]
    fn t_star_single_origin_equals_rp() {
        for pi0 in [0.99, 0.51, 0.2, 0.049, 0.0099] {
            let b = BeliefState::from_probs(3, 1, 2, vec![pi0, 1.0 - pi0, 0.0]).unwrap();
            for alpha in [0.01, 0.05, 0.1, 0.5] {
                assert_eq!(
                    t_star_decide(&b, alpha),
                    rp_decide(&b, alpha),
                    "pi0={pi0} alpha={alpha}"
                );
                let by_stat = if t_star_statistic(&b) <= alpha {
                    Decision::Stop
                } else {
                    Decision::Continue
                };
                assert_eq!(by_stat, t_star_decide(&b, alpha));
            }
        }
    }

    #[test]
    fn t_star_fires_on_any_origin() {
        // Origin 1 is certain the event started; origin 0 is not.
        let b = BeliefState::from_probs(3, 2, 1, vec![0.5, 0.0, 0.0001, 0.4999]).unwrap();
        assert!(b.per_origin_posterior(1).unwrap() > 0.999);
        assert_eq!(t_star_decide(&b, 0.01), Decision::Stop);
    }

    #[test]
    fn record_semantics() {
        let o = Point::new(0.0, 0.0);
        let trace = [0.9, 0.9, 0.9, 0.001];
        let r = TrialRecord::from_trace(0, 0, Some(5), o, &trace, 0.01, 3, None);
        assert_eq!((r.stop, r.false_alarm, r.delay), (Some(3), true, 0.0));
        let r = TrialRecord::from_trace(0, 0, Some(1), o, &trace, 0.01, 3, None);
        assert_eq!((r.stop, r.false_alarm, r.delay), (Some(3), false, 2.0));
        let r = TrialRecord::from_trace(0, 0, None, o, &trace, 0.01, 3, None);
        assert!(r.false_alarm);
        // Crossing at the deadline is not a discovery.
        let r = TrialRecord::from_trace(0, 0, Some(1), o, &trace, 0.01, 3, Some(3));
        assert_eq!(
            (r.stop, r.false_alarm, r.capped, r.delay),
            (None, false, false, 2.0)
        );
        let r = TrialRecord::from_trace(0, 0, Some(1), o, &trace[..3], 0.01, 2, None);
        assert!(r.capped && r.stop.is_none());
    }

    #[test]
    fn fdp_guard_when_nothing_discovered() {
        let o = Point::new(0.0, 0.0);
        let recs: Vec<_> = (0..20)
            .map(|k| TrialRecord::from_trace(0, k, None, o, &[0.9, 0.9], 0.01, 1, Some(2)))
            .collect();
        let run = ParallelRun::from_records(recs);
        assert_eq!(
            (run.discoveries, run.false_discoveries, run.fdp, run.add),
            (0, 0, 0.0, 0.0)
        );
    }

    #[test]
    fn parallel_add_matches_per_cluster_mean_without_p_inf() {
        let o = Point::new(0.0, 0.0);
        let recs: Vec<_> = (0..4)
            .map(|k| {
                let trace: Vec<f64> = (0..10)
                    .map(|n| if n >= 3 + k { 0.0 } else { 1.0 })
                    .collect();
                TrialRecord::from_trace(0, k, Some(2), o, &trace, 0.01, 9, Some(50))
            })
            .collect();
        let expect = recs.iter().map(|r| r.delay).sum::<f64>() / 4.0;
        let run = ParallelRun::from_records(recs);
        assert_eq!(run.add, expect);
        assert_eq!(run.add, (1.0 + 2.0 + 3.0 + 4.0) / 4.0);
    }

    #[test]
    fn rule_validation() {
        assert!(RuleConfig::new(RuleKind::Rp).validate().is_err());
        assert!(RuleConfig::new(RuleKind::Rp).with_m(10).validate().is_ok());
        assert!(RuleConfig::new(RuleKind::Oracle)
            .with_alpha(1.0)
            .validate()
            .is_err());
        assert_eq!(
            RuleConfig::new(RuleKind::RpMismatched).mismatch_increment,
            5
        );
        assert_eq!(
            RuleConfig::new(RuleKind::Rp).with_m(50).display_name(),
            "rp-m50"
        );
    }
}
