//! Monte Carlo engine.
//!
//! One trial draws a change slot, an origin, a radius path and one stream of
//! sensor frames. Every procedure filters the same frames (common random
//! numbers), and every threshold of a procedure is read from the same
//! statistic trace by first crossing, so sweeping `alpha` costs nothing.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{
    build_origin_grid, max_radius, Domain, OriginSet, PlacementPolicy, Point, SensorStream,
};
use crate::observation::{sample_frame, ObservationModel, TrueState};
use crate::posterior::PosteriorFilter;
use crate::rng::{purpose, stream};
use crate::state_model::{sample_change_slot, ChangeSlot, PriorParams, RadiusPath};
use crate::stopping::{t_star_statistic, DetectorContext, ParallelRun, RuleConfig, TrialRecord};

/// How the true origin is drawn each trial.
#[derive(Debug, Clone, PartialEq)]
pub enum TrueOrigin {
    /// Continuous uniform over the domain.
    Uniform,
    /// Uniform over the `m`-point origin grid.
    Grid(usize),
    /// Always the domain centre.
    Center,
    Fixed(Point),
}

/// The generative side of a scenario.
#[derive(Debug, Clone)]
pub struct World {
    pub domain: Domain,
    pub sensor_count: usize,
    pub placement: PlacementPolicy,
    pub prior: PriorParams,
    pub model: ObservationModel,
    pub unit_length: f64,
    pub true_origin: TrueOrigin,
}

impl World {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.prior.validate()?;
        self.model.validate()?;
        if !(self.unit_length > 0.0 && self.unit_length.is_finite()) {
            return Err(invalid(
                "unit_length",
                format!("must be positive, got {}", self.unit_length),
            ));
        }
        if let TrueOrigin::Grid(0) = self.true_origin {
            return Err(invalid("true_origin", "grid needs at least one point"));
        }
        if let TrueOrigin::Fixed(p) = self.true_origin {
            if !self.domain.contains(&p) {
                return Err(invalid("true_origin", "fixed origin outside domain"));
            }
        }
        Ok(())
    }

    /// What a correctly specified detector is told.
    pub fn detector_context(&self) -> DetectorContext {
        DetectorContext {
            domain: self.domain,
            prior: self.prior,
            model: self.model,
            unit_length: self.unit_length,
        }
    }

    /// Default slot cap: `10 R / rho1 + 50 / rho`, with `R` the radius
    /// needed to cover the domain from its farthest point.
    pub fn default_cap(&self) -> u64 {
        let c = self.domain.center();
        let reach = 2.0 * self.domain.max_distance_from(&c);
        let r = (reach / self.unit_length).ceil() + 1.0;
        (10.0 * r / self.prior.rho1 + 50.0 / self.prior.rho).ceil() as u64
    }

    fn draw_origin(&self, rng: &mut crate::rng::SimRng) -> Result<Point> {
        use rand::Rng;
        Ok(match &self.true_origin {
            TrueOrigin::Uniform => self.domain.sample_uniform(rng),
            TrueOrigin::Center => self.domain.center(),
            TrueOrigin::Fixed(p) => *p,
            TrueOrigin::Grid(m) => {
                let grid = build_origin_grid(&self.domain, *m)?;
                grid.points()[rng.random_range(0..grid.len())]
            }
        })
    }
}

/// When a trial ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLimit {
    /// Stops at or after this slot do not count; the run ends at `deadline - 1`.
    pub deadline: Option<u64>,
    /// Hard cap on the last simulated slot.
    pub cap: u64,
}

impl RunLimit {
    pub fn last_slot(&self) -> u64 {
        match self.deadline {
            Some(d) => d.saturating_sub(1).min(self.cap),
            None => self.cap,
        }
    }
}

/// Everything one trial produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub change: ChangeSlot,
    pub origin: Point,
    /// Last simulated slot.
    pub end: u64,
    /// Per procedure: statistic at slots `0..=` its last simulated slot.
    pub traces: Vec<Vec<f64>>,
}

fn statistic(rule: &RuleConfig, filter: &PosteriorFilter) -> f64 {
    if rule.rule.uses_change_posterior() {
        filter.belief().change_posterior()
    } else {
        t_star_statistic(filter.belief())
    }
}

/// Simulates one trial. Procedure `i` is advanced until its statistic
/// falls to `stop_below[i]` or the limit is reached.
pub fn simulate_cluster(
    world: &World,
    procedures: &[RuleConfig],
    stop_below: &[f64],
    limit: &RunLimit,
    seed: u64,
    path: &[u64],
) -> Result<ClusterOutcome> {
    let key = |p: u64| {
        let mut v = path.to_vec();
        v.push(p);
        v
    };
    let mut truth_rng = stream(seed, &key(purpose::TRUTH));
    let change = sample_change_slot(&world.prior, &mut truth_rng);
    let origin = world.draw_origin(&mut truth_rng)?;
    let r_max = max_radius(&world.domain, &OriginSet::single(origin), world.unit_length)?;
    let mut radius = RadiusPath::new(change, world.prior.rho1, r_max);
    let sensors = SensorStream::new(
        world.domain,
        world.sensor_count,
        world.placement.clone(),
        seed,
        path,
    )?;
    let mut read_rng = stream(seed, &key(purpose::READINGS));

    let ctx = world.detector_context();
    let mut filters = procedures
        .iter()
        .map(|p| p.build_detector(&ctx, origin).map(PosteriorFilter::new))
        .collect::<Result<Vec<_>>>()?;
    let mut traces: Vec<Vec<f64>> = procedures
        .iter()
        .zip(&filters)
        .map(|(p, f)| vec![statistic(p, f)])
        .collect();
    let mut active: Vec<bool> = traces
        .iter()
        .zip(stop_below)
        .map(|(t, &s)| t[0] > s)
        .collect();

    radius.advance(&mut truth_rng);
    let last = limit.last_slot();
    let mut n = 0;
    while n < last && active.iter().any(|&a| a) {
        n += 1;
        let r = radius.advance(&mut truth_rng);
        let truth = TrueState {
            origin,
            radius: r,
            unit_length: world.unit_length,
        };
        let frame = sample_frame(&truth, &sensors.snapshot(n), &world.model, &mut read_rng);
        for i in 0..filters.len() {
            if !active[i] {
                continue;
            }
            filters[i].step(&frame)?;
            let s = statistic(&procedures[i], &filters[i]);
            traces[i].push(s);
            if s <= stop_below[i] {
                active[i] = false;
            }
        }
    }
    Ok(ClusterOutcome {
        change,
        origin,
        end: n,
        traces,
    })
}

/// Smallest threshold of a list; the trial can stop once it is crossed.
pub fn min_threshold(alphas: &[f64]) -> f64 {
    alphas.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Runs `trials` independent trials on the current rayon pool. Trial `k`
/// uses the path `base ++ [k]`; output order is fixed.
pub fn simulate_trials(
    world: &World,
    procedures: &[RuleConfig],
    stop_below: &[f64],
    limit: &RunLimit,
    trials: u64,
    seed: u64,
    base: &[u64],
) -> Result<Vec<ClusterOutcome>> {
    world.validate()?;
    (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut path = base.to_vec();
            path.push(k);
            simulate_cluster(world, procedures, stop_below, limit, seed, &path)
        })
        .collect()
}

/// Single-cluster records of procedure `index` at threshold `alpha`.
pub fn single_records(
    outcomes: &[ClusterOutcome],
    index: usize,
    alpha: f64,
    deadline: Option<u64>,
) -> Vec<TrialRecord> {
    outcomes
        .iter()
        .enumerate()
        .map(|(k, o)| {
            TrialRecord::from_trace(
                k as u64,
                0,
                o.change,
                o.origin,
                &o.traces[index],
                alpha,
                o.end,
                deadline,
            )
        })
        .collect()
}

/// Groups consecutive outcomes into runs of `clusters` and scores each run.
pub fn parallel_runs(
    outcomes: &[ClusterOutcome],
    clusters: usize,
    index: usize,
    alpha: f64,
    deadline: u64,
) -> Vec<ParallelRun> {
    outcomes
        .chunks(clusters)
        .enumerate()
        .map(|(run, chunk)| {
            let recs = chunk
                .iter()
                .enumerate()
                .map(|(c, o)| {
                    TrialRecord::from_trace(
                        run as u64,
                        c,
                        o.change,
                        o.origin,
                        &o.traces[index],
                        alpha,
                        o.end,
                        Some(deadline),
                    )
                })
                .collect();
            ParallelRun::from_records(recs)
        })
        .collect()
}

/// Records indexed `[procedure][threshold][trial]`.
pub type SingleResults = Vec<Vec<Vec<TrialRecord>>>;

/// Independent single-cluster trials. `alphas[i]` are the thresholds of
/// procedure `i`.
pub fn run_single(
    world: &World,
    procedures: &[RuleConfig],
    alphas: &[Vec<f64>],
    limit: &RunLimit,
    trials: u64,
    seed: u64,
    base: &[u64],
) -> Result<SingleResults> {
    let stop_below: Vec<f64> = alphas.iter().map(|a| min_threshold(a)).collect();
    let outcomes = simulate_trials(world, procedures, &stop_below, limit, trials, seed, base)?;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(i, list)| {
            list.iter()
                .map(|&a| single_records(&outcomes, i, a, limit.deadline))
                .collect()
        })
        .collect())
}

/// Runs indexed `[procedure][threshold][run]`.
pub type ParallelResults = Vec<Vec<Vec<ParallelRun>>>;

/// `runs` independent repetitions of `clusters` independent clusters
/// monitored in parallel up to `deadline`. Cluster `c` of run `j` is trial
/// `j * clusters + c`.
#[allow(clippy::too_many_arguments)]
pub fn run_parallel(
    world: &World,
    procedures: &[RuleConfig],
    alphas: &[Vec<f64>],
    clusters: usize,
    deadline: u64,
    runs: u64,
    seed: u64,
    base: &[u64],
) -> Result<ParallelResults> {
    if clusters == 0 {
        return Err(invalid("clusters", "must be at least 1"));
    }
    let limit = RunLimit {
        deadline: Some(deadline),
        cap: deadline,
    };
    let stop_below: Vec<f64> = alphas.iter().map(|a| min_threshold(a)).collect();
    let outcomes = simulate_trials(
        world,
        procedures,
        &stop_below,
        &limit,
        runs * clusters as u64,
        seed,
        base,
    )?;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(i, list)| {
            list.iter()
                .map(|&a| parallel_runs(&outcomes, clusters, i, a, deadline))
                .collect()
        })
        .collect())
}
