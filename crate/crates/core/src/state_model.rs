//! Prior on the change slot and the Markov chain on the event radius.
//!
//! The hidden state is `(origin m, radius r)` with `r = 0` meaning no event
//! yet. The change slot is geometric with parameter `rho`, optionally mixed
//! with a point mass `p_inf` on "no event ever". Once the event starts the
//! radius grows by one unit per slot with probability `rho1`, absorbing at
//! the covering radius.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    pub rho: f64,
    #[serde(default = "one")]
    pub rho1: f64,
    #[serde(default)]
    pub p_inf: f64,
}

fn one() -> f64 {
    1.0
}

impl PriorParams {
    pub fn new(rho: f64, rho1: f64, p_inf: f64) -> Result<Self> {
        let p = Self { rho, rho1, p_inf };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid(
                "rho",
                format!("must lie in (0,1), got {}", self.rho),
            ));
        }
        if !(self.rho1 > 0.0 && self.rho1 <= 1.0) {
            return Err(invalid(
                "rho1",
                format!("must lie in (0,1], got {}", self.rho1),
            ));
        }
        if !(self.p_inf >= 0.0 && self.p_inf < 1.0) {
            return Err(invalid(
                "p_inf",
                format!("must lie in [0,1), got {}", self.p_inf),
            ));
        }
        Ok(())
    }
}

/// `P(t = k) = rho (1 - rho)^k`.
pub fn prior_pmf(rho: f64, k: u64) -> f64 {
    rho * (1.0 - rho).powf(k as f64)
}

/// Probability that the event starts at slot `n >= 1` given it has not
/// started by `n - 1`, i.e. `P(t = n | t >= n)` for `t` geometric on
/// `{0, 1, ...}` with extra mass `p_inf` at infinity. Reduces to `rho` when
/// `p_inf = 0`.
pub fn onset_hazard(rho: f64, p_inf: f64, n: u64) -> f64 {
    if p_inf == 0.0 {
        return rho;
    }
    let survive = (1.0 - rho).powf(n as f64);
    let live = (1.0 - p_inf) * survive;
    rho * live / (p_inf + live)
}

/// One-step radius transition: stay at `from` or advance to `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusStep {
    pub from: u32,
    pub to: u32,
    pub advance: f64,
}

impl RadiusStep {
    pub fn stay(&self) -> f64 {
        1.0 - self.advance
    }

    /// Transition as `(radius, probability)` pairs, merged when `to == from`.
    pub fn support(&self) -> Vec<(u32, f64)> {
        if self.to == self.from {
            vec![(self.from, 1.0)]
        } else {
            vec![(self.to, self.advance), (self.from, self.stay())]
        }
    }
}

/// Radius distribution at slot `n` given radius `r_prev` at slot `n - 1`
/// for the unit-increment growth chain.
pub fn radius_transition(
    r_prev: u32,
    n: u64,
    params: &PriorParams,
    r_max: u32,
) -> Result<RadiusStep> {
    RadiusChain::growth(params.rho1, r_max).step(r_prev, n, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    /// Radius 1 at onset, then +1 per slot with probability `rho1`.
    Growth { rho1: f64 },
    /// Jumps straight from 0 to the covering radius at onset.
    Instant,
}

/// The radius Markov chain on `0..=r_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusChain {
    pub propagation: Propagation,
    pub r_max: u32,
}

impl RadiusChain {
    pub fn growth(rho1: f64, r_max: u32) -> Self {
        Self {
            propagation: Propagation::Growth { rho1 },
            r_max,
        }
    }

    pub fn instant(r_max: u32) -> Self {
        Self {
            propagation: Propagation::Instant,
            r_max,
        }
    }

    /// Radius entered at the change slot.
    pub fn onset_radius(&self) -> u32 {
        match self.propagation {
            Propagation::Growth { .. } => 1.min(self.r_max),
            Propagation::Instant => self.r_max,
        }
    }

    pub fn states(&self) -> usize {
        self.r_max as usize + 1
    }

    pub fn step(&self, r_prev: u32, n: u64, prior: &PriorParams) -> Result<RadiusStep> {
        if r_prev > self.r_max {
            return Err(Error::RadiusOutOfRange {
                radius: r_prev,
                r_max: self.r_max,
            });
        }
        Ok(self.step_unchecked(r_prev, n, prior))
    }

    #[inline]
    pub(crate) fn step_unchecked(&self, r_prev: u32, n: u64, prior: &PriorParams) -> RadiusStep {
        if r_prev == 0 {
            return RadiusStep {
                from: 0,
                to: self.onset_radius(),
                advance: onset_hazard(prior.rho, prior.p_inf, n),
            };
        }
        match self.propagation {
            Propagation::Growth { rho1 } if r_prev < self.r_max => RadiusStep {
                from: r_prev,
                to: r_prev + 1,
                advance: rho1,
            },
            _ => RadiusStep {
                from: r_prev,
                to: r_prev,
                advance: 0.0,
            },
        }
    }

    /// Pre-observation radius distribution at slot 0 (length `r_max + 1`).
    pub fn initial_radius_pmf(&self, prior: &PriorParams) -> Vec<f64> {
        let mut v = vec![0.0; self.states()];
        let started = (1.0 - prior.p_inf) * prior.rho;
        v[0] = prior.p_inf + (1.0 - prior.p_inf) * (1.0 - prior.rho);
        v[self.onset_radius() as usize] += started;
        v
    }
}

/// Change slot; `None` is the "never" outcome.
pub type ChangeSlot = Option<u64>;

pub fn sample_change_slot<R: Rng + ?Sized>(prior: &PriorParams, rng: &mut R) -> ChangeSlot {
    if prior.p_inf > 0.0 && rng.random::<f64>() < prior.p_inf {
        return None;
    }
    let geo = Geometric::new(prior.rho).expect("rho validated in (0,1)");
    Some(geo.sample(rng))
}

/// Generates the true radius path slot by slot.
#[derive(Debug, Clone)]
pub struct RadiusPath {
    change: ChangeSlot,
    rho1: f64,
    r_max: u32,
    next_slot: u64,
    current: u32,
}

impl RadiusPath {
    pub fn new(change: ChangeSlot, rho1: f64, r_max: u32) -> Self {
        Self {
            change,
            rho1,
            r_max,
            next_slot: 0,
            current: 0,
        }
    }

    /// Radius at the next slot (first call returns `R_0`).
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u32 {
        let n = self.next_slot;
        self.next_slot += 1;
        self.current = match self.change {
            Some(t) if n == t => 1.min(self.r_max),
            Some(t) if n > t => {
                if self.current < self.r_max
                    && (self.rho1 >= 1.0 || rng.random::<f64>() < self.rho1)
                {
                    self.current + 1
                } else {
                    self.current
                }
            }
            _ => 0,
        };
        self.current
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub change: ChangeSlot,
    pub origin: usize,
    /// `R_0 ..= R_horizon`.
    pub radii: Vec<u32>,
}

/// Samples `(t, m, R_0..R_horizon)` from the generative model with the
/// origin uniform over `m_count` candidates.
pub fn sample_trajectory<R: Rng + ?Sized>(
    params: &PriorParams,
    m_count: usize,
    r_max: u32,
    horizon: u64,
    rng: &mut R,
) -> Trajectory {
    let change = sample_change_slot(params, rng);
    let origin = rng.random_range(0..m_count.max(1));
    let mut path = RadiusPath::new(change, params.rho1, r_max);
    let radii = (0..=horizon).map(|_| path.advance(rng)).collect();
    Trajectory {
        change,
        origin,
        radii,
    }
}
