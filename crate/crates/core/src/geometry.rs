//! Spatial primitives: domains, origin grids, sensor placement and the
//! wavefront exposure predicate.
//!
//! Distances are Euclidean and expressed in the domain's distance unit. The
//! event radius is an integer count of radius units; `unit_length` converts a
//! radius count to distance.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Region monitored by one sensor cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    Rectangle {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    Disk {
        center: Point,
        radius: f64,
    },
}

impl Domain {
    pub fn square(side: f64) -> Self {
        Domain::Rectangle {
            x_min: 0.0,
            x_max: side,
            y_min: 0.0,
            y_max: side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
                if !finite || x_max <= x_min || y_max <= y_min {
                    return Err(Error::InvalidDomain(format!(
                        "rectangle needs finite positive extents, got [{x_min}, {x_max}] x [{y_min}, {y_max}]"
                    )));
                }
            }
            Domain::Disk { center, radius } => {
                if !(radius > 0.0
                    && radius.is_finite()
                    && center.x.is_finite()
                    && center.y.is_finite())
                {
                    return Err(Error::InvalidDomain(format!(
                        "disk radius must be positive and finite, got {radius}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        match *self {
            Domain::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max,
            Domain::Disk { center, radius } => center.distance(p) <= radius,
        }
    }

    /// Largest distance from `p` to any point of the domain.
    pub fn max_distance_from(&self, p: &Point) -> f64 {
        match *self {
            Domain::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                let dx = (p.x - x_min).abs().max((p.x - x_max).abs());
                let dy = (p.y - y_min).abs().max((p.y - y_max).abs());
                dx.hypot(dy)
            }
            Domain::Disk { center, radius } => center.distance(p) + radius,
        }
    }

    pub fn center(&self) -> Point {
        match *self {
            Domain::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => Point::new(0.5 * (x_min + x_max), 0.5 * (y_min + y_max)),
            Domain::Disk { center, .. } => center,
        }
    }

    /// Uniform draw over the domain area.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match *self {
            Domain::Rectangle {
                x_min,
                x_max,
                y_min,
                y_max,
            } => Point::new(
                x_min + (x_max - x_min) * rng.random::<f64>(),
                y_min + (y_max - y_min) * rng.random::<f64>(),
            ),
            Domain::Disk { center, radius } => {
                // Inverse-CDF in the radial coordinate: P(d <= s) = (s/R)^2.
                let s = radius * rng.random::<f64>().sqrt();
                let phi = std::f64::consts::TAU * rng.random::<f64>();
                Point::new(center.x + s * phi.cos(), center.y + s * phi.sin())
            }
        }
    }
}

/// Candidate source locations `o_0..o_{M-1}`; ordered, non-empty, distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct OriginSet(Vec<Point>);

impl OriginSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyOrigins);
        }
        for (i, a) in points.iter().enumerate() {
            if points[..i].iter().any(|b| b == a) {
                return Err(Error::DuplicateOrigin { x: a.x, y: a.y });
            }
        }
        Ok(Self(points))
    }

    pub fn single(p: Point) -> Self {
        Self(vec![p])
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<Point>> for OriginSet {
    type Error = Error;
    fn try_from(v: Vec<Point>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OriginSet> for Vec<Point> {
    fn from(o: OriginSet) -> Self {
        o.0
    }
}

/// Lays `m` points out on the most-square cell-centred grid covering the
/// domain, row-major, with surplus cells dropped from the last row.
///
/// For a disk the grid covers the inscribed square so every point lies
/// strictly inside.
pub fn build_origin_grid(domain: &Domain, m: usize) -> Result<OriginSet> {
    domain.validate()?;
    if m == 0 {
        return Err(invalid("M", "origin grid needs at least one point"));
    }
    let (x0, x1, y0, y1) = match *domain {
        Domain::Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        } => (x_min, x_max, y_min, y_max),
        Domain::Disk { center, radius } => {
            let h = radius / std::f64::consts::SQRT_2;
            (center.x - h, center.x + h, center.y - h, center.y + h)
        }
    };
    let cols = (m as f64).sqrt().ceil() as usize;
    let rows = m.div_ceil(cols);
    let dx = (x1 - x0) / cols as f64;
    let dy = (y1 - y0) / rows as f64;
    let points = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .take(m)
        .map(|(r, c)| Point::new(x0 + (c as f64 + 0.5) * dx, y0 + (r as f64 + 0.5) * dy))
        .collect();
    OriginSet::new(points)
}

/// Grid pitch used by [`build_origin_grid`] (smallest spacing between points).
pub fn grid_pitch(domain: &Domain, m: usize) -> f64 {
    let cols = (m as f64).sqrt().ceil() as usize;
    let rows = m.div_ceil(cols);
    let (w, h) = match *domain {
        Domain::Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        } => (x_max - x_min, y_max - y_min),
        Domain::Disk { radius, .. } => {
            let s = radius * std::f64::consts::SQRT_2;
            (s, s)
        }
    };
    (w / cols as f64).min(h / rows as f64)
}

/// Smallest radius (in radius units) at which every point of the domain is
/// strictly inside the wavefront from every origin.
///
/// Uses `ceil(max distance / unit) + 1` so the strict exposure test holds
/// for sensors sitting exactly at the farthest point.
pub fn max_radius(domain: &Domain, origins: &OriginSet, unit_length: f64) -> Result<u32> {
    if origins.is_empty() {
        return Err(Error::EmptyOrigins);
    }
    if !(unit_length > 0.0 && unit_length.is_finite()) {
        return Err(invalid(
            "unit_length",
            format!("must be positive, got {unit_length}"),
        ));
    }
    let far = origins
        .points()
        .iter()
        .map(|o| domain.max_distance_from(o))
        .fold(0.0_f64, f64::max);
    Ok((far / unit_length).ceil() as u32 + 1)
}

/// Exposure with a radius expressed in distance units: `d < radius * unit`.
#[inline]
pub fn exposed_at(distance: f64, radius: u32, unit_length: f64) -> bool {
    distance < radius as f64 * unit_length
}

/// True iff the sensor lies strictly inside the wavefront of `radius` units
/// around `origin` (unit length 1).
#[inline]
pub fn exposed(sensor: &Point, origin: &Point, radius: u32) -> bool {
    exposed_at(sensor.distance(origin), radius, 1.0)
}

/// Smallest radius at which a sensor at `distance` is exposed.
///
/// Agrees exactly with [`exposed_at`]: `exposed_at(d, r, u)` iff
/// `r >= first_exposure_radius(d, u)`.
pub fn first_exposure_radius(distance: f64, unit_length: f64) -> u32 {
    let guess = (distance / unit_length).floor();
    let mut r = if guess.is_finite() && guess >= 0.0 {
        (guess as u64).min(u32::MAX as u64 - 1) as u32 + 1
    } else {
        1
    };
    while r > 1 && exposed_at(distance, r - 1, unit_length) {
        r -= 1;
    }
    while !exposed_at(distance, r, unit_length) && r < u32::MAX {
        r += 1;
    }
    r
}

/// Sensor locations available at one time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSnapshot {
    pub slot: u64,
    pub locations: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementPolicy {
    /// One uniform draw at slot 0, kept for every slot.
    UniformRandom,
    /// Explicit locations when given, otherwise the slot-0 uniform draw, repeated.
    FixedList {
        #[serde(default)]
        points: Option<Vec<Point>>,
    },
    /// Fresh uniform locations every slot.
    PerSlotResample,
}

/// Deterministic sensor-location stream: snapshot `n` depends only on
/// `(seed, n)`, never on which snapshots were requested before.
#[derive(Debug, Clone)]
pub struct SensorStream {
    domain: Domain,
    count: usize,
    policy: PlacementPolicy,
    seed: u64,
    path: Vec<u64>,
    fixed: Option<Vec<Point>>,
}

impl SensorStream {
    pub fn new(
        domain: Domain,
        count: usize,
        policy: PlacementPolicy,
        seed: u64,
        path: &[u64],
    ) -> Result<Self> {
        domain.validate()?;
        let mut s = Self {
            domain,
            count,
            policy,
            seed,
            path: path.to_vec(),
            fixed: None,
        };
        s.fixed = match &s.policy {
            PlacementPolicy::FixedList { points: Some(p) } => {
                if let Some(bad) = p.iter().find(|q| !domain.contains(q)) {
                    return Err(invalid(
                        "points",
                        format!("sensor ({}, {}) outside domain", bad.x, bad.y),
                    ));
                }
                Some(p.clone())
            }
            PlacementPolicy::FixedList { points: None } | PlacementPolicy::UniformRandom => {
                Some(s.draw(0))
            }
            PlacementPolicy::PerSlotResample => None,
        };
        Ok(s)
    }

    fn draw(&self, slot: u64) -> Vec<Point> {
        let mut path = self.path.clone();
        path.extend([rng::purpose::SENSORS, slot]);
        let mut r = rng::stream(self.seed, &path);
        (0..self.count)
            .map(|_| self.domain.sample_uniform(&mut r))
            .collect()
    }

    pub fn snapshot(&self, slot: u64) -> SensorSnapshot {
        let locations = match &self.fixed {
            Some(p) => p.clone(),
            None => self.draw(slot),
        };
        SensorSnapshot { slot, locations }
    }

    pub fn is_stationary(&self) -> bool {
        self.fixed.is_some()
    }
}

/// Convenience wrapper matching the placement operation: the first `slots`
/// snapshots of a fresh stream.
pub fn place_sensors(
    domain: &Domain,
    count: usize,
    policy: PlacementPolicy,
    seed: u64,
    slots: u64,
) -> Result<Vec<SensorSnapshot>> {
    let stream = SensorStream::new(*domain, count, policy, seed, &[])?;
    Ok((0..slots).map(|n| stream.snapshot(n)).collect())
}
