//! Null and alternative sampling densities.
//!
//! Readings are scalar and zero-mean Gaussian. Unexposed sensors see noise
//! `N(0, sigma2)`; exposed sensors see `N(0, sigma2 + gamma2 / d~^theta)`
//! where `d~` is the clamped source distance. With no path-loss block the
//! alternative variance is `sigma2 + gamma2` everywhere.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{exposed_at, Point, SensorSnapshot};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair {
    pub sigma2: f64,
    pub gamma2: f64,
}

/// How the source distance is clamped before applying the path-loss power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clamp {
    /// `max(d, 1)`.
    UnitFloor,
    /// `max(d, d0) / d0`: received power equals `gamma2` up to the reference distance.
    ReferenceScaled,
    /// `max(d0, d / d0)`, taken literally.
    ReferenceLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub theta: f64,
    pub d0: f64,
    pub clamp: Clamp,
}

impl PathLoss {
    #[inline]
    pub fn clamped_distance(&self, d: f64) -> f64 {
        match self.clamp {
            Clamp::UnitFloor => d.max(1.0),
            Clamp::ReferenceScaled => d.max(self.d0) / self.d0,
            Clamp::ReferenceLiteral => self.d0.max(d / self.d0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationModel {
    pub noise: GaussianPair,
    /// `None` is the flat model: distance has no effect.
    pub path_loss: Option<PathLoss>,
}

impl ObservationModel {
    pub fn flat(sigma2: f64, gamma2: f64) -> Result<Self> {
        let m = Self {
            noise: GaussianPair { sigma2, gamma2 },
            path_loss: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn attenuating(sigma2: f64, gamma2: f64, path_loss: PathLoss) -> Result<Self> {
        let m = Self {
            noise: GaussianPair { sigma2, gamma2 },
            path_loss: Some(path_loss),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let GaussianPair { sigma2, gamma2 } = self.noise;
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
        }
        if !(gamma2 >= 0.0 && gamma2.is_finite()) {
            return Err(invalid(
                "gamma2",
                format!("must be non-negative, got {gamma2}"),
            ));
        }
        if let Some(pl) = self.path_loss {
            if !(pl.theta >= 0.0 && pl.theta.is_finite()) {
                return Err(invalid(
                    "theta",
                    format!("must be non-negative, got {}", pl.theta),
                ));
            }
            if !(pl.d0 > 0.0 && pl.d0.is_finite()) {
                return Err(invalid("d0", format!("must be positive, got {}", pl.d0)));
            }
        }
        Ok(())
    }

    pub fn is_distance_free(&self) -> bool {
        self.path_loss.is_none()
    }

    pub fn null_variance(&self) -> f64 {
        self.noise.sigma2
    }

    /// Linear SNR `gamma2 / sigma2`.
    pub fn snr(&self) -> f64 {
        self.noise.gamma2 / self.noise.sigma2
    }

    /// Variance of an exposed reading at source distance `d`.
    #[inline]
    pub fn alt_variance(&self, d: f64) -> f64 {
        let GaussianPair { sigma2, gamma2 } = self.noise;
        match self.path_loss {
            None => sigma2 + gamma2,
            Some(pl) => sigma2 + gamma2 / pl.clamped_distance(d).powf(pl.theta),
        }
    }

    /// `log f1(x) - log f0(x)` for an exposed reading at distance `d`.
    #[inline]
    pub fn log_likelihood_ratio(&self, x: f64, d: f64) -> f64 {
        llr_variances(x, self.null_variance(), self.alt_variance(d))
    }
}

/// Log density of `N(0, variance)` at `x`.
#[inline]
pub fn log_normal_density(x: f64, variance: f64) -> f64 {
    -0.5 * (LN_2PI + variance.ln() + x * x / variance)
}

pub fn loglik_null(x: f64, sigma2: f64) -> f64 {
    log_normal_density(x, sigma2)
}

pub fn loglik_alt(x: f64, variance: f64) -> f64 {
    log_normal_density(x, variance)
}

#[inline]
pub(crate) fn llr_variances(x: f64, v0: f64, v1: f64) -> f64 {
    0.5 * ((v0 / v1).ln() + x * x * (1.0 / v0 - 1.0 / v1))
}

/// Readings received at one slot together with where they were taken.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFrame {
    pub slot: u64,
    pub sensors: Vec<Point>,
    pub readings: Vec<f64>,
}

impl ObservationFrame {
    pub fn new(slot: u64, sensors: Vec<Point>, readings: Vec<f64>) -> Result<Self> {
        if sensors.len() != readings.len() {
            return Err(Error::FrameMismatch {
                slot,
                sensors: sensors.len(),
                readings: readings.len(),
            });
        }
        Ok(Self {
            slot,
            sensors,
            readings,
        })
    }

    pub fn empty(slot: u64) -> Self {
        Self {
            slot,
            sensors: Vec::new(),
            readings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }
}

/// Where the true event stands at the slot being sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueState {
    pub origin: Point,
    pub radius: u32,
    pub unit_length: f64,
}

/// Draws one frame: exposed sensors from the alternative at their source
/// distance, the rest from the null, all independent.
pub fn sample_frame<R: Rng + ?Sized>(
    truth: &TrueState,
    sensors: &SensorSnapshot,
    model: &ObservationModel,
    rng: &mut R,
) -> ObservationFrame {
    let readings = sensors
        .locations
        .iter()
        .map(|a| {
            let d = a.distance(&truth.origin);
            let var = if exposed_at(d, truth.radius, truth.unit_length) {
                model.alt_variance(d)
            } else {
                model.null_variance()
            };
            let z: f64 = StandardNormal.sample(rng);
            z * var.sqrt()
        })
        .collect();
    ObservationFrame {
        slot: sensors.slot,
        sensors: sensors.locations.clone(),
        readings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{place_sensors, Domain, PlacementPolicy};
    use crate::quadrature::integrate;
    use crate::rng::stream;

    #[test]
    fn alt_variance_examples() {
        let flat = ObservationModel::flat(1.0, 1.0).unwrap();
        assert_eq!(flat.alt_variance(0.1), 2.0);
        assert_eq!(flat.alt_variance(1e6), 2.0);

        let unit = PathLoss {
            theta: 2.0,
            d0: 1.0,
            clamp: Clamp::UnitFloor,
        };
        let m = ObservationModel::attenuating(1.0, 2.0, unit).unwrap();
        assert_eq!(m.alt_variance(0.5), 3.0);
        assert_eq!(m.alt_variance(2.0), 1.5);

        let refd = PathLoss {
            theta: 2.0,
            d0: 500.0,
            clamp: Clamp::ReferenceScaled,
        };
        let m = ObservationModel::attenuating(1.0, 2.0, refd).unwrap();
        assert_eq!(m.alt_variance(1000.0), 1.5);
        assert_eq!(m.alt_variance(100.0), 3.0);

        let lit = PathLoss {
            clamp: Clamp::ReferenceLiteral,
            ..refd
        };
        let m = ObservationModel::attenuating(1.0, 2.0, lit).unwrap();
        assert!((m.alt_variance(1000.0) - (1.0 + 2.0 / 250_000.0)).abs() < 1e-15);
    }

    #[test]
    fn model_validation() {
        assert!(ObservationModel::flat(0.0, 1.0).is_err());
        assert!(ObservationModel::flat(1.0, -1.0).is_err());
        let bad = PathLoss {
            theta: 2.0,
            d0: 0.0,
            clamp: Clamp::UnitFloor,
        };
        assert!(ObservationModel::attenuating(1.0, 1.0, bad).is_err());
    }

    #[test]
    fn log_density_values() {
        assert!((loglik_null(0.0, 1.0) + 0.918_938_533_204_672_7).abs() < 1e-15);
        assert_eq!(llr_variances(1.7, 2.0, 2.0), 0.0);
        let x = 0.8;
        let direct = loglik_alt(x, 3.0) - loglik_null(x, 1.2);
        assert!((llr_variances(x, 1.2, 3.0) - direct).abs() < 1e-14);
    }

    #[test]
    fn log_density_integrates_to_one() {
        for v in [0.3f64, 1.0, 4.0] {
            let s = v.sqrt();
            let total = integrate(
                |x| log_normal_density(x, v).exp(),
                -40.0 * s,
                40.0 * s,
                1e-12,
            )
            .unwrap();
            assert!((total - 1.0).abs() < 1e-8, "v={v} total={total}");
        }
    }

    #[test]
    fn frame_length_mismatch_rejected() {
        let e = ObservationFrame::new(3, vec![Point::new(0.0, 0.0)], vec![]).unwrap_err();
        assert!(matches!(e, Error::FrameMismatch { slot: 3, .. }));
    }

    #[test]
    fn zero_signal_is_null_everywhere() {
        let unit = PathLoss {
            theta: 3.0,
            d0: 1.0,
            clamp: Clamp::UnitFloor,
        };
        let m = ObservationModel::attenuating(1.3, 0.0, unit).unwrap();
        for d in [0.0, 0.5, 3.0, 100.0] {
            assert_eq!(m.alt_variance(d), m.null_variance());
        }
    }

    #[test]
    fn null_sample_variance() {
        let d = Domain::square(10.0);
        let m = ObservationModel::flat(2.0, 5.0).unwrap();
        let snaps = place_sensors(&d, 1000, PlacementPolicy::PerSlotResample, 4, 100).unwrap();
        let truth = TrueState {
            origin: Point::new(5.0, 5.0),
            radius: 0,
            unit_length: 1.0,
        };
        let mut r = stream(5, &[]);
        let xs: Vec<f64> = snaps
            .iter()
            .flat_map(|s| sample_frame(&truth, s, &m, &mut r).readings)
            .collect();
        let n = xs.len() as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n;
        // Var of x^2 for N(0, s2) is 2 s2^2.
        let se = (2.0 * 4.0 / n).sqrt();
        assert!((var - 2.0).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn full_radius_exposes_everyone() {
        let d = Domain::square(10.0);
        let m = ObservationModel::flat(1.0, 8.0).unwrap();
        let snaps = place_sensors(&d, 2000, PlacementPolicy::UniformRandom, 1, 1).unwrap();
        let truth = TrueState {
            origin: Point::new(0.0, 0.0),
            radius: 16,
            unit_length: 1.0,
        };
        let mut r = stream(6, &[]);
        let f = sample_frame(&truth, &snaps[0], &m, &mut r);
        let var = f.readings.iter().map(|x| x * x).sum::<f64>() / 2000.0;
        let se = (2.0f64 * 81.0 / 2000.0).sqrt();
        assert!((var - 9.0).abs() < 3.0 * se);
    }
}
