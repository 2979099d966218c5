//! Scenario configuration files (TOML).

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::geometry::{Domain, PlacementPolicy};
use crate::observation::{Clamp, ObservationModel, PathLoss};
use crate::simulation::{TrueOrigin, World};
use crate::state_model::PriorParams;
use crate::stopping::{RuleConfig, RuleKind};

/// Propagation speed used by the time mapping when none is given (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    #[serde(default = "default_policy")]
    pub policy: PlacementPolicy,
    pub count: usize,
}

fn default_policy() -> PlacementPolicy {
    PlacementPolicy::UniformRandom
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Flat,
    Attenuating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    #[serde(default = "one")]
    pub sigma2: f64,
    pub gamma2: f64,
    #[serde(default = "two")]
    pub theta: f64,
    #[serde(default = "one")]
    pub d0: f64,
    #[serde(default = "default_clamp")]
    pub clamp: Clamp,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn default_clamp() -> Clamp {
    Clamp::UnitFloor
}

impl ModelConfig {
    pub fn build(&self) -> Result<ObservationModel> {
        let built = match self.model {
            ModelKind::Flat => ObservationModel::flat(self.sigma2, self.gamma2),
            ModelKind::Attenuating => ObservationModel::attenuating(
                self.sigma2,
                self.gamma2,
                PathLoss {
                    theta: self.theta,
                    d0: self.d0,
                    clamp: self.clamp,
                },
            ),
        };
        built.map_err(|e| nest("model", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrueOriginMode {
    Uniform,
    Grid,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Alpha,
    Rho1,
    /// Signal-to-noise ratio in dB: `gamma2 = sigma2 · 10^(snr / 10)`.
    Snr,
    /// Sampling rate in Hz; needs a `[time]` block.
    Fs,
    /// Origin-grid size of every grid-based procedure.
    #[serde(rename = "M")]
    M,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Rho1 => "rho1",
            SweepParam::Snr => "snr",
            SweepParam::Fs => "fs",
            SweepParam::M => "M",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelConfig {
    pub clusters: usize,
    /// Deadline in slots.
    #[serde(default)]
    pub deadline: Option<u64>,
    /// Deadline in seconds, converted with the sampling rate.
    #[serde(default)]
    pub deadline_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Mean onset time in seconds.
    pub beta: f64,
    /// Wavefront speed in distance units per second.
    #[serde(default = "speed_of_light")]
    pub speed: f64,
}

fn speed_of_light() -> f64 {
    SPEED_OF_LIGHT
}

/// `ρ = 1 − exp(−1/(β f_s))`.
pub fn fs_to_rho(fs: f64, beta: f64) -> f64 {
    -(-1.0 / (beta * fs)).exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    pub domain: Domain,
    pub sensors: SensorConfig,
    pub prior: PriorParams,
    #[serde(default = "default_true_origin")]
    pub true_origin: TrueOriginMode,
    /// Grid size when `true_origin = "grid"`.
    #[serde(default = "default_true_origin_m")]
    pub true_origin_m: usize,
    #[serde(default = "one")]
    pub unit_length: f64,
    pub model: ModelConfig,
    pub procedures: Vec<RuleConfig>,
    /// Thresholds evaluated for every procedure; defaults to each procedure's own `alpha`.
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub parallel: Option<ParallelConfig>,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub slot_cap: Option<u64>,
}

fn default_seed() -> u64 {
    1
}

fn default_trials() -> u64 {
    2000
}

fn default_true_origin() -> TrueOriginMode {
    TrueOriginMode::Uniform
}

fn default_true_origin_m() -> usize {
    10
}

fn nest(field: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => config_err(format!("{field}.{name}"), reason),
        Error::InvalidDomain(reason) => config_err(field, reason),
        Error::Config { .. } => e,
        other => config_err(field, other.to_string()),
    }
}

fn check_prob(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(config_err(field, format!("must lie in (0,1), got {v}")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| config_err("toml", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn is_parallel(&self) -> bool {
        self.parallel.is_some()
    }

    /// Field-level validation of everything a run needs.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(',') {
            return Err(config_err(
                "name",
                "must be non-empty and contain no commas",
            ));
        }
        if self.trials == 0 {
            return Err(config_err("trials", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(config_err("workers", "must be at least 1"));
        }
        self.domain.validate().map_err(|e| nest("domain", e))?;
        if self.sensors.count == 0 {
            return Err(config_err("sensors.count", "must be at least 1"));
        }
        self.prior.validate().map_err(|e| nest("prior", e))?;
        if self.true_origin == TrueOriginMode::Grid && self.true_origin_m == 0 {
            return Err(config_err("true_origin_m", "must be at least 1"));
        }
        if !(self.unit_length > 0.0 && self.unit_length.is_finite()) {
            return Err(config_err("unit_length", "must be positive"));
        }
        self.model.build()?;
        if self.procedures.is_empty() {
            return Err(config_err("procedures", "need at least one procedure"));
        }
        for (i, p) in self.procedures.iter().enumerate() {
            p.validate()
                .map_err(|e| nest(&format!("procedures[{i}]"), e))?;
        }
        let mut names: Vec<String> = self.procedures.iter().map(|p| p.display_name()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err(
                "procedures",
                "procedure names must be unique; set `name`",
            ));
        }
        if let Some(a) = &self.alphas {
            if a.is_empty() {
                return Err(config_err("alphas", "must not be empty"));
            }
            for &v in a {
                check_prob("alphas", v)?;
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(config_err("sweep.values", "must not be empty"));
            }
            if let Some(v) = s.values.iter().find(|v| !v.is_finite()) {
                return Err(config_err(
                    "sweep.values",
                    format!("must be finite, got {v}"),
                ));
            }
            match s.param {
                SweepParam::Alpha => {
                    for &v in &s.values {
                        check_prob("sweep.values", v)?;
                    }
                    if self.alphas.is_some() {
                        return Err(config_err("alphas", "conflicts with an alpha sweep"));
                    }
                }
                SweepParam::Rho1 => {
                    if let Some(v) = s.values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                        return Err(config_err(
                            "sweep.values",
                            format!("rho1 must lie in (0,1], got {v}"),
                        ));
                    }
                }
                SweepParam::Fs => {
                    if self.time.is_none() {
                        return Err(config_err("time", "an fs sweep needs a [time] block"));
                    }
                    if let Some(v) = s.values.iter().find(|v| **v <= 0.0) {
                        return Err(config_err(
                            "sweep.values",
                            format!("fs must be positive, got {v}"),
                        ));
                    }
                }
                SweepParam::M => {
                    if let Some(v) = s.values.iter().find(|v| !(**v >= 1.0 && v.fract() == 0.0)) {
                        return Err(config_err(
                            "sweep.values",
                            format!("M must be a positive integer, got {v}"),
                        ));
                    }
                }
                SweepParam::Snr => {}
            }
            if s.param != SweepParam::Alpha && self.alphas.as_ref().is_some_and(|a| a.len() > 1) {
                return Err(config_err(
                    "alphas",
                    "only one threshold allowed with a non-alpha sweep",
                ));
            }
        }
        if let Some(t) = &self.time {
            if !(t.fs > 0.0 && t.beta > 0.0 && t.speed > 0.0) {
                return Err(config_err("time", "fs, beta and speed must be positive"));
            }
        }
        if let Some(p) = &self.parallel {
            if p.clusters == 0 {
                return Err(config_err("parallel.clusters", "must be at least 1"));
            }
            match (p.deadline, p.deadline_seconds) {
                (Some(0), _) => return Err(config_err("parallel.deadline", "must be at least 1")),
                (None, None) => {
                    return Err(config_err(
                        "parallel.deadline",
                        "parallel runs need a finite deadline",
                    ))
                }
                (Some(_), Some(_)) => {
                    return Err(config_err(
                        "parallel.deadline",
                        "give either deadline or deadline_seconds",
                    ))
                }
                (None, Some(s)) if self.time.is_none() || s.is_nan() || s <= 0.0 => {
                    return Err(config_err(
                        "parallel.deadline_seconds",
                        "needs a [time] block and a positive value",
                    ));
                }
                _ => {}
            }
        }
        if self.slot_cap == Some(0) {
            return Err(config_err("slot_cap", "must be at least 1"));
        }
        Ok(())
    }

    /// Thresholds of procedure `i`.
    pub fn thresholds(&self, i: usize) -> Vec<f64> {
        match (&self.sweep, &self.alphas) {
            (Some(s), _) if s.param == SweepParam::Alpha => s.values.clone(),
            (_, Some(a)) => a.clone(),
            _ => vec![self.procedures[i].alpha],
        }
    }

    /// The world and procedures at one sweep value (`None` = no sweep).
    pub fn instantiate(
        &self,
        sweep_value: Option<f64>,
    ) -> Result<(World, Vec<RuleConfig>, Option<u64>)> {
        let mut prior = self.prior;
        let mut model_cfg = self.model.clone();
        let mut unit_length = self.unit_length;
        let mut procedures = self.procedures.clone();
        let mut time = self.time.clone();
        if let (Some(s), Some(v)) = (&self.sweep, sweep_value) {
            match s.param {
                SweepParam::Alpha => {}
                SweepParam::Rho1 => prior.rho1 = v,
                SweepParam::Snr => model_cfg.gamma2 = model_cfg.sigma2 * 10f64.powf(v / 10.0),
                SweepParam::Fs => {
                    if let Some(t) = time.as_mut() {
                        t.fs = v;
                    }
                }
                SweepParam::M => {
                    for p in procedures
                        .iter_mut()
                        .filter(|p| p.rule.uses_grid() || p.rule == RuleKind::Instant)
                    {
                        if p.rule != RuleKind::Instant || p.m_detector.is_some_and(|m| m > 1) {
                            p.m_detector = Some(v as usize);
                        }
                    }
                }
            }
        }
        if let Some(t) = &time {
            prior.rho = fs_to_rho(t.fs, t.beta);
            unit_length = t.speed / t.fs;
        }
        prior.validate().map_err(|e| nest("prior", e))?;
        let model = model_cfg.build()?;
        let true_origin = match self.true_origin {
            TrueOriginMode::Uniform => TrueOrigin::Uniform,
            TrueOriginMode::Center => TrueOrigin::Center,
            TrueOriginMode::Grid => TrueOrigin::Grid(self.true_origin_m),
        };
        let world = World {
            domain: self.domain,
            sensor_count: self.sensors.count,
            placement: self.sensors.policy.clone(),
            prior,
            model,
            unit_length,
            true_origin,
        };
        world.validate().map_err(|e| nest("scenario", e))?;
        let deadline = match &self.parallel {
            Some(p) => match (p.deadline, p.deadline_seconds, &time) {
                (Some(d), _, _) => Some(d),
                (None, Some(s), Some(t)) => Some((s * t.fs).ceil().max(1.0) as u64),
                _ => None,
            },
            None => None,
        };
        Ok((world, procedures, deadline))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = r#"
name = "demo"
seed = 3
trials = 50

[domain]
kind = "rectangle"
x_min = 0.0
x_max = 10.0
y_min = 0.0
y_max = 10.0

[sensors]
policy = "per-slot-resample"
count = 25

[prior]
rho = 0.02
rho1 = 0.25

[model]
model = "flat"
gamma2 = 1.0

[[procedures]]
rule = "rp"
M_detector = 10
alpha = 0.05

[[procedures]]
rule = "oracle"
alpha = 0.05
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ScenarioConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.procedures.len(), 2);
        assert_eq!(cfg.procedures[0].m_detector, Some(10));
        assert_eq!(cfg.sensors.policy, PlacementPolicy::PerSlotResample);
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn zero_trials_rejected() {
        let text = EXAMPLE.replace("trials = 50", "trials = 0");
        let e = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(
            matches!(e, Error::Config { ref field, .. } if field == "trials"),
            "{e}"
        );
    }

    #[test]
    fn field_level_messages() {
        let text = EXAMPLE.replace("rho = 0.02", "rho = 1.5");
        let e = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(e.to_string().contains("prior.rho"), "{e}");
        let text = EXAMPLE.replace("M_detector = 10\n", "");
        let e = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(e.to_string().contains("procedures[0].M_detector"), "{e}");
        let text = EXAMPLE.replace("count = 25", "count = 25\nbogus = 1");
        assert!(ScenarioConfig::from_toml(&text).is_err());
        let text = format!("{EXAMPLE}\n[parallel]\nclusters = 4\n");
        let e = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(e.to_string().contains("deadline"), "{e}");
    }

    #[test]
    fn fs_mapping() {
        assert!((fs_to_rho(1e6, 10.0) - 1e-7).abs() < 1e-13);
        assert!(fs_to_rho(1e-9, 10.0) > 1.0 - 1e-12);
        let rhos: Vec<f64> = [1e5, 1e6, 1e7]
            .iter()
            .map(|&f| fs_to_rho(f, 1e-4))
            .collect();
        assert!(rhos[0] > rhos[1] && rhos[1] > rhos[2]);
    }

    #[test]
    fn sweep_instantiation() {
        let mut cfg = ScenarioConfig::from_toml(EXAMPLE).unwrap();
        cfg.sweep = Some(SweepConfig {
            param: SweepParam::Snr,
            values: vec![10.0],
        });
        let (w, _, _) = cfg.instantiate(Some(10.0)).unwrap();
        assert!((w.model.noise.gamma2 - 10.0).abs() < 1e-12);
        cfg.sweep = Some(SweepConfig {
            param: SweepParam::M,
            values: vec![4.0],
        });
        let (_, procs, _) = cfg.instantiate(Some(4.0)).unwrap();
        assert_eq!(procs[0].m_detector, Some(4));
        assert_eq!(procs[1].m_detector, None);
    }
}
