//! Preset scenarios for the published tables and figures, scaled to run on
//! a desktop.
//!
//! The flat-model presets use the published parameters directly. The radio
//! presets keep the geometry (5 km clusters, 500 m reference distance,
//! `θ = 2`, `γ² = 2`, 100 stationary sensors, 20 clusters) but shrink the
//! mean onset time so that the change is tens of slots away rather than
//! millions.

use super::config::{
    ModelConfig, ModelKind, ParallelConfig, ScenarioConfig, SensorConfig, SweepConfig, SweepParam,
    TimeConfig, TrueOriginMode, SPEED_OF_LIGHT,
};
use crate::error::{config_err, Result};
use crate::geometry::{Domain, PlacementPolicy, Point};
use crate::observation::Clamp;
use crate::state_model::PriorParams;
use crate::stopping::{RuleConfig, RuleKind};

pub const PRESETS: [&str; 5] = ["table1", "table2", "fig3", "fig4", "add-trend"];

/// Mean onset time of the radio presets: about 50 slots at 1 MHz.
pub const RADIO_BETA: f64 = 5e-5;
/// Deadline of the radio presets: 200 slots at 1 MHz.
pub const RADIO_DEADLINE_SECONDS: f64 = 2e-4;

fn flat_base(name: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        seed: 2024,
        trials: 2000,
        workers: None,
        domain: Domain::square(10.0),
        sensors: SensorConfig {
            policy: PlacementPolicy::PerSlotResample,
            count: 100,
        },
        prior: PriorParams {
            rho: 0.02,
            rho1: 0.25,
            p_inf: 0.0,
        },
        true_origin: TrueOriginMode::Uniform,
        true_origin_m: 10,
        unit_length: 1.0,
        model: ModelConfig {
            model: ModelKind::Flat,
            sigma2: 1.0,
            gamma2: 1.0,
            theta: 2.0,
            d0: 1.0,
            clamp: Clamp::UnitFloor,
        },
        procedures: Vec::new(),
        alphas: None,
        sweep: None,
        parallel: None,
        time: None,
        slot_cap: None,
    }
}

fn flat_procedures(alpha: f64, grids: &[usize]) -> Vec<RuleConfig> {
    let mut v: Vec<RuleConfig> = grids
        .iter()
        .map(|&m| RuleConfig::new(RuleKind::Rp).with_m(m).with_alpha(alpha))
        .collect();
    v.push(
        RuleConfig::new(RuleKind::RpMismatched)
            .with_m(50)
            .with_alpha(alpha)
            .named("rp-mismatched"),
    );
    v.push(RuleConfig::new(RuleKind::Oracle).with_alpha(alpha));
    v.push(RuleConfig::new(RuleKind::Instant).with_alpha(alpha));
    v
}

/// Observed false-alarm probabilities, flat model.
pub fn table1() -> ScenarioConfig {
    let mut c = flat_base("table1");
    c.procedures = flat_procedures(0.01, &[10, 50, 100]);
    c.sweep = Some(SweepConfig {
        param: SweepParam::Alpha,
        values: vec![0.1, 0.05, 0.01, 0.005],
    });
    c
}

/// Delay against threshold, propagation rate and SNR, flat model.
pub fn fig3() -> Vec<ScenarioConfig> {
    let mut top = flat_base("fig3-alpha");
    top.procedures = flat_procedures(0.01, &[10, 50, 100]);
    top.sweep = Some(SweepConfig {
        param: SweepParam::Alpha,
        values: vec![0.1, 0.05, 0.01, 0.005, 0.001],
    });

    let mut middle = flat_base("fig3-rho1");
    middle.procedures = flat_procedures(0.01, &[50]);
    middle.sweep = Some(SweepConfig {
        param: SweepParam::Rho1,
        values: vec![0.1, 0.25, 0.5, 0.75, 1.0],
    });

    let mut bottom = flat_base("fig3-snr");
    bottom.procedures = flat_procedures(0.1, &[50]);
    bottom.sweep = Some(SweepConfig {
        param: SweepParam::Snr,
        values: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
    });
    vec![top, middle, bottom]
}

fn radio_base(name: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        seed: 2024,
        trials: 200,
        workers: None,
        domain: Domain::square(5000.0),
        sensors: SensorConfig {
            policy: PlacementPolicy::UniformRandom,
            count: 100,
        },
        prior: PriorParams {
            rho: 0.02,
            rho1: 1.0,
            p_inf: 0.2,
        },
        true_origin: TrueOriginMode::Uniform,
        true_origin_m: 10,
        unit_length: 1.0,
        model: ModelConfig {
            model: ModelKind::Attenuating,
            sigma2: 1.0,
            gamma2: 2.0,
            theta: 2.0,
            d0: 500.0,
            clamp: Clamp::ReferenceScaled,
        },
        procedures: vec![
            RuleConfig::new(RuleKind::Rp).with_m(10),
            RuleConfig::new(RuleKind::Oracle),
            RuleConfig::new(RuleKind::InstantOracle),
            RuleConfig::new(RuleKind::Instant).with_m(10),
        ],
        alphas: None,
        sweep: None,
        parallel: Some(ParallelConfig {
            clusters: 20,
            deadline: None,
            deadline_seconds: Some(RADIO_DEADLINE_SECONDS),
        }),
        time: Some(TimeConfig {
            fs: 1e6,
            beta: RADIO_BETA,
            speed: SPEED_OF_LIGHT,
        }),
        slot_cap: None,
    }
}

/// Observed false-discovery rates, 20 parallel clusters.
pub fn table2() -> ScenarioConfig {
    let mut c = radio_base("table2");
    c.sweep = Some(SweepConfig {
        param: SweepParam::Alpha,
        values: vec![0.1, 0.05, 0.01, 0.005],
    });
    c
}

/// Delay against sampling rate, 20 parallel clusters, `α = 0.01`.
pub fn fig4() -> ScenarioConfig {
    let mut c = radio_base("fig4");
    c.trials = 50;
    c.sweep = Some(SweepConfig {
        param: SweepParam::Fs,
        values: vec![0.5e6, 1e6, 2e6, 4e6],
    });
    c
}

/// Oracle delay on a disk centred at the source, for comparison with the
/// attenuating-model delay approximation. One radius unit spans the whole
/// disk, so every sensor is exposed from the change slot on.
pub fn add_trend() -> ScenarioConfig {
    let radius = 10.0;
    ScenarioConfig {
        name: "add-trend".into(),
        seed: 2024,
        trials: 2000,
        workers: None,
        domain: Domain::Disk {
            center: Point::new(0.0, 0.0),
            radius,
        },
        sensors: SensorConfig {
            policy: PlacementPolicy::PerSlotResample,
            count: 100,
        },
        prior: PriorParams {
            rho: 0.05,
            rho1: 1.0,
            p_inf: 0.0,
        },
        true_origin: TrueOriginMode::Center,
        true_origin_m: 1,
        unit_length: radius,
        model: ModelConfig {
            model: ModelKind::Attenuating,
            sigma2: 1.0,
            gamma2: 1.0,
            theta: 2.0,
            d0: 1.0,
            clamp: Clamp::UnitFloor,
        },
        procedures: vec![RuleConfig::new(RuleKind::Oracle)],
        alphas: None,
        sweep: Some(SweepConfig {
            param: SweepParam::Alpha,
            values: vec![1e-1, 1e-2, 1e-3],
        }),
        parallel: None,
        time: None,
        slot_cap: None,
    }
}

/// Scenarios behind a preset name.
pub fn preset(name: &str) -> Result<Vec<ScenarioConfig>> {
    Ok(match name {
        "table1" => vec![table1()],
        "table2" => vec![table2()],
        "fig3" => fig3(),
        "fig4" => vec![fig4()],
        "add-trend" => vec![add_trend()],
        other => {
            return Err(config_err(
                "preset",
                format!(
                    "unknown preset `{other}`; expected one of {}",
                    PRESETS.join(", ")
                ),
            ))
        }
    })
}
