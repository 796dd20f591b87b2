//! Skill-model calibration: success tables, failure-mode mixes, noise scales and
//! geometric thresholds, plus the shipped presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FailureMode, SkillKind};
use crate::planner::CompileConfig;
use crate::schema::{self, SchemaMismatch};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} = {value} is not a probability")]
    Probability { field: String, value: f64 },
    #[error("{field} = {value} must be finite and >= 0")]
    Negative { field: String, value: f64 },
    #[error("failure mix for {0} is empty or has no positive weight")]
    EmptyMix(SkillKind),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("malformed skill config: {0}")]
    Malformed(String),
    #[error(transparent)]
    Schema(#[from] SchemaMismatch),
}

/// WBC adaptation method a preset models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Base,
    Finetune,
    Residual,
    Extended,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Base,
        Method::Finetune,
        Method::Residual,
        Method::Extended,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Base => "base",
            Method::Finetune => "finetune",
            Method::Residual => "residual",
            Method::Extended => "extended",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightBand {
    /// Support surface below the low-height threshold (floor placements and pickups).
    Low,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRates {
    pub low: f64,
    pub normal: f64,
}

impl BandRates {
    pub const fn uniform(p: f64) -> Self {
        Self { low: p, normal: p }
    }

    pub fn get(&self, band: HeightBand) -> f64 {
        match band {
            HeightBand::Low => self.low,
            HeightBand::Normal => self.normal,
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            low: f(self.low),
            normal: f(self.normal),
        }
    }
}

/// Per-skill success probability by height band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessTable {
    pub goto: BandRates,
    pub pickup: BandRates,
    pub goto_with_box: BandRates,
    pub place: BandRates,
}

impl SuccessTable {
    pub fn uniform(p: f64) -> Self {
        let r = BandRates::uniform(p);
        Self {
            goto: r,
            pickup: r,
            goto_with_box: r,
            place: r,
        }
    }

    pub fn rates(&self, kind: SkillKind) -> &BandRates {
        match kind {
            SkillKind::GoTo => &self.goto,
            SkillKind::Pickup => &self.pickup,
            SkillKind::GoToWithBox => &self.goto_with_box,
            SkillKind::Place => &self.place,
        }
    }

    pub fn rates_mut(&mut self, kind: SkillKind) -> &mut BandRates {
        match kind {
            SkillKind::GoTo => &mut self.goto,
            SkillKind::Pickup => &mut self.pickup,
            SkillKind::GoToWithBox => &mut self.goto_with_box,
            SkillKind::Place => &mut self.place,
        }
    }

    pub fn get(&self, kind: SkillKind, band: HeightBand) -> f64 {
        self.rates(kind).get(band)
    }

    /// Success table with every failure probability scaled by `scale`
    /// (`p = 1 - scale * hazard`), clamped to [0, 1].
    pub fn from_hazards(hazards: &SuccessTable, scale: f64) -> Self {
        let f = |h: f64| (1.0 - scale * h).clamp(0.0, 1.0);
        Self {
            goto: hazards.goto.map(f),
            pickup: hazards.pickup.map(f),
            goto_with_box: hazards.goto_with_box.map(f),
            place: hazards.place.map(f),
        }
    }
}

/// Relative weights of the failure modes a Bernoulli skill failure is attributed to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureMix {
    pub goto: Vec<(FailureMode, f64)>,
    pub pickup: Vec<(FailureMode, f64)>,
    pub goto_with_box: Vec<(FailureMode, f64)>,
    pub place: Vec<(FailureMode, f64)>,
}

impl Default for FailureMix {
    fn default() -> Self {
        use FailureMode::*;
        Self {
            goto: vec![(FallInstability, 1.0)],
            pickup: vec![
                (OffCenterGraspDrop, 0.5),
                (FallInstability, 0.3),
                (Timeout, 0.2),
            ],
            goto_with_box: vec![(FallInstability, 0.5), (BoxDropTransport, 0.5)],
            place: vec![(PlacePitchFlip, 0.7), (FallInstability, 0.3)],
        }
    }
}

impl FailureMix {
    pub fn for_skill(&self, kind: SkillKind) -> &[(FailureMode, f64)] {
        match kind {
            SkillKind::GoTo => &self.goto,
            SkillKind::Pickup => &self.pickup,
            SkillKind::GoToWithBox => &self.goto_with_box,
            SkillKind::Place => &self.place,
        }
    }

    /// Pick a mode with a uniform draw `u` in [0, 1).
    pub fn choose(&self, kind: SkillKind, u: f64) -> FailureMode {
        let mix = self.for_skill(kind);
        let total: f64 = mix.iter().map(|(_, w)| w.max(0.0)).sum();
        let mut acc = 0.0;
        for (mode, w) in mix {
            acc += w.max(0.0) / total;
            if u < acc {
                return *mode;
            }
        }
        mix.iter()
            .rev()
            .find(|(_, w)| *w > 0.0)
            .map(|(m, _)| *m)
            .unwrap_or(FailureMode::FallInstability)
    }
}

/// Standard deviations of the zero-mean Gaussian noise sources. Lengths in m,
/// angles in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub goto_position_sigma: f64,
    pub goto_yaw_sigma: f64,
    pub grasp_xy_sigma: f64,
    pub grasp_yaw_sigma: f64,
    pub place_x_sigma: f64,
    pub place_y_sigma: f64,
    pub place_yaw_sigma: f64,
    pub perception_xy_sigma: f64,
    pub perception_yaw_sigma: f64,
}

impl NoiseConfig {
    pub fn zero() -> Self {
        Self {
            goto_position_sigma: 0.0,
            goto_yaw_sigma: 0.0,
            grasp_xy_sigma: 0.0,
            grasp_yaw_sigma: 0.0,
            place_x_sigma: 0.0,
            place_y_sigma: 0.0,
            place_yaw_sigma: 0.0,
            perception_xy_sigma: 0.0,
            perception_yaw_sigma: 0.0,
        }
    }

    fn named(&self) -> [(&'static str, f64); 9] {
        [
            ("goto_position_sigma", self.goto_position_sigma),
            ("goto_yaw_sigma", self.goto_yaw_sigma),
            ("grasp_xy_sigma", self.grasp_xy_sigma),
            ("grasp_yaw_sigma", self.grasp_yaw_sigma),
            ("place_x_sigma", self.place_x_sigma),
            ("place_y_sigma", self.place_y_sigma),
            ("place_yaw_sigma", self.place_yaw_sigma),
            ("perception_xy_sigma", self.perception_xy_sigma),
            ("perception_yaw_sigma", self.perception_yaw_sigma),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Planar distance at which locomotion hands off to manipulation (m).
    pub handoff_distance: f64,
    /// Yaw tolerance at handoff (rad).
    pub handoff_yaw: f64,
    /// Fraction of the support half-extent the placed box's center must fall within.
    pub support_margin: f64,
    /// Robot footprint radius for departure sweeps (m).
    pub robot_radius: f64,
    /// Extra clearance added around each stacked box footprint (m).
    pub departure_clearance: f64,
    /// Support heights below this use the low-height success rates (m).
    pub low_height: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            handoff_distance: 0.05,
            handoff_yaw: 0.1,
            support_margin: 1.0,
            robot_radius: 0.35,
            departure_clearance: 0.03,
            low_height: 0.2,
        }
    }
}

fn default_schema() -> String {
    schema::SKILL_CONFIG.to_string()
}

fn default_true() -> bool {
    true
}

/// Complete skill-model calibration for one (method, DR) setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillModelConfig {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub name: String,
    pub method: Method,
    pub dr: bool,
    pub success: SuccessTable,
    /// Probability that post-placement recovery steps disturb the stack.
    pub recovery_disturbance: f64,
    #[serde(default)]
    pub failure_mix: FailureMix,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Stack-stability, departure-collision and handoff checks.
    #[serde(default = "default_true")]
    pub geometric_failures: bool,
    #[serde(default)]
    pub compile: CompileConfig,
}

const PRESET_FILES: [(&str, &str); 9] = [
    ("base-nodr", include_str!("../../presets/base-nodr.json")),
    ("base-dr", include_str!("../../presets/base-dr.json")),
    (
        "finetune-nodr",
        include_str!("../../presets/finetune-nodr.json"),
    ),
    (
        "finetune-dr",
        include_str!("../../presets/finetune-dr.json"),
    ),
    (
        "residual-nodr",
        include_str!("../../presets/residual-nodr.json"),
    ),
    (
        "residual-dr",
        include_str!("../../presets/residual-dr.json"),
    ),
    (
        "extended-nodr",
        include_str!("../../presets/extended-nodr.json"),
    ),
    (
        "extended-dr",
        include_str!("../../presets/extended-dr.json"),
    ),
    ("hardware", include_str!("../../presets/hardware.json")),
];

/// Isolated-skill success rates with dynamics randomization, per method:
/// (pickup full, pickup low, place full, place low).
pub(crate) const ISOLATED_RATES: [(Method, [f64; 4]); 4] = [
    (Method::Base, [0.8943, 0.8500, 0.8975, 0.8506]),
    (Method::Finetune, [0.9283, 0.8943, 0.9351, 0.9040]),
    (Method::Residual, [0.9315, 0.8943, 0.9076, 0.8693]),
    (Method::Extended, [0.9692, 0.9503, 0.9303, 0.9150]),
];

impl SkillModelConfig {
    /// Names accepted by [`SkillModelConfig::preset`].
    pub fn preset_names() -> Vec<&'static str> {
        PRESET_FILES.iter().map(|(n, _)| *n).collect()
    }

    /// Long-horizon preset calibrated against full-benchmark survival.
    pub fn preset(method: Method, dr: bool) -> Self {
        let name = format!("{}-{}", method.name(), if dr { "dr" } else { "nodr" });
        Self::named_preset(&name).expect("shipped preset parses")
    }

    pub fn named_preset(name: &str) -> Result<Self, ConfigError> {
        let (_, text) = PRESET_FILES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
        Self::from_json(text)
    }

    /// Single-skill evaluation setting: Pickup/Place rates measured in isolation
    /// under dynamics randomization, perfect locomotion, no geometric failures.
    pub fn isolated(method: Method) -> Self {
        let [pf, pl, sf, sl] = ISOLATED_RATES
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, r)| *r)
            .expect("every method has isolated rates");
        let mut cfg = Self::ideal();
        cfg.name = format!("{}-isolated", method.name());
        cfg.method = method;
        cfg.dr = true;
        cfg.success.pickup = BandRates {
            low: pl,
            normal: pf,
        };
        cfg.success.place = BandRates {
            low: sl,
            normal: sf,
        };
        cfg
    }

    /// Every skill succeeds, no noise, no geometric failures.
    pub fn ideal() -> Self {
        Self {
            schema: default_schema(),
            name: "ideal".into(),
            method: Method::Extended,
            dr: false,
            success: SuccessTable::uniform(1.0),
            recovery_disturbance: 0.0,
            failure_mix: FailureMix::default(),
            noise: NoiseConfig::zero(),
            thresholds: Thresholds::default(),
            geometric_failures: false,
            compile: CompileConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        let cfg: SkillModelConfig =
            serde_json::from_value(value).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        schema::check(schema::SKILL_CONFIG, &cfg.schema)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let prob = |field: String, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(ConfigError::Probability { field, value })
            }
        };
        for kind in SkillKind::ALL {
            let r = self.success.rates(kind);
            prob(format!("success.{kind}.low"), r.low)?;
            prob(format!("success.{kind}.normal"), r.normal)?;
            let mix = self.failure_mix.for_skill(kind);
            if !mix.iter().any(|(_, w)| *w > 0.0) || mix.iter().any(|(_, w)| !w.is_finite()) {
                return Err(ConfigError::EmptyMix(kind));
            }
        }
        prob("recovery_disturbance".into(), self.recovery_disturbance)?;
        let non_neg = |field: &str, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Negative {
                    field: field.to_string(),
                    value,
                })
            }
        };
        for (field, value) in self.noise.named() {
            non_neg(field, value)?;
        }
        let t = &self.thresholds;
        non_neg("thresholds.handoff_distance", t.handoff_distance)?;
        non_neg("thresholds.handoff_yaw", t.handoff_yaw)?;
        non_neg("thresholds.support_margin", t.support_margin)?;
        non_neg("thresholds.robot_radius", t.robot_radius)?;
        non_neg("thresholds.departure_clearance", t.departure_clearance)?;
        non_neg("compile.standoff", self.compile.standoff)?;
        non_neg("compile.max_place_height", self.compile.max_place_height)?;
        Ok(())
    }

    /// Same geometry and thresholds, but every skill succeeds without noise.
    /// Used to replay a failed skill when studying failure modes past the first one.
    pub fn nominal(&self) -> Self {
        Self {
            success: SuccessTable::uniform(1.0),
            recovery_disturbance: 0.0,
            noise: NoiseConfig::zero(),
            geometric_failures: false,
            ..self.clone()
        }
    }
}
