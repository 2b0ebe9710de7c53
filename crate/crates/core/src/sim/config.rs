//! Scenario files: TOML, one table per parameter block, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::authority::{AllocationParams, FuzzySets, RuleBase};
use crate::controllers::{DriverParams, MpcConfig, MpcWeights};
use crate::dynamics::VehicleParams;
use crate::faults::FaultProfile;
use crate::prediction::PredictionConfig;
use crate::risk::{ApfParams, DpfParams, Role, Task};
use crate::road::RoadModel;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Shared,
    AutomationOnly,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(Mode::Shared),
            "automation-only" => Ok(Mode::AutomationOnly),
            other => Err(format!("unknown mode '{other}', expected shared or automation-only")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoConfig {
    pub lane: usize,
    #[serde(default)]
    pub station: f64,
    pub speed: f64,
    /// Lateral offset from the lane centre (m).
    #[serde(default)]
    pub offset: f64,
    /// Heading relative to the road (rad).
    #[serde(default)]
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub lane: usize,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborConfig {
    pub role: Role,
    pub lane: usize,
    /// Initial station (m).
    pub station: f64,
    pub speed: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_length() -> f64 {
    4.5
}
fn default_width() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorridorConfig {
    /// Window extent behind the ego (m).
    pub behind: f64,
    /// Window extent ahead of the ego (m).
    pub ahead: f64,
    /// Narrow the corridor to the target lane where no obstacle intrudes.
    pub clip_to_lane: bool,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        CorridorConfig {
            behind: 20.0,
            ahead: 80.0,
            clip_to_lane: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FisConfig {
    pub sets: FuzzySets,
    pub rules: RuleBase,
}

fn default_dt() -> f64 {
    0.05
}
fn default_duration() -> f64 {
    20.0
}
fn default_task() -> Task {
    Task::LaneKeep
}

/// Automation weights: steering effort is expensive and the boundary field
/// is light, so an unmodelled steering bias is only partly rejected.
pub fn default_automation_mpc() -> MpcConfig {
    MpcConfig::default()
}

pub fn default_driver_mpc() -> MpcConfig {
    MpcConfig {
        weights: MpcWeights {
            potential: 0.0,
            ..MpcWeights::default()
        },
        ..MpcConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_task")]
    pub task: Task,
    #[serde(default)]
    pub road: RoadModel,
    pub ego: EgoConfig,
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub neighbors: Vec<NeighborConfig>,
    #[serde(default)]
    pub fault: Option<FaultProfile>,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub prediction: PredictionConfig,
    #[serde(default)]
    pub apf: ApfParams,
    #[serde(default)]
    pub dpf: DpfParams,
    #[serde(default)]
    pub fis: FisConfig,
    #[serde(default)]
    pub allocation: AllocationParams,
    #[serde(default = "default_automation_mpc")]
    pub automation_mpc: MpcConfig,
    #[serde(default = "default_driver_mpc")]
    pub driver_mpc: MpcConfig,
    #[serde(default)]
    pub driver: DriverParams,
    #[serde(default)]
    pub corridor: CorridorConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// Number of control steps.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return err("dt must be positive".into());
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return err("duration must be nonnegative".into());
        }
        let n = (self.duration / self.dt).round();
        if (n * self.dt - self.duration).abs() > 1e-9 * self.duration.max(1.0) {
            return err(format!(
                "duration {} is not a whole number of steps of {}",
                self.duration, self.dt
            ));
        }
        self.road
            .validate(self.vehicle.width)
            .map_err(|e| SimError::Config(e.to_string()))?;
        let lanes = self.road.lane_count;
        if self.ego.lane >= lanes || self.reference.lane >= lanes {
            return err("ego or reference lane out of range".into());
        }
        if !(self.ego.speed >= crate::dynamics::MIN_SPEED) {
            return err("ego speed below the model floor".into());
        }
        if !(self.reference.speed.is_finite() && self.reference.speed >= 0.0) {
            return err("reference speed must be nonnegative".into());
        }
        let mut roles = Vec::new();
        for nb in &self.neighbors {
            if nb.lane >= lanes {
                return err(format!("{:?} lane out of range", nb.role));
            }
            if roles.contains(&nb.role) {
                return err(format!("duplicate {:?} neighbour", nb.role));
            }
            if !(nb.length > 0.0 && nb.width > 0.0 && nb.width < self.road.lane_width) {
                return err(format!("{:?} footprint must fit inside its lane", nb.role));
            }
            if !(nb.speed >= 0.0 && nb.station.is_finite()) {
                return err(format!("{:?} speed must be nonnegative", nb.role));
            }
            roles.push(nb.role);
        }
        if let Some(f) = &self.fault {
            f.validate().map_err(SimError::Config)?;
        }
        let c = &self.corridor;
        if !(c.behind >= 0.0 && c.ahead > 0.0) {
            return err("corridor window must extend ahead of the ego".into());
        }
        self.vehicle.validate().map_err(SimError::Config)?;
        self.prediction.validate().map_err(SimError::Config)?;
        self.apf.validate().map_err(SimError::Config)?;
        self.dpf.validate().map_err(SimError::Config)?;
        self.fis.sets.validate().map_err(SimError::Config)?;
        self.fis.rules.validate(&self.fis.sets).map_err(SimError::Config)?;
        self.allocation.validate().map_err(SimError::Config)?;
        self.automation_mpc.validate().map_err(SimError::Config)?;
        self.driver_mpc.validate().map_err(SimError::Config)?;
        self.driver.validate().map_err(SimError::Config)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [ego]
        lane = 0
        speed = 15.0

        [reference]
        lane = 0
        speed = 12.0
    "#;

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.steps(), 400);
        assert_eq!(cfg.driver.gain, 1.08);
        assert_eq!(cfg.driver.lag, 0.17);
        assert_eq!(cfg.automation_mpc.horizon, 10);
        assert!(cfg.fault.is_none());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text =
            format!("{MINIMAL}\n[apf]\nmagnitude = 30.0\nsigma = 1.0\nmargin = 0.8\nvehicle_width = 2.0\ncolour = 1\n");
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(SimError::Config(_))));
        let text = format!("bogus = 1\n{MINIMAL}");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let text = MINIMAL.replace("lane = 0\n        speed = 15.0", "lane = 5\n        speed = 15.0");
        assert!(ScenarioConfig::from_toml(&text).is_err());
        let text = format!("dt = 0.05\nduration = 1.01\n{MINIMAL}");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("shared".parse::<Mode>().unwrap(), Mode::Shared);
        assert_eq!("automation-only".parse::<Mode>().unwrap(), Mode::AutomationOnly);
        assert!("manual".parse::<Mode>().is_err());
    }
}
