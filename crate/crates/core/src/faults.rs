//! Actuator degradation profiles applied to the automation's desired control.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ActuatorBounds, ControlVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultChannel {
    Steering,
    Acceleration,
}

impl FaultChannel {
    fn index(self) -> usize {
        match self {
            FaultChannel::Acceleration => 0,
            FaultChannel::Steering => 1,
        }
    }
}

/// Ramp-to-plateau degradation on one channel, indexed by control step.
///
/// The offset is zero before `onset`, grows linearly to `plateau` over
/// `ramp` steps and stays there. An optional `scale` ramps a multiplicative
/// gain from 1 to `scale` on the same schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultProfile {
    pub channel: FaultChannel,
    pub onset: u64,
    #[serde(default)]
    pub ramp: u64,
    #[serde(default)]
    pub plateau: f64,
    #[serde(default)]
    pub scale: Option<f64>,
}

impl FaultProfile {
    /// Steering bias reaching 0.3 rad over steps 10..=30.
    pub fn steering_bias() -> Self {
        FaultProfile {
            channel: FaultChannel::Steering,
            onset: 10,
            ramp: 20,
            plateau: 0.3,
            scale: None,
        }
    }

    /// Acceleration bias reaching 3 m/s² over steps 5..=10.
    pub fn acceleration_bias() -> Self {
        FaultProfile {
            channel: FaultChannel::Acceleration,
            onset: 5,
            ramp: 5,
            plateau: 3.0,
            scale: None,
        }
    }

    /// Fraction of the fault that is active at step `k`.
    pub fn progress(&self, k: u64) -> f64 {
        if k < self.onset {
            0.0
        } else if k >= self.onset + self.ramp {
            1.0
        } else {
            (k - self.onset) as f64 / self.ramp as f64
        }
    }

    pub fn offset(&self, k: u64) -> f64 {
        self.plateau * self.progress(k)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.plateau.is_finite() {
            return Err("fault plateau must be finite".into());
        }
        if let Some(s) = self.scale {
            if !s.is_finite() {
                return Err("fault scale must be finite".into());
            }
        }
        Ok(())
    }
}

/// Degraded automation output at step `k`. Without a profile the desired
/// control passes through untouched; with one, only the faulted channel is
/// modified and the result is clipped to the physical actuator range.
pub fn inject(u_des: &ControlVector, k: u64, profile: Option<&FaultProfile>, bounds: &ActuatorBounds) -> ControlVector {
    let Some(p) = profile else {
        return *u_des;
    };
    let i = p.channel.index();
    let gain = match p.scale {
        Some(s) => 1.0 + (s - 1.0) * p.progress(k),
        None => 1.0,
    };
    let mut out = *u_des;
    out.set(i, u_des.get(i) * gain + p.offset(k));
    let clipped = bounds.clip(out);
    // Leave the healthy channel bit-identical even if it sits outside bounds.
    let mut result = *u_des;
    result.set(i, clipped.get(i));
    result
}
