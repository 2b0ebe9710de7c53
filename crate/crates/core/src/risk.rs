//! Lateral risk from a boundary potential field and longitudinal risk from a
//! dynamic potential field over the surrounding vehicles.

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::safe_area::SafeArea;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApfParams {
    /// Peak field value `alpha_f`.
    pub magnitude: f64,
    /// Lateral convergence `sigma_y` (m).
    pub sigma: f64,
    /// Safety margin `d_c` (m).
    pub margin: f64,
    /// Vehicle width `v_w` (m).
    pub vehicle_width: f64,
}

impl Default for ApfParams {
    fn default() -> Self {
        ApfParams {
            magnitude: 30.0,
            sigma: 1.0,
            margin: 0.8,
            vehicle_width: 2.0,
        }
    }
}

impl ApfParams {
    /// Distance beyond which the boundary field vanishes.
    pub fn cutoff(&self) -> f64 {
        self.margin + 0.5 * self.vehicle_width
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.magnitude, self.sigma, self.margin, self.vehicle_width];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("potential field parameters must be positive".into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpfParams {
    /// Velocity-field gain `alpha`.
    pub velocity_gain: f64,
    /// Distance-field gain `A_f`.
    pub distance_gain: f64,
    /// Longitudinal convergence `sigma_x` (m).
    pub sigma: f64,
    /// Shape exponent `b`.
    pub shape: f64,
    /// Maximum deceleration (m/s²).
    pub max_decel: f64,
    /// Reaction time (s).
    pub reaction_time: f64,
    /// Deceleration build-up time (s).
    pub buildup_time: f64,
    /// Minimum clearance `d_o` (m).
    pub clearance: f64,
}

impl Default for DpfParams {
    fn default() -> Self {
        DpfParams {
            velocity_gain: 10.0,
            distance_gain: 2.0,
            sigma: 4.0,
            shape: 2.0,
            max_decel: 7.0,
            reaction_time: 0.1,
            buildup_time: 0.1,
            clearance: 2.0,
        }
    }
}

impl DpfParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            self.velocity_gain,
            self.distance_gain,
            self.sigma,
            self.max_decel,
            self.clearance,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err("dynamic field gains, sigma, deceleration and clearance must be positive".into());
        }
        if !(self.shape >= 1.0) {
            return Err("dynamic field shape exponent must be at least 1".into());
        }
        if !(self.reaction_time >= 0.0 && self.buildup_time >= 0.0) {
            return Err("reaction and build-up times must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    LaneKeep,
    LaneChange,
}

/// Weights of the follower, leader and preceding vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskWeights {
    pub follower: f64,
    pub leader: f64,
    pub preceding: f64,
}

impl TaskWeights {
    pub fn lane_keep() -> Self {
        TaskWeights {
            follower: 0.1,
            leader: 0.2,
            preceding: 0.7,
        }
    }

    pub fn lane_change() -> Self {
        TaskWeights {
            follower: 0.8,
            leader: 0.1,
            preceding: 0.1,
        }
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::LaneKeep => Self::lane_keep(),
            Task::LaneChange => Self::lane_change(),
        }
    }

    pub fn weight(&self, role: Role) -> f64 {
        match role {
            Role::Follower => self.follower,
            Role::Leader => self.leader,
            Role::Preceding => self.preceding,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let w = [self.follower, self.leader, self.preceding];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err("task weights must be nonnegative".into());
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err("task weights must sum to 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Follower,
    Leader,
    Preceding,
}

/// Longitudinal kinematics of one agent at the end of the prediction horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub s: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborRisk {
    pub role: Role,
    /// `s_o - s_e`, positive when the neighbour is ahead.
    pub gap: f64,
    pub closing_speed: f64,
    pub safe_distance: f64,
    /// Raw field value; zero when not closing.
    pub potential: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskReport {
    pub r_y: f64,
    pub r_x: f64,
    /// Boundary potential at the predicted ego position.
    pub boundary_potential: f64,
    pub boundary_distance: f64,
    pub neighbors: Vec<NeighborRisk>,
}

/// Boundary field value for a distance `r_b` to the nearest corridor edge.
pub fn apf(r_b: f64, p: &ApfParams) -> f64 {
    if r_b > p.cutoff() {
        0.0
    } else {
        p.magnitude * (-(r_b * r_b) / (p.sigma * p.sigma)).exp()
    }
}

/// `(P^r, r_y)` at the predicted position.
pub fn lateral_risk(area: &SafeArea, predicted: Point, p: &ApfParams) -> (f64, f64) {
    let potential = apf(area.distance_to_boundaries(predicted), p);
    (potential, (potential / p.magnitude).clamp(0.0, 1.0))
}

/// Modified Bessel function of the first kind, order zero, by power series.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < 1e-15 * sum {
            return sum;
        }
        k += 1.0;
    }
}

/// Closing speed: positive when the gap between the two vehicles shrinks.
pub fn closing_speed(ego: &AgentSnapshot, other: &AgentSnapshot) -> f64 {
    if ego.s <= other.s {
        ego.v - other.v
    } else {
        other.v - ego.v
    }
}

/// Natural log of the field value; `None` when the field is zero.
pub fn log_dpf(closing: f64, gap: f64, p: &DpfParams) -> Option<f64> {
    if !(closing > 0.0) {
        return None;
    }
    let distance = p.distance_gain.ln() - gap.abs().powf(2.0 * p.shape) / (2.0 * p.sigma.powf(2.0 * p.shape));
    let velocity = p.velocity_gain.ln() + closing - (2.0 * std::f64::consts::PI).ln() - bessel_i0(closing).ln();
    Some(distance + velocity)
}

pub fn dpf(closing: f64, gap: f64, p: &DpfParams) -> f64 {
    log_dpf(closing, gap, p).map_or(0.0, f64::exp)
}

pub fn safe_distance(v_e: f64, v_o: f64, p: &DpfParams) -> f64 {
    (v_e * v_e - v_o * v_o).abs() / (2.0 * p.max_decel)
        + v_e.max(v_o) * (p.reaction_time + 0.5 * p.buildup_time)
        + p.clearance
}

/// Field value normalised by its value at the safe distance, in `[0, 1]`.
pub fn dpf_ratio(closing: f64, gap: f64, d_safe: f64, p: &DpfParams) -> f64 {
    match (log_dpf(closing, gap, p), log_dpf(closing, d_safe, p)) {
        (Some(num), Some(den)) => (num - den).exp().clamp(0.0, 1.0),
        _ => 0.0,
    }
}

/// Weighted longitudinal risk over the neighbours that are present.
pub fn longitudinal_risk(
    ego: &AgentSnapshot,
    neighbors: &[(Role, AgentSnapshot)],
    weights: &TaskWeights,
    p: &DpfParams,
) -> (f64, Vec<NeighborRisk>) {
    let mut r_x = 0.0;
    let mut detail = Vec::with_capacity(neighbors.len());
    for (role, other) in neighbors {
        let c = closing_speed(ego, other);
        let gap = other.s - ego.s;
        let d_safe = safe_distance(ego.v, other.v, p);
        let ratio = dpf_ratio(c, gap, d_safe, p);
        r_x += weights.weight(*role) * ratio;
        detail.push(NeighborRisk {
            role: *role,
            gap,
            closing_speed: c,
            safe_distance: d_safe,
            potential: dpf(c, gap, p),
            ratio,
        });
    }
    (r_x.clamp(0.0, 1.0), detail)
}

/// One risk evaluation request: predicted ego state, corridor boundaries and
/// predicted neighbours, all in the road frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskQuery {
    pub ego: EgoPrediction,
    /// Lower corridor boundary, ordered by station.
    pub lower: Vec<Point>,
    /// Upper corridor boundary, ordered by station.
    pub upper: Vec<Point>,
    #[serde(default)]
    pub neighbors: Vec<NeighborQuery>,
    #[serde(default = "default_task")]
    pub task: Task,
    #[serde(default)]
    pub apf: ApfParams,
    #[serde(default)]
    pub dpf: DpfParams,
}

fn default_task() -> Task {
    Task::LaneKeep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoPrediction {
    pub s: f64,
    pub d: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborQuery {
    pub role: Role,
    pub s: f64,
    pub v: f64,
}

impl RiskQuery {
    pub fn validate(&self) -> Result<(), String> {
        if self.lower.len() < 2 || self.upper.len() < 2 {
            return Err("corridor boundaries need at least two points each".into());
        }
        let pts = self.lower.iter().chain(&self.upper);
        let ego = [self.ego.s, self.ego.d, self.ego.v];
        let nbs = self.neighbors.iter().flat_map(|n| [n.s, n.v]);
        if !(pts.clone().all(|p| p.is_finite()) && ego.iter().copied().chain(nbs).all(f64::is_finite)) {
            return Err("risk query values must be finite".into());
        }
        self.apf.validate()?;
        self.dpf.validate()
    }
}

/// Full lateral and longitudinal assessment for a query.
pub fn assess(q: &RiskQuery) -> RiskReport {
    let area = SafeArea {
        channel: Vec::new(),
        upper: q.upper.clone(),
        lower: q.lower.clone(),
        start: q.lower[0],
        goal: *q.lower.last().expect("validated boundary"),
    };
    let p = Point::new(q.ego.s, q.ego.d);
    let boundary_distance = area.distance_to_boundaries(p);
    let (boundary_potential, r_y) = lateral_risk(&area, p, &q.apf);
    let ego = AgentSnapshot { s: q.ego.s, v: q.ego.v };
    let others: Vec<(Role, AgentSnapshot)> = q
        .neighbors
        .iter()
        .map(|n| (n.role, AgentSnapshot { s: n.s, v: n.v }))
        .collect();
    let (r_x, neighbors) = longitudinal_risk(&ego, &others, &TaskWeights::for_task(q.task), &q.dpf);
    RiskReport {
        r_y,
        r_x,
        boundary_potential,
        boundary_distance,
        neighbors,
    }
}
