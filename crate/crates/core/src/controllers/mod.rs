//! Automation and driver decision MPCs plus the driver's neuromuscular lag.
//!
//! Both MPCs use direct single shooting over `H_c` free control moves held
//! constant up to `H_p` steps, with the bicycle model as the internal model.
//! The automation objective carries the boundary potential field; the driver
//! objective instead penalises leaving the safe corridor.

pub mod solver;

use serde::{Deserialize, Serialize};

pub use solver::SolverSettings;

use crate::dynamics::{step, ActuatorBounds, ControlVector, DynamicsError, VehicleParams, VehicleState};
use crate::geometry::Point;
use crate::risk::{apf, ApfParams};
use crate::road::RoadModel;
use crate::safe_area::SafeArea;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcWeights {
    /// `R`, on the squared boundary potential.
    pub potential: f64,
    /// `W`, on the squared lateral offset from the target.
    pub lateral: f64,
    /// `H`, on the squared speed error.
    pub speed: f64,
    /// `N`, on the squared yaw acceleration.
    pub yaw_accel: f64,
    /// `Q`, on squared acceleration and steering.
    pub effort: [f64; 2],
}

impl Default for MpcWeights {
    fn default() -> Self {
        MpcWeights {
            potential: 0.1,
            lateral: 5.0,
            speed: 1.0,
            yaw_accel: 0.1,
            effort: [0.1, 100.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    /// Prediction horizon `H_p` in steps.
    pub horizon: usize,
    /// Control horizon `H_c` in steps.
    pub control_horizon: usize,
    pub weights: MpcWeights,
    /// Weight `rho` on the squared corridor violation (driver only).
    pub corridor_penalty: f64,
    pub bounds: ActuatorBounds,
    pub solver: SolverSettings,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 10,
            control_horizon: 3,
            weights: MpcWeights::default(),
            corridor_penalty: 1e3,
            bounds: ActuatorBounds::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.control_horizon == 0 || self.horizon < self.control_horizon {
            return Err("MPC horizons must satisfy horizon >= control_horizon >= 1".into());
        }
        let w = &self.weights;
        let all = [
            w.potential,
            w.lateral,
            w.speed,
            w.yaw_accel,
            w.effort[0],
            w.effort[1],
            self.corridor_penalty,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err("MPC weights must be nonnegative".into());
        }
        let s = &self.solver;
        if !(s.fd_step > 0.0 && s.gradient_tolerance > 0.0) {
            return Err("solver step and tolerance must be positive".into());
        }
        self.bounds.validate()
    }
}

/// Lateral offset and speed the controllers track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub lateral: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverParams {
    /// Proportional gain `K_h`.
    pub gain: f64,
    /// Lag time constant `T_h` (s).
    pub lag: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        DriverParams { gain: 1.08, lag: 0.17 }
    }
}

impl DriverParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.gain > 0.0 && self.lag > 0.0 && self.gain.is_finite() && self.lag.is_finite() {
            Ok(())
        } else {
            Err("driver gain and lag must be positive".into())
        }
    }
}

/// Zero-order-hold step of the first-order lag `K / (T s + 1)`.
pub fn driver_lag_step(prev: &ControlVector, error: &ControlVector, p: &DriverParams, dt: f64) -> ControlVector {
    let a = (-dt / p.lag).exp();
    ControlVector::new(
        a * prev.accel + (1.0 - a) * p.gain * error.accel,
        a * prev.steer + (1.0 - a) * p.gain * error.steer,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Automation,
    Driver,
}

/// Models shared by every solve within one scenario.
#[derive(Debug, Clone, Copy)]
pub struct Plant<'a> {
    pub road: &'a RoadModel,
    pub vehicle: &'a VehicleParams,
    pub apf: &'a ApfParams,
    pub dt: f64,
}

pub struct MpcProblem<'a> {
    pub objective: Objective,
    pub state: VehicleState,
    /// Current ego station, used to resolve the road frame on curves.
    pub station: f64,
    pub reference: Reference,
    pub area: &'a SafeArea,
    pub plant: Plant<'a>,
    pub cfg: &'a MpcConfig,
}

impl MpcProblem<'_> {
    /// Control applied at prediction step `i` under move blocking.
    fn control_at(&self, seq: &[ControlVector], i: usize) -> ControlVector {
        seq[i.min(self.cfg.control_horizon - 1).min(seq.len() - 1)]
    }

    pub fn rollout(&self, seq: &[ControlVector]) -> Result<Vec<VehicleState>, DynamicsError> {
        let mut out = Vec::with_capacity(self.cfg.horizon);
        let mut x = self.state;
        for i in 0..self.cfg.horizon {
            x = step(&x, &self.control_at(seq, i), self.plant.dt, self.plant.vehicle)?;
            out.push(x);
        }
        Ok(out)
    }

    /// Road-frame positions along a rollout.
    pub fn road_positions(&self, states: &[VehicleState]) -> Vec<Point> {
        let mut hint = self.station;
        states
            .iter()
            .map(|x| {
                let (s, d) = self.plant.road.to_road(Point::new(x.x, x.y), hint);
                hint = s;
                Point::new(s, d)
            })
            .collect()
    }

    /// Objective value; infinite when the rollout leaves the model's domain.
    pub fn cost(&self, seq: &[ControlVector]) -> f64 {
        let Ok(states) = self.rollout(seq) else {
            return f64::INFINITY;
        };
        let w = &self.cfg.weights;
        let positions = self.road_positions(&states);
        let mut j = 0.0;
        let mut prev_r = self.state.r;
        for (x, p) in states.iter().zip(&positions) {
            match self.objective {
                Objective::Automation => {
                    if w.potential > 0.0 {
                        let pr = apf(self.area.distance_to_boundaries(*p), self.plant.apf);
                        j += w.potential * pr * pr;
                    }
                }
                Objective::Driver => {
                    let v = self.area.violation(*p);
                    j += self.cfg.corridor_penalty * v * v;
                }
            }
            let e_lat = p.y - self.reference.lateral;
            let e_v = x.vx - self.reference.speed;
            let yaw_acc = (x.r - prev_r) / self.plant.dt;
            prev_r = x.r;
            j += w.lateral * e_lat * e_lat + w.speed * e_v * e_v + w.yaw_accel * yaw_acc * yaw_acc;
        }
        for u in seq.iter().take(self.cfg.control_horizon) {
            j += w.effort[0] * u.accel * u.accel + w.effort[1] * u.steer * u.steer;
        }
        if j.is_finite() {
            j
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcSolution {
    /// First move of the optimised sequence.
    pub control: ControlVector,
    pub sequence: Vec<ControlVector>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted iterate.
    #[serde(skip)]
    pub history: Vec<f64>,
}

fn scale(bounds: &ActuatorBounds) -> ([f64; 2], [f64; 2]) {
    let mid = [
        0.5 * (bounds.accel[0] + bounds.accel[1]),
        0.5 * (bounds.steer[0] + bounds.steer[1]),
    ];
    let half = [
        0.5 * (bounds.accel[1] - bounds.accel[0]),
        0.5 * (bounds.steer[1] - bounds.steer[0]),
    ];
    (mid, half)
}

fn to_controls(z: &[f64], mid: [f64; 2], half: [f64; 2], bounds: &ActuatorBounds) -> Vec<ControlVector> {
    z.chunks(2)
        .map(|c| bounds.clip(ControlVector::new(mid[0] + half[0] * c[0], mid[1] + half[1] * c[1])))
        .collect()
}

fn to_normalized(seq: &[ControlVector], mid: [f64; 2], half: [f64; 2]) -> Vec<f64> {
    seq.iter()
        .flat_map(|u| [(u.accel - mid[0]) / half[0], (u.steer - mid[1]) / half[1]])
        .map(|v| v.clamp(-1.0, 1.0))
        .collect()
}

/// Solves from the cheapest of the supplied initial sequences.
pub fn solve(problem: &MpcProblem, starts: &[Vec<ControlVector>]) -> MpcSolution {
    let cfg = problem.cfg;
    let bounds = &cfg.bounds;
    let (mid, half) = scale(bounds);
    let n = 2 * cfg.control_horizon;

    let mut best_start = vec![0.0; n];
    let mut best_cost = f64::INFINITY;
    for s in starts {
        if s.len() != cfg.control_horizon {
            continue;
        }
        let z = to_normalized(s, mid, half);
        let c = problem.cost(&to_controls(&z, mid, half, bounds));
        if c < best_cost {
            best_cost = c;
            best_start = z;
        }
    }

    let f = |z: &[f64]| problem.cost(&to_controls(z, mid, half, bounds));
    let m = solver::minimize(f, &best_start, &vec![-1.0; n], &vec![1.0; n], &cfg.solver);
    let sequence = to_controls(&m.x, mid, half, bounds);
    MpcSolution {
        control: sequence[0],
        sequence,
        cost: m.value,
        iterations: m.iterations,
        converged: m.converged,
        history: m.history,
    }
}

fn held(u: ControlVector, n: usize) -> Vec<ControlVector> {
    vec![u; n]
}

#[allow(clippy::too_many_arguments)]
fn one_shot(
    objective: Objective,
    state: &VehicleState,
    station: f64,
    reference: &Reference,
    area: &SafeArea,
    prev_u: &ControlVector,
    cfg: &MpcConfig,
    plant: Plant,
) -> MpcSolution {
    let problem = MpcProblem {
        objective,
        state: *state,
        station,
        reference: *reference,
        area,
        plant,
        cfg,
    };
    let n = cfg.control_horizon;
    solve(&problem, &[held(*prev_u, n), held(ControlVector::ZERO, n)])
}

/// Desired automation control, warm-started from the previous applied move.
pub fn automation_mpc(
    state: &VehicleState,
    station: f64,
    reference: &Reference,
    area: &SafeArea,
    prev_u: &ControlVector,
    cfg: &MpcConfig,
    plant: Plant,
) -> MpcSolution {
    one_shot(
        Objective::Automation,
        state,
        station,
        reference,
        area,
        prev_u,
        cfg,
        plant,
    )
}

/// Desired driver control.
pub fn driver_mpc(
    state: &VehicleState,
    station: f64,
    reference: &Reference,
    area: &SafeArea,
    prev_u: &ControlVector,
    cfg: &MpcConfig,
    plant: Plant,
) -> MpcSolution {
    one_shot(Objective::Driver, state, station, reference, area, prev_u, cfg, plant)
}

/// Receding-horizon controller that keeps its last optimal sequence for warm
/// starts. One instance per simulated agent.
#[derive(Debug, Clone)]
pub struct MpcController {
    pub objective: Objective,
    pub cfg: MpcConfig,
    previous: Option<Vec<ControlVector>>,
}

impl MpcController {
    pub fn new(objective: Objective, cfg: MpcConfig) -> Self {
        MpcController {
            objective,
            cfg,
            previous: None,
        }
    }

    /// Previous solution advanced by one step, the last move repeated.
    pub fn shifted_warm_start(&self) -> Option<Vec<ControlVector>> {
        self.previous.as_ref().map(|p| {
            let mut s: Vec<ControlVector> = p.iter().skip(1).copied().collect();
            s.push(*p.last().expect("non-empty sequence"));
            s
        })
    }

    pub fn solve(
        &mut self,
        state: &VehicleState,
        station: f64,
        reference: &Reference,
        area: &SafeArea,
        plant: Plant,
    ) -> MpcSolution {
        let problem = MpcProblem {
            objective: self.objective,
            state: *state,
            station,
            reference: *reference,
            area,
            plant,
            cfg: &self.cfg,
        };
        let n = self.cfg.control_horizon;
        let mut starts = Vec::with_capacity(2);
        if let Some(w) = self.shifted_warm_start() {
            starts.push(w);
        }
        starts.push(held(ControlVector::ZERO, n));
        let sol = solve(&problem, &starts);
        self.previous = Some(sol.sequence.clone());
        sol
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }
}
