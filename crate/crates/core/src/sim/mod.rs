//! Closed-loop simulation: one automated ego vehicle, constant-velocity
//! neighbours, and either shared control or the automation alone.

mod config;
pub mod sweep;
mod trace;

pub use config::{
    default_automation_mpc, default_driver_mpc, CorridorConfig, EgoConfig, FisConfig, Mode, NeighborConfig,
    ReferenceConfig, ScenarioConfig,
};
pub use trace::{trace_csv_bytes, write_summary_json, write_trace_csv, NeighborSample, Summary, TraceRecord};

use serde::Serialize;
use thiserror::Error;

use crate::authority::{allocate, fis_alpha};
use crate::controllers::{driver_lag_step, MpcController, Objective, Plant, Reference};
use crate::dynamics::{step, ControlVector, VehicleState};
use crate::faults::inject;
use crate::geometry::Point;
use crate::prediction::{ctra_predict, predict_neighbor, seed_from_degraded_control, CtraState, NeighborKinematics};
use crate::risk::{lateral_risk, longitudinal_risk, AgentSnapshot, Role, TaskWeights};
use crate::safe_area::{final_point, find_corridor, triangulate, CorridorOptions, Obstacle, SafeArea, Triangulation};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure at step {step}: {message}")]
    Numerical {
        step: usize,
        message: String,
        /// The record of the offending step, when one was assembled.
        record: Option<Box<TraceRecord>>,
    },
}

/// Keeps the corridor start point off the road edge.
const EDGE_INSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record the triangulation and corridor every this many steps.
    pub geometry_every: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySnapshot {
    pub step: usize,
    pub triangulation: Option<Triangulation>,
    pub corridor: SafeArea,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub summary: Summary,
    pub geometry: Vec<GeometrySnapshot>,
}

#[derive(Debug, Clone, Copy)]
struct Neighbor {
    role: Role,
    s: f64,
    d: f64,
    v: f64,
    length: f64,
    width: f64,
}

impl Neighbor {
    fn sample(&self) -> NeighborSample {
        NeighborSample {
            s: self.s,
            d: self.d,
            v: self.v,
        }
    }

    fn obstacle(&self) -> Obstacle {
        Obstacle {
            center: Point::new(self.s, self.d),
            length: self.length,
            width: self.width,
            velocity: self.v,
        }
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    run_with(cfg, &RunOptions::default())
}

pub fn run_with(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let road = &cfg.road;
    let dt = cfg.dt;
    let width = road.width();
    let lane_d = |lane: usize| road.lane_offset(lane).map_err(|e| SimError::Config(e.to_string()));

    let ego_d = lane_d(cfg.ego.lane)? + cfg.ego.offset;
    let heading = road
        .road_heading(cfg.ego.station)
        .map_err(|e| SimError::Config(e.to_string()))?;
    let p0 = road.to_global(cfg.ego.station, ego_d);
    let mut state = VehicleState::new(p0.x, p0.y, heading + cfg.ego.heading, cfg.ego.speed, 0.0, 0.0);

    let mut neighbors = Vec::with_capacity(cfg.neighbors.len());
    for n in &cfg.neighbors {
        neighbors.push(Neighbor {
            role: n.role,
            s: n.station,
            d: lane_d(n.lane)?,
            v: n.speed,
            length: n.length,
            width: n.width,
        });
    }

    let reference = Reference {
        lateral: lane_d(cfg.reference.lane)?,
        speed: cfg.reference.speed,
    };
    let plant = Plant {
        road,
        vehicle: &cfg.vehicle,
        apf: &cfg.apf,
        dt,
    };
    let weights = TaskWeights::for_task(cfg.task);
    let clearance = cfg.dpf.clearance;
    let clip = cfg.corridor.clip_to_lane.then(|| {
        let i = cfg.reference.lane as f64;
        (i * road.lane_width, (i + 1.0) * road.lane_width)
    });

    let mut automation = MpcController::new(Objective::Automation, cfg.automation_mpc);
    let mut driver = MpcController::new(Objective::Driver, cfg.driver_mpc);
    let mut u_h_act = ControlVector::ZERO;
    let mut previous_area: Option<SafeArea> = None;
    let mut station = cfg.ego.station;

    let steps = cfg.steps();
    let mut trace = Vec::with_capacity(steps);
    let mut geometry = Vec::new();
    let mut collision = false;

    for k in 0..steps {
        let numerical = |message: String, record: Option<TraceRecord>| SimError::Numerical {
            step: k,
            message,
            record: record.map(Box::new),
        };
        let (s, d) = road.to_road(Point::new(state.x, state.y), station);
        station = s;

        // Safe corridor on the time-k snapshot.
        let obstacles: Vec<Obstacle> = neighbors.iter().map(Neighbor::obstacle).collect();
        let window = (s - cfg.corridor.behind, s + cfg.corridor.ahead);
        let start = Point::new(s, d.clamp(EDGE_INSET, width - EDGE_INSET));
        let preceding_rear = neighbors
            .iter()
            .find(|n| n.role == Role::Preceding && n.s > s)
            .map(|n| n.s - 0.5 * n.length);
        let goal = final_point(start, preceding_rear, reference.lateral, window.1, clearance);
        let corridor_opts = CorridorOptions {
            clip,
            end_margin: clearance,
        };
        let tri = triangulate(road, &obstacles, window).ok();
        let fresh = tri
            .as_ref()
            .and_then(|t| find_corridor(t, start, goal, &corridor_opts).ok());
        let corridor_fallback = fresh.is_none();
        let area = match fresh {
            Some(a) => a,
            None => previous_area
                .clone()
                .unwrap_or_else(|| SafeArea::strip(window.0, window.1, 0.0, width)),
        };
        if let Some(every) = opts.geometry_every {
            if every > 0 && k % every == 0 {
                geometry.push(GeometrySnapshot {
                    step: k,
                    triangulation: tri.clone(),
                    corridor: area.clone(),
                });
            }
        }

        // Automation and its degraded output.
        let sol_a = automation.solve(&state, s, &reference, &area, plant);
        let u_a_des = sol_a.control;
        let u_a_f = inject(&u_a_des, k as u64, cfg.fault.as_ref(), &cfg.automation_mpc.bounds);

        // Ego prediction under the degraded output, in the local tangent frame.
        let seed =
            seed_from_degraded_control(&state, &u_a_f, &cfg.vehicle, dt).map_err(|e| numerical(e.to_string(), None))?;
        let (s_seed, _) = road.to_road(Point::new(seed.x, seed.y), s);
        let psi_road = road.heading_unchecked(s_seed);
        let local = ctra_predict(&CtraState { x: 0.0, y: 0.0, ..seed }, psi_road, &cfg.prediction);
        let (sin_r, cos_r) = psi_road.sin_cos();
        let predicted_global = Point::new(
            seed.x + local.x * cos_r - local.y * sin_r,
            seed.y + local.x * sin_r + local.y * cos_r,
        );
        let (pred_s, pred_d) = road.to_road(predicted_global, s_seed);
        let predicted = Point::new(pred_s, pred_d);

        let others: Vec<(Role, AgentSnapshot)> = neighbors
            .iter()
            .map(|n| {
                let p = predict_neighbor(
                    &NeighborKinematics {
                        s: n.s,
                        d: n.d,
                        v: n.v,
                        ..Default::default()
                    },
                    &cfg.prediction,
                );
                (n.role, AgentSnapshot { s: p.s, v: p.v })
            })
            .collect();
        let (_, r_y) = lateral_risk(&area, predicted, &cfg.apf);
        let ego_pred = AgentSnapshot { s: pred_s, v: local.v };
        let (r_x, _) = longitudinal_risk(&ego_pred, &others, &weights, &cfg.dpf);
        let alpha = fis_alpha(r_y, r_x, &cfg.fis.sets, &cfg.fis.rules);

        // Authority allocation and driver compensation.
        let (u_a_act, u_h_des, branches, driver_converged) = match cfg.mode {
            Mode::Shared => {
                let (u_a_act, branches) = allocate(&u_a_des, &u_a_f, alpha, &cfg.allocation);
                let sol_h = driver.solve(&state, s, &reference, &area, plant);
                u_h_act = driver_lag_step(&u_h_act, &(sol_h.control - u_a_act), &cfg.driver, dt);
                (
                    u_a_act,
                    sol_h.control,
                    [branches[0].code(), branches[1].code()],
                    sol_h.converged,
                )
            }
            Mode::AutomationOnly => {
                u_h_act = ControlVector::ZERO;
                (u_a_f, ControlVector::ZERO, [0, 0], true)
            }
        };
        let u = u_a_act + u_h_act;

        let ego_point = Point::new(s, d);
        let violation = area.violation(ego_point);
        let mut gap_preceding = None;
        for n in &neighbors {
            let half_len = 0.5 * (n.length + cfg.vehicle.length);
            let half_wid = 0.5 * (n.width + cfg.vehicle.width);
            if (n.s - s).abs() < half_len && (n.d - d).abs() < half_wid {
                collision = true;
            }
            if n.role == Role::Preceding {
                let gap = n.s - s - half_len;
                if gap < 0.0 && (n.d - d).abs() < half_wid {
                    collision = true;
                }
                gap_preceding = Some(gap);
            }
        }
        let sample = |role: Role| neighbors.iter().find(|n| n.role == role).map(Neighbor::sample);

        let record = TraceRecord {
            step: k,
            time: k as f64 * dt,
            ego: state,
            station: s,
            lateral: d,
            preceding: sample(Role::Preceding),
            leader: sample(Role::Leader),
            follower: sample(Role::Follower),
            u_a_des,
            u_a_f,
            u_a_act,
            u_h_des,
            u_h_act,
            u,
            predicted_station: pred_s,
            predicted_lateral: pred_d,
            r_y,
            r_x,
            alpha,
            violation,
            gap_preceding,
            branch_accel: branches[0],
            branch_steer: branches[1],
            automation_converged: sol_a.converged,
            driver_converged,
            corridor_fallback,
        };
        if !record.is_finite() {
            return Err(numerical("non-finite value in step record".into(), Some(record)));
        }
        state = match step(&state, &u, dt, &cfg.vehicle) {
            Ok(next) => next,
            Err(e) => return Err(numerical(e.to_string(), Some(record))),
        };
        trace.push(record);
        previous_area = Some(area);
        for n in &mut neighbors {
            n.s += n.v * dt;
        }
    }

    let summary = summarize(cfg, &trace, &state, station, &neighbors, &reference, collision);
    Ok(RunOutput {
        trace,
        summary,
        geometry,
    })
}

fn summarize(
    cfg: &ScenarioConfig,
    trace: &[TraceRecord],
    final_state: &VehicleState,
    hint: f64,
    neighbors: &[Neighbor],
    reference: &Reference,
    collision: bool,
) -> Summary {
    let (s, d) = cfg.road.to_road(Point::new(final_state.x, final_state.y), hint);
    let max = |f: &dyn Fn(&TraceRecord) -> f64| trace.iter().map(f).fold(0.0, f64::max);
    let alphas = trace.iter().map(|r| r.alpha);
    let initial_gap = || {
        neighbors
            .iter()
            .find(|n| n.role == Role::Preceding)
            .map(|n| n.s - s - 0.5 * (n.length + cfg.vehicle.length))
    };
    let min_gap_preceding = if trace.is_empty() {
        initial_gap()
    } else {
        trace.iter().filter_map(|r| r.gap_preceding).reduce(f64::min)
    };
    let lateral_dev = if trace.is_empty() {
        (d - reference.lateral).abs()
    } else {
        max(&|r| (r.lateral - reference.lateral).abs())
    };
    Summary {
        name: cfg.name.clone(),
        mode: match cfg.mode {
            Mode::Shared => "shared".into(),
            Mode::AutomationOnly => "automation-only".into(),
        },
        steps: trace.len(),
        duration: cfg.duration,
        min_gap_preceding,
        max_lateral_deviation: lateral_dev,
        max_violation: max(&|r| r.violation),
        collision,
        max_r_y: max(&|r| r.r_y),
        max_r_x: max(&|r| r.r_x),
        min_alpha: alphas.clone().reduce(f64::min),
        max_alpha: alphas.reduce(f64::max),
        max_abs_u_h_act: max(&|r| r.u_h_act.accel.abs().max(r.u_h_act.steer.abs())),
        corridor_fallbacks: trace.iter().filter(|r| r.corridor_fallback).count(),
        automation_unconverged: trace.iter().filter(|r| !r.automation_converged).count(),
        driver_unconverged: trace.iter().filter(|r| !r.driver_converged).count(),
        final_speed: final_state.vx,
        final_station: s,
        final_lateral: d,
    }
}
