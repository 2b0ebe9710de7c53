//! Per-step trace records, the run summary, and their file formats.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlVector, VehicleState};

/// Road-frame snapshot of a neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborSample {
    pub s: f64,
    pub d: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub time: f64,
    pub ego: VehicleState,
    pub station: f64,
    pub lateral: f64,
    pub preceding: Option<NeighborSample>,
    pub leader: Option<NeighborSample>,
    pub follower: Option<NeighborSample>,
    pub u_a_des: ControlVector,
    pub u_a_f: ControlVector,
    pub u_a_act: ControlVector,
    pub u_h_des: ControlVector,
    pub u_h_act: ControlVector,
    pub u: ControlVector,
    pub predicted_station: f64,
    pub predicted_lateral: f64,
    pub r_y: f64,
    pub r_x: f64,
    pub alpha: f64,
    pub violation: f64,
    /// Bumper-to-bumper gap to the preceding vehicle.
    pub gap_preceding: Option<f64>,
    /// Allocation branch per channel (1-3), 0 when allocation is bypassed.
    pub branch_accel: u8,
    pub branch_steer: u8,
    pub automation_converged: bool,
    pub driver_converged: bool,
    /// The corridor of an earlier step was reused.
    pub corridor_fallback: bool,
}

impl TraceRecord {
    pub const HEADER: [&'static str; 43] = [
        "step",
        "time",
        "x",
        "y",
        "psi",
        "vx",
        "vy",
        "r",
        "station",
        "lateral",
        "preceding_s",
        "preceding_d",
        "preceding_v",
        "leader_s",
        "leader_d",
        "leader_v",
        "follower_s",
        "follower_d",
        "follower_v",
        "a_a_des",
        "delta_a_des",
        "a_a_f",
        "delta_a_f",
        "a_a_act",
        "delta_a_act",
        "a_h_des",
        "delta_h_des",
        "a_h_act",
        "delta_h_act",
        "a",
        "delta",
        "predicted_station",
        "predicted_lateral",
        "r_y",
        "r_x",
        "alpha",
        "violation",
        "gap_preceding",
        "branch_accel",
        "branch_steer",
        "automation_converged",
        "driver_converged",
        "corridor_fallback",
    ];

    /// Every float that must stay finite.
    pub fn floats(&self) -> Vec<f64> {
        let mut v = vec![self.time];
        v.extend(self.ego.as_array());
        v.extend([self.station, self.lateral]);
        for c in [
            self.u_a_des,
            self.u_a_f,
            self.u_a_act,
            self.u_h_des,
            self.u_h_act,
            self.u,
        ] {
            v.extend([c.accel, c.steer]);
        }
        v.extend([
            self.predicted_station,
            self.predicted_lateral,
            self.r_y,
            self.r_x,
            self.alpha,
            self.violation,
        ]);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.floats().iter().all(|x| x.is_finite())
    }

    fn row(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:.11e}");
        let opt = |n: Option<NeighborSample>| match n {
            Some(n) => vec![f(n.s), f(n.d), f(n.v)],
            None => vec![String::new(); 3],
        };
        let mut r = vec![self.step.to_string(), f(self.time)];
        r.extend(self.ego.as_array().map(f));
        r.extend([f(self.station), f(self.lateral)]);
        r.extend(opt(self.preceding));
        r.extend(opt(self.leader));
        r.extend(opt(self.follower));
        for c in [
            self.u_a_des,
            self.u_a_f,
            self.u_a_act,
            self.u_h_des,
            self.u_h_act,
            self.u,
        ] {
            r.extend([f(c.accel), f(c.steer)]);
        }
        r.extend([
            f(self.predicted_station),
            f(self.predicted_lateral),
            f(self.r_y),
            f(self.r_x),
            f(self.alpha),
            f(self.violation),
            self.gap_preceding.map(f).unwrap_or_default(),
            self.branch_accel.to_string(),
            self.branch_steer.to_string(),
            u8::from(self.automation_converged).to_string(),
            u8::from(self.driver_converged).to_string(),
            u8::from(self.corridor_fallback).to_string(),
        ]);
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub mode: String,
    pub steps: usize,
    pub duration: f64,
    pub min_gap_preceding: Option<f64>,
    pub max_lateral_deviation: f64,
    pub max_violation: f64,
    pub collision: bool,
    pub max_r_y: f64,
    pub max_r_x: f64,
    pub min_alpha: Option<f64>,
    pub max_alpha: Option<f64>,
    pub max_abs_u_h_act: f64,
    pub corridor_fallbacks: usize,
    pub automation_unconverged: usize,
    pub driver_unconverged: usize,
    pub final_speed: f64,
    pub final_station: f64,
    pub final_lateral: f64,
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TraceRecord::HEADER)?;
    for rec in trace {
        w.write_record(rec.row())?;
    }
    w.flush()
}

pub fn write_summary_json(path: &Path, summary: &Summary) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    writeln!(f)
}

/// CSV bytes of a trace, for in-memory comparisons.
pub fn trace_csv_bytes(trace: &[TraceRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TraceRecord::HEADER).expect("in-memory write");
    for rec in trace {
        w.write_record(rec.row()).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
