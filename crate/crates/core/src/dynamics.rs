//! Three-degree-of-freedom dynamic bicycle model with linear tyres.
//!
//! The same model serves as the plant, as the internal model of both MPCs,
//! and as the one-step map that seeds the CTRA prediction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slip angles divide by `v_x`; below this speed the model is rejected.
pub const MIN_SPEED: f64 = 0.5;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DynamicsError {
    #[error("longitudinal speed {0} m/s below model floor {MIN_SPEED} m/s")]
    SpeedFloor(f64),
    #[error("non-finite vehicle state")]
    NonFinite,
    #[error("time step must be positive, got {0}")]
    TimeStep(f64),
}

/// Planar vehicle state: global position, heading, body-frame velocities and
/// yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub r: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, psi: f64, vx: f64, vy: f64, r: f64) -> Self {
        Self { x, y, psi, vx, vy, r }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.x, self.y, self.psi, self.vx, self.vy, self.r]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// CG to front axle (m).
    pub lf: f64,
    /// CG to rear axle (m).
    pub lr: f64,
    pub mass: f64,
    pub yaw_inertia: f64,
    /// Front tyre cornering stiffness (N/rad).
    pub cornering_front: f64,
    pub cornering_rear: f64,
    /// Footprint width, also the `v_w` of the boundary potential field.
    pub width: f64,
    pub length: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            lf: 1.21,
            lr: 1.05,
            mass: 2000.0,
            yaw_inertia: 1300.0,
            cornering_front: 80_000.0,
            cornering_rear: 80_000.0,
            width: 2.0,
            length: 4.5,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.lf,
            self.lr,
            self.mass,
            self.yaw_inertia,
            self.cornering_front,
            self.cornering_rear,
            self.width,
            self.length,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("vehicle parameters must all be positive".into())
        }
    }
}

/// Longitudinal acceleration and front steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlVector {
    pub accel: f64,
    pub steer: f64,
}

impl ControlVector {
    pub const ZERO: ControlVector = ControlVector { accel: 0.0, steer: 0.0 };

    pub fn new(accel: f64, steer: f64) -> Self {
        Self { accel, steer }
    }

    pub fn get(&self, i: usize) -> f64 {
        match i {
            0 => self.accel,
            1 => self.steer,
            _ => panic!("control component {i} out of range"),
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        match i {
            0 => self.accel = v,
            1 => self.steer = v,
            _ => panic!("control component {i} out of range"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.accel.is_finite() && self.steer.is_finite()
    }
}

impl std::ops::Add for ControlVector {
    type Output = ControlVector;
    fn add(self, rhs: ControlVector) -> ControlVector {
        ControlVector::new(self.accel + rhs.accel, self.steer + rhs.steer)
    }
}

impl std::ops::Sub for ControlVector {
    type Output = ControlVector;
    fn sub(self, rhs: ControlVector) -> ControlVector {
        ControlVector::new(self.accel - rhs.accel, self.steer - rhs.steer)
    }
}

/// Box limits on each actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorBounds {
    pub accel: [f64; 2],
    pub steer: [f64; 2],
}

impl Default for ActuatorBounds {
    fn default() -> Self {
        let steer_max = 30.0 * std::f64::consts::PI / 180.0;
        ActuatorBounds {
            accel: [-5.0, 5.0],
            steer: [-steer_max, steer_max],
        }
    }
}

impl ActuatorBounds {
    pub fn lower(&self) -> ControlVector {
        ControlVector::new(self.accel[0], self.steer[0])
    }

    pub fn upper(&self) -> ControlVector {
        ControlVector::new(self.accel[1], self.steer[1])
    }

    pub fn clip(&self, u: ControlVector) -> ControlVector {
        ControlVector::new(
            u.accel.clamp(self.accel[0], self.accel[1]),
            u.steer.clamp(self.steer[0], self.steer[1]),
        )
    }

    pub fn contains(&self, u: ControlVector) -> bool {
        self.clip(u) == u
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.accel[0] < self.accel[1] && self.steer[0] < self.steer[1] {
            Ok(())
        } else {
            Err("actuator bounds must satisfy lower < upper".into())
        }
    }
}

/// Lateral tyre forces `(F_cf, F_cr)` for the current state and steering.
pub fn tyre_forces(state: &VehicleState, steer: f64, params: &VehicleParams) -> Result<(f64, f64), DynamicsError> {
    if !(state.vx >= MIN_SPEED) {
        return Err(DynamicsError::SpeedFloor(state.vx));
    }
    let slip_front = (state.vy + params.lf * state.r) / state.vx - steer;
    let slip_rear = (state.vy - params.lr * state.r) / state.vx;
    Ok((-params.cornering_front * slip_front, -params.cornering_rear * slip_rear))
}

/// Time derivative of the state, in the same field order as [`VehicleState`].
pub fn derivatives(
    state: &VehicleState,
    u: &ControlVector,
    params: &VehicleParams,
) -> Result<VehicleState, DynamicsError> {
    let (f_front, f_rear) = tyre_forces(state, u.steer, params)?;
    let (sin_psi, cos_psi) = state.psi.sin_cos();
    Ok(VehicleState {
        x: state.vx * cos_psi - state.vy * sin_psi,
        y: state.vx * sin_psi + state.vy * cos_psi,
        psi: state.r,
        vx: state.r * state.vy + u.accel,
        vy: -state.r * state.vx + 2.0 / params.mass * (f_front * u.steer.cos() + f_rear),
        r: 2.0 / params.yaw_inertia * (params.lf * f_front - params.lr * f_rear),
    })
}

fn axpy(a: &VehicleState, k: f64, b: &VehicleState) -> VehicleState {
    VehicleState {
        x: a.x + k * b.x,
        y: a.y + k * b.y,
        psi: a.psi + k * b.psi,
        vx: a.vx + k * b.vx,
        vy: a.vy + k * b.vy,
        r: a.r + k * b.r,
    }
}

/// One classical RK4 step with the control held constant.
pub fn step(
    state: &VehicleState,
    u: &ControlVector,
    dt: f64,
    params: &VehicleParams,
) -> Result<VehicleState, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::TimeStep(dt));
    }
    let k1 = derivatives(state, u, params)?;
    let k2 = derivatives(&axpy(state, 0.5 * dt, &k1), u, params)?;
    let k3 = derivatives(&axpy(state, 0.5 * dt, &k2), u, params)?;
    let k4 = derivatives(&axpy(state, dt, &k3), u, params)?;
    let next = VehicleState {
        x: state.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        y: state.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        psi: state.psi + dt / 6.0 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi),
        vx: state.vx + dt / 6.0 * (k1.vx + 2.0 * k2.vx + 2.0 * k3.vx + k4.vx),
        vy: state.vy + dt / 6.0 * (k1.vy + 2.0 * k2.vy + 2.0 * k3.vy + k4.vy),
        r: state.r + dt / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r),
    };
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn straight_steady_motion() {
        let s = VehicleState::new(0.0, 0.0, 0.0, 15.0, 0.0, 0.0);
        let d = derivatives(&s, &ControlVector::ZERO, &params()).unwrap();
        assert_eq!(d, VehicleState::new(15.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn pure_acceleration() {
        let s = VehicleState::new(0.0, 0.0, 0.0, 15.0, 0.0, 0.0);
        let d = derivatives(&s, &ControlVector::new(2.0, 0.0), &params()).unwrap();
        assert_eq!(d.vx, 2.0);
        assert_eq!((d.y, d.psi, d.vy, d.r), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn derivatives_match_scalar_evaluation() {
        // Values from an independent scalar evaluation of the model equations.
        let s = VehicleState::new(0.0, 0.0, 0.0, 15.0, 0.5, 0.1);
        let d = derivatives(&s, &ControlVector::new(0.0, 0.05), &params()).unwrap();
        let expected = [15.0, 0.5, 0.1, 0.05, -2.9195264875149296, 4.683815384615385];
        for (got, want) in d.as_array().iter().zip(expected) {
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn speed_floor_rejected() {
        let s = VehicleState::new(0.0, 0.0, 0.0, 0.4, 0.0, 0.0);
        assert_eq!(
            derivatives(&s, &ControlVector::ZERO, &params()),
            Err(DynamicsError::SpeedFloor(0.4))
        );
        assert!(step(&s, &ControlVector::ZERO, 0.05, &params()).is_err());
    }

    #[test]
    fn zero_input_advances_exactly() {
        let s = VehicleState::new(3.0, 1.0, 0.0, 15.0, 0.0, 0.0);
        let n = step(&s, &ControlVector::ZERO, 0.05, &params()).unwrap();
        assert_eq!(n.x, 3.0 + 15.0 * 0.05);
        assert_eq!((n.y, n.psi, n.vy, n.r), (1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn rk4_matches_fine_substeps() {
        let s = VehicleState::new(0.0, 0.0, 0.1, 15.0, 0.3, 0.05);
        let u = ControlVector::new(1.0, 0.04);
        let coarse = step(&s, &u, 0.05, &params()).unwrap();
        let mut fine = s;
        for _ in 0..50 {
            fine = step(&fine, &u, 0.001, &params()).unwrap();
        }
        for (a, b) in coarse.as_array().iter().zip(fine.as_array()) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn tyre_force_linear_in_slip_inputs() {
        let p = params();
        let base = VehicleState::new(0.0, 0.0, 0.0, 15.0, 0.2, 0.05);
        let doubled = VehicleState {
            vy: 0.4,
            r: 0.1,
            ..base
        };
        let (f1, r1) = tyre_forces(&base, 0.03, &p).unwrap();
        let (f2, r2) = tyre_forces(&doubled, 0.06, &p).unwrap();
        assert!((f2 - 2.0 * f1).abs() < 1e-9 * f1.abs());
        assert!((r2 - 2.0 * r1).abs() < 1e-9 * r1.abs());
    }

    #[test]
    fn bounds_clip() {
        let b = ActuatorBounds::default();
        let u = b.clip(ControlVector::new(9.0, -1.0));
        assert_eq!(u.accel, 5.0);
        assert!((u.steer + 30f64.to_radians()).abs() < 1e-15);
        assert!(b.contains(u));
    }
}
