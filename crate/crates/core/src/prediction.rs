//! Constant-turn-rate-and-acceleration (CTRA) prediction.
//!
//! Positions are expressed in whatever planar frame the caller supplies
//! together with the road heading at the seed. The simulator feeds road-frame
//! `(s, d)` coordinates and the road tangent, so the predicted heading is
//! returned relative to the road: `psi* + tau * r` with
//! `psi* = psi - psi_road`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{step, ControlVector, DynamicsError, VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CtraState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
    pub accel: f64,
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionConfig {
    /// Prediction horizon `tau_p` (s).
    pub horizon: f64,
    /// Below this yaw rate magnitude the straight-line limit is used.
    pub yaw_rate_eps: f64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            horizon: 0.5,
            yaw_rate_eps: 1e-4,
        }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.horizon > 0.0) {
            return Err("prediction horizon must be positive".into());
        }
        if !(self.yaw_rate_eps > 0.0) {
            return Err("yaw_rate_eps must be positive".into());
        }
        Ok(())
    }
}

/// Advances the bicycle model one step under the degraded control and packs
/// the result as a CTRA seed (global frame, absolute heading).
pub fn seed_from_degraded_control(
    state: &VehicleState,
    u_f: &ControlVector,
    params: &VehicleParams,
    dt: f64,
) -> Result<CtraState, DynamicsError> {
    let next = step(state, u_f, dt, params)?;
    Ok(CtraState {
        x: next.x,
        y: next.y,
        psi: next.psi,
        v: next.vx,
        accel: u_f.accel,
        yaw_rate: next.r,
    })
}

/// Closed-form CTRA propagation over `cfg.horizon`.
pub fn ctra_predict(seed: &CtraState, psi_road: f64, cfg: &PredictionConfig) -> CtraState {
    let tau = cfg.horizon;
    let (v, a, r) = (seed.v, seed.accel, seed.yaw_rate);
    let psi_rel = seed.psi - psi_road;
    let (dx, dy) = if r.abs() < cfg.yaw_rate_eps {
        let travel = v * tau + 0.5 * a * tau * tau;
        (travel * psi_rel.cos(), travel * psi_rel.sin())
    } else {
        let (sin0, cos0) = psi_rel.sin_cos();
        let (sin1, cos1) = (psi_rel + tau * r).sin_cos();
        let inv_r2 = 1.0 / (r * r);
        let dx = inv_r2 * ((v * r + a * r * tau) * sin1 + a * cos1 - v * r * sin0 - a * cos0);
        let dy = inv_r2 * ((-v * r - a * r * tau) * cos1 + a * sin1 + v * r * cos0 - a * sin0);
        (dx, dy)
    };
    CtraState {
        x: seed.x + dx,
        y: seed.y + dy,
        psi: psi_rel + tau * r,
        v: v + a * tau,
        accel: a,
        yaw_rate: r,
    }
}

/// Kinematic state of a surrounding vehicle in the road frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NeighborKinematics {
    pub s: f64,
    pub d: f64,
    /// Heading relative to the road.
    pub psi: f64,
    pub v: f64,
    pub accel: f64,
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedAgent {
    pub s: f64,
    pub d: f64,
    pub v: f64,
}

/// Neighbours are propagated with the same CTRA closed form; a
/// constant-velocity lane keeper reduces to a straight advance.
pub fn predict_neighbor(n: &NeighborKinematics, cfg: &PredictionConfig) -> PredictedAgent {
    let seed = CtraState {
        x: n.s,
        y: n.d,
        psi: n.psi,
        v: n.v,
        accel: n.accel,
        yaw_rate: n.yaw_rate,
    };
    let p = ctra_predict(&seed, 0.0, cfg);
    PredictedAgent { s: p.x, d: p.y, v: p.v }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PredictionConfig {
        PredictionConfig::default()
    }

    fn seed(v: f64, a: f64, r: f64, psi: f64) -> CtraState {
        CtraState {
            x: 0.0,
            y: 0.0,
            psi,
            v,
            accel: a,
            yaw_rate: r,
        }
    }

    /// Reference integration of the CTRA ODE with small RK4 steps.
    fn integrate(s: &CtraState, psi_road: f64, tau: f64) -> (f64, f64) {
        let n = 20_000;
        let h = tau / n as f64;
        let f = |st: [f64; 4]| -> [f64; 4] { [st[3] * st[2].cos(), st[3] * st[2].sin(), s.yaw_rate, s.accel] };
        let mut st = [0.0, 0.0, s.psi - psi_road, s.v];
        for _ in 0..n {
            let k1 = f(st);
            let add =
                |a: [f64; 4], k: [f64; 4], c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2], a[3] + c * k[3]];
            let k2 = f(add(st, k1, 0.5 * h));
            let k3 = f(add(st, k2, 0.5 * h));
            let k4 = f(add(st, k3, h));
            for i in 0..4 {
                st[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        (st[0], st[1])
    }

    #[test]
    fn straight_line_limit() {
        let p = ctra_predict(&seed(15.0, 0.0, 0.0, 0.0), 0.0, &cfg());
        assert_eq!((p.x, p.y), (7.5, 0.0));
    }

    #[test]
    fn circular_arc_endpoint() {
        let p = ctra_predict(&seed(10.0, 0.0, 0.2, 0.0), 0.0, &cfg());
        assert!((p.x - 4.991670832341407).abs() < 1e-9);
        assert!((p.y - 0.24979173609870897).abs() < 1e-9);
    }

    #[test]
    fn endpoint_on_turning_circle() {
        for &(v, r, psi) in &[(10.0, 0.2, 0.0), (14.0, -0.7, 0.3), (8.0, 1.3, -1.0)] {
            let s = seed(v, 0.0, r, psi);
            let p = ctra_predict(&s, 0.0, &cfg());
            let radius = v / r.abs();
            // Centre lies a radius to the turning side of the start.
            let side = r.signum();
            let cx = -side * radius * psi.sin();
            let cy = side * radius * psi.cos();
            let d = ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt();
            assert!((d - radius).abs() < 1e-9, "{d} vs {radius}");
        }
    }

    #[test]
    fn matches_numerical_integration() {
        for &(v, a, r, psi, road) in &[
            (15.0, 0.0, 0.3, 0.0, 0.0),
            (12.0, 2.5, -0.4, 0.2, 0.1),
            (20.0, -3.0, 1.1, -0.3, 0.5),
            (9.0, 1.0, 0.0, 0.05, 0.0),
        ] {
            let s = seed(v, a, r, psi);
            let p = ctra_predict(&s, road, &cfg());
            let (x, y) = integrate(&s, road, cfg().horizon);
            assert!((p.x - x).abs() < 1e-9, "x {} vs {}", p.x, x);
            assert!((p.y - y).abs() < 1e-9, "y {} vs {}", p.y, y);
        }
    }

    #[test]
    fn continuous_at_degeneracy_threshold() {
        let c = cfg();
        let limit = ctra_predict(&seed(15.0, 1.0, 0.0, 0.1), 0.0, &c);
        for r in [1.01 * c.yaw_rate_eps, -1.01 * c.yaw_rate_eps] {
            let p = ctra_predict(&seed(15.0, 1.0, r, 0.1), 0.0, &c);
            assert!((p.x - limit.x).abs() < 1e-4);
            assert!((p.y - limit.y).abs() < 1e-4);
        }
    }

    #[test]
    fn invariants_speed_and_heading() {
        let p = ctra_predict(&seed(13.0, 0.0, 0.4, 0.0), 0.0, &cfg());
        assert_eq!(p.v, 13.0);
        let p = ctra_predict(&seed(13.0, 2.0, 0.0, 0.25), 0.0, &cfg());
        assert_eq!(p.psi, 0.25);
    }

    #[test]
    fn heading_is_road_relative() {
        let p = ctra_predict(&seed(10.0, 0.0, 0.2, 0.7), 0.5, &cfg());
        assert!((p.psi - (0.2 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn seed_matches_one_dynamics_step() {
        let params = VehicleParams::default();
        let state = VehicleState::new(0.0, 1.75, 0.0, 15.0, 0.0, 0.0);
        let u = ControlVector::new(0.0, 0.0);
        let s = seed_from_degraded_control(&state, &u, &params, 0.05).unwrap();
        assert_eq!(s.yaw_rate, 0.0);
        assert_eq!(s.v, 15.0);

        let u = ControlVector::new(1.5, 0.3);
        let s = seed_from_degraded_control(&state, &u, &params, 0.05).unwrap();
        let n = step(&state, &u, 0.05, &params).unwrap();
        assert!(s.yaw_rate > 0.0);
        assert_eq!((s.x, s.y, s.psi, s.v, s.yaw_rate), (n.x, n.y, n.psi, n.vx, n.r));
        assert_eq!(s.accel, 1.5);
    }

    #[test]
    fn neighbour_advance_and_gap() {
        let c = cfg();
        let preceding = NeighborKinematics {
            s: 38.0,
            d: 1.75,
            v: 12.0,
            ..Default::default()
        };
        let p = predict_neighbor(&preceding, &c);
        assert_eq!(p.s, 44.0);
        let ego = predict_neighbor(
            &NeighborKinematics {
                s: 0.0,
                d: 1.75,
                v: 15.0,
                ..Default::default()
            },
            &c,
        );
        assert_eq!(p.s - ego.s, 36.5);
        assert_eq!(ego.v - p.v, 3.0);
    }
}
