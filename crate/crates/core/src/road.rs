//! Road layouts and the curvilinear (station, lateral offset) frame.
//!
//! Every road is parameterised by a station `s` along the road and a lateral
//! offset `d` measured from the right road edge, positive to the left. Lane
//! `i` spans `d ∈ [i·w, (i+1)·w]`. Risk and corridor geometry are computed in
//! `(s, d)` so the straight-road formulas carry over to curves unchanged.
//!
//! For a constant-radius curve the station is arc length along the lane-0
//! centreline, which has radius `R`; other lanes are concentric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Point};

#[derive(Debug, Error, PartialEq)]
pub enum RoadError {
    #[error("station {station} outside road extent [{start}, {end}]")]
    Extent { station: f64, start: f64, end: f64 },
    #[error("lane index {index} out of range for {count} lanes")]
    LaneIndex { index: usize, count: usize },
    #[error("invalid road: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Turn {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoadKind {
    Straight,
    Curve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadModel {
    #[serde(default = "default_kind")]
    pub kind: RoadKind,
    #[serde(default = "default_lane_width")]
    pub lane_width: f64,
    #[serde(default = "default_lane_count")]
    pub lane_count: usize,
    /// Radius of the lane-0 centreline, curves only.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_turn")]
    pub turn: Turn,
    /// Global position of station 0 on the right road edge.
    #[serde(default)]
    pub origin: [f64; 2],
    /// Global heading of the road at station 0 (rad).
    #[serde(default)]
    pub heading: f64,
    #[serde(default = "default_start")]
    pub start: f64,
    #[serde(default = "default_end")]
    pub end: f64,
}

fn default_kind() -> RoadKind {
    RoadKind::Straight
}
fn default_lane_width() -> f64 {
    3.5
}
fn default_lane_count() -> usize {
    2
}
fn default_radius() -> f64 {
    60.0
}
fn default_turn() -> Turn {
    Turn::Left
}
fn default_start() -> f64 {
    -100.0
}
fn default_end() -> f64 {
    2000.0
}

impl Default for RoadModel {
    fn default() -> Self {
        RoadModel::straight(default_lane_width(), default_lane_count())
    }
}

impl RoadModel {
    pub fn straight(lane_width: f64, lane_count: usize) -> Self {
        RoadModel {
            kind: RoadKind::Straight,
            radius: default_radius(),
            turn: default_turn(),
            lane_width,
            lane_count,
            origin: [0.0, 0.0],
            heading: 0.0,
            start: default_start(),
            end: default_end(),
        }
    }

    pub fn curve(radius: f64, turn: Turn, lane_width: f64, lane_count: usize) -> Self {
        RoadModel {
            kind: RoadKind::Curve,
            radius,
            turn,
            ..RoadModel::straight(lane_width, lane_count)
        }
    }

    pub fn validate(&self, vehicle_width: f64) -> Result<(), RoadError> {
        if !(self.lane_width > vehicle_width) {
            return Err(RoadError::Invalid(format!(
                "lane width {} must exceed vehicle width {}",
                self.lane_width, vehicle_width
            )));
        }
        if self.lane_count == 0 {
            return Err(RoadError::Invalid("lane_count must be at least 1".into()));
        }
        if !(self.end > self.start) {
            return Err(RoadError::Invalid("road end must exceed start".into()));
        }
        if self.kind == RoadKind::Curve {
            let radius = self.radius;
            if !(radius > 0.0) {
                return Err(RoadError::Invalid("curve radius must be positive".into()));
            }
            let inner = radius - (self.width() - 0.5 * self.lane_width);
            let outer = radius + 0.5 * self.lane_width;
            if inner <= 0.0 || outer <= 0.0 {
                return Err(RoadError::Invalid("curve radius too small for the road width".into()));
            }
        }
        Ok(())
    }

    /// Total road width.
    pub fn width(&self) -> f64 {
        self.lane_width * self.lane_count as f64
    }

    /// Lateral offset of a lane centreline.
    pub fn lane_offset(&self, lane_index: usize) -> Result<f64, RoadError> {
        if lane_index >= self.lane_count {
            return Err(RoadError::LaneIndex {
                index: lane_index,
                count: self.lane_count,
            });
        }
        Ok((lane_index as f64 + 0.5) * self.lane_width)
    }

    fn check_extent(&self, s: f64) -> Result<(), RoadError> {
        if s < self.start || s > self.end || !s.is_finite() {
            return Err(RoadError::Extent {
                station: s,
                start: self.start,
                end: self.end,
            });
        }
        Ok(())
    }

    /// Signed curvature of the lane-0 centreline, 0 for straight roads.
    fn curvature(&self) -> f64 {
        match self.kind {
            RoadKind::Straight => 0.0,
            RoadKind::Curve => self.turn_sign() / self.radius,
        }
    }

    fn turn_sign(&self) -> f64 {
        match self.turn {
            Turn::Left => 1.0,
            Turn::Right => -1.0,
        }
    }

    /// Tangent direction of the road at a station.
    pub fn road_heading(&self, s: f64) -> Result<f64, RoadError> {
        self.check_extent(s)?;
        Ok(self.heading + s * self.curvature())
    }

    /// Heading without the extent check, used inside solvers where a rollout
    /// may briefly leave the modelled stretch.
    pub(crate) fn heading_unchecked(&self, s: f64) -> f64 {
        self.heading + s * self.curvature()
    }

    pub fn lane_center(&self, lane_index: usize, s: f64) -> Result<Point, RoadError> {
        let d = self.lane_offset(lane_index)?;
        self.check_extent(s)?;
        Ok(self.to_global(s, d))
    }

    /// Maps road-frame `(s, d)` to global coordinates.
    pub fn to_global(&self, s: f64, d: f64) -> Point {
        let (sin0, cos0) = self.heading.sin_cos();
        let o = Point::new(self.origin[0], self.origin[1]);
        match self.kind {
            RoadKind::Straight => Point::new(o.x + s * cos0 - d * sin0, o.y + s * sin0 + d * cos0),
            RoadKind::Curve => {
                let (radius, sign) = (self.radius, self.turn_sign());
                let half = 0.5 * self.lane_width;
                // Lane-0 centre at station 0 sits half a lane left of the origin.
                let c0 = Point::new(o.x - half * sin0, o.y + half * cos0);
                let center = Point::new(c0.x - sign * radius * sin0, c0.y + sign * radius * cos0);
                let rho = radius - sign * (d - half);
                let phi = self.heading - sign * std::f64::consts::FRAC_PI_2 + s * sign / radius;
                Point::new(center.x + rho * phi.cos(), center.y + rho * phi.sin())
            }
        }
    }

    /// Maps a global point to road-frame `(s, d)`. On a curve the station is
    /// ambiguous modulo one revolution; the representative nearest
    /// `station_hint` is returned.
    pub fn to_road(&self, p: Point, station_hint: f64) -> (f64, f64) {
        let (sin0, cos0) = self.heading.sin_cos();
        let o = Point::new(self.origin[0], self.origin[1]);
        match self.kind {
            RoadKind::Straight => {
                let dx = p.x - o.x;
                let dy = p.y - o.y;
                (dx * cos0 + dy * sin0, -dx * sin0 + dy * cos0)
            }
            RoadKind::Curve => {
                let (radius, sign) = (self.radius, self.turn_sign());
                let half = 0.5 * self.lane_width;
                let c0 = Point::new(o.x - half * sin0, o.y + half * cos0);
                let center = Point::new(c0.x - sign * radius * sin0, c0.y + sign * radius * cos0);
                let rel = p - center;
                let rho = rel.x.hypot(rel.y);
                let phi = rel.y.atan2(rel.x);
                let phi0 = self.heading - sign * std::f64::consts::FRAC_PI_2;
                let hint_phi = phi0 + sign * station_hint / radius;
                let dphi = wrap_angle(phi - hint_phi);
                let s = station_hint + sign * dphi * radius;
                let d = half + sign * (radius - rho);
                (s, d)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: f64 = 3.5;

    #[test]
    fn straight_heading_is_zero_everywhere() {
        let road = RoadModel::straight(W, 2);
        for s in [0.0, 12.5, 300.0] {
            assert_eq!(road.road_heading(s).unwrap(), 0.0);
        }
    }

    #[test]
    fn curve_heading_is_arc_over_radius() {
        let road = RoadModel::curve(60.0, Turn::Left, W, 2);
        assert_eq!(road.road_heading(0.0).unwrap(), 0.0);
        assert!((road.road_heading(30.0).unwrap() - 0.5).abs() < 1e-15);
        let h1 = road.road_heading(17.0).unwrap();
        let h2 = road.road_heading(41.0).unwrap();
        assert!(((h2 - h1) - 24.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_extent_is_an_error() {
        let road = RoadModel::straight(W, 2);
        assert!(matches!(road.road_heading(5000.0), Err(RoadError::Extent { .. })));
    }

    #[test]
    fn straight_lane_centres() {
        let road = RoadModel::straight(W, 2);
        assert_eq!(road.lane_center(0, 10.0).unwrap(), Point::new(10.0, W / 2.0));
        assert_eq!(road.lane_center(1, 0.0).unwrap(), Point::new(0.0, 1.5 * W));
        assert!(matches!(
            road.lane_center(2, 0.0),
            Err(RoadError::LaneIndex { index: 2, count: 2 })
        ));
    }

    #[test]
    fn curve_lane_zero_on_entry_tangent() {
        let road = RoadModel::curve(60.0, Turn::Left, W, 2);
        let p = road.lane_center(0, 0.0).unwrap();
        // Centre of curvature is R to the left of the lane-0 entry point.
        let center = Point::new(0.0, W / 2.0 + 60.0);
        assert!((p.dist(center) - 60.0).abs() < 1e-12);
        assert!(p.x.abs() < 1e-12);
    }

    #[test]
    fn adjacent_lanes_one_width_apart() {
        for road in [
            RoadModel::straight(W, 3),
            RoadModel::curve(60.0, Turn::Left, W, 3),
            RoadModel::curve(80.0, Turn::Right, W, 3),
        ] {
            for s in [0.0, 7.0, 55.0, 140.0] {
                let a = road.lane_center(0, s).unwrap();
                let b = road.lane_center(1, s).unwrap();
                let c = road.lane_center(2, s).unwrap();
                assert!((a.dist(b) - W).abs() < 1e-9);
                assert!((b.dist(c) - W).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn frame_round_trip() {
        for road in [
            RoadModel::straight(W, 2),
            RoadModel::curve(60.0, Turn::Left, W, 2),
            RoadModel::curve(60.0, Turn::Right, W, 2),
        ] {
            for &(s, d) in &[(0.0, 1.0), (25.0, 5.0), (250.0, -0.4), (-30.0, 3.3)] {
                let p = road.to_global(s, d);
                let (s2, d2) = road.to_road(p, s + 3.0);
                assert!((s - s2).abs() < 1e-9, "{s} vs {s2}");
                assert!((d - d2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn curve_tangent_matches_heading() {
        let road = RoadModel::curve(60.0, Turn::Left, W, 2);
        let s = 40.0;
        let h = 1e-6;
        let a = road.to_global(s - h, W / 2.0);
        let b = road.to_global(s + h, W / 2.0);
        let dir = (b.y - a.y).atan2(b.x - a.x);
        assert!((dir - road.road_heading(s).unwrap()).abs() < 1e-6);
        // Unit speed along lane 0.
        assert!((a.dist(b) / (2.0 * h) - 1.0).abs() < 1e-6);
    }
}
