//! Randomised invariants that span several modules.

use proptest::prelude::*;

use shared_control::authority::{allocate, AllocationParams, Branch};
use shared_control::controllers::{driver_lag_step, DriverParams};
use shared_control::dynamics::{step, ActuatorBounds, ControlVector, VehicleParams, VehicleState};
use shared_control::faults::{inject, FaultChannel, FaultProfile};
use shared_control::geometry::{Point, Rect};
use shared_control::road::{RoadModel, Turn};
use shared_control::safe_area::{find_corridor, triangulate, CorridorOptions, Obstacle};
use shared_control::sim::ScenarioConfig;

/// Up to three vehicles, one per lane slot, spaced so footprints never touch.
fn obstacles() -> impl Strategy<Value = Vec<Obstacle>> {
    prop::collection::vec((0usize..2, 5.0..20.0f64, -0.4..0.4f64), 0..4).prop_map(|raw| {
        let mut s = 10.0;
        raw.into_iter()
            .map(|(lane, advance, shift)| {
                s += advance;
                Obstacle {
                    center: Point::new(s, 1.875 + 3.75 * lane as f64 + shift),
                    length: 4.5,
                    width: 1.8,
                    velocity: 12.0,
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn triangulation_tiles_free_space(obs in obstacles()) {
        let road = RoadModel::straight(3.75, 2);
        let tri = triangulate(&road, &obs, (0.0, 100.0)).unwrap();
        let sum: f64 = (0..tri.len()).map(|t| tri.area(t)).sum();
        let free = tri.window.area() - tri.obstacles.iter().map(Rect::area).sum::<f64>();
        prop_assert!((sum - free).abs() <= 1e-9 * free);
        for t in 0..tri.len() {
            prop_assert!(tri.area(t) > 0.0);
        }
        for &[u, v] in &tri.constrained {
            prop_assert!(tri.has_edge(u, v));
        }
    }

    #[test]
    fn corridor_avoids_obstacles(obs in obstacles()) {
        let road = RoadModel::straight(3.75, 2);
        let tri = triangulate(&road, &obs, (0.0, 100.0)).unwrap();
        let start = Point::new(1.0, 1.875);
        let goal = Point::new(95.0, 1.875);
        let Ok(area) = find_corridor(&tri, start, goal, &CorridorOptions::default()) else {
            return Ok(());
        };
        prop_assert!(area.contains(start));
        for o in &tri.obstacles {
            let c = Point::new(0.5 * (o.min.x + o.max.x), 0.5 * (o.min.y + o.max.y));
            prop_assert!(!area.contains(c));
        }
    }

    #[test]
    fn allocation_identity_at_full_authority(a in -5.0..5.0f64, d in -0.5..0.5f64) {
        let u = ControlVector::new(a, d);
        let (act, branches) = allocate(&u, &u, 1.0, &AllocationParams::default());
        prop_assert_eq!(act, u);
        prop_assert_eq!(branches, [Branch::Healthy; 2]);
    }

    #[test]
    fn opposite_signs_are_capped(des in 0.01..5.0f64, f in 0.01..5.0f64, alpha in 0.0..=1.0f64) {
        let p = AllocationParams::default();
        let (act, b) = allocate(&ControlVector::new(des, -des), &ControlVector::new(-f, f), alpha, &p);
        prop_assert_eq!(b, [Branch::Capped; 2]);
        prop_assert_eq!(act, ControlVector::new(alpha * des, -alpha * des));
    }

    #[test]
    fn fault_offset_ramps_monotonically(onset in 0u64..50, ramp in 0u64..50, plateau in -3.0..3.0f64, k in 0u64..200) {
        let f = FaultProfile { channel: FaultChannel::Steering, onset, ramp, plateau, scale: None };
        prop_assert!(f.offset(k).abs() <= plateau.abs() + 1e-15);
        prop_assert!(f.progress(k + 1) >= f.progress(k));
        if k < onset {
            prop_assert_eq!(f.offset(k), 0.0);
        }
    }

    #[test]
    fn injection_touches_only_the_faulted_channel(a in -5.0..5.0f64, d in -0.5..0.5f64, k in 0u64..100) {
        let bounds = ActuatorBounds::default();
        let u = ControlVector::new(a, d);
        let out = inject(&u, k, Some(&FaultProfile::steering_bias()), &bounds);
        prop_assert_eq!(out.accel, a);
        prop_assert!(bounds.contains(out));
    }

    #[test]
    fn driver_lag_stays_between_start_and_target(start in -2.0..2.0f64, target in -2.0..2.0f64) {
        let p = DriverParams::default();
        let goal = p.gain * target;
        let (lo, hi) = (start.min(goal), start.max(goal));
        let mut u = ControlVector::new(start, start);
        for _ in 0..100 {
            u = driver_lag_step(&u, &ControlVector::new(target, target), &p, 0.05);
            prop_assert!(u.accel >= lo - 1e-12 && u.accel <= hi + 1e-12);
        }
    }

    #[test]
    fn curve_frame_round_trips(s in 0.0..150.0f64, d in 0.1..7.4f64, left in any::<bool>()) {
        let turn = if left { Turn::Left } else { Turn::Right };
        let road = RoadModel::curve(60.0, turn, 3.75, 2);
        let (s2, d2) = road.to_road(road.to_global(s, d), s);
        prop_assert!((s2 - s).abs() < 1e-9 && (d2 - d).abs() < 1e-9);
    }

    #[test]
    fn bounded_controls_keep_state_finite(
        vx in 5.0..30.0f64,
        vy in -0.5..0.5f64,
        r in -0.3..0.3f64,
        a in -5.0..5.0f64,
        d in -0.1..0.1f64,
    ) {
        let params = VehicleParams::default();
        let mut x = VehicleState::new(0.0, 0.0, 0.0, vx, vy, r);
        for _ in 0..20 {
            x = step(&x, &ControlVector::new(a, d), 0.05, &params).unwrap();
            prop_assert!(x.is_finite());
        }
    }
}

#[test]
fn scenarios_round_trip_through_toml() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for entry in std::fs::read_dir(dir).unwrap() {
        let cfg = ScenarioConfig::load(&entry.unwrap().path()).unwrap();
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }
}
