//! Safe driving corridor: a triangle channel through the triangulated free
//! space of the road, from the ego position to a goal region behind the
//! preceding vehicle, bounded above and below by lateral polylines.
//!
//! All coordinates are road-frame `(s, d)`.

mod cdt;

pub use cdt::Triangulation;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_in_polygon, polyline_distance, Point, Rect};
use crate::road::RoadModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SafeAreaError {
    #[error("obstacles {0} and {1} overlap or touch")]
    Overlap(usize, usize),
    #[error("obstacle {0} is not strictly inside the road")]
    OffRoad(usize),
    #[error("invalid triangulation window [{0}, {1}]")]
    Window(f64, f64),
    #[error("{what} ({x}, {y}) is not in free space")]
    Containment { what: &'static str, x: f64, y: f64 },
    #[error("no triangle channel connects the start and the final region")]
    Disconnected,
    #[error("degenerate triangulation: {0}")]
    Degenerate(String),
}

/// A vehicle footprint in the road frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Point,
    pub length: f64,
    pub width: f64,
    /// Longitudinal speed (m/s).
    pub velocity: f64,
}

impl Obstacle {
    pub fn footprint(&self) -> Rect {
        Rect::from_center(self.center, self.length, self.width)
    }
}

/// Extra longitudinal room kept around an obstacle that crosses the window
/// edge.
const WINDOW_MARGIN: f64 = 1.0;

/// Triangulates the road between stations `window.0` and `window.1`, with the
/// obstacle footprints as holes. The window grows to contain any obstacle
/// that straddles its ends; obstacles entirely outside are ignored.
pub fn triangulate(
    road: &RoadModel,
    obstacles: &[Obstacle],
    window: (f64, f64),
) -> Result<Triangulation, SafeAreaError> {
    let (mut lo, mut hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(SafeAreaError::Window(lo, hi));
    }
    let width = road.width();
    let mut holes = Vec::new();
    let mut ids = Vec::new();
    for (i, o) in obstacles.iter().enumerate() {
        let r = o.footprint();
        if !(r.min.y > 0.0 && r.max.y < width && r.min.x.is_finite() && r.max.x.is_finite()) {
            return Err(SafeAreaError::OffRoad(i));
        }
        if r.max.x <= window.0 || r.min.x >= window.1 {
            continue;
        }
        lo = lo.min(r.min.x - WINDOW_MARGIN);
        hi = hi.max(r.max.x + WINDOW_MARGIN);
        holes.push(r);
        ids.push(i);
    }
    for a in 0..holes.len() {
        for b in a + 1..holes.len() {
            if holes[a].touches(&holes[b]) {
                return Err(SafeAreaError::Overlap(ids[a], ids[b]));
            }
        }
    }
    let rect = Rect {
        min: Point::new(lo, 0.0),
        max: Point::new(hi, width),
    };
    cdt::build(rect, &holes)
}

/// Goal point: `clearance` behind the preceding vehicle on the target lateral
/// offset, never behind the start. Without a preceding vehicle it sits near
/// the far end of the window.
pub fn final_point(start: Point, preceding_rear: Option<f64>, lateral: f64, window_end: f64, clearance: f64) -> Point {
    let s = match preceding_rear {
        Some(rear) => rear - clearance,
        None => window_end - 5.0,
    };
    Point::new(s.max(start.x), lateral)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorridorOptions {
    /// Lateral band `[lower, upper]` the corridor is narrowed to where the
    /// band fits inside the free strip.
    pub clip: Option<(f64, f64)>,
    /// The corridor ends at most this far past the goal point.
    pub end_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeArea {
    /// Triangle indices from the start triangle to the goal triangle.
    pub channel: Vec<usize>,
    /// Lateral boundaries, both ordered by increasing station.
    pub upper: Vec<Point>,
    pub lower: Vec<Point>,
    pub start: Point,
    pub goal: Point,
}

impl SafeArea {
    /// A straight strip, mainly for tests and controller set-up.
    pub fn strip(s0: f64, s1: f64, lower: f64, upper: f64) -> Self {
        SafeArea {
            channel: Vec::new(),
            upper: vec![Point::new(s0, upper), Point::new(s1, upper)],
            lower: vec![Point::new(s0, lower), Point::new(s1, lower)],
            start: Point::new(s0, 0.5 * (lower + upper)),
            goal: Point::new(s1, 0.5 * (lower + upper)),
        }
    }

    /// Closed outline: lower boundary forward, upper boundary backward.
    pub fn outline(&self) -> Vec<Point> {
        let mut out = self.lower.clone();
        out.extend(self.upper.iter().rev());
        if let Some(&first) = out.first() {
            out.push(first);
        }
        out.dedup();
        out
    }

    pub fn station_range(&self) -> (f64, f64) {
        let xs = self.lower.iter().chain(&self.upper).map(|p| p.x);
        let lo = xs.clone().fold(f64::INFINITY, f64::min);
        let hi = xs.fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn contains(&self, p: Point) -> bool {
        let outline = self.outline();
        point_in_polygon(p, &outline) || polyline_distance(p, &outline) == 0.0
    }

    /// Distance to the nearest corridor edge; 0 on or outside the boundary.
    pub fn distance_to_boundaries(&self, p: Point) -> f64 {
        let outline = self.outline();
        if point_in_polygon(p, &outline) {
            polyline_distance(p, &outline)
        } else {
            0.0
        }
    }

    /// Distance from `p` to the corridor; 0 inside.
    pub fn violation(&self, p: Point) -> f64 {
        let outline = self.outline();
        if point_in_polygon(p, &outline) {
            0.0
        } else {
            polyline_distance(p, &outline)
        }
    }
}

/// Breadth-first triangle channel from the triangle containing `start` to the
/// one containing `goal`, with lateral boundaries.
pub fn find_corridor(
    tri: &Triangulation,
    start: Point,
    goal: Point,
    opts: &CorridorOptions,
) -> Result<SafeArea, SafeAreaError> {
    let t_s = tri.locate(start).ok_or(SafeAreaError::Containment {
        what: "start point",
        x: start.x,
        y: start.y,
    })?;
    let t_f = tri.locate(goal).ok_or(SafeAreaError::Containment {
        what: "final point",
        x: goal.x,
        y: goal.y,
    })?;

    let channel = bfs(tri, t_s, t_f).ok_or(SafeAreaError::Disconnected)?;
    let (upper, lower) = if channel.len() == 1 {
        triangle_chains(tri, t_s)
    } else {
        strip_bounds(tri, &channel, goal, opts)
    };
    Ok(SafeArea {
        channel,
        upper,
        lower,
        start,
        goal,
    })
}

fn bfs(tri: &Triangulation, from: usize, to: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; tri.len()];
    prev[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(t) = queue.pop_front() {
        if t == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        let mut next: Vec<usize> = tri.neighbors[t].iter().flatten().copied().collect();
        next.sort_unstable();
        for n in next {
            if prev[n] == usize::MAX {
                prev[n] = t;
                queue.push_back(n);
            }
        }
    }
    None
}

/// Splits a triangle outline at its leftmost and rightmost vertices.
fn triangle_chains(tri: &Triangulation, t: usize) -> (Vec<Point>, Vec<Point>) {
    let pts = tri.corners(t);
    let key = |p: &Point| (p.x, p.y);
    let left = (0..3)
        .min_by(|&i, &j| key(&pts[i]).partial_cmp(&key(&pts[j])).unwrap())
        .unwrap();
    let right = (0..3)
        .max_by(|&i, &j| key(&pts[i]).partial_cmp(&key(&pts[j])).unwrap())
        .unwrap();
    // Counter-clockwise from the left vertex runs along the bottom.
    let mut lower = vec![pts[left]];
    let mut i = left;
    while i != right {
        i = (i + 1) % 3;
        lower.push(pts[i]);
    }
    let mut upper = vec![pts[right]];
    while i != left {
        i = (i + 1) % 3;
        upper.push(pts[i]);
    }
    upper.reverse();
    (upper, lower)
}

/// Vertical extent of a triangle at station `x`, if it reaches that far.
fn cross_section(pts: &[Point; 3], x: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..3 {
        let (a, b) = (pts[k], pts[(k + 1) % 3]);
        if x < a.x.min(b.x) || x > a.x.max(b.x) {
            continue;
        }
        let ys = if a.x == b.x {
            [a.y, b.y]
        } else {
            let y = a.y + (x - a.x) * (b.y - a.y) / (b.x - a.x);
            [y, y]
        };
        for y in ys {
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Piecewise-constant boundaries: between consecutive obstacle edges, the
/// free vertical strip that contains the channel.
fn strip_bounds(
    tri: &Triangulation,
    channel: &[usize],
    goal: Point,
    opts: &CorridorOptions,
) -> (Vec<Point>, Vec<Point>) {
    let xs = channel.iter().flat_map(|&t| tri.corners(t)).map(|p| p.x);
    let x_lo = xs.clone().fold(f64::INFINITY, f64::min);
    let x_hi = xs
        .fold(f64::NEG_INFINITY, f64::max)
        .min(goal.x + opts.end_margin)
        .max(goal.x);

    let mut breaks = vec![x_lo, x_hi];
    for o in &tri.obstacles {
        for x in [o.min.x, o.max.x] {
            if x > x_lo && x < x_hi {
                breaks.push(x);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut spans: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let xm = 0.5 * (x0 + x1);
        let y_c = channel_center(tri, channel, xm);
        let mut lower = tri.window.min.y;
        let mut upper = tri.window.max.y;
        for o in &tri.obstacles {
            if o.min.x < x1 && o.max.x > x0 {
                if o.min.y >= y_c {
                    upper = upper.min(o.min.y);
                } else if o.max.y <= y_c {
                    lower = lower.max(o.max.y);
                }
            }
        }
        if let Some((c_lo, c_hi)) = opts.clip {
            let (l, u) = (lower.max(c_lo), upper.min(c_hi));
            if u > l {
                lower = l;
                upper = u;
            }
        }
        match spans.last_mut() {
            Some(last) if last.2 == lower && last.3 == upper => last.1 = x1,
            _ => spans.push((x0, x1, lower, upper)),
        }
    }

    let mut upper_line = Vec::with_capacity(2 * spans.len());
    let mut lower_line = Vec::with_capacity(2 * spans.len());
    for &(x0, x1, l, u) in &spans {
        lower_line.push(Point::new(x0, l));
        lower_line.push(Point::new(x1, l));
        upper_line.push(Point::new(x0, u));
        upper_line.push(Point::new(x1, u));
    }
    (upper_line, lower_line)
}

/// Middle of the widest channel cross-section at `x`.
fn channel_center(tri: &Triangulation, channel: &[usize], x: f64) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for &t in channel {
        if let Some((lo, hi)) = cross_section(&tri.corners(t), x) {
            if best.is_none_or(|(blo, bhi)| hi - lo > bhi - blo) {
                best = Some((lo, hi));
            }
        }
    }
    if let Some((lo, hi)) = best {
        return 0.5 * (lo + hi);
    }
    // Nearest covered station of any channel triangle.
    let mut nearest = (f64::INFINITY, 0.5 * (tri.window.min.y + tri.window.max.y));
    for &t in channel {
        let pts = tri.corners(t);
        let tmin = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let tmax = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let xc = x.clamp(tmin, tmax);
        if let Some((lo, hi)) = cross_section(&pts, xc) {
            if (xc - x).abs() < nearest.0 {
                nearest = ((xc - x).abs(), 0.5 * (lo + hi));
            }
        }
    }
    nearest.1
}
