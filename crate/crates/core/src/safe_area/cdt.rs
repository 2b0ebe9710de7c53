//! Constrained Delaunay triangulation of a rectangle with rectangular holes.
//!
//! Points are inserted incrementally into a bounding super-triangle and
//! legalised with Lawson flips. Missing constraint segments are recovered by
//! flipping the edges that cross them, after which a final flip pass restores
//! the constrained Delaunay property and hole interiors are discarded.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::SafeAreaError;
use crate::geometry::{incircle, orient2d, segments_cross, Point, Rect};

/// Triangulated free space. Triangles are counter-clockwise; `neighbors[t][k]`
/// is the triangle across the edge opposite vertex `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub neighbors: Vec<[Option<usize>; 3]>,
    pub constrained: Vec<[usize; 2]>,
    pub window: Rect,
    pub obstacles: Vec<Rect>,
}

impl Triangulation {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * orient2d(a, b, c)
    }

    /// Closed point-in-triangle test.
    pub fn triangle_contains(&self, t: usize, p: Point) -> bool {
        let [a, b, c] = self.corners(t);
        orient2d(a, b, p) >= 0.0 && orient2d(b, c, p) >= 0.0 && orient2d(c, a, p) >= 0.0
    }

    /// Lowest-index triangle containing `p`.
    pub fn locate(&self, p: Point) -> Option<usize> {
        (0..self.len()).find(|&t| self.triangle_contains(t, p))
    }

    /// Symmetric 0/1 matrix, 1 where two triangles share an edge.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.len();
        let mut d = vec![vec![0u8; n]; n];
        for (t, nb) in self.neighbors.iter().enumerate() {
            for &u in nb.iter().flatten() {
                d[t][u] = 1;
            }
        }
        d
    }

    /// Every undirected edge once, as sorted vertex pairs in first-seen order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                let e = [u.min(v), u.max(v)];
                if seen.insert(e) {
                    out.push(e);
                }
            }
        }
        out
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.triangles.iter().any(|t| {
            (0..3).any(|k| {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                (a == u && b == v) || (a == v && b == u)
            })
        })
    }
}

struct Mesh {
    pts: Vec<Point>,
    tris: Vec<[usize; 3]>,
    alive: Vec<bool>,
    /// Directed edge to the triangle that owns it.
    edge: HashMap<(usize, usize), usize>,
}

impl Mesh {
    fn add(&mut self, t: [usize; 3]) -> usize {
        let id = self.tris.len();
        for k in 0..3 {
            self.edge.insert((t[k], t[(k + 1) % 3]), id);
        }
        self.tris.push(t);
        self.alive.push(true);
        id
    }

    fn kill(&mut self, id: usize) {
        let t = self.tris[id];
        for k in 0..3 {
            let key = (t[k], t[(k + 1) % 3]);
            if self.edge.get(&key) == Some(&id) {
                self.edge.remove(&key);
            }
        }
        self.alive[id] = false;
    }

    fn apex(&self, id: usize, u: usize, v: usize) -> usize {
        let t = self.tris[id];
        t.into_iter().find(|&w| w != u && w != v).expect("triangle apex")
    }

    /// Triangle owning the directed edge `u -> v` and its third vertex.
    fn owner(&self, u: usize, v: usize) -> Option<(usize, usize)> {
        self.edge.get(&(u, v)).map(|&id| (id, self.apex(id, u, v)))
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge.contains_key(&(u, v)) || self.edge.contains_key(&(v, u))
    }

    /// Replaces the diagonal `u-v` of its quadrilateral by the other one and
    /// returns the new edge `(p, q)`.
    fn flip(&mut self, u: usize, v: usize) -> Option<(usize, usize)> {
        let (t1, p) = self.owner(u, v)?;
        let (t2, q) = self.owner(v, u)?;
        self.kill(t1);
        self.kill(t2);
        self.add([p, u, q]);
        self.add([p, q, v]);
        Some((p, q))
    }

    fn legalize(&mut self, mut stack: Vec<(usize, usize)>, constrained: &dyn Fn(usize, usize) -> bool) {
        while let Some((u, v)) = stack.pop() {
            if constrained(u, v) {
                continue;
            }
            let (Some((_, p)), Some((_, q))) = (self.owner(u, v), self.owner(v, u)) else {
                continue;
            };
            if incircle(self.pts[u], self.pts[v], self.pts[p], self.pts[q]) > 0.0 {
                self.flip(u, v);
                stack.push((u, q));
                stack.push((q, v));
            }
        }
    }

    fn insert(&mut self, pi: usize) -> Result<(), SafeAreaError> {
        let p = self.pts[pi];
        let mut found = None;
        for id in 0..self.tris.len() {
            if !self.alive[id] {
                continue;
            }
            let [a, b, c] = self.tris[id];
            let o = [
                orient2d(self.pts[a], self.pts[b], p),
                orient2d(self.pts[b], self.pts[c], p),
                orient2d(self.pts[c], self.pts[a], p),
            ];
            if o.iter().all(|&x| x >= 0.0) {
                found = Some((id, o));
                break;
            }
        }
        let (id, o) = found.ok_or_else(|| SafeAreaError::Degenerate("point outside super triangle".into()))?;
        let [a, b, c] = self.tris[id];
        let none = |_: usize, _: usize| false;
        match o.iter().position(|&x| x == 0.0) {
            None => {
                self.kill(id);
                self.add([a, b, pi]);
                self.add([b, c, pi]);
                self.add([c, a, pi]);
                self.legalize(vec![(a, b), (b, c), (c, a)], &none);
            }
            Some(k) => {
                // On the edge opposite the vertex after `k`; rotate so it is u -> v.
                let tri = [a, b, c];
                let (u, v, w) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let across = self.owner(v, u);
                self.kill(id);
                self.add([u, pi, w]);
                self.add([pi, v, w]);
                let mut stack = vec![(v, w), (w, u)];
                if let Some((t2, d)) = across {
                    self.kill(t2);
                    self.add([v, pi, d]);
                    self.add([pi, u, d]);
                    stack.push((u, d));
                    stack.push((d, v));
                }
                self.legalize(stack, &none);
            }
        }
        Ok(())
    }

    fn recover(&mut self, a: usize, b: usize) -> Result<(), SafeAreaError> {
        if self.has_edge(a, b) {
            return Ok(());
        }
        let (pa, pb) = (self.pts[a], self.pts[b]);
        let mut queue = VecDeque::new();
        for id in 0..self.tris.len() {
            if !self.alive[id] {
                continue;
            }
            let t = self.tris[id];
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                if u < v && segments_cross(pa, pb, self.pts[u], self.pts[v]) {
                    queue.push_back((u, v));
                }
            }
        }
        let limit = 64 * (queue.len() + 1) * (queue.len() + 1);
        let mut iterations = 0;
        while let Some((u, v)) = queue.pop_front() {
            iterations += 1;
            if iterations > limit {
                return Err(SafeAreaError::Degenerate(
                    "constraint recovery did not terminate".into(),
                ));
            }
            let (Some((_, p)), Some((_, q))) = (self.owner(u, v), self.owner(v, u)) else {
                return Err(SafeAreaError::Degenerate("crossing edge lost".into()));
            };
            if !segments_cross(self.pts[p], self.pts[q], self.pts[u], self.pts[v]) {
                queue.push_back((u, v));
                continue;
            }
            let (p, q) = self.flip(u, v).expect("flippable edge");
            if segments_cross(pa, pb, self.pts[p], self.pts[q]) {
                queue.push_back((p, q));
            }
        }
        if self.has_edge(a, b) {
            Ok(())
        } else {
            Err(SafeAreaError::Degenerate("constraint segment not recovered".into()))
        }
    }
}

/// Triangulates `window` with the given rectangular holes. Holes must lie
/// strictly inside the window and must not touch one another.
pub(crate) fn build(window: Rect, holes: &[Rect]) -> Result<Triangulation, SafeAreaError> {
    let mut pts: Vec<Point> = window.corners().to_vec();
    let mut segments: Vec<[usize; 2]> = (0..4).map(|k| [k, (k + 1) % 4]).collect();
    for h in holes {
        let base = pts.len();
        pts.extend_from_slice(&h.corners());
        segments.extend((0..4).map(|k| [base + k, base + (k + 1) % 4]));
    }
    let n_real = pts.len();

    let span = (window.max.x - window.min.x).max(window.max.y - window.min.y);
    let cx = 0.5 * (window.min.x + window.max.x);
    let cy = 0.5 * (window.min.y + window.max.y);
    pts.push(Point::new(cx - 20.0 * span, cy - 10.0 * span));
    pts.push(Point::new(cx + 20.0 * span, cy - 10.0 * span));
    pts.push(Point::new(cx, cy + 20.0 * span));

    let mut mesh = Mesh {
        pts,
        tris: Vec::new(),
        alive: Vec::new(),
        edge: HashMap::new(),
    };
    mesh.add([n_real, n_real + 1, n_real + 2]);
    for i in 0..n_real {
        mesh.insert(i)?;
    }
    for s in &segments {
        mesh.recover(s[0], s[1])?;
    }

    for id in 0..mesh.tris.len() {
        if mesh.alive[id] && mesh.tris[id].iter().any(|&v| v >= n_real) {
            mesh.kill(id);
        }
    }

    let mut seg_set = std::collections::HashSet::new();
    for s in &segments {
        seg_set.insert((s[0].min(s[1]), s[0].max(s[1])));
    }
    let is_constrained = |u: usize, v: usize| seg_set.contains(&(u.min(v), u.max(v)));
    // Exact predicates make Lawson flipping terminate; the cap only turns a
    // logic error into an error value instead of a hang.
    let max_flips = 1000 + 100 * mesh.tris.len();
    let mut flips = 0;
    loop {
        let mut flipped = false;
        for id in 0..mesh.tris.len() {
            if !mesh.alive[id] {
                continue;
            }
            let t = mesh.tris[id];
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                if is_constrained(u, v) {
                    continue;
                }
                let Some((_, q)) = mesh.owner(v, u) else { continue };
                let p = mesh.apex(id, u, v);
                if incircle(mesh.pts[u], mesh.pts[v], mesh.pts[p], mesh.pts[q]) > 0.0 {
                    mesh.flip(u, v);
                    flipped = true;
                    flips += 1;
                    break;
                }
            }
        }
        if !flipped {
            break;
        }
        if flips > max_flips {
            return Err(SafeAreaError::Degenerate("edge flipping did not terminate".into()));
        }
    }

    let mut kept: Vec<[usize; 3]> = Vec::new();
    for id in 0..mesh.tris.len() {
        if !mesh.alive[id] {
            continue;
        }
        let t = mesh.tris[id];
        let c = centroid(&mesh.pts, t);
        if holes.iter().any(|h| h.contains_strict(c)) {
            continue;
        }
        kept.push(t);
    }
    kept.sort_by(|a, b| {
        let (ca, cb) = (centroid(&mesh.pts, *a), centroid(&mesh.pts, *b));
        ca.x.total_cmp(&cb.x).then(ca.y.total_cmp(&cb.y))
    });

    let mut owner = HashMap::new();
    for (id, t) in kept.iter().enumerate() {
        for k in 0..3 {
            owner.insert((t[k], t[(k + 1) % 3]), id);
        }
    }
    let neighbors = kept
        .iter()
        .map(|t| {
            let mut nb = [None; 3];
            for (k, slot) in nb.iter_mut().enumerate() {
                let (u, v) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                *slot = owner.get(&(v, u)).copied();
            }
            nb
        })
        .collect();

    mesh.pts.truncate(n_real);
    Ok(Triangulation {
        vertices: mesh.pts,
        triangles: kept,
        neighbors,
        constrained: segments,
        window,
        obstacles: holes.to_vec(),
    })
}

fn centroid(pts: &[Point], t: [usize; 3]) -> Point {
    let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
    Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
}
