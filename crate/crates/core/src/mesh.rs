//! Conforming triangulations of star-shaped domains.
//!
//! Boundary vertices are placed on the curve at equal arclength and keep
//! their curve parameter θ, so normals and curvature are always taken from
//! the analytic curve. Interior vertices come from an equilateral lattice
//! centered on the curve center; the two point sets are joined by a
//! constrained Delaunay triangulation whose constraints are the boundary
//! polygon edges.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, HasPosition, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, Point};

/// Lowest acceptable interior angle, in degrees.
pub const MIN_ANGLE_DEG: f64 = 20.0;

/// Lattice points closer than this fraction of `h_max` to the boundary are
/// dropped.
const BOUNDARY_CLEARANCE: f64 = 0.55;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub curve: BoundaryCurve,
    pub h_max: f64,
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary vertices in counterclockwise order.
    pub boundary_loop: Vec<usize>,
    /// Curve parameter of each entry of `boundary_loop`, increasing in `[0, 2π)`.
    pub boundary_thetas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub thetas: [f64; 2],
    /// Outward curve normal at the parameter midpoint.
    pub normal: Point,
}

/// Quality figures gathered by [`Mesh::diagnostics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshDiagnostics {
    pub min_angle_deg: f64,
    pub min_signed_area: f64,
    pub max_boundary_offset: f64,
    pub loop_closed: bool,
    pub euler_characteristic: i64,
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    curve: BoundaryCurve,
    h_max: f64,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    boundary_thetas: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Site {
    position: Point2<f64>,
    id: usize,
}

impl HasPosition for Site {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.position
    }
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn min_angle_deg(a: Point, b: Point, c: Point) -> f64 {
    let len = |p: Point, q: Point| (p[0] - q[0]).hypot(p[1] - q[1]);
    let (la, lb, lc) = (len(b, c), len(c, a), len(a, b));
    let angle = |opp: f64, s1: f64, s2: f64| ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0).acos();
    angle(la, lb, lc)
        .min(angle(lb, lc, la))
        .min(angle(lc, la, lb))
        .to_degrees()
}

/// θ values at equal arclength along the curve, starting at θ = 0.
fn arclength_parameters(curve: &BoundaryCurve, count: usize) -> Vec<f64> {
    let fine = (count * 32).max(8192);
    let dt = 2.0 * PI / fine as f64;
    let speed = |t: f64| {
        let (r, dr, _) = curve.radial_derivatives(t);
        (r * r + dr * dr).sqrt()
    };
    let mut cumulative = vec![0.0; fine + 1];
    for j in 0..fine {
        // Simpson on each sub-interval
        let t = j as f64 * dt;
        cumulative[j + 1] =
            cumulative[j] + dt / 6.0 * (speed(t) + 4.0 * speed(t + 0.5 * dt) + speed(t + dt));
    }
    let total = cumulative[fine];
    let mut thetas = Vec::with_capacity(count);
    let mut j = 0;
    for k in 0..count {
        let target = total * k as f64 / count as f64;
        while j + 1 < fine && cumulative[j + 1] < target {
            j += 1;
        }
        let span = cumulative[j + 1] - cumulative[j];
        let mut t = j as f64 * dt + dt * (target - cumulative[j]) / span;
        // Newton on s(t) = target with s' = speed
        for _ in 0..3 {
            let base = j as f64 * dt;
            let s = cumulative[j] + (t - base) / 6.0 * (speed(base) + 4.0 * speed(0.5 * (base + t)) + speed(t));
            t -= (s - target) / speed(t);
        }
        thetas.push(t);
    }
    thetas[0] = 0.0;
    thetas
}

/// Spatial hash of boundary polyline samples for clearance queries.
struct BoundaryGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<Point>>,
}

impl BoundaryGrid {
    fn new(points: &[Point], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
        for p in points {
            buckets.entry(Self::key(*p, cell)).or_default().push(*p);
        }
        Self { cell, buckets }
    }

    fn key(p: Point, cell: f64) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    fn is_clear(&self, p: Point, radius: f64) -> bool {
        let (kx, ky) = Self::key(p, self.cell);
        let reach = (radius / self.cell).ceil() as i64;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(bucket) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if bucket.iter().any(|q| (p[0] - q[0]).hypot(p[1] - q[1]) < radius) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Triangulates the interior of `curve` with target edge length `h_max`.
pub fn triangulate(curve: &BoundaryCurve, h_max: f64) -> Result<Mesh> {
    curve.validate()?;
    if !(h_max > 0.0) || h_max > curve.a0 / 4.0 {
        return Err(Error::InvalidParameter(format!(
            "h_max must lie in (0, a0/4] = (0, {}], got {h_max}",
            curve.a0 / 4.0
        )));
    }
    let perimeter = crate::geometry::geometry_summary(curve, 1024)?.perimeter;
    let mut n_boundary = ((perimeter / h_max).ceil() as usize).max(16);
    n_boundary += n_boundary % 2;
    let thetas = arclength_parameters(curve, n_boundary);
    let boundary: Vec<Point> = thetas.iter().map(|t| curve.point(*t)).collect();

    // dense polyline for clearance tests
    let dense = arclength_parameters(curve, n_boundary * 8);
    let dense_points: Vec<Point> = dense.iter().map(|t| curve.point(*t)).collect();
    let grid = BoundaryGrid::new(&dense_points, h_max);
    let clearance = BOUNDARY_CLEARANCE * h_max;

    let extent = curve.max_radius();
    let row_height = h_max * 3f64.sqrt() / 2.0;
    let rows = (extent / row_height).ceil() as i64 + 1;
    let cols = (extent / h_max).ceil() as i64 + 1;
    let mut interior = Vec::new();
    for j in -rows..=rows {
        let shift = if j.rem_euclid(2) == 1 { 0.5 } else { 0.0 };
        for i in -cols..=cols {
            let p = [
                curve.center[0] + (i as f64 + shift) * h_max,
                curve.center[1] + j as f64 * row_height,
            ];
            if curve.contains(p) && grid.is_clear(p, clearance) {
                interior.push(p);
            }
        }
    }

    let mut vertices = boundary.clone();
    vertices.extend(interior);
    let sites: Vec<Site> = vertices
        .iter()
        .enumerate()
        .map(|(id, p)| Site {
            position: Point2::new(p[0], p[1]),
            id,
        })
        .collect();
    let constraints: Vec<[usize; 2]> = (0..n_boundary).map(|k| [k, (k + 1) % n_boundary]).collect();
    let cdt = ConstrainedDelaunayTriangulation::<Site>::bulk_load_cdt(sites, constraints)
        .map_err(|e| Error::Meshing(format!("constrained Delaunay insertion failed: {e:?}")))?;

    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        let ids = face.vertices().map(|v| v.data().id);
        let pts = ids.map(|i| vertices[i]);
        let centroid = [
            (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0,
            (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0,
        ];
        if point_in_polygon(centroid, &boundary) {
            let tri = if signed_area(pts[0], pts[1], pts[2]) > 0.0 {
                ids
            } else {
                [ids[0], ids[2], ids[1]]
            };
            triangles.push(canonical(tri));
        }
    }
    debug_assert_eq!(cdt.num_vertices(), vertices.len());
    triangles.sort_unstable();

    let mesh = Mesh {
        curve: curve.clone(),
        h_max,
        vertices,
        triangles,
        boundary_loop: (0..n_boundary).collect(),
        boundary_thetas: thetas,
    };
    let diag = mesh.diagnostics();
    if !diag.loop_closed {
        return Err(Error::Meshing("boundary edges do not form a closed loop".into()));
    }
    if diag.min_signed_area <= 0.0 {
        return Err(Error::Meshing(format!(
            "degenerate triangle with signed area {:.3e}",
            diag.min_signed_area
        )));
    }
    if diag.min_angle_deg < MIN_ANGLE_DEG {
        return Err(Error::Meshing(format!(
            "minimum angle {:.2}° below {MIN_ANGLE_DEG}° (h_max = {h_max}, {} triangles)",
            diag.min_angle_deg,
            mesh.triangles.len()
        )));
    }
    Ok(mesh)
}

/// Rotates a triangle so its smallest index comes first, keeping orientation.
fn canonical(t: [usize; 3]) -> [usize; 3] {
    let k = (0..3).min_by_key(|&i| t[i]).unwrap();
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}

fn point_in_polygon(p: Point, polygon: &[Point]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Parameter midway between consecutive boundary parameters, handling the
/// wrap from the last vertex back to θ = 0.
pub fn theta_between(t0: f64, t1: f64) -> f64 {
    let t1 = if t1 <= t0 { t1 + 2.0 * PI } else { t1 };
    0.5 * (t0 + t1)
}

impl Mesh {
    pub fn boundary_edges(&self) -> Vec<BoundaryEdge> {
        let n = self.boundary_loop.len();
        (0..n)
            .map(|k| {
                let (t0, t1) = (self.boundary_thetas[k], self.boundary_thetas[(k + 1) % n]);
                BoundaryEdge {
                    vertices: [self.boundary_loop[k], self.boundary_loop[(k + 1) % n]],
                    thetas: [t0, t1],
                    normal: self.curve.eval(theta_between(t0, t1)).normal,
                }
            })
            .collect()
    }

    /// Sum of (straight) triangle areas.
    pub fn polygon_area(&self) -> f64 {
        let areas: Vec<f64> = self
            .triangles
            .iter()
            .map(|t| signed_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]))
            .collect();
        crate::numeric::pairwise_sum(&areas)
    }

    pub fn boundary_length(&self) -> f64 {
        let n = self.boundary_loop.len();
        (0..n)
            .map(|k| {
                let a = self.vertices[self.boundary_loop[k]];
                let b = self.vertices[self.boundary_loop[(k + 1) % n]];
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .sum()
    }

    pub fn is_boundary_vertex(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for &v in &self.boundary_loop {
            flags[v] = true;
        }
        flags
    }

    /// Sorted unique edges and, per triangle, the indices of the edges
    /// opposite to its vertices `(1,2), (2,0), (0,1)`.
    pub fn edges(&self) -> (Vec<[usize; 2]>, Vec<[usize; 3]>) {
        let mut all: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| {
                [[t[1], t[2]], [t[2], t[0]], [t[0], t[1]]].map(|e| [e[0].min(e[1]), e[0].max(e[1])])
            })
            .collect();
        all.sort_unstable();
        all.dedup();
        let index: HashMap<[usize; 2], usize> = all.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let per_triangle = self
            .triangles
            .iter()
            .map(|t| {
                [[t[1], t[2]], [t[2], t[0]], [t[0], t[1]]].map(|e| index[&[e[0].min(e[1]), e[0].max(e[1])]])
            })
            .collect();
        (all, per_triangle)
    }

    pub fn diagnostics(&self) -> MeshDiagnostics {
        let mut min_angle = f64::INFINITY;
        let mut min_area = f64::INFINITY;
        for t in &self.triangles {
            let p = t.map(|i| self.vertices[i]);
            min_angle = min_angle.min(min_angle_deg(p[0], p[1], p[2]));
            min_area = min_area.min(signed_area(p[0], p[1], p[2]));
        }
        let max_boundary_offset = self
            .boundary_loop
            .iter()
            .zip(&self.boundary_thetas)
            .map(|(&v, &t)| {
                let q = self.curve.point(t);
                (q[0] - self.vertices[v][0]).hypot(q[1] - self.vertices[v][1])
            })
            .fold(0.0, f64::max);
        let (edges, _) = self.edges();
        // boundary edges are the ones used by exactly one triangle
        let mut use_count: HashMap<[usize; 2], usize> = HashMap::new();
        for t in &self.triangles {
            for e in [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]] {
                *use_count.entry([e[0].min(e[1]), e[0].max(e[1])]).or_default() += 1;
            }
        }
        let n = self.boundary_loop.len();
        let loop_edges: Vec<[usize; 2]> = (0..n)
            .map(|k| {
                let (a, b) = (self.boundary_loop[k], self.boundary_loop[(k + 1) % n]);
                [a.min(b), a.max(b)]
            })
            .collect();
        let single: usize = use_count.values().filter(|&&c| c == 1).count();
        let loop_closed = single == n
            && loop_edges.iter().all(|e| use_count.get(e) == Some(&1))
            && use_count.values().all(|&c| c <= 2);
        MeshDiagnostics {
            min_angle_deg: min_angle,
            min_signed_area: min_area,
            max_boundary_offset,
            loop_closed,
            euler_characteristic: self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64,
        }
    }

    /// Uniform red refinement; boundary midpoints are moved onto the curve.
    pub fn refine(&self) -> Mesh {
        let (edges, tri_edges) = self.edges();
        let mut vertices = self.vertices.clone();
        let base = vertices.len();
        let mut boundary_mid: HashMap<[usize; 2], f64> = HashMap::new();
        let n = self.boundary_loop.len();
        for k in 0..n {
            let (a, b) = (self.boundary_loop[k], self.boundary_loop[(k + 1) % n]);
            let t = theta_between(self.boundary_thetas[k], self.boundary_thetas[(k + 1) % n]);
            boundary_mid.insert([a.min(b), a.max(b)], t);
        }
        for e in &edges {
            let p = match boundary_mid.get(e) {
                Some(&t) => self.curve.point(t),
                None => {
                    let (a, b) = (self.vertices[e[0]], self.vertices[e[1]]);
                    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
                }
            };
            vertices.push(p);
        }
        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);
        for (t, te) in self.triangles.iter().zip(&tri_edges) {
            // te[i] is opposite vertex i
            let m = te.map(|e| base + e);
            triangles.push(canonical([t[0], m[2], m[1]]));
            triangles.push(canonical([m[2], t[1], m[0]]));
            triangles.push(canonical([m[1], m[0], t[2]]));
            triangles.push(canonical([m[0], m[1], m[2]]));
        }
        triangles.sort_unstable();
        let edge_index: HashMap<[usize; 2], usize> = edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let mut boundary_loop = Vec::with_capacity(2 * n);
        let mut boundary_thetas = Vec::with_capacity(2 * n);
        for k in 0..n {
            let (a, b) = (self.boundary_loop[k], self.boundary_loop[(k + 1) % n]);
            let key = [a.min(b), a.max(b)];
            boundary_loop.push(a);
            boundary_thetas.push(self.boundary_thetas[k]);
            boundary_loop.push(base + edge_index[&key]);
            boundary_thetas.push(boundary_mid[&key]);
        }
        Mesh {
            curve: self.curve.clone(),
            h_max: 0.5 * self.h_max,
            vertices,
            triangles,
            boundary_loop,
            boundary_thetas,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = MeshFile {
            curve: self.curve.clone(),
            h_max: self.h_max,
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges(),
            boundary_thetas: self.boundary_thetas.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Mesh> {
        let file: MeshFile = serde_json::from_str(text)?;
        if file.boundary_edges.len() != file.boundary_thetas.len() {
            return Err(Error::Meshing("boundary edge and θ counts differ".into()));
        }
        let mesh = Mesh {
            boundary_loop: file.boundary_edges.iter().map(|e| e.vertices[0]).collect(),
            curve: file.curve,
            h_max: file.h_max,
            vertices: file.vertices,
            triangles: file.triangles,
            boundary_thetas: file.boundary_thetas,
        };
        if !mesh.diagnostics().loop_closed {
            return Err(Error::Meshing("imported boundary edges do not close".into()));
        }
        Ok(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_circle() -> BoundaryCurve {
        BoundaryCurve::circle(1.0, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn circle_mesh_area_within_inscribed_bounds() {
        let mesh = triangulate(&unit_circle(), 0.2).unwrap();
        let area = mesh.polygon_area();
        assert!(area <= PI && area >= PI - 0.05, "area {area}");
        assert!(mesh.boundary_loop.len() as f64 >= 2.0 * PI / 0.2);
    }

    #[test]
    fn area_error_shrinks_fourfold() {
        let coarse = triangulate(&unit_circle(), 0.2).unwrap();
        let e: Vec<f64> = {
            let mut m = coarse;
            (0..3)
                .map(|i| {
                    if i > 0 {
                        m = m.refine();
                    }
                    PI - m.polygon_area()
                })
                .collect()
        };
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "order {order}");
        }
    }

    #[test]
    fn three_lobed_mesh_topology() {
        let c = BoundaryCurve::cosine_mode(1.0, 3, 0.1).unwrap();
        let mesh = triangulate(&c, 0.05).unwrap();
        let d = mesh.diagnostics();
        assert!(d.loop_closed);
        assert_eq!(d.euler_characteristic, 1);
        assert!(d.min_angle_deg >= MIN_ANGLE_DEG);
        assert!(d.max_boundary_offset <= 1e-12);
    }

    #[test]
    fn refinement_quadruples_and_keeps_invariants() {
        let mesh = triangulate(&unit_circle(), 0.25).unwrap();
        let fine = mesh.refine();
        assert_eq!(fine.triangles.len(), 4 * mesh.triangles.len());
        assert_eq!(fine.boundary_loop.len(), 2 * mesh.boundary_loop.len());
        let d = fine.diagnostics();
        assert!(d.loop_closed && d.min_signed_area > 0.0);
        assert!(d.min_angle_deg >= MIN_ANGLE_DEG);
        assert!(d.max_boundary_offset <= 1e-12);
        assert_eq!(d.euler_characteristic, 1);
        assert!(fine.boundary_thetas.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn nonconvex_star_meshes() {
        for (mode, amp) in [(5, 0.1), (3, 0.15), (5, 0.3)] {
            let c = BoundaryCurve::cosine_mode(1.0, mode, amp).unwrap();
            let mesh = triangulate(&c, 0.04).unwrap();
            let d = mesh.diagnostics();
            assert!(d.loop_closed && d.min_angle_deg >= MIN_ANGLE_DEG, "{mode} {amp}: {d:?}");
        }
    }

    #[test]
    fn rejects_coarse_h() {
        assert!(matches!(triangulate(&unit_circle(), 0.3), Err(Error::InvalidParameter(_))));
        assert!(matches!(triangulate(&unit_circle(), -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn json_round_trip() {
        let mesh = triangulate(&unit_circle(), 0.25).unwrap();
        let back = Mesh::from_json(&mesh.to_json().unwrap()).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn deterministic() {
        let c = BoundaryCurve::cosine_mode(1.0, 2, 0.1).unwrap();
        assert_eq!(triangulate(&c, 0.05).unwrap(), triangulate(&c, 0.05).unwrap());
    }
}
