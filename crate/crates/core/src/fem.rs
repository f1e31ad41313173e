//! Lagrange finite element spaces of degree 1 and 2 on a [`Mesh`], sparse
//! assembly, and a Jacobi-preconditioned conjugate gradient solver.
//!
//! Degree-2 spaces are isoparametric: the midpoint node of every boundary
//! edge sits on the curve, so boundary elements are curved.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, Point};
use crate::mesh::{theta_between, Mesh};
use crate::numeric::{gauss_legendre, pairwise_sum};

/// 7-point degree-5 rule on the reference triangle (weights sum to 1/2).
const TRI_RULE: [(f64, f64, f64); 7] = [
    (1.0 / 3.0, 1.0 / 3.0, 0.225 / 2.0),
    (0.059_715_871_789_769_8, 0.470_142_064_105_115_1, 0.132_394_152_788_506_2 / 2.0),
    (0.470_142_064_105_115_1, 0.059_715_871_789_769_8, 0.132_394_152_788_506_2 / 2.0),
    (0.470_142_064_105_115_1, 0.470_142_064_105_115_1, 0.132_394_152_788_506_2 / 2.0),
    (0.797_426_985_353_087_3, 0.101_286_507_323_456_3, 0.125_939_180_544_827_1 / 2.0),
    (0.101_286_507_323_456_3, 0.797_426_985_353_087_3, 0.125_939_180_544_827_1 / 2.0),
    (0.101_286_507_323_456_3, 0.101_286_507_323_456_3, 0.125_939_180_544_827_1 / 2.0),
];

/// Gauss points per boundary edge.
const EDGE_GAUSS: usize = 6;

/// Polynomial degree of a Lagrange space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Degree {
    #[serde(rename = "1")]
    Linear,
    #[serde(rename = "2")]
    Quadratic,
}

impl Degree {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Degree::Linear),
            2 => Ok(Degree::Quadratic),
            other => Err(Error::InvalidParameter(format!("element degree must be 1 or 2, got {other}"))),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Degree::Linear => 1,
            Degree::Quadratic => 2,
        }
    }

    pub fn local_nodes(self) -> usize {
        match self {
            Degree::Linear => 3,
            Degree::Quadratic => 6,
        }
    }
}

/// Shape values and reference gradients at `(xi, eta)`.
fn shape(degree: Degree, xi: f64, eta: f64) -> ([f64; 6], [[f64; 2]; 6]) {
    let mut n = [0.0; 6];
    let mut d = [[0.0; 2]; 6];
    let l = [1.0 - xi - eta, xi, eta];
    let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    match degree {
        Degree::Linear => {
            n[..3].copy_from_slice(&l);
            d[..3].copy_from_slice(&dl);
        }
        Degree::Quadratic => {
            for i in 0..3 {
                n[i] = l[i] * (2.0 * l[i] - 1.0);
                d[i] = [(4.0 * l[i] - 1.0) * dl[i][0], (4.0 * l[i] - 1.0) * dl[i][1]];
            }
            // node 3+k sits on the edge opposite vertex k
            for (k, (i, j)) in [(1usize, 2usize), (2, 0), (0, 1)].into_iter().enumerate() {
                n[3 + k] = 4.0 * l[i] * l[j];
                d[3 + k] = [
                    4.0 * (l[i] * dl[j][0] + l[j] * dl[i][0]),
                    4.0 * (l[i] * dl[j][1] + l[j] * dl[i][1]),
                ];
            }
        }
    }
    (n, d)
}

/// Field data at one quadrature point of one element.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub x: Point,
    /// Quadrature weight times the Jacobian determinant.
    pub weight: f64,
    pub values: [f64; 6],
    pub gradients: [[f64; 2]; 6],
}

/// Degrees of freedom on the boundary, in counterclockwise order.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub dofs: Vec<usize>,
    pub thetas: Vec<f64>,
    /// Trace indices of each boundary edge (2 or 3 entries).
    pub edges: Vec<Vec<usize>>,
}

#[derive(Debug)]
pub struct FeSpace {
    pub mesh: Arc<Mesh>,
    pub degree: Degree,
    pub n_dofs: usize,
    /// `local_nodes` dof indices per triangle.
    pub element_dofs: Vec<Vec<usize>>,
    /// Physical position of every dof.
    pub dof_coords: Vec<Point>,
    pub is_boundary_dof: Vec<bool>,
    pub trace: BoundaryTrace,
    /// Triangles incident to each vertex.
    pub vertex_triangles: Vec<Vec<usize>>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: Degree) -> Self {
        let nv = mesh.vertices.len();
        let (edges, tri_edges) = mesh.edges();
        let n = mesh.boundary_loop.len();
        let mut boundary_theta: HashMap<[usize; 2], f64> = HashMap::new();
        for k in 0..n {
            let (a, b) = (mesh.boundary_loop[k], mesh.boundary_loop[(k + 1) % n]);
            let t = theta_between(mesh.boundary_thetas[k], mesh.boundary_thetas[(k + 1) % n]);
            boundary_theta.insert([a.min(b), a.max(b)], t);
        }
        let mut dof_coords = mesh.vertices.clone();
        let mut is_boundary_dof = mesh.is_boundary_vertex();
        let edge_index: HashMap<[usize; 2], usize> = edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let (element_dofs, trace) = match degree {
            Degree::Linear => {
                let element_dofs = mesh.triangles.iter().map(|t| t.to_vec()).collect();
                let trace = BoundaryTrace {
                    dofs: mesh.boundary_loop.clone(),
                    thetas: mesh.boundary_thetas.clone(),
                    edges: (0..n).map(|k| vec![k, (k + 1) % n]).collect(),
                };
                (element_dofs, trace)
            }
            Degree::Quadratic => {
                for e in &edges {
                    match boundary_theta.get(e) {
                        Some(&t) => {
                            dof_coords.push(mesh.curve.point(t));
                            is_boundary_dof.push(true);
                        }
                        None => {
                            let (a, b) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
                            dof_coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                            is_boundary_dof.push(false);
                        }
                    }
                }
                let element_dofs = mesh
                    .triangles
                    .iter()
                    .zip(&tri_edges)
                    .map(|(t, te)| vec![t[0], t[1], t[2], nv + te[0], nv + te[1], nv + te[2]])
                    .collect();
                let mut dofs = Vec::with_capacity(2 * n);
                let mut thetas = Vec::with_capacity(2 * n);
                for k in 0..n {
                    let (a, b) = (mesh.boundary_loop[k], mesh.boundary_loop[(k + 1) % n]);
                    let key = [a.min(b), a.max(b)];
                    dofs.push(a);
                    thetas.push(mesh.boundary_thetas[k]);
                    dofs.push(nv + edge_index[&key]);
                    thetas.push(boundary_theta[&key]);
                }
                let m = dofs.len();
                let trace = BoundaryTrace {
                    dofs,
                    thetas,
                    edges: (0..n).map(|k| vec![2 * k, 2 * k + 1, (2 * k + 2) % m]).collect(),
                };
                (element_dofs, trace)
            }
        };
        let mut vertex_triangles = vec![Vec::new(); nv];
        for (e, t) in mesh.triangles.iter().enumerate() {
            for &v in t {
                vertex_triangles[v].push(e);
            }
        }
        FeSpace {
            n_dofs: dof_coords.len(),
            mesh,
            degree,
            element_dofs,
            dof_coords,
            is_boundary_dof,
            trace,
            vertex_triangles,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.element_dofs.len()
    }

    /// Quadrature data of element `e` on the 7-point rule.
    pub fn quad_points(&self, e: usize) -> Result<[QuadPoint; 7]> {
        let dofs = &self.element_dofs[e];
        let nloc = self.degree.local_nodes();
        let mut out = [QuadPoint {
            x: [0.0; 2],
            weight: 0.0,
            values: [0.0; 6],
            gradients: [[0.0; 2]; 6],
        }; 7];
        for (q, &(xi, eta, w)) in TRI_RULE.iter().enumerate() {
            let (n, d) = shape(self.degree, xi, eta);
            let mut x = [0.0; 2];
            let mut jac = [[0.0; 2]; 2];
            for a in 0..nloc {
                let p = self.dof_coords[dofs[a]];
                x[0] += n[a] * p[0];
                x[1] += n[a] * p[1];
                for r in 0..2 {
                    jac[r][0] += p[r] * d[a][0];
                    jac[r][1] += p[r] * d[a][1];
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if !(det > 0.0) {
                return Err(Error::Assembly(format!("element {e} has Jacobian determinant {det:.3e}")));
            }
            // ∇φ = J^{-T} ∇_ref φ
            let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
            let mut grads = [[0.0; 2]; 6];
            for a in 0..nloc {
                grads[a] = [
                    inv[0][0] * d[a][0] + inv[1][0] * d[a][1],
                    inv[0][1] * d[a][0] + inv[1][1] * d[a][1],
                ];
            }
            out[q] = QuadPoint {
                x,
                weight: w * det,
                values: n,
                gradients: grads,
            };
        }
        Ok(out)
    }

    /// `∫_Ω f(x, u(x), ∇u(x)) dx` for a field given by dof values.
    pub fn integrate(&self, values: &[f64], f: impl Fn(Point, f64, [f64; 2]) -> f64 + Sync) -> Result<f64> {
        let nloc = self.degree.local_nodes();
        let parts: Result<Vec<f64>> = (0..self.n_elements())
            .into_par_iter()
            .map(|e| {
                let dofs = &self.element_dofs[e];
                let mut acc = 0.0;
                for qp in self.quad_points(e)? {
                    let (mut v, mut g) = (0.0, [0.0; 2]);
                    for a in 0..nloc {
                        let c = values[dofs[a]];
                        v += c * qp.values[a];
                        g[0] += c * qp.gradients[a][0];
                        g[1] += c * qp.gradients[a][1];
                    }
                    acc += qp.weight * f(qp.x, v, g);
                }
                Ok(acc)
            })
            .collect();
        Ok(pairwise_sum(&parts?))
    }

    /// `Σ_e Σ_q w f(e, qp, λ)` where `λ` are the barycentric coordinates of
    /// the quadrature point in the reference triangle.
    pub fn element_integral(&self, f: impl Fn(usize, &QuadPoint, [f64; 3]) -> f64 + Sync) -> Result<f64> {
        let parts: Result<Vec<f64>> = (0..self.n_elements())
            .into_par_iter()
            .map(|e| {
                let qps = self.quad_points(e)?;
                Ok(qps
                    .iter()
                    .zip(TRI_RULE.iter())
                    .map(|(qp, &(xi, eta, _))| qp.weight * f(e, qp, [1.0 - xi - eta, xi, eta]))
                    .sum())
            })
            .collect();
        Ok(pairwise_sum(&parts?))
    }

    /// Value and gradient of the field `values` at a quadrature point of `e`.
    pub fn eval_at(&self, e: usize, qp: &QuadPoint, values: &[f64]) -> (f64, [f64; 2]) {
        let dofs = &self.element_dofs[e];
        let (mut v, mut g) = (0.0, [0.0; 2]);
        for a in 0..self.degree.local_nodes() {
            let c = values[dofs[a]];
            v += c * qp.values[a];
            g[0] += c * qp.gradients[a][0];
            g[1] += c * qp.gradients[a][1];
        }
        (v, g)
    }

    /// `|Ω_h|`, area of the (curved) mesh.
    pub fn area(&self) -> Result<f64> {
        self.integrate(&vec![0.0; self.n_dofs], |_, _, _| 1.0)
    }

    /// Stiffness matrix `∫∇φ_i·∇φ_j` and load vector `∫φ_i`.
    pub fn assemble_laplacian(&self) -> Result<(CsrMatrix, Vec<f64>)> {
        let nloc = self.degree.local_nodes();
        let local: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..self.n_elements())
            .into_par_iter()
            .map(|e| {
                let mut ke = vec![0.0; nloc * nloc];
                let mut fe = vec![0.0; nloc];
                for qp in self.quad_points(e)? {
                    for a in 0..nloc {
                        fe[a] += qp.weight * qp.values[a];
                        for b in 0..nloc {
                            ke[a * nloc + b] += qp.weight
                                * (qp.gradients[a][0] * qp.gradients[b][0] + qp.gradients[a][1] * qp.gradients[b][1]);
                        }
                    }
                }
                Ok((ke, fe))
            })
            .collect();
        let local = local?;
        let mut matrix = CsrMatrix::from_elements(self.n_dofs, &self.element_dofs);
        let mut load = vec![0.0; self.n_dofs];
        for (dofs, (ke, fe)) in self.element_dofs.iter().zip(&local) {
            for a in 0..nloc {
                load[dofs[a]] += fe[a];
                for b in 0..nloc {
                    matrix.add(dofs[a], dofs[b], ke[a * nloc + b]);
                }
            }
        }
        Ok((matrix, load))
    }

    /// Boundary mass matrix on the trace dofs, integrated along the mesh's
    /// (isoparametric) boundary edges.
    pub fn boundary_mass(&self) -> CsrMatrix {
        let m = self.trace.dofs.len();
        let patterns: Vec<Vec<usize>> = self.trace.edges.clone();
        let mut mass = CsrMatrix::from_elements(m, &patterns);
        let (gx, gw) = gauss_legendre(EDGE_GAUSS);
        for edge in &self.trace.edges {
            let pts: Vec<Point> = edge.iter().map(|&t| self.dof_coords[self.trace.dofs[t]]).collect();
            for (x, w) in gx.iter().zip(&gw) {
                let s = 0.5 * (x + 1.0);
                let (l, dl) = edge_shape(edge.len(), s);
                let mut dx = [0.0; 2];
                for a in 0..edge.len() {
                    dx[0] += dl[a] * pts[a][0];
                    dx[1] += dl[a] * pts[a][1];
                }
                let jw = 0.5 * w * dx[0].hypot(dx[1]);
                for a in 0..edge.len() {
                    for b in 0..edge.len() {
                        mass.add(edge[a], edge[b], jw * l[a] * l[b]);
                    }
                }
            }
        }
        mass
    }

    /// Mass matrix of the piecewise-linear boundary hat functions on the
    /// boundary vertices, integrated along the mesh's boundary edges.
    pub fn boundary_hat_mass(&self) -> CsrMatrix {
        let n = self.trace.edges.len();
        let patterns: Vec<Vec<usize>> = (0..n).map(|k| vec![k, (k + 1) % n]).collect();
        let mut mass = CsrMatrix::from_elements(n, &patterns);
        let (gx, gw) = gauss_legendre(EDGE_GAUSS);
        for (k, edge) in self.trace.edges.iter().enumerate() {
            let pts: Vec<Point> = edge.iter().map(|&t| self.dof_coords[self.trace.dofs[t]]).collect();
            let ends = [k, (k + 1) % n];
            for (x, w) in gx.iter().zip(&gw) {
                let s = 0.5 * (x + 1.0);
                let (_, dl) = edge_shape(edge.len(), s);
                let mut dx = [0.0; 2];
                for a in 0..edge.len() {
                    dx[0] += dl[a] * pts[a][0];
                    dx[1] += dl[a] * pts[a][1];
                }
                let jw = 0.5 * w * dx[0].hypot(dx[1]);
                let hat = [1.0 - s, s];
                for a in 0..2 {
                    for b in 0..2 {
                        mass.add(ends[a], ends[b], jw * hat[a] * hat[b]);
                    }
                }
            }
        }
        mass
    }

    /// `∮ f(θ, curve point, trace values) dS` over the exact curve, with trace
    /// functions interpolated in θ on each boundary edge.
    pub fn curve_integral(&self, traces: &[&[f64]], f: impl Fn(f64, &BoundaryPoint, &[f64]) -> f64) -> f64 {
        let (gx, gw) = gauss_legendre(EDGE_GAUSS);
        let curve = &self.mesh.curve;
        let mut vals = vec![0.0; traces.len()];
        let parts: Vec<f64> = self
            .trace
            .edges
            .iter()
            .map(|edge| {
                let t0 = self.trace.thetas[edge[0]];
                let mut t1 = self.trace.thetas[*edge.last().unwrap()];
                if t1 <= t0 {
                    t1 += 2.0 * std::f64::consts::PI;
                }
                let mut acc = 0.0;
                for (x, w) in gx.iter().zip(&gw) {
                    let s = 0.5 * (x + 1.0);
                    let theta = t0 + s * (t1 - t0);
                    let (l, _) = edge_shape(edge.len(), s);
                    for (slot, tr) in vals.iter_mut().zip(traces) {
                        *slot = edge.iter().zip(&l).map(|(&i, li)| li * tr[i]).sum();
                    }
                    let bp = curve.eval(theta);
                    acc += 0.5 * w * (t1 - t0) * bp.speed * f(theta, &bp, &vals);
                }
                acc
            })
            .collect();
        pairwise_sum(&parts)
    }

    /// Restriction of dof values to the trace.
    pub fn trace_values(&self, values: &[f64]) -> Vec<f64> {
        self.trace.dofs.iter().map(|&d| values[d]).collect()
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.dof_coords.iter().map(|p| f(*p)).collect()
    }
}

/// 1-D Lagrange shape functions on `[0, 1]` with 2 or 3 equispaced nodes.
fn edge_shape(nodes: usize, s: f64) -> ([f64; 3], [f64; 3]) {
    if nodes == 2 {
        ([1.0 - s, s, 0.0], [-1.0, 1.0, 0.0])
    } else {
        (
            [(1.0 - s) * (1.0 - 2.0 * s), 4.0 * s * (1.0 - s), s * (2.0 * s - 1.0)],
            [4.0 * s - 3.0, 4.0 - 8.0 * s, 4.0 * s - 1.0],
        )
    }
}

/// Compressed sparse row matrix with a fixed pattern.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Pattern with all couplings inside each element's dof list.
    pub fn from_elements(n: usize, elements: &[Vec<usize>]) -> Self {
        let mut pairs: Vec<(usize, usize)> = elements
            .iter()
            .flat_map(|dofs| dofs.iter().flat_map(move |&a| dofs.iter().map(move |&b| (a, b))))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0; n + 1];
        for &(r, _) in &pairs {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols: pairs.iter().map(|p| p.1).collect(),
            vals: vec![0.0; pairs.len()],
        }
    }

    fn position(&self, row: usize, col: usize) -> usize {
        let slice = &self.cols[self.row_ptr[row]..self.row_ptr[row + 1]];
        self.row_ptr[row] + slice.binary_search(&col).expect("entry outside sparsity pattern")
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let p = self.position(row, col);
        self.vals[p] += value;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let slice = &self.cols[self.row_ptr[row]..self.row_ptr[row + 1]];
        slice
            .binary_search(&col)
            .map(|k| self.vals[self.row_ptr[row] + k])
            .unwrap_or(0.0)
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *out = s;
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// Principal submatrix on `keep` (a sorted list of indices).
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (i, &k) in keep.iter().enumerate() {
            map[k] = i;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for &r in keep {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = map[self.cols[k]];
                if c != usize::MAX {
                    cols.push(c);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n: keep.len(),
            row_ptr,
            cols,
            vals,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(4096)
        .zip(b.par_chunks(4096))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    pairwise_sum(&parts)
}

/// Statistics of a conjugate gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned CG for SPD `a`. Stops at `‖r‖ ≤ tol·‖b‖`; fails
/// after `10·n` iterations.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64) -> Result<CgReport> {
    let n = a.n;
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut ax = vec![0.0; n];
    a.mul(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(p, q)| p * q).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 10 * n.max(1);
    for it in 0..max_iter {
        let res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            return Ok(CgReport {
                iterations: it,
                relative_residual: res,
            });
        }
        a.mul(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        z.par_iter_mut()
            .zip(&r)
            .zip(&inv_diag)
            .for_each(|((zi, ri), di)| *zi = ri * di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    let res = dot(&r, &r).sqrt() / b_norm;
    if res <= tol {
        Ok(CgReport {
            iterations: max_iter,
            relative_residual: res,
        })
    } else {
        Err(Error::SolverDiverged {
            iterations: max_iter,
            residual: res,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;
    use crate::mesh::triangulate;

    fn disk_space(degree: Degree, h: f64) -> FeSpace {
        let c = BoundaryCurve::circle(1.0, [0.0, 0.0]).unwrap();
        FeSpace::new(Arc::new(triangulate(&c, h).unwrap()), degree)
    }

    #[test]
    fn shape_functions_partition_unity() {
        for degree in [Degree::Linear, Degree::Quadratic] {
            let (n, d) = shape(degree, 0.2, 0.3);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(d.iter().map(|g| g[0]).sum::<f64>().abs() < 1e-14);
            assert!(d.iter().map(|g| g[1]).sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn isoparametric_area_beats_polygon() {
        let s2 = disk_space(Degree::Quadratic, 0.1);
        let s1 = disk_space(Degree::Linear, 0.1);
        let e2 = (s2.area().unwrap() - std::f64::consts::PI).abs();
        let e1 = (s1.area().unwrap() - std::f64::consts::PI).abs();
        assert!(e2 < 1e-6 && e2 < e1 * 1e-2, "{e1} {e2}");
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let s = disk_space(Degree::Quadratic, 0.2);
        let (k, f) = s.assemble_laplacian().unwrap();
        let ones = vec![1.0; s.n_dofs];
        let mut y = vec![0.0; s.n_dofs];
        k.mul(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-12));
        assert!((f.iter().sum::<f64>() - s.area().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn quadratic_energy_is_exact() {
        // ∫|∇(x²+y)|² over the mesh equals the quadrature of the exact gradient
        let s = disk_space(Degree::Quadratic, 0.2);
        let u = s.interpolate(|p| p[0] * p[0] + p[1]);
        let (k, _) = s.assemble_laplacian().unwrap();
        let mut ku = vec![0.0; s.n_dofs];
        k.mul(&u, &mut ku);
        let energy: f64 = u.iter().zip(&ku).map(|(a, b)| a * b).sum();
        let direct = s.integrate(&u, |_, _, g| g[0] * g[0] + g[1] * g[1]).unwrap();
        assert!((energy - direct).abs() < 1e-12);
        // straight interior elements reproduce 4x² + 1 exactly; curved ones nearly
        let exact = s.integrate(&u, |p, _, _| 4.0 * p[0] * p[0] + 1.0).unwrap();
        assert!((energy - exact).abs() < 1e-3, "{energy} {exact}");
    }

    #[test]
    fn boundary_mass_sums_to_length() {
        for degree in [Degree::Linear, Degree::Quadratic] {
            let s = disk_space(degree, 0.1);
            let m = s.boundary_mass();
            let total: f64 = m.vals.iter().sum();
            let tol = if degree == Degree::Quadratic { 1e-6 } else { 1e-2 };
            assert!((total - 2.0 * std::f64::consts::PI).abs() < tol, "{degree:?} {total}");
        }
    }

    #[test]
    fn curve_integral_of_constant_is_perimeter() {
        let s = disk_space(Degree::Quadratic, 0.1);
        let ones = vec![1.0; s.trace.dofs.len()];
        let len = s.curve_integral(&[&ones], |_, _, v| v[0]);
        assert!((len - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn cg_solves_small_spd_system() {
        let mut m = CsrMatrix::from_elements(3, &[vec![0, 1, 2]]);
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                m.add(i, j, a[i][j]);
            }
        }
        let b = [1.0, 2.0, 3.0];
        let mut x = vec![0.0; 3];
        let rep = conjugate_gradient(&m, &b, &mut x, 1e-14).unwrap();
        assert!(rep.relative_residual <= 1e-14);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i];
            assert!(r.abs() < 1e-13);
        }
    }
}
