//! Finite element solution of `Δu = N` in `Ω`, `u = 0` on `Γ`, with patch
//! recovery of derivatives and variational recovery of the boundary flux.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{conjugate_gradient, CgReport, CsrMatrix, Degree, FeSpace};
use crate::geometry::Point;
use crate::mesh::Mesh;
use crate::numeric::solve_dense;

/// Space dimension of every mesh-based computation.
pub const DIMENSION: f64 = 2.0;

/// Relative residual for the Dirichlet solves.
pub const SOLVER_TOLERANCE: f64 = 1e-12;

/// Finite element function with recovered derivatives.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub space: Arc<FeSpace>,
    pub dof_values: Vec<f64>,
    /// Per mesh vertex.
    pub recovered_gradient: Vec<[f64; 2]>,
    /// Per mesh vertex, `[∂xx, ∂xy, ∂yy]`.
    pub recovered_hessian: Vec<[f64; 3]>,
    /// Normal derivative at every trace dof (boundary vertices and, for
    /// degree 2, boundary edge midpoints), in counterclockwise order.
    pub boundary_flux: Vec<f64>,
    /// Constant right-hand side `f` of `Δv = f`.
    pub source: f64,
    pub solver: CgReport,
}

impl ScalarField {
    pub fn mesh(&self) -> &Mesh {
        &self.space.mesh
    }

    pub fn degree(&self) -> Degree {
        self.space.degree
    }

    /// Flux at the boundary vertices, in boundary-loop order.
    pub fn vertex_flux(&self) -> Vec<f64> {
        match self.space.degree {
            Degree::Linear => self.boundary_flux.clone(),
            Degree::Quadratic => self.boundary_flux.iter().step_by(2).copied().collect(),
        }
    }

    /// Value at mesh vertex `v`.
    pub fn vertex_value(&self, v: usize) -> f64 {
        self.dof_values[v]
    }

    /// `∮u_ν` as the mesh-consistent sum of mass-weighted flux values; equals
    /// the discrete `∫ source` up to solver tolerance.
    pub fn flux_total(&self) -> f64 {
        let space = &self.space;
        let (mass, values) = match space.degree {
            Degree::Linear => (space.boundary_mass(), self.boundary_flux.clone()),
            Degree::Quadratic => (space.boundary_hat_mass(), self.vertex_flux()),
        };
        let mut mg = vec![0.0; values.len()];
        mass.mul(&values, &mut mg);
        crate::numeric::pairwise_sum(&mg)
    }

    pub fn max_flux(&self) -> f64 {
        self.boundary_flux.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_flux(&self) -> f64 {
        self.boundary_flux.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Field value and Hessian `[xx, xy, yy]` at a quadrature point, the
    /// Hessian interpolated linearly from the recovered vertex values.
    pub fn hessian_at(&self, e: usize, bary: [f64; 3]) -> [f64; 3] {
        let t = self.space.mesh.triangles[e];
        let mut out = [0.0; 3];
        for (k, &v) in t.iter().enumerate() {
            for c in 0..3 {
                out[c] += bary[k] * self.recovered_hessian[v][c];
            }
        }
        out
    }

    /// Dof table as JSON.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Dof {
            x: f64,
            y: f64,
            value: f64,
            boundary: bool,
        }
        #[derive(Serialize)]
        struct Table {
            degree: u32,
            source: f64,
            dofs: Vec<Dof>,
        }
        let dofs = self
            .space
            .dof_coords
            .iter()
            .zip(&self.dof_values)
            .zip(&self.space.is_boundary_dof)
            .map(|((p, &value), &boundary)| Dof {
                x: p[0],
                y: p[1],
                value,
                boundary,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&Table {
            degree: self.space.degree.order(),
            source: self.source,
            dofs,
        })?)
    }

    /// Vertex table `x,y,u,ux,uy,flux`; `flux` is empty off the boundary.
    pub fn to_csv(&self) -> String {
        let mesh = &self.space.mesh;
        let mut flux = vec![None; mesh.vertices.len()];
        for (&v, f) in mesh.boundary_loop.iter().zip(self.vertex_flux()) {
            flux[v] = Some(f);
        }
        let mut out = String::from("x,y,u,ux,uy,flux\n");
        for (v, p) in mesh.vertices.iter().enumerate() {
            let g = self.recovered_gradient[v];
            let _ = write!(out, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},", p[0], p[1], self.dof_values[v], g[0], g[1]);
            if let Some(f) = flux[v] {
                let _ = write!(out, "{f:.12e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Solve `Δv = source` with `v = g` on the boundary dofs and recover
/// derivatives and flux.
pub fn solve_poisson(
    space: Arc<FeSpace>,
    source: f64,
    boundary: impl Fn(Point) -> f64,
) -> Result<ScalarField> {
    let (stiffness, load) = space.assemble_laplacian()?;
    let mut values = vec![0.0; space.n_dofs];
    for d in 0..space.n_dofs {
        if space.is_boundary_dof[d] {
            values[d] = boundary(space.dof_coords[d]);
        }
    }
    let interior: Vec<usize> = (0..space.n_dofs).filter(|&d| !space.is_boundary_dof[d]).collect();
    // K_II v_I = -source F_I - K_IB g_B
    let mut kg = vec![0.0; space.n_dofs];
    stiffness.mul(&values, &mut kg);
    let rhs: Vec<f64> = interior.iter().map(|&d| -source * load[d] - kg[d]).collect();
    let reduced = stiffness.submatrix(&interior);
    let mut x = vec![0.0; interior.len()];
    let solver = conjugate_gradient(&reduced, &rhs, &mut x, SOLVER_TOLERANCE)?;
    for (&d, v) in interior.iter().zip(&x) {
        values[d] = *v;
    }
    let boundary_flux = consistent_flux(&space, &stiffness, &load, source, &values)?;
    let (recovered_gradient, recovered_hessian) = recover_derivatives(&space, &values);
    Ok(ScalarField {
        space,
        dof_values: values,
        recovered_gradient,
        recovered_hessian,
        boundary_flux,
        source,
        solver,
    })
}

/// `∮ v_ν φ = ∫ (∇v·∇φ + f φ)` for every boundary test function `φ`, solved
/// with the boundary mass matrix.
///
/// For degree 2 the test functions are the piecewise-linear boundary hats
/// (sums of vertex and half midpoint basis functions): testing against the
/// full quadratic trace makes vertex and midpoint values oscillate around
/// the true flux. Midpoint values are then the linear interpolant.
fn consistent_flux(space: &FeSpace, stiffness: &CsrMatrix, load: &[f64], source: f64, values: &[f64]) -> Result<Vec<f64>> {
    let mut kv = vec![0.0; space.n_dofs];
    stiffness.mul(values, &mut kv);
    let residual: Vec<f64> = space.trace.dofs.iter().map(|&d| kv[d] + source * load[d]).collect();
    match space.degree {
        Degree::Linear => {
            let mass = space.boundary_mass();
            let mut flux = vec![0.0; residual.len()];
            conjugate_gradient(&mass, &residual, &mut flux, 1e-14)?;
            Ok(flux)
        }
        Degree::Quadratic => {
            let n = space.trace.edges.len();
            let m = residual.len();
            let rhs: Vec<f64> = (0..n)
                .map(|i| residual[2 * i] + 0.5 * (residual[(2 * i + m - 1) % m] + residual[2 * i + 1]))
                .collect();
            let mass = space.boundary_hat_mass();
            let mut hat = vec![0.0; n];
            conjugate_gradient(&mass, &rhs, &mut hat, 1e-14)?;
            Ok((0..m)
                .map(|t| if t % 2 == 0 { hat[t / 2] } else { 0.5 * (hat[t / 2] + hat[(t / 2 + 1) % n]) })
                .collect())
        }
    }
}

/// Solution of the torsion problem with `N = 2`.
pub fn solve_torsion(mesh: Arc<Mesh>, degree: Degree) -> Result<ScalarField> {
    let space = Arc::new(FeSpace::new(mesh, degree));
    solve_poisson(space, DIMENSION, |_| 0.0)
}

/// Vertex patch: all dofs of the triangles within `rings` rings of `v`.
fn patch_dofs(space: &FeSpace, seeds: &[usize], rings: usize) -> Vec<usize> {
    let mesh = &space.mesh;
    let mut verts: BTreeSet<usize> = seeds.iter().copied().collect();
    let mut tris: BTreeSet<usize> = BTreeSet::new();
    for _ in 0..rings {
        let current: Vec<usize> = verts.iter().copied().collect();
        for v in current {
            for &t in &space.vertex_triangles[v] {
                if tris.insert(t) {
                    verts.extend(mesh.triangles[t]);
                }
            }
        }
    }
    let mut dofs: Vec<usize> = tris.iter().flat_map(|&t| space.element_dofs[t].iter().copied()).collect();
    dofs.sort_unstable();
    dofs.dedup();
    dofs
}

/// Least-squares quadratic fit of `values` at `points` around `origin`;
/// returns value, gradient and Hessian `[xx, xy, yy]` at the origin.
pub fn fit_quadratic(origin: Point, points: &[Point], values: &[f64]) -> Option<(f64, [f64; 2], [f64; 3])> {
    let scale = points
        .iter()
        .map(|p| (p[0] - origin[0]).hypot(p[1] - origin[1]))
        .fold(0.0, f64::max);
    if scale == 0.0 || points.len() < 6 {
        return None;
    }
    let mut ata = vec![vec![0.0; 6]; 6];
    let mut atb = vec![0.0; 6];
    for (p, &v) in points.iter().zip(values) {
        let (x, y) = ((p[0] - origin[0]) / scale, (p[1] - origin[1]) / scale);
        let row = [1.0, x, y, x * x, x * y, y * y];
        for i in 0..6 {
            atb[i] += row[i] * v;
            for j in 0..6 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let c = solve_dense(ata, atb)?;
    let s2 = scale * scale;
    Some((c[0], [c[1] / scale, c[2] / scale], [2.0 * c[3] / s2, c[4] / s2, 2.0 * c[5] / s2]))
}

/// Gradient and Hessian at every mesh vertex from a quadratic fit over the
/// vertex patch. Boundary vertices use an extra ring.
pub fn recover_derivatives(space: &FeSpace, values: &[f64]) -> (Vec<[f64; 2]>, Vec<[f64; 3]>) {
    let mesh = &space.mesh;
    let boundary = mesh.is_boundary_vertex();
    let base = match space.degree {
        Degree::Linear => 2,
        Degree::Quadratic => 1,
    };
    let fits: Vec<([f64; 2], [f64; 3])> = (0..mesh.vertices.len())
        .into_par_iter()
        .map(|v| {
            let mut rings = base + usize::from(boundary[v]);
            loop {
                let dofs = patch_dofs(space, &[v], rings);
                let pts: Vec<Point> = dofs.iter().map(|&d| space.dof_coords[d]).collect();
                let vals: Vec<f64> = dofs.iter().map(|&d| values[d]).collect();
                if dofs.len() >= 12 {
                    if let Some((_, g, h)) = fit_quadratic(mesh.vertices[v], &pts, &vals) {
                        return (g, h);
                    }
                }
                rings += 1;
                assert!(rings < 8, "patch recovery failed at vertex {v}");
            }
        })
        .collect();
    fits.into_iter().unzip()
}

/// Global minimizer of a torsion field: best interior dof, refined by one
/// Newton step on the local quadratic fit.
pub fn critical_point(field: &ScalarField) -> Result<Point> {
    let space = &field.space;
    let mut best: Option<usize> = None;
    for d in 0..space.n_dofs {
        if space.is_boundary_dof[d] {
            continue;
        }
        best = match best {
            None => Some(d),
            Some(b) => {
                let (vd, vb) = (field.dof_values[d], field.dof_values[b]);
                if vd < vb || (vd == vb && space.dof_coords[d] < space.dof_coords[b]) {
                    Some(d)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best = best.ok_or_else(|| Error::Consistency("mesh has no interior dofs".into()))?;
    let global_min = (0..space.n_dofs)
        .min_by(|&a, &b| field.dof_values[a].total_cmp(&field.dof_values[b]))
        .unwrap();
    if space.is_boundary_dof[global_min] && field.dof_values[global_min] < field.dof_values[best] {
        return Err(Error::Consistency("minimum of u attained on the boundary".into()));
    }
    let x0 = space.dof_coords[best];
    let seeds: Vec<usize> = if best < space.mesh.vertices.len() {
        vec![best]
    } else {
        let (edges, _) = space.mesh.edges();
        edges[best - space.mesh.vertices.len()].to_vec()
    };
    let dofs = patch_dofs(space, &seeds, 1);
    let pts: Vec<Point> = dofs.iter().map(|&d| space.dof_coords[d]).collect();
    let vals: Vec<f64> = dofs.iter().map(|&d| field.dof_values[d]).collect();
    let (_, g, h) = fit_quadratic(x0, &pts, &vals)
        .ok_or_else(|| Error::Consistency("degenerate patch at the minimizer".into()))?;
    let det = h[0] * h[2] - h[1] * h[1];
    let z = if det > 0.0 && h[0] > 0.0 {
        [
            x0[0] - (h[2] * g[0] - h[1] * g[1]) / det,
            x0[1] - (-h[1] * g[0] + h[0] * g[1]) / det,
        ]
    } else {
        x0
    };
    if !space.mesh.curve.contains(z) {
        return Err(Error::Consistency(format!("critical point ({:.6}, {:.6}) left the domain", z[0], z[1])));
    }
    Ok(z)
}

/// Both quadratures of the torsional rigidity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsionalRigidity {
    /// `∫|∇u|²`
    pub energy: f64,
    /// `−N∫u`
    pub volume_form: f64,
    pub relative_gap: f64,
}

pub fn torsional_rigidity(field: &ScalarField) -> Result<TorsionalRigidity> {
    let energy = field.space.integrate(&field.dof_values, |_, _, g| g[0] * g[0] + g[1] * g[1])?;
    let volume_form = -DIMENSION * field.space.integrate(&field.dof_values, |_, u, _| u)?;
    Ok(TorsionalRigidity {
        energy,
        volume_form,
        relative_gap: (energy - volume_form).abs() / energy.abs().max(volume_form.abs()).max(f64::MIN_POSITIVE),
    })
}

/// `|∇²u|² − (Δu)²/N` at every vertex, with `Δu` the trace of the
/// recovered Hessian.
pub fn cauchy_schwarz_deficit(field: &ScalarField) -> Vec<f64> {
    field.recovered_hessian.iter().map(|h| newton_deficit(*h)).collect()
}

/// `|H|² − (tr H)²/2` for a symmetric 2×2 matrix `[xx, xy, yy]`.
pub fn newton_deficit(h: [f64; 3]) -> f64 {
    0.5 * (h[0] - h[2]).powi(2) + 2.0 * h[1] * h[1]
}
