//! Integral identities for the torsion problem, each checked as a residual
//! between two independently assembled sides.
//!
//! Boundary integrals run over the exact curve with the exact curvature and
//! `q_ν`; only the recovered flux `u_ν` carries discretization error. Volume
//! integrals use element quadrature.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Degree;
use crate::geometry::{geometry_summary, BoundaryCurve, BoundaryPoint, GeometrySummary};
use crate::harmonic::{build_harmonic, frobenius_sq, hessian_integral, HarmonicBundle};
use crate::mesh::triangulate;
use crate::torsion::{critical_point, newton_deficit, solve_torsion, ScalarField, DIMENSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityId {
    Volume,
    Minkowski,
    Pohozaev,
    Serrin,
    SerrinH,
    Fundamental,
    Sbt,
    Sbt2,
    HeintzeKarcher,
    TraceV,
}

impl IdentityId {
    pub const ALL: [IdentityId; 10] = [
        IdentityId::Volume,
        IdentityId::Minkowski,
        IdentityId::Pohozaev,
        IdentityId::Serrin,
        IdentityId::SerrinH,
        IdentityId::Fundamental,
        IdentityId::Sbt,
        IdentityId::Sbt2,
        IdentityId::HeintzeKarcher,
        IdentityId::TraceV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityId::Volume => "volume",
            IdentityId::Minkowski => "minkowski",
            IdentityId::Pohozaev => "pohozaev",
            IdentityId::Serrin => "serrin",
            IdentityId::SerrinH => "serrin_h",
            IdentityId::Fundamental => "fundamental",
            IdentityId::Sbt => "sbt",
            IdentityId::Sbt2 => "sbt2",
            IdentityId::HeintzeKarcher => "heintze_karcher",
            IdentityId::TraceV => "trace_v",
        }
    }
}

/// One side-by-side comparison inside a multi-part identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityComponent {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_residual: f64,
    pub scaled_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub identity_id: IdentityId,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|, 1e−14·scale)`
    pub relative_residual: f64,
    /// Magnitude of the individual terms entering the identity.
    pub scale: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|, scale)`; meaningful when both sides
    /// vanish, as on disks.
    pub scaled_residual: f64,
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub components: Vec<IdentityComponent>,
}

fn relative(lhs: f64, rhs: f64, floor: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(floor)
}

impl IdentityResidual {
    fn new(id: IdentityId, lhs: f64, rhs: f64, scale: f64) -> Self {
        IdentityResidual {
            identity_id: id,
            lhs,
            rhs,
            relative_residual: relative(lhs, rhs, 1e-14 * scale),
            scale,
            scaled_residual: relative(lhs, rhs, scale),
            applicable: true,
            reason: None,
            components: Vec::new(),
        }
    }

    fn not_applicable(id: IdentityId, reason: &str) -> Self {
        IdentityResidual {
            identity_id: id,
            lhs: 0.0,
            rhs: 0.0,
            relative_residual: 0.0,
            scale: 0.0,
            scaled_residual: 0.0,
            applicable: false,
            reason: Some(reason.to_string()),
            components: Vec::new(),
        }
    }
}

/// Harmonic test function for the trace identities.
#[derive(Debug, Clone, Copy)]
pub enum TraceFunction<'a> {
    /// `v = h` of the bundle.
    Harmonic,
    /// `v = c·(x − z)`.
    Linear([f64; 2]),
    /// A discrete harmonic field; its boundary gradient combines the
    /// tangential derivative of the trace with its recovered flux.
    Field(&'a ScalarField),
}

/// Default trace functions: `h` and `x₁ − z₁`.
pub const DEFAULT_TRACE_FUNCTIONS: [TraceFunction<'static>; 2] =
    [TraceFunction::Harmonic, TraceFunction::Linear([1.0, 0.0])];

/// Boundary data shared by the checks.
struct Context<'a> {
    torsion: &'a ScalarField,
    bundle: &'a HarmonicBundle,
    r_ref: f64,
    n_area: f64,
}

impl Context<'_> {
    /// `∮ f(bp, u_ν, q_ν) dS`
    fn boundary(&self, f: impl Fn(&BoundaryPoint, f64, f64) -> f64) -> f64 {
        let z = self.bundle.z;
        self.torsion.space.curve_integral(&[&self.torsion.boundary_flux], |_, bp, v| {
            let q_nu = (bp.point[0] - z[0]) * bp.normal[0] + (bp.point[1] - z[1]) * bp.normal[1];
            f(bp, v[0], q_nu)
        })
    }

    fn deficit_u(&self, weighted: bool) -> Result<f64> {
        if weighted {
            hessian_integral(self.torsion, self.torsion, |u| -u, newton_deficit)
        } else {
            hessian_integral(self.torsion, self.torsion, |_| 1.0, newton_deficit)
        }
    }
}

/// Tangential derivative of a trace at each trace node, from the quadratic
/// through the node and its two neighbours in arclength.
fn tangential_derivative(field: &ScalarField) -> Vec<f64> {
    let space = &field.space;
    let curve = &space.mesh.curve;
    let trace = space.trace_values(&field.dof_values);
    let m = trace.len();
    // cumulative arclength at the trace nodes
    let thetas = &space.trace.thetas;
    let mut s = vec![0.0; m + 1];
    for i in 0..m {
        let t0 = thetas[i];
        let mut t1 = thetas[(i + 1) % m];
        if t1 <= t0 {
            t1 += 2.0 * std::f64::consts::PI;
        }
        s[i + 1] = s[i] + crate::numeric::integrate(|t| curve.eval(t).speed, t0, t1, 1, 6);
    }
    let total = s[m];
    (0..m)
        .map(|i| {
            let (ip, inext) = ((i + m - 1) % m, (i + 1) % m);
            let hm = if i == 0 { total - s[m - 1] } else { s[i] - s[ip] };
            let hp = s[i + 1] - s[i];
            let (fm, f0, fp) = (trace[ip], trace[i], trace[inext]);
            (hm * hm * (fp - f0) + hp * hp * (f0 - fm)) / (hm * hp * (hm + hp))
        })
        .collect()
}

fn trace_components(ctx: &Context, functions: &[TraceFunction]) -> Result<Vec<IdentityComponent>> {
    let n = DIMENSION;
    let torsion = ctx.torsion;
    let space = &torsion.space;
    let z = ctx.bundle.z;
    let neg_u_grad = |values: &[f64]| {
        space.element_integral(|e, qp, _| {
            let (u, _) = space.eval_at(e, qp, &torsion.dof_values);
            let (_, g) = space.eval_at(e, qp, values);
            -u * (g[0] * g[0] + g[1] * g[1])
        })
    };
    let mut out = Vec::new();
    let mut push = |label: String, lhs: f64, rhs: f64, scale: f64| {
        out.push(IdentityComponent {
            label,
            lhs,
            rhs,
            relative_residual: relative(lhs, rhs, 1e-14 * scale),
            scaled_residual: relative(lhs, rhs, scale),
        })
    };
    for (k, f) in functions.iter().enumerate() {
        match *f {
            TraceFunction::Harmonic => {
                let h = &ctx.bundle.h;
                let a = ctx.bundle.a;
                let l1 = ctx.boundary(|bp, u_nu, _| {
                    let q = 0.5 * ((bp.point[0] - z[0]).powi(2) + (bp.point[1] - z[1]).powi(2) - a);
                    q * q * u_nu
                });
                let r1 = n * space.integrate(&h.dof_values, |_, v, _| v * v)? + 2.0 * neg_u_grad(&h.dof_values)?;
                push(format!("v{k}=h:values"), l1, r1, l1.abs());
                let l2 = ctx.boundary(|bp, u_nu, q_nu| {
                    let d2 = (bp.point[0] - z[0]).powi(2) + (bp.point[1] - z[1]).powi(2);
                    (d2 - 2.0 * u_nu * q_nu + u_nu * u_nu) * u_nu
                });
                let s2 = ctx.boundary(|bp, u_nu, q_nu| {
                    let d2 = (bp.point[0] - z[0]).powi(2) + (bp.point[1] - z[1]).powi(2);
                    (d2 + 2.0 * (u_nu * q_nu).abs() + u_nu * u_nu) * u_nu.abs()
                });
                let r2 = n * space.integrate(&h.dof_values, |_, _, g| g[0] * g[0] + g[1] * g[1])?
                    + 2.0 * ctx.bundle.weighted_deficit;
                push(format!("v{k}=h:gradients"), l2, r2, s2);
            }
            TraceFunction::Linear(c) => {
                let v = |p: [f64; 2]| c[0] * (p[0] - z[0]) + c[1] * (p[1] - z[1]);
                let c2 = c[0] * c[0] + c[1] * c[1];
                let l1 = ctx.boundary(|bp, u_nu, _| v(bp.point).powi(2) * u_nu);
                let r1 = n * space.integrate(&torsion.dof_values, |p, _, _| v(p).powi(2))?
                    + 2.0 * c2 * space.integrate(&torsion.dof_values, |_, u, _| -u)?;
                push(format!("v{k}=linear:values"), l1, r1, l1.abs());
                let l2 = c2 * ctx.boundary(|_, u_nu, _| u_nu);
                push(format!("v{k}=linear:gradients"), l2, c2 * ctx.n_area, l2.abs());
            }
            TraceFunction::Field(field) => {
                if !Arc::ptr_eq(&field.space, space) {
                    return Err(Error::Precondition("trace function lives on a different mesh".into()));
                }
                let trace = space.trace_values(&field.dof_values);
                let tangential = tangential_derivative(field);
                let l1 = space.curve_integral(&[&torsion.boundary_flux, &trace], |_, _, w| w[1] * w[1] * w[0]);
                let r1 =
                    n * space.integrate(&field.dof_values, |_, v, _| v * v)? + 2.0 * neg_u_grad(&field.dof_values)?;
                push(format!("v{k}=field:values"), l1, r1, l1.abs());
                let l2 = space.curve_integral(
                    &[&torsion.boundary_flux, &tangential, &field.boundary_flux],
                    |_, _, w| (w[1] * w[1] + w[2] * w[2]) * w[0],
                );
                let r2 = n * space.integrate(&field.dof_values, |_, _, g| g[0] * g[0] + g[1] * g[1])?
                    + 2.0 * hessian_integral(torsion, field, |u| -u, frobenius_sq)?;
                push(format!("v{k}=field:gradients"), l2, r2, l2.abs());
            }
        }
    }
    Ok(out)
}

/// Evaluate one identity.
pub fn check_identity(
    id: IdentityId,
    torsion: &ScalarField,
    bundle: &HarmonicBundle,
    geometry: &GeometrySummary,
    trace_functions: &[TraceFunction],
) -> Result<IdentityResidual> {
    if !Arc::ptr_eq(&torsion.space, &bundle.h.space) {
        return Err(Error::Precondition("torsion field and bundle live on different meshes".into()));
    }
    let n = DIMENSION;
    let area = torsion.space.area()?;
    let ctx = Context {
        torsion,
        bundle,
        r_ref: geometry.r_ref,
        n_area: n * area,
    };
    let r = ctx.r_ref;
    let h0 = 1.0 / r;
    let perimeter = geometry.perimeter;
    let scale_len4 = ctx.n_area * r * r;
    let out = match id {
        IdentityId::Volume => {
            IdentityResidual::new(id, ctx.boundary(|_, u_nu, _| u_nu), ctx.n_area, ctx.n_area)
        }
        IdentityId::Minkowski => {
            let lhs = ctx.boundary(|bp, _, q_nu| bp.curvature * q_nu);
            IdentityResidual::new(id, lhs, perimeter, perimeter)
        }
        IdentityId::Pohozaev => {
            let energy = torsion.space.integrate(&torsion.dof_values, |_, _, g| g[0] * g[0] + g[1] * g[1])?;
            let rhs = ctx.boundary(|_, u_nu, q_nu| u_nu * u_nu * q_nu);
            IdentityResidual::new(id, (n + 2.0) * energy, rhs, rhs.abs())
        }
        IdentityId::Serrin => {
            let lhs = ctx.deficit_u(true)?;
            let rhs = 0.5 * ctx.boundary(|_, u_nu, q_nu| (u_nu * u_nu - r * r) * (u_nu - q_nu));
            IdentityResidual::new(id, lhs, rhs, scale_len4)
        }
        IdentityId::SerrinH => {
            let rhs = 0.5 * ctx.boundary(|_, u_nu, q_nu| (r * r - u_nu * u_nu) * (q_nu - u_nu));
            IdentityResidual::new(id, bundle.weighted_deficit, rhs, scale_len4)
        }
        IdentityId::Fundamental => {
            let lhs = ctx.deficit_u(false)? / (n - 1.0);
            let rhs = ctx.n_area - ctx.boundary(|bp, u_nu, _| bp.curvature * u_nu * u_nu);
            IdentityResidual::new(id, lhs, rhs, ctx.n_area)
        }
        IdentityId::Sbt => {
            let lhs = ctx.deficit_u(false)? / (n - 1.0) + ctx.boundary(|_, u_nu, _| (u_nu - r).powi(2)) / r;
            let rhs = ctx.boundary(|bp, u_nu, _| (h0 - bp.curvature) * u_nu * u_nu);
            IdentityResidual::new(id, lhs, rhs, ctx.n_area)
        }
        IdentityId::Sbt2 => {
            let lhs = ctx.deficit_u(false)? / (n - 1.0) + ctx.boundary(|_, u_nu, _| (u_nu - r).powi(2)) / r;
            let rhs = ctx.boundary(|bp, u_nu, q_nu| {
                (h0 - bp.curvature) * ((u_nu - q_nu) * u_nu + (u_nu - r) * q_nu)
            });
            IdentityResidual::new(id, lhs, rhs, ctx.n_area)
        }
        IdentityId::HeintzeKarcher => {
            if !(geometry.min_curvature > 0.0) {
                IdentityResidual::not_applicable(id, "H ≤ 0 somewhere")
            } else {
                let lhs = ctx.deficit_u(false)? / (n - 1.0)
                    + ctx.boundary(|bp, u_nu, _| (1.0 - bp.curvature * u_nu).powi(2) / bp.curvature);
                let rhs = ctx.boundary(|bp, _, _| 1.0 / bp.curvature) - ctx.n_area;
                IdentityResidual::new(id, lhs, rhs, ctx.n_area)
            }
        }
        IdentityId::TraceV => {
            let components = trace_components(&ctx, trace_functions)?;
            let worst = components
                .iter()
                .max_by(|a, b| a.relative_residual.total_cmp(&b.relative_residual))
                .ok_or_else(|| Error::InvalidParameter("trace_v needs at least one test function".into()))?;
            let mut res = IdentityResidual::new(id, worst.lhs, worst.rhs, 0.0);
            res.relative_residual = worst.relative_residual;
            res.scale = components.iter().map(|c| c.lhs.abs()).fold(0.0, f64::max);
            res.scaled_residual = components.iter().map(|c| c.scaled_residual).fold(0.0, f64::max);
            res.components = components;
            res
        }
    };
    Ok(out)
}

/// All identities for fields already on hand, in id order.
pub fn identities_for(
    torsion: &ScalarField,
    bundle: &HarmonicBundle,
    geometry: &GeometrySummary,
) -> Result<Vec<IdentityResidual>> {
    IdentityId::ALL
        .par_iter()
        .map(|&id| check_identity(id, torsion, bundle, geometry, &DEFAULT_TRACE_FUNCTIONS))
        .collect()
}

/// Mesh, solve, center at the critical point with `a = 0`, check all ids.
pub fn identity_suite(curve: &BoundaryCurve, h_max: f64, degree: Degree) -> Result<Vec<IdentityResidual>> {
    let mesh = Arc::new(triangulate(curve, h_max)?);
    let torsion = solve_torsion(mesh, degree)?;
    let z = critical_point(&torsion)?;
    let bundle = build_harmonic(&torsion, z, 0.0)?;
    let geometry = geometry_summary(curve, 4096)?;
    identities_for(&torsion, &bundle, &geometry)
}

/// CSV table `id,lhs,rhs,residual,scaled_residual,applicable`.
pub fn residuals_csv(rows: &[IdentityResidual]) -> String {
    let mut out = String::from("id,lhs,rhs,residual,scaled_residual,applicable\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.12e},{:.12e},{:.6e},{:.6e},{}",
            r.identity_id.name(),
            r.lhs,
            r.rhs,
            r.relative_residual,
            r.scaled_residual,
            r.applicable
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(rows: &[IdentityResidual], id: IdentityId) -> &IdentityResidual {
        rows.iter().find(|r| r.identity_id == id).unwrap()
    }

    #[test]
    fn disk_suite() {
        let c = BoundaryCurve::circle(1.0, [0.0, 0.0]).unwrap();
        let rows = identity_suite(&c, 0.05, Degree::Quadratic).unwrap();
        assert_eq!(rows.len(), 10);
        for r in &rows {
            assert!(r.applicable);
            assert!(r.scaled_residual <= 1e-3, "{:?}", r);
        }
        for id in [IdentityId::Volume, IdentityId::Minkowski, IdentityId::Pohozaev] {
            assert!(get(&rows, id).relative_residual <= 1e-3, "{:?}", get(&rows, id));
        }
        for id in [IdentityId::Serrin, IdentityId::SerrinH, IdentityId::Sbt] {
            let r = get(&rows, id);
            assert!(r.lhs.abs() <= 1e-5 && r.rhs.abs() <= 1e-5, "{r:?}");
        }
    }

    #[test]
    fn mode_three_volume_converges() {
        let c = BoundaryCurve::cosine_mode(1.0, 3, 0.1).unwrap();
        let coarse = identity_suite(&c, 0.04, Degree::Quadratic).unwrap();
        let mesh = Arc::new(triangulate(&c, 0.04).unwrap().refine());
        let u = solve_torsion(mesh, Degree::Quadratic).unwrap();
        let b = build_harmonic(&u, critical_point(&u).unwrap(), 0.0).unwrap();
        let g = geometry_summary(&c, 4096).unwrap();
        let fine = check_identity(IdentityId::Volume, &u, &b, &g, &[]).unwrap();
        let r0 = get(&coarse, IdentityId::Volume).relative_residual;
        assert!(r0 <= 5e-3);
        assert!(fine.relative_residual <= r0 / 2.0, "{r0} {}", fine.relative_residual);
    }

    #[test]
    fn nonconvex_star_skips_heintze_karcher() {
        let c = BoundaryCurve::cosine_mode(1.0, 5, 0.3).unwrap();
        let rows = identity_suite(&c, 0.04, Degree::Quadratic).unwrap();
        let hk = get(&rows, IdentityId::HeintzeKarcher);
        assert!(!hk.applicable);
        assert_eq!(hk.reason.as_deref(), Some("H ≤ 0 somewhere"));
    }

    #[test]
    fn linear_trace_function_reduces_to_volume() {
        let c = BoundaryCurve::cosine_mode(1.0, 2, 0.1).unwrap();
        let rows = identity_suite(&c, 0.05, Degree::Quadratic).unwrap();
        let comps = &get(&rows, IdentityId::TraceV).components;
        let lin = comps.iter().find(|c| c.label == "v1=linear:gradients").unwrap();
        let vol = get(&rows, IdentityId::Volume);
        assert!((lin.relative_residual - vol.relative_residual).abs() < 1e-12);
    }

    #[test]
    fn ellipse_like_domain_all_applicable() {
        let c = BoundaryCurve::cosine_mode(1.0, 2, 0.1).unwrap();
        let rows = identity_suite(&c, 0.04, Degree::Quadratic).unwrap();
        assert!(rows.iter().all(|r| r.applicable));
        let csv = residuals_csv(&rows);
        assert_eq!(csv.lines().count(), 11);
    }

    #[test]
    fn field_trace_function_matches_harmonic() {
        let c = BoundaryCurve::cosine_mode(1.0, 2, 0.1).unwrap();
        let mesh = Arc::new(triangulate(&c, 0.05).unwrap());
        let u = solve_torsion(mesh, Degree::Quadratic).unwrap();
        let b = build_harmonic(&u, critical_point(&u).unwrap(), 0.0).unwrap();
        let g = geometry_summary(&c, 4096).unwrap();
        let r = check_identity(IdentityId::TraceV, &u, &b, &g, &[TraceFunction::Field(&b.h)]).unwrap();
        assert!(r.relative_residual < 1e-2, "{r:?}");
    }
}
