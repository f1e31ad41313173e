//! Star-shaped planar domains described by a truncated Fourier series of the
//! radial function `r(θ)` around a center point.
//!
//! Curvature is the signed curvature with respect to the inner normal, so it
//! is positive on convex arcs and equals `1/ρ` on a circle of radius `ρ`. In
//! the plane this coincides with the averaged mean curvature `H`.

mod asymmetry;

pub use asymmetry::{asymmetry, disk_polygon_intersection_area, AsymmetryResult};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{golden_min, pairwise_sum};

pub type Point = [f64; 2];

/// Number of θ samples used to validate star-shapedness.
const VALIDATION_SAMPLES: usize = 4096;

/// Boundary `θ ↦ center + r(θ)(cos θ, sin θ)` with
/// `r(θ) = a0 + Σ_k cos[k]·cos((k+1)θ) + sin[k]·sin((k+1)θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryCurve {
    pub a0: f64,
    #[serde(rename = "cos", default)]
    pub cos_coeffs: Vec<f64>,
    #[serde(rename = "sin", default)]
    pub sin_coeffs: Vec<f64>,
    #[serde(default)]
    pub center: Point,
}

/// Point, frame and curvature of the boundary at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: Point,
    pub tangent: Point,
    pub normal: Point,
    pub curvature: f64,
    /// `|γ'(θ)|`, the arclength density.
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub area: f64,
    pub perimeter: f64,
    #[serde(rename = "R")]
    pub r_ref: f64,
    #[serde(rename = "H0")]
    pub h0: f64,
    pub diameter: f64,
    pub r_i: f64,
    /// `+∞` (serialized as `null`) when no exterior ball ever re-touches the
    /// curve, as for convex domains.
    #[serde(deserialize_with = "crate::numeric::f64_or_infinity")]
    pub r_e: f64,
    pub min_curvature: f64,
    pub max_curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiiAtPoint {
    pub z: Point,
    pub rho_i: f64,
    pub rho_e: f64,
    pub delta_gamma: f64,
    pub interior: bool,
}

impl BoundaryCurve {
    pub fn new(a0: f64, cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>, center: Point) -> Result<Self> {
        let curve = Self {
            a0,
            cos_coeffs,
            sin_coeffs,
            center,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn circle(radius: f64, center: Point) -> Result<Self> {
        Self::new(radius, vec![], vec![], center)
    }

    /// `r(θ) = a0 + amplitude·cos(mode·θ)` centered at the origin.
    pub fn cosine_mode(a0: f64, mode: usize, amplitude: f64) -> Result<Self> {
        if mode == 0 {
            return Err(Error::InvalidCurve("mode must be at least 1".into()));
        }
        let mut cos = vec![0.0; mode];
        cos[mode - 1] = amplitude;
        Self::new(a0, cos, vec![], [0.0, 0.0])
    }

    /// Checks finiteness and positivity of `r` on a dense grid.
    pub fn validate(&self) -> Result<()> {
        let finite = self.a0.is_finite()
            && self.center.iter().all(|c| c.is_finite())
            && self.cos_coeffs.iter().chain(&self.sin_coeffs).all(|c| c.is_finite());
        if !finite {
            return Err(Error::InvalidCurve("non-finite Fourier data".into()));
        }
        if self.a0 <= 0.0 {
            return Err(Error::InvalidCurve(format!("a0 must be positive, got {}", self.a0)));
        }
        for j in 0..VALIDATION_SAMPLES {
            let theta = 2.0 * PI * j as f64 / VALIDATION_SAMPLES as f64;
            let r = self.radius(theta);
            if r <= 0.0 {
                return Err(Error::NotStarShaped { theta, radius: r });
            }
        }
        Ok(())
    }

    pub fn is_circle(&self) -> bool {
        self.cos_coeffs.iter().chain(&self.sin_coeffs).all(|c| c.abs() < 1e-12)
    }

    /// `(r, r', r'')` at `theta`.
    pub fn radial_derivatives(&self, theta: f64) -> (f64, f64, f64) {
        let (mut r, mut dr, mut ddr) = (self.a0, 0.0, 0.0);
        let modes = self.cos_coeffs.len().max(self.sin_coeffs.len());
        for k in 0..modes {
            let m = (k + 1) as f64;
            let a = self.cos_coeffs.get(k).copied().unwrap_or(0.0);
            let b = self.sin_coeffs.get(k).copied().unwrap_or(0.0);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let (s, c) = (m * theta).sin_cos();
            r += a * c + b * s;
            dr += m * (-a * s + b * c);
            ddr -= m * m * (a * c + b * s);
        }
        (r, dr, ddr)
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.radial_derivatives(theta).0
    }

    pub fn point(&self, theta: f64) -> Point {
        let r = self.radius(theta);
        let (s, c) = theta.sin_cos();
        [self.center[0] + r * c, self.center[1] + r * s]
    }

    /// Point, unit tangent (counterclockwise), outward unit normal, curvature.
    pub fn eval(&self, theta: f64) -> BoundaryPoint {
        let (r, dr, ddr) = self.radial_derivatives(theta);
        let (s, c) = theta.sin_cos();
        let d = [dr * c - r * s, dr * s + r * c];
        let speed = (r * r + dr * dr).sqrt();
        let tangent = [d[0] / speed, d[1] / speed];
        let normal = [tangent[1], -tangent[0]];
        let curvature = (r * r + 2.0 * dr * dr - r * ddr) / speed.powi(3);
        BoundaryPoint {
            point: [self.center[0] + r * c, self.center[1] + r * s],
            tangent,
            normal,
            curvature,
            speed,
        }
    }

    /// Polar angle of `p` about the center, in `[0, 2π)`.
    pub fn angle_of(&self, p: Point) -> f64 {
        let a = (p[1] - self.center[1]).atan2(p[0] - self.center[0]);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }

    /// Strict interior test, exact for star-shaped curves.
    pub fn contains(&self, p: Point) -> bool {
        let d = ((p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2)).sqrt();
        d < self.radius(self.angle_of(p))
    }

    /// Curve moved by `shift`.
    pub fn translated(&self, shift: Point) -> Self {
        let mut c = self.clone();
        c.center = [c.center[0] + shift[0], c.center[1] + shift[1]];
        c
    }

    /// Curve scaled by `factor` about the origin of coordinates.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            a0: self.a0 * factor,
            cos_coeffs: self.cos_coeffs.iter().map(|v| v * factor).collect(),
            sin_coeffs: self.sin_coeffs.iter().map(|v| v * factor).collect(),
            center: [self.center[0] * factor, self.center[1] * factor],
        }
    }

    /// `min_θ r(θ)` on a dense grid, a lower bound for the extent of the
    /// domain around its center.
    pub fn min_radius(&self) -> f64 {
        (0..VALIDATION_SAMPLES)
            .map(|j| self.radius(2.0 * PI * j as f64 / VALIDATION_SAMPLES as f64))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_radius(&self) -> f64 {
        (0..VALIDATION_SAMPLES)
            .map(|j| self.radius(2.0 * PI * j as f64 / VALIDATION_SAMPLES as f64))
            .fold(0.0, f64::max)
    }

    /// Uniform θ grid of `n` samples starting at 0.
    pub fn samples(&self, n: usize) -> Vec<BoundaryPoint> {
        (0..n).map(|j| self.eval(2.0 * PI * j as f64 / n as f64)).collect()
    }

    /// `∮ f dS` by the trapezoid rule on `n` uniform θ samples.
    pub fn boundary_integral(&self, n: usize, f: impl Fn(f64, &BoundaryPoint) -> f64) -> f64 {
        let dt = 2.0 * PI / n as f64;
        let terms: Vec<f64> = (0..n)
            .map(|j| {
                let theta = j as f64 * dt;
                let bp = self.eval(theta);
                f(theta, &bp) * bp.speed * dt
            })
            .collect();
        pairwise_sum(&terms)
    }
}

/// Area, perimeter, reference radius, diameter and uniform ball radii.
pub fn geometry_summary(curve: &BoundaryCurve, n_samples: usize) -> Result<GeometrySummary> {
    if n_samples < 64 {
        return Err(Error::InvalidParameter(format!(
            "geometry_summary needs at least 64 samples, got {n_samples}"
        )));
    }
    curve.validate()?;
    let dt = 2.0 * PI / n_samples as f64;
    let samples = curve.samples(n_samples);
    let radii: Vec<f64> = (0..n_samples).map(|j| curve.radius(j as f64 * dt)).collect();
    let area = 0.5 * pairwise_sum(&radii.iter().map(|r| r * r * dt).collect::<Vec<_>>());
    let perimeter = pairwise_sum(&samples.iter().map(|s| s.speed * dt).collect::<Vec<_>>());
    let r_ref = 2.0 * area / perimeter;
    let (r_i, r_e) = touching_ball_radii(&samples);
    let min_curvature = samples.iter().map(|s| s.curvature).fold(f64::INFINITY, f64::min);
    let max_curvature = samples.iter().map(|s| s.curvature).fold(f64::NEG_INFINITY, f64::max);
    Ok(GeometrySummary {
        area,
        perimeter,
        r_ref,
        h0: 1.0 / r_ref,
        diameter: diameter(curve, &samples),
        r_i,
        r_e,
        min_curvature,
        max_curvature,
    })
}

/// Largest interior and exterior balls touching the curve at every sample.
///
/// The ball of radius `ρ` tangent at `p` from inside has center `p − ρν`; it
/// stays clear of a boundary point `x` iff `|x−p|² ≥ 2ρ (p−x)·ν`. The local
/// limit `x → p` is the radius of curvature, which is included explicitly.
fn touching_ball_radii(samples: &[BoundaryPoint]) -> (f64, f64) {
    let n = samples.len();
    let per_point: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|j| {
                let p = &samples[j];
                let mut inner = if p.curvature > 0.0 { 1.0 / p.curvature } else { f64::INFINITY };
                let mut outer = if p.curvature < 0.0 { -1.0 / p.curvature } else { f64::INFINITY };
                for (k, x) in samples.iter().enumerate() {
                    if k == j {
                        continue;
                    }
                    let d = [x.point[0] - p.point[0], x.point[1] - p.point[1]];
                    let dist2 = d[0] * d[0] + d[1] * d[1];
                    let along = d[0] * p.normal[0] + d[1] * p.normal[1];
                    if along < 0.0 {
                        inner = inner.min(dist2 / (-2.0 * along));
                    } else if along > 0.0 {
                        outer = outer.min(dist2 / (2.0 * along));
                    }
                }
                (inner, outer)
            })
            .collect()
    };
    per_point
        .iter()
        .fold((f64::INFINITY, f64::INFINITY), |acc, v| (acc.0.min(v.0), acc.1.min(v.1)))
}

fn diameter(curve: &BoundaryCurve, samples: &[BoundaryPoint]) -> f64 {
    // brute force over at most 2048 samples, then local refinement
    let stride = samples.len().div_ceil(2048).max(1);
    let picked: Vec<(usize, Point)> = samples
        .iter()
        .enumerate()
        .step_by(stride)
        .map(|(j, s)| (j, s.point))
        .collect();
    let mut best = (0.0, 0usize, 0usize);
    for a in 0..picked.len() {
        for b in a + 1..picked.len() {
            let (pa, pb) = (picked[a].1, picked[b].1);
            let d2 = (pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2);
            if d2 > best.0 {
                best = (d2, picked[a].0, picked[b].0);
            }
        }
    }
    let dt = 2.0 * PI / samples.len() as f64;
    let (mut t1, mut t2) = (best.1 as f64 * dt, best.2 as f64 * dt);
    let dist = |a: f64, b: f64| {
        let (pa, pb) = (curve.point(a), curve.point(b));
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
    };
    let window = 2.0 * stride as f64 * dt;
    for _ in 0..6 {
        t1 = golden_min(|t| -dist(t, t2), t1 - window, t1 + window, 1e-12).0;
        t2 = golden_min(|t| -dist(t1, t), t2 - window, t2 + window, 1e-12).0;
    }
    dist(t1, t2).max(best.0.sqrt())
}

/// Minimum and maximum distance from `z` to the curve.
pub fn radii_at(curve: &BoundaryCurve, z: Point) -> RadiiAtPoint {
    const SAMPLES: usize = 4096;
    let dt = 2.0 * PI / SAMPLES as f64;
    let dist = |t: f64| {
        let p = curve.point(t);
        ((p[0] - z[0]).powi(2) + (p[1] - z[1]).powi(2)).sqrt()
    };
    let values: Vec<f64> = (0..SAMPLES).map(|j| dist(j as f64 * dt)).collect();
    let (mut jmin, mut jmax) = (0, 0);
    for (j, v) in values.iter().enumerate() {
        if *v < values[jmin] {
            jmin = j;
        }
        if *v > values[jmax] {
            jmax = j;
        }
    }
    let t_min = jmin as f64 * dt;
    let t_max = jmax as f64 * dt;
    let rho_i = golden_min(dist, t_min - dt, t_min + dt, 1e-13).1.min(values[jmin]);
    let rho_e = (-golden_min(|t| -dist(t), t_max - dt, t_max + dt, 1e-13).1).max(values[jmax]);
    let interior = curve.contains(z);
    RadiiAtPoint {
        z,
        rho_i,
        rho_e,
        delta_gamma: rho_i,
        interior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn unit_circle_frame() {
        let c = BoundaryCurve::circle(1.0, [0.0, 0.0]).unwrap();
        let bp = c.eval(0.0);
        assert!(close(bp.point[0], 1.0, 1e-15) && close(bp.point[1], 0.0, 1e-15));
        assert!(close(bp.normal[0], 1.0, 1e-15) && close(bp.normal[1], 0.0, 1e-15));
        assert!(close(bp.curvature, 1.0, 1e-15));
    }

    #[test]
    fn circle_of_radius_two_has_half_curvature() {
        let c = BoundaryCurve::circle(2.0, [0.5, -1.0]).unwrap();
        for j in 0..7 {
            assert!(close(c.eval(0.9 * j as f64).curvature, 0.5, 1e-14));
        }
    }

    #[test]
    fn polar_curvature_matches_finite_differences() {
        // oracle: curvature of the parametrization γ(θ) from central differences
        let c = BoundaryCurve::cosine_mode(1.0, 2, 0.2).unwrap();
        for &theta in &[0.0, 0.4, 1.3, 2.9] {
            let h = 1e-4;
            let p = |t: f64| c.point(t);
            let (a, b, m) = (p(theta - h), p(theta + h), p(theta));
            let d1 = [(b[0] - a[0]) / (2.0 * h), (b[1] - a[1]) / (2.0 * h)];
            let d2 = [
                (b[0] - 2.0 * m[0] + a[0]) / (h * h),
                (b[1] - 2.0 * m[1] + a[1]) / (h * h),
            ];
            let kappa = (d1[0] * d2[1] - d1[1] * d2[0]) / (d1[0].hypot(d1[1])).powi(3);
            assert!(close(c.eval(theta).curvature, kappa, 1e-6), "θ={theta}");
        }
        // θ = 0 closed value: r = 1.2, r' = 0, r'' = -0.8
        let expected = (1.44 + 1.2 * 0.8) / 1.2f64.powi(3);
        assert!(close(c.eval(0.0).curvature, expected, 1e-14));
    }

    #[test]
    fn frame_is_orthonormal_and_periodic() {
        let c = BoundaryCurve::new(1.0, vec![0.0, 0.1, 0.05], vec![0.03], [0.2, 0.1]).unwrap();
        for j in 0..50 {
            let t = j as f64 * 0.13;
            let bp = c.eval(t);
            assert!(close(bp.normal[0].hypot(bp.normal[1]), 1.0, 1e-14));
            assert!(close(bp.normal[0] * bp.tangent[0] + bp.normal[1] * bp.tangent[1], 0.0, 1e-14));
            let q = c.point(t + 2.0 * PI);
            assert!(close(q[0], bp.point[0], 1e-13) && close(q[1], bp.point[1], 1e-13));
        }
    }

    #[test]
    fn invalid_curves_are_rejected() {
        assert!(matches!(
            BoundaryCurve::new(f64::NAN, vec![], vec![], [0.0, 0.0]),
            Err(Error::InvalidCurve(_))
        ));
        assert!(matches!(
            BoundaryCurve::cosine_mode(1.0, 2, 1.5),
            Err(Error::NotStarShaped { .. })
        ));
    }

    #[test]
    fn unit_circle_summary() {
        let c = BoundaryCurve::circle(1.0, [0.0, 0.0]).unwrap();
        let g = geometry_summary(&c, 256).unwrap();
        assert!(close(g.area, PI, 1e-13));
        assert!(close(g.perimeter, 2.0 * PI, 1e-13));
        assert!(close(g.r_ref, 1.0, 1e-13));
        assert!(close(g.r_ref * g.h0, 1.0, 1e-15));
        assert!(close(g.r_i, 1.0, 1e-10));
        assert!(g.r_e.is_infinite());
        assert!(close(g.diameter, 2.0, 1e-12));
    }

    #[test]
    fn scaled_circle_reference_radius() {
        let c = BoundaryCurve::circle(2.5, [0.0, 0.0]).unwrap();
        let g = geometry_summary(&c, 128).unwrap();
        assert!(close(g.r_ref, 2.5, 1e-12));
    }

    #[test]
    fn fourier_area_identity() {
        // ½∮r² = π(a0² + ½Σ amplitudes²)
        let c = BoundaryCurve::cosine_mode(1.0, 2, 0.2).unwrap();
        let g = geometry_summary(&c, 512).unwrap();
        assert!(close(g.area, PI * 1.02, 1e-13));
        // independent dense trapezoid for the perimeter
        let n = 200_000;
        let dense: f64 = (0..n)
            .map(|j| {
                let (r, dr, _) = c.radial_derivatives(2.0 * PI * j as f64 / n as f64);
                (r * r + dr * dr).sqrt()
            })
            .sum::<f64>()
            * 2.0
            * PI
            / n as f64;
        assert!(close(g.perimeter, dense, 1e-10));
    }

    #[test]
    fn summary_rejects_too_few_samples() {
        let c = BoundaryCurve::circle(1.0, [0.0, 0.0]).unwrap();
        assert!(geometry_summary(&c, 32).is_err());
    }

    #[test]
    fn radii_of_unit_circle() {
        let c = BoundaryCurve::circle(1.0, [0.0, 0.0]).unwrap();
        let r = radii_at(&c, [0.0, 0.0]);
        assert!(close(r.rho_i, 1.0, 1e-14) && close(r.rho_e, 1.0, 1e-14));
        let r = radii_at(&c, [0.3, 0.0]);
        assert!(close(r.rho_i, 0.7, 1e-12) && close(r.rho_e, 1.3, 1e-12));
        assert!(r.interior);
        assert!(!radii_at(&c, [2.0, 0.0]).interior);
    }

    #[test]
    fn radii_of_three_lobed_curve() {
        let c = BoundaryCurve::cosine_mode(1.0, 3, 0.1).unwrap();
        let r = radii_at(&c, [0.0, 0.0]);
        assert!(close(r.rho_i, 0.9, 1e-12) && close(r.rho_e, 1.1, 1e-12));
    }

    #[test]
    fn nonconvex_curve_has_finite_exterior_radius() {
        let c = BoundaryCurve::cosine_mode(1.0, 5, 0.1).unwrap();
        let g = geometry_summary(&c, 1024).unwrap();
        assert!(g.min_curvature < 0.0);
        assert!(g.r_e.is_finite() && g.r_e > 0.0);
        assert!(g.r_i > 0.0 && g.r_i <= 1.0 / g.max_curvature + 1e-12);
    }
}
