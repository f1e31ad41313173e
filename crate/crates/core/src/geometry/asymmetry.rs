use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{BoundaryCurve, Point};
use crate::numeric::{nelder_mead_2d, pairwise_sum};

/// Boundary samples used for the polygonal approximation of the domain.
const POLYGON_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryResult {
    /// `inf_x |Ω Δ B_R(x)| / |B_R|`
    pub value: f64,
    pub center: Point,
    pub converged: bool,
}

/// Signed area of `triangle(0, a, b) ∩ disk(0, radius)`.
fn triangle_disk_area(a: Point, b: Point, radius: f64) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    if qa == 0.0 {
        return 0.0;
    }
    let qb = 2.0 * (a[0] * d[0] + a[1] * d[1]);
    let qc = a[0] * a[0] + a[1] * a[1] - radius * radius;
    let disc = qb * qb - 4.0 * qa * qc;
    let mut cuts = vec![0.0];
    if disc > 0.0 {
        let s = disc.sqrt();
        for t in [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)] {
            if t > 0.0 && t < 1.0 {
                cuts.push(t);
            }
        }
    }
    cuts.push(1.0);
    let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (at(w[0]), at(w[1]));
        let m = at(0.5 * (w[0] + w[1]));
        let cross = p[0] * q[1] - p[1] * q[0];
        if m[0] * m[0] + m[1] * m[1] <= radius * radius {
            area += 0.5 * cross;
        } else {
            let dot = p[0] * q[0] + p[1] * q[1];
            area += 0.5 * radius * radius * cross.atan2(dot);
        }
    }
    area
}

/// Area of `polygon ∩ disk(center, radius)` for a simple counterclockwise
/// polygon.
pub fn disk_polygon_intersection_area(polygon: &[Point], center: Point, radius: f64) -> f64 {
    let n = polygon.len();
    let terms: Vec<f64> = (0..n)
        .map(|i| {
            let a = polygon[i];
            let b = polygon[(i + 1) % n];
            triangle_disk_area(
                [a[0] - center[0], a[1] - center[1]],
                [b[0] - center[0], b[1] - center[1]],
                radius,
            )
        })
        .collect();
    pairwise_sum(&terms)
}

fn polygon_area(polygon: &[Point]) -> f64 {
    let n = polygon.len();
    let terms: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % n]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        })
        .collect();
    pairwise_sum(&terms)
}

/// Fraenkel-type asymmetry with the ball radius fixed to `r_ref`.
///
/// Coarse grid over the domain with step `R/10`, then a simplex descent to a
/// center tolerance of `1e-8`. The symmetric difference is evaluated by
/// clipping the sampled boundary polygon against the disk.
pub fn asymmetry(curve: &BoundaryCurve, r_ref: f64) -> AsymmetryResult {
    assert!(r_ref > 0.0, "asymmetry needs a positive reference radius");
    let polygon: Vec<Point> = (0..POLYGON_SAMPLES)
        .map(|j| curve.point(2.0 * PI * j as f64 / POLYGON_SAMPLES as f64))
        .collect();
    let area = polygon_area(&polygon);
    let ball = PI * r_ref * r_ref;
    let objective = |x: [f64; 2]| {
        let inter = disk_polygon_intersection_area(&polygon, x, r_ref);
        (area + ball - 2.0 * inter) / ball
    };

    let extent = curve.max_radius();
    let step = r_ref / 10.0;
    let cells = (extent / step).ceil() as i64;
    let mut best: Option<(f64, Point)> = None;
    for i in -cells..=cells {
        for j in -cells..=cells {
            let x = [curve.center[0] + i as f64 * step, curve.center[1] + j as f64 * step];
            if !curve.contains(x) {
                continue;
            }
            let v = objective(x);
            let better = match best {
                None => true,
                Some((bv, bx)) => v < bv || (v == bv && x < bx),
            };
            if better {
                best = Some((v, x));
            }
        }
    }
    let (v0, x0) = best.unwrap_or((objective(curve.center), curve.center));
    let refined = nelder_mead_2d(objective, x0, step, 1e-8, 4000);
    if refined.value <= v0 {
        AsymmetryResult {
            value: refined.value.max(0.0),
            center: refined.point,
            converged: refined.converged,
        }
    } else {
        AsymmetryResult {
            value: v0.max(0.0),
            center: x0,
            converged: false,
        }
    }
}
