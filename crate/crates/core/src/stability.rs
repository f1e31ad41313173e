//! Deficits of the overdetermined conditions, checks of the inequalities
//! with explicit constants, and exponent sweeps along perturbation families.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Degree;
use crate::geometry::{
    asymmetry, disk_polygon_intersection_area, geometry_summary, radii_at, BoundaryCurve, GeometrySummary, Point,
};
use crate::harmonic::{build_harmonic, HarmonicSummary};
use crate::identities::{identities_for, IdentityResidual};
use crate::mesh::triangulate;
use crate::numeric::{golden_min, log_log_fit, LinearFit};
use crate::torsion::{critical_point, solve_torsion, torsional_rigidity, ScalarField, TorsionalRigidity, DIMENSION};

/// Relative slack granted to the disadvantaged side of every inequality.
pub const BOUND_SLACK: f64 = 0.02;

/// Polygon resolution for `|Ω Δ B_R(z)|`.
const AT_Z_SAMPLES: usize = 65536;

/// Samples of the boundary used for distance queries.
const DISTANCE_SAMPLES: usize = 4096;

/// `c_N` of the boundary gradient bound for `N = 2`.
pub const GRADIENT_CONSTANT_2D: f64 = 1.5;

/// Worst-case ratios of the two distance lower bounds over interior vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBounds {
    /// `min −u / (½δ²)`
    #[serde(deserialize_with = "crate::numeric::f64_or_infinity")]
    pub quadratic_ratio: f64,
    /// `min −u / ((r_i/2)δ)`
    #[serde(deserialize_with = "crate::numeric::f64_or_infinity")]
    pub linear_ratio: f64,
    pub vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    pub h_max: f64,
    pub degree: Degree,
    pub geometry: GeometrySummary,
    pub z: Point,
    pub rho_i: f64,
    pub rho_e: f64,
    pub rho_gap: f64,
    /// `‖u_ν − R‖_{2,Γ}`
    pub serrin_l2: f64,
    /// `‖u_ν − R‖_{1,Γ}`
    pub serrin_l1: f64,
    /// `‖H₀ − H‖_{2,Γ}`
    pub sbt_l2: f64,
    /// `∫_Γ (H₀ − H)⁺`
    pub sbt_plus: f64,
    /// `∮ dS/H − N|Ω|`, `None` unless `H > 0` everywhere.
    pub hk_deficit: Option<f64>,
    /// `∮ (1/H − u_ν)`, `None` unless `H > 0` everywhere.
    pub obvp_deficit: Option<f64>,
    pub asymmetry: f64,
    pub asymmetry_center: Point,
    /// `|Ω Δ B_R(z)| / |B_R|`
    pub asymmetry_at_z: f64,
    /// Discretization error of the polygon used for `asymmetry_at_z`.
    pub asymmetry_tolerance: f64,
    pub min_flux: f64,
    pub max_flux: f64,
    pub distance_bounds: DistanceBounds,
    pub rigidity: TorsionalRigidity,
    pub harmonic: HarmonicSummary,
    pub identity_residuals: Vec<IdentityResidual>,
}

/// Distance from `x` to the curve, from dense samples refined by a golden
/// search around the nearest one.
struct CurveDistance<'a> {
    curve: &'a BoundaryCurve,
    samples: Vec<Point>,
}

impl<'a> CurveDistance<'a> {
    fn new(curve: &'a BoundaryCurve) -> Self {
        let samples = (0..DISTANCE_SAMPLES)
            .map(|j| curve.point(2.0 * PI * j as f64 / DISTANCE_SAMPLES as f64))
            .collect();
        CurveDistance { curve, samples }
    }

    fn distance(&self, x: Point) -> f64 {
        let d2 = |p: Point| (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
        let (best, _) = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, p)| (j, d2(*p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let step = 2.0 * PI / DISTANCE_SAMPLES as f64;
        let t = best as f64 * step;
        let (_, v) = golden_min(|s| d2(self.curve.point(s)), t - step, t + step, 1e-12);
        v.min(d2(self.samples[best])).sqrt()
    }
}

fn distance_bounds(field: &ScalarField, r_i: f64) -> DistanceBounds {
    let mesh = field.mesh();
    let dist = CurveDistance::new(&mesh.curve);
    let boundary = mesh.is_boundary_vertex();
    let ratios: Vec<(f64, f64)> = (0..mesh.vertices.len())
        .into_par_iter()
        .filter(|&v| !boundary[v])
        .map(|v| {
            let d = dist.distance(mesh.vertices[v]);
            let neg_u = -field.vertex_value(v);
            (neg_u / (0.5 * d * d), neg_u / (0.5 * r_i * d))
        })
        .collect();
    DistanceBounds {
        quadratic_ratio: ratios.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        linear_ratio: ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
        vertices: ratios.len(),
    }
}

/// Everything about one domain: solve, center, deficits, identities.
pub fn deficit_report(curve: &BoundaryCurve, h_max: f64, degree: Degree) -> Result<DeficitReport> {
    let mesh = Arc::new(triangulate(curve, h_max)?);
    let torsion = solve_torsion(mesh, degree)?;
    let geometry = geometry_summary(curve, 4096)?;
    report_for(&torsion, &geometry, h_max)
}

/// Deficit report for a torsion field already on hand.
pub fn report_for(torsion: &ScalarField, geometry: &GeometrySummary, h_max: f64) -> Result<DeficitReport> {
    let n = DIMENSION;
    let curve = &torsion.mesh().curve;
    let z = critical_point(torsion)?;
    let bundle = build_harmonic(torsion, z, 0.0)?;
    let radii = radii_at(curve, z);
    let r = geometry.r_ref;
    let h0 = 1.0 / r;
    let space = &torsion.space;
    let flux = &torsion.boundary_flux;
    let serrin_l2 = space.curve_integral(&[flux], |_, _, v| (v[0] - r).powi(2)).sqrt();
    let serrin_l1 = space.curve_integral(&[flux], |_, _, v| (v[0] - r).abs());
    // purely geometric: trapezoid on the periodic curve is spectrally accurate
    let sbt_l2 = curve.boundary_integral(8192, |_, bp| (h0 - bp.curvature).powi(2)).sqrt();
    let sbt_plus = curve.boundary_integral(8192, |_, bp| (h0 - bp.curvature).max(0.0));
    let (hk_deficit, obvp_deficit) = if geometry.min_curvature > 0.0 {
        let inv_h = space.curve_integral(&[], |_, bp, _| 1.0 / bp.curvature);
        let n_area = n * space.area()?;
        (Some(inv_h - n_area), Some(inv_h - torsion.flux_total()))
    } else {
        (None, None)
    };
    let asym = asymmetry(curve, r);
    let polygon: Vec<Point> = (0..AT_Z_SAMPLES)
        .map(|j| curve.point(2.0 * PI * j as f64 / AT_Z_SAMPLES as f64))
        .collect();
    let inter = disk_polygon_intersection_area(&polygon, z, r);
    let ball = PI * r * r;
    let polygon_area = disk_polygon_intersection_area(&polygon, z, 1e3 * geometry.diameter);
    let asymmetry_at_z = (polygon_area + ball - 2.0 * inter) / ball;
    // the polygon misses a sliver of area (geometry.area − polygon_area) along Γ
    let asymmetry_tolerance = 2.0 * (geometry.area - polygon_area).abs() / ball;
    let identity_residuals = identities_for(torsion, &bundle, geometry)?;
    Ok(DeficitReport {
        h_max,
        degree: torsion.degree(),
        geometry: *geometry,
        z,
        rho_i: radii.rho_i,
        rho_e: radii.rho_e,
        rho_gap: radii.rho_e - radii.rho_i,
        serrin_l2,
        serrin_l1,
        sbt_l2,
        sbt_plus,
        hk_deficit,
        obvp_deficit,
        asymmetry: asym.value,
        asymmetry_center: asym.center,
        asymmetry_at_z,
        asymmetry_tolerance,
        min_flux: torsion.min_flux(),
        max_flux: torsion.max_flux(),
        distance_bounds: distance_bounds(torsion, geometry.r_i),
        rigidity: torsional_rigidity(torsion)?,
        harmonic: bundle.summary(),
        identity_residuals,
    })
}

/// One inequality `lhs ≤ rhs`, judged with slack on the disadvantaged side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Absolute numerical tolerance of the quantities involved.
    pub tolerance: f64,
    /// `rhs·(1 + slack) + tolerance − lhs`
    pub margin: f64,
    pub passed: bool,
}

impl BoundCheck {
    fn new(name: &str, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self::with_tolerance(name, lhs, rhs, 0.0, slack)
    }

    fn with_tolerance(name: &str, lhs: f64, rhs: f64, tolerance: f64, slack: f64) -> Self {
        let allowed = if rhs >= 0.0 { rhs * (1.0 + slack) } else { rhs * (1.0 - slack) } + tolerance;
        BoundCheck {
            name: name.to_string(),
            lhs,
            rhs,
            tolerance,
            margin: allowed - lhs,
            passed: lhs <= allowed,
        }
    }
}

/// Upper bound on the boundary gradient for `N = 2`; `r_e = ∞` gives `c·d`.
pub fn gradient_upper_bound(diameter: f64, r_e: f64) -> f64 {
    if r_e.is_finite() {
        GRADIENT_CONSTANT_2D * diameter * (diameter + r_e) / r_e
    } else {
        GRADIENT_CONSTANT_2D * diameter
    }
}

/// Comparing-asymmetry bound `max[2d, d²/(2 min(r_i, r_e))]·A^{1/N}`.
pub fn comparing_asymmetry_bound(diameter: f64, r_i: f64, r_e: f64, asymmetry: f64) -> f64 {
    let r_low = r_i.min(r_e);
    (2.0 * diameter).max(diameter * diameter / (2.0 * r_low)) * asymmetry.powf(1.0 / DIMENSION)
}

/// Gradient, distance, comparing-asymmetry and asymmetry-remark checks.
pub fn explicit_bound_checks(report: &DeficitReport) -> Vec<BoundCheck> {
    explicit_bound_checks_with(report, BOUND_SLACK)
}

/// [`explicit_bound_checks`] with relative slack `slack` instead of [`BOUND_SLACK`].
pub fn explicit_bound_checks_with(report: &DeficitReport, slack: f64) -> Vec<BoundCheck> {
    let g = &report.geometry;
    let n = DIMENSION;
    let r = g.r_ref;
    let db = &report.distance_bounds;
    vec![
        BoundCheck::new("gradient-lower", g.r_i, report.min_flux, slack),
        BoundCheck::new("gradient-upper", report.max_flux, gradient_upper_bound(g.diameter, g.r_e), slack),
        // −u ≥ ½δ²  ⇔  1 ≤ min ratio
        BoundCheck::new("distance-quadratic", 1.0, db.quadratic_ratio, slack),
        BoundCheck::new("distance-linear", 1.0, db.linear_ratio, slack),
        BoundCheck::new(
            "comparing-asymmetry",
            report.rho_gap,
            comparing_asymmetry_bound(g.diameter, g.r_i, g.r_e, report.asymmetry),
            slack,
        ),
        BoundCheck::with_tolerance(
            "asymmetry-remark",
            report.asymmetry_at_z,
            n * report.rho_e.powf(n - 1.0) * report.rho_gap / r.powf(n),
            report.asymmetry_tolerance,
            slack,
        ),
        BoundCheck::with_tolerance(
            "asymmetry-remark-annulus",
            report.asymmetry_at_z,
            (report.rho_e.powf(n) - report.rho_i.powf(n)) / r.powf(n),
            report.asymmetry_tolerance,
            slack,
        ),
    ]
}

/// Deficits that enter the exponent fits, with the exponent `τ` their
/// stability estimate carries for `N = 2`.
pub const SWEEP_DEFICITS: [(&str, f64); 6] = [
    ("serrin_l2", 1.0),
    ("serrin_l1", 0.5),
    ("sbt_l2", 1.0),
    ("sbt_plus", 0.5),
    ("hk_deficit", 0.5),
    ("obvp_deficit", 0.5),
];

impl DeficitReport {
    pub fn deficit(&self, name: &str) -> Option<f64> {
        match name {
            "serrin_l2" => Some(self.serrin_l2),
            "serrin_l1" => Some(self.serrin_l1),
            "sbt_l2" => Some(self.sbt_l2),
            "sbt_plus" => Some(self.sbt_plus),
            "hk_deficit" => self.hk_deficit,
            "obvp_deficit" => self.obvp_deficit,
            "asymmetry" => Some(self.asymmetry),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// `h_max = clamp(c_mesh·ε, h_min, h_cap)`.
    pub c_mesh: f64,
    pub h_min: f64,
    pub h_cap: f64,
    /// Only `ε ≤ fit_cutoff` enter the fits.
    #[serde(deserialize_with = "crate::numeric::f64_or_infinity")]
    pub fit_cutoff: f64,
    pub min_r_squared: f64,
    pub degree: Degree,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            c_mesh: 1.0,
            h_min: 0.01,
            h_cap: 0.05,
            fit_cutoff: f64::INFINITY,
            min_r_squared: 0.98,
            degree: Degree::Quadratic,
        }
    }
}

impl SweepOptions {
    pub fn h_for(&self, eps: f64) -> f64 {
        (self.c_mesh * eps).clamp(self.h_min, self.h_cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub deficit: String,
    pub fit: Option<LinearFit>,
    /// Whether the fit reaches the required `R²`.
    pub accepted: bool,
    pub excluded_epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub epsilon: f64,
    /// `rho_gap / deficit^τ` per entry of [`SWEEP_DEFICITS`] (`None` when
    /// not applicable).
    pub gap_ratios: Vec<Option<f64>>,
    /// `A(Ω) / ‖H₀ − H‖₂`
    pub asymmetry_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub family_id: String,
    pub epsilons: Vec<f64>,
    pub options: SweepOptions,
    /// Deficits of the circle `family(0)` at the finest mesh of the sweep.
    pub noise_floor: DeficitReport,
    pub reports: Vec<DeficitReport>,
    pub fitted_exponents: Vec<ExponentFit>,
    pub ratio_tables: Vec<RatioRow>,
    pub notes: Vec<String>,
}

impl SweepResult {
    pub fn fit(&self, deficit: &str) -> Option<&ExponentFit> {
        self.fitted_exponents.iter().find(|f| f.deficit == deficit)
    }

    /// `max / min` of `A(Ω)/‖H₀ − H‖₂` over the sweep.
    pub fn asymmetry_ratio_spread(&self) -> f64 {
        let r: Vec<f64> = self.ratio_tables.iter().map(|r| r.asymmetry_ratio).collect();
        r.iter().copied().fold(f64::NEG_INFINITY, f64::max) / r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV `epsilon,h_max,<deficits>,asymmetry,rho_gap`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,h_max");
        for (name, _) in SWEEP_DEFICITS {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",asymmetry,rho_gap\n");
        for (eps, rep) in self.epsilons.iter().zip(&self.reports) {
            let _ = write!(out, "{eps},{}", rep.h_max);
            for (name, _) in SWEEP_DEFICITS {
                match rep.deficit(name) {
                    Some(v) => {
                        let _ = write!(out, ",{v:.12e}");
                    }
                    None => out.push(','),
                }
            }
            let _ = writeln!(out, ",{:.12e},{:.12e}", rep.asymmetry, rep.rho_gap);
        }
        out
    }
}

/// Reports along `family(ε)` and log–log fits of `rho_gap` against every
/// deficit.
pub fn stability_sweep(
    family_id: &str,
    family: impl Fn(f64) -> Result<BoundaryCurve> + Sync,
    epsilons: &[f64],
    options: SweepOptions,
) -> Result<SweepResult> {
    stability_sweep_with(family_id, family, epsilons, options, deficit_report)
}

/// [`stability_sweep`] with a caller-supplied way of producing each report,
/// e.g. one backed by a cache.
pub fn stability_sweep_with(
    family_id: &str,
    family: impl Fn(f64) -> Result<BoundaryCurve> + Sync,
    epsilons: &[f64],
    options: SweepOptions,
    reporter: impl Fn(&BoundaryCurve, f64, Degree) -> Result<DeficitReport> + Sync,
) -> Result<SweepResult> {
    if epsilons.len() < 4 {
        return Err(Error::InvalidParameter(format!("a sweep needs at least 4 epsilons, got {}", epsilons.len())));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter("sweep epsilons must be positive".into()));
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    if eps.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("sweep epsilons must be distinct".into()));
    }
    let circle = family(0.0)?;
    if !circle.is_circle() {
        return Err(Error::Precondition(format!("family {family_id} at ε = 0 is not a circle")));
    }
    let h_finest = eps.iter().map(|e| options.h_for(*e)).fold(f64::INFINITY, f64::min);
    let jobs: Vec<(f64, f64)> = std::iter::once((0.0, h_finest))
        .chain(eps.iter().map(|e| (*e, options.h_for(*e))))
        .collect();
    let mut reports: Vec<DeficitReport> = jobs
        .par_iter()
        .map(|&(e, h)| reporter(&family(e)?, h, options.degree))
        .collect::<Result<_>>()?;
    let noise_floor = reports.remove(0);

    let mut notes = Vec::new();
    let mut fitted_exponents = Vec::new();
    for (name, _) in SWEEP_DEFICITS {
        let floor = noise_floor.deficit(name).map(f64::abs).unwrap_or(0.0);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut excluded = Vec::new();
        for (e, rep) in eps.iter().zip(&reports) {
            if *e > options.fit_cutoff {
                continue;
            }
            match rep.deficit(name) {
                Some(d) if d > floor && d > 0.0 => {
                    xs.push(d);
                    ys.push(rep.rho_gap);
                }
                Some(_) => {
                    excluded.push(*e);
                    notes.push(format!("{name}: ε = {e} excluded, deficit at or below the circle's noise floor {floor:.3e}"));
                }
                None => excluded.push(*e),
            }
        }
        let fit = if xs.len() >= 2 { log_log_fit(&xs, &ys) } else { None };
        fitted_exponents.push(ExponentFit {
            deficit: name.to_string(),
            accepted: fit.map(|f| f.r_squared >= options.min_r_squared).unwrap_or(false),
            fit,
            excluded_epsilons: excluded,
        });
    }
    let ratio_tables = eps
        .iter()
        .zip(&reports)
        .map(|(e, rep)| RatioRow {
            epsilon: *e,
            gap_ratios: SWEEP_DEFICITS
                .iter()
                .map(|(name, tau)| rep.deficit(name).map(|d| rep.rho_gap / d.powf(*tau)))
                .collect(),
            asymmetry_ratio: rep.asymmetry / rep.sbt_l2,
        })
        .collect();
    Ok(SweepResult {
        family_id: family_id.to_string(),
        epsilons: eps,
        options,
        noise_floor,
        reports,
        fitted_exponents,
        ratio_tables,
        notes,
    })
}
