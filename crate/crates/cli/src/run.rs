//! Command execution: compute, judge, and hand back everything to be written.

use std::f64::consts::PI;
use std::fmt::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use symlab::analytic::{self, RadialSolution};
use symlab::fem::Degree;
use symlab::geometry::{geometry_summary, BoundaryCurve, GeometrySummary, Point};
use symlab::identities::residuals_csv;
use symlab::mesh::triangulate;
use symlab::stability::{self, deficit_report, explicit_bound_checks_with, DeficitReport};
use symlab::torsion::{critical_point, solve_torsion, torsional_rigidity, TorsionalRigidity, DIMENSION};

use crate::cache::Cache;
use crate::config::{Command, RunConfig};
use crate::svg::{Chart, Style};

/// One pass/fail judgement reported in results.json.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// How `value` is compared with `threshold`.
    pub relation: &'static str,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: "<=",
            passed: value <= threshold,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: ">=",
            passed: value >= threshold,
        }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            relation: "==",
            passed: ok,
        }
    }
}

pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
    pub summary_csv: String,
    pub plots: Vec<(String, String)>,
}

pub fn execute(command: Command, config: &RunConfig, cache: &Cache) -> symlab::Result<Outcome> {
    match command {
        Command::Solve => solve(config, cache),
        Command::Identities => identities(config, cache),
        Command::Report => report(config, cache),
        Command::Sweep => sweep(config, cache),
        Command::Analytic => analytic_suite(config),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeshCounts {
    vertices: usize,
    triangles: usize,
    boundary_vertices: usize,
    dofs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolveSummary {
    curve: BoundaryCurve,
    h_max: f64,
    degree: Degree,
    geometry: GeometrySummary,
    mesh: MeshCounts,
    solver_iterations: usize,
    solver_relative_residual: f64,
    min_u: f64,
    max_u: f64,
    rigidity: TorsionalRigidity,
    flux_min: f64,
    flux_max: f64,
    flux_total: f64,
    critical_point: Point,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedSolve {
    summary: SolveSummary,
    nodal_csv: String,
    /// `(θ, u_ν)` at boundary vertices.
    flux_trace: Vec<[f64; 2]>,
}

fn domain(config: &RunConfig) -> (&BoundaryCurve, f64, Degree) {
    (
        config.curve.as_ref().expect("validated"),
        config.h_max.expect("validated"),
        config.degree(),
    )
}

fn compute_solve(curve: &BoundaryCurve, h: f64, degree: Degree) -> symlab::Result<CachedSolve> {
    let mesh = Arc::new(triangulate(curve, h)?);
    let field = solve_torsion(mesh.clone(), degree)?;
    let geometry = geometry_summary(curve, 4096)?;
    let values = &field.dof_values;
    let flux = field.vertex_flux();
    let summary = SolveSummary {
        curve: curve.clone(),
        h_max: h,
        degree,
        geometry,
        mesh: MeshCounts {
            vertices: mesh.vertices.len(),
            triangles: mesh.triangles.len(),
            boundary_vertices: mesh.boundary_loop.len(),
            dofs: field.space.n_dofs,
        },
        solver_iterations: field.solver.iterations,
        solver_relative_residual: field.solver.relative_residual,
        min_u: values.iter().copied().fold(f64::INFINITY, f64::min),
        max_u: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        rigidity: torsional_rigidity(&field)?,
        flux_min: field.min_flux(),
        flux_max: field.max_flux(),
        flux_total: field.flux_total(),
        critical_point: critical_point(&field)?,
    };
    Ok(CachedSolve {
        summary,
        nodal_csv: field.to_csv(),
        flux_trace: mesh.boundary_thetas.iter().zip(&flux).map(|(t, f)| [*t, *f]).collect(),
    })
}

fn solve(config: &RunConfig, cache: &Cache) -> symlab::Result<Outcome> {
    let (curve, h, degree) = domain(config);
    let key = Cache::key("solve", curve, h, degree);
    let solved = cache.get_or(&key, || compute_solve(curve, h, degree))?;
    let s = &solved.summary;
    let checks = vec![
        Check::at_most("max-u-nonpositive", s.max_u, 0.0),
        Check::at_least("min-flux-positive", s.flux_min, 0.0),
        Check::at_most("rigidity-quadrature-gap", s.rigidity.relative_gap, config.tolerances.identity),
    ];
    let mut plots = Vec::new();
    if config.plots {
        let chart = Chart::new("Boundary flux", "theta", "u_nu")
            .with("u_nu", solved.flux_trace.clone(), Style::Line)
            .with(
                "R",
                vec![[0.0, s.geometry.r_ref], [2.0 * PI, s.geometry.r_ref]],
                Style::Line,
            );
        plots.push(("flux.svg".to_string(), chart.render()));
    }
    Ok(Outcome {
        results: serde_json::to_value(s)?,
        checks,
        summary_csv: solved.nodal_csv,
        plots,
    })
}

fn cached_report(cache: &Cache, curve: &BoundaryCurve, h: f64, degree: Degree) -> symlab::Result<DeficitReport> {
    let key = Cache::key("report", curve, h, degree);
    cache.get_or(&key, || deficit_report(curve, h, degree))
}

fn identity_checks(report: &DeficitReport, tol: f64) -> Vec<Check> {
    report
        .identity_residuals
        .iter()
        .filter(|r| r.applicable)
        .map(|r| Check::at_most(format!("identity-{}", r.identity_id.name()), r.scaled_residual, tol))
        .collect()
}

fn residual_chart(report: &DeficitReport) -> String {
    let rows = &report.identity_residuals;
    let idx = |k: usize| (k + 1) as f64;
    let rel = rows.iter().enumerate().filter(|(_, r)| r.applicable).map(|(k, r)| [idx(k), r.relative_residual]).collect();
    let scaled = rows.iter().enumerate().filter(|(_, r)| r.applicable).map(|(k, r)| [idx(k), r.scaled_residual]).collect();
    let order: Vec<&str> = rows.iter().map(|r| r.identity_id.name()).collect();
    Chart::new(&format!("Identity residuals ({})", order.join(", ")), "identity index", "residual")
        .log_y()
        .with("relative", rel, Style::Markers)
        .with("scaled", scaled, Style::Markers)
        .render()
}

fn identities(config: &RunConfig, cache: &Cache) -> symlab::Result<Outcome> {
    let (curve, h, degree) = domain(config);
    let report = cached_report(cache, curve, h, degree)?;
    let checks = identity_checks(&report, config.tolerances.identity);
    let mut plots = Vec::new();
    if config.plots {
        plots.push(("identities.svg".to_string(), residual_chart(&report)));
    }
    Ok(Outcome {
        results: json!({
            "curve": curve,
            "h_max": h,
            "degree": degree,
            "identity_residuals": report.identity_residuals,
        }),
        checks,
        summary_csv: residuals_csv(&report.identity_residuals),
        plots,
    })
}

fn report(config: &RunConfig, cache: &Cache) -> symlab::Result<Outcome> {
    let (curve, h, degree) = domain(config);
    let tol = &config.tolerances;
    let report = cached_report(cache, curve, h, degree)?;
    let bounds = explicit_bound_checks_with(&report, tol.bound_slack);
    let mut checks = identity_checks(&report, tol.identity);
    for b in &bounds {
        checks.push(Check {
            name: format!("bound-{}", b.name),
            value: b.margin,
            threshold: 0.0,
            relation: ">=",
            passed: b.passed,
        });
    }
    if let (Some(hk), Some(obvp)) = (report.hk_deficit, report.obvp_deficit) {
        let n_area = DIMENSION * report.geometry.area;
        checks.push(Check::at_least("hk-deficit-nonnegative", hk, -1e-3 * n_area));
        checks.push(Check::at_most("hk-equals-obvp", (hk - obvp).abs(), tol.quadrature_agreement));
    }

    let mut csv = String::from("quantity,value\n");
    let mut row = |name: &str, v: f64| {
        let _ = writeln!(csv, "{name},{v:.12e}");
    };
    let g = &report.geometry;
    for (name, v) in [
        ("area", g.area),
        ("perimeter", g.perimeter),
        ("R", g.r_ref),
        ("diameter", g.diameter),
        ("r_i", g.r_i),
        ("r_e", g.r_e),
        ("rho_i", report.rho_i),
        ("rho_e", report.rho_e),
        ("rho_gap", report.rho_gap),
        ("serrin_l2", report.serrin_l2),
        ("serrin_l1", report.serrin_l1),
        ("sbt_l2", report.sbt_l2),
        ("sbt_plus", report.sbt_plus),
        ("asymmetry", report.asymmetry),
        ("asymmetry_at_z", report.asymmetry_at_z),
        ("min_flux", report.min_flux),
        ("max_flux", report.max_flux),
        ("torsional_rigidity", report.rigidity.energy),
    ] {
        row(name, v);
    }
    if let Some(v) = report.hk_deficit {
        row("hk_deficit", v);
    }
    if let Some(v) = report.obvp_deficit {
        row("obvp_deficit", v);
    }

    let mut plots = Vec::new();
    if config.plots {
        plots.push(("identities.svg".to_string(), residual_chart(&report)));
        let pts: Vec<[f64; 2]> = bounds
            .iter()
            .enumerate()
            .map(|(k, b)| [(k + 1) as f64, if b.rhs != 0.0 { b.lhs / b.rhs } else { f64::NAN }])
            .collect();
        let names: Vec<&str> = bounds.iter().map(|b| b.name.as_str()).collect();
        let chart = Chart::new(&format!("lhs/rhs ({})", names.join(", ")), "check index", "lhs / rhs")
            .with("ratio", pts, Style::Markers)
            .with("limit", vec![[1.0, 1.0], [bounds.len() as f64, 1.0]], Style::Line);
        plots.push(("bounds.svg".to_string(), chart.render()));
    }
    Ok(Outcome {
        results: json!({
            "curve": curve,
            "report": report,
            "bound_checks": bounds,
        }),
        checks,
        summary_csv: csv,
        plots,
    })
}

/// The fits that carry the Lipschitz exponents, with their τ.
const SWEEP_TARGETS: [&str; 2] = ["serrin_l2", "sbt_l2"];

fn sweep(config: &RunConfig, cache: &Cache) -> symlab::Result<Outcome> {
    let family = config.family.as_ref().expect("validated");
    let eps = config.epsilons.as_ref().expect("validated");
    let tol = &config.tolerances;
    let result = stability::stability_sweep_with(
        &family.id(),
        |e| family.curve(e),
        eps,
        config.sweep_options(),
        |c, h, d| cached_report(cache, c, h, d),
    )?;
    let mut checks = Vec::new();
    for name in SWEEP_TARGETS {
        match result.fit(name).and_then(|f| f.fit) {
            Some(fit) => {
                checks.push(Check::at_least(format!("slope-{name}"), fit.slope, tol.min_slope));
                checks.push(Check::at_least(format!("r-squared-{name}"), fit.r_squared, tol.min_r_squared));
            }
            None => checks.push(Check::flag(format!("fit-{name}"), false)),
        }
    }
    checks.push(Check::at_most("asymmetry-ratio-spread", result.asymmetry_ratio_spread(), tol.ratio_spread));

    let mut plots = Vec::new();
    if config.plots {
        let mut chart = Chart::new("Stability sweep", "deficit", "rho_e - rho_i").log_log();
        for name in SWEEP_TARGETS {
            let pts = result
                .reports
                .iter()
                .filter_map(|r| r.deficit(name).map(|d| [d, r.rho_gap]))
                .collect();
            chart = chart.with(name, pts, Style::Markers);
            if let Some(fit) = result.fit(name).and_then(|f| f.fit) {
                let xs: Vec<f64> = result.reports.iter().filter_map(|r| r.deficit(name)).collect();
                let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
                let line = [lo, hi].map(|x| [x, (fit.intercept + fit.slope * x.ln()).exp()]);
                chart = chart.with(&format!("{name} fit (slope {:.3})", fit.slope), line.to_vec(), Style::Line);
            }
        }
        plots.push(("sweep.svg".to_string(), chart.render()));
    }
    Ok(Outcome {
        summary_csv: result.to_csv(),
        results: json!({
            "family": family,
            "sweep": result,
            "asymmetry_ratio_spread": result.asymmetry_ratio_spread(),
        }),
        checks,
        plots,
    })
}

fn radial_catalogue() -> symlab::Result<Vec<RadialSolution>> {
    let mut out = vec![analytic::ball_torsion(2, 1.0)?, analytic::ball_torsion(3, 1.0)?];
    for n in 2..=5 {
        out.push(analytic::annulus_torsion(n, 1.0, 2.0)?);
        out.push(analytic::n_capacity_log(n, 1.0, 1.0)?);
    }
    for (n, p) in [(3, 1.5), (3, 2.0), (4, 3.0), (5, 2.5)] {
        out.push(analytic::p_capacity_exterior(n, p, 1.0)?);
        out.push(analytic::p_interior_punctured(n, p, 1.0)?);
    }
    Ok(out)
}

fn analytic_suite(config: &RunConfig) -> symlab::Result<Outcome> {
    let a = &config.analytic;
    let tol = &config.tolerances;
    let mut checks = Vec::new();

    let constants = a
        .dimensions
        .iter()
        .map(|&n| analytic::gradient_bound_constant(n, a.kappa_step))
        .collect::<symlab::Result<Vec<_>>>()?;
    for g in &constants {
        checks.push(Check::at_most(
            format!("gradient-constant-N{}", g.dimension),
            (g.sup - g.stated_sup).abs(),
            tol.gradient_constant,
        ));
    }

    let mut capacities = Vec::new();
    for n in 3..=5u32 {
        for p in [1.5, 2.0, 2.5] {
            if p < n as f64 {
                capacities.push(analytic::p_capacity_ball(n, p, 1.0)?);
            }
        }
    }
    capacities.push(analytic::p_capacity_ball(4, 3.0, 2.0)?);
    for c in &capacities {
        checks.push(Check::at_most(
            format!("capacity-triangle-N{}-p{}-rho{}", c.dimension, c.p, c.rho),
            c.max_discrepancy,
            1e-12,
        ));
    }
    let unit = analytic::p_capacity_ball(3, 2.0, 1.0)?;
    checks.push(Check::at_most("capacity-unit-ball-N3", (unit.capacity - 4.0 * PI).abs(), 1e-12));

    let radial = radial_catalogue()?;
    let radial_checks: Vec<_> = radial.iter().map(|r| r.verify(analytic::ODE_SAMPLES)).collect();
    for (r, c) in radial.iter().zip(&radial_checks) {
        let kind = serde_json::to_value(r.kind)?;
        let name = format!("radial-ode-{}-N{}", kind.as_str().unwrap_or("?"), r.dimension);
        checks.push(Check::at_most(name, c.max_ode_residual, analytic::ODE_TOLERANCE));
    }

    let cones = a
        .cone_m
        .iter()
        .map(|&m| analytic::cone_checks(m, a.cone_points, config.seed))
        .collect::<symlab::Result<Vec<_>>>()?;
    for c in &cones {
        checks.push(Check::flag(format!("cone-m{}", c.m), c.passed));
    }

    let hardy = a
        .hardy_n
        .iter()
        .map(|&n| {
            let base = (n as f64 - 2.0).powi(2) / 4.0;
            analytic::hardy_and_windows(n, a.hardy_a.unwrap_or(base + 1.0))
        })
        .collect::<symlab::Result<Vec<_>>>()?;
    for h in &hardy {
        checks.push(Check::flag(format!("hardy-inequality-n{}", h.n), h.hardy_holds));
        if let Some(&(_, q)) = h.quotient_sequence.last() {
            checks.push(Check::at_most(format!("hardy-quotient-n{}", h.n), q, analytic::QUOTIENT_TARGET));
        }
        checks.push(Check::at_most(format!("extremal-residual-n{}", h.n), h.extremal_residual, 1e-10));
    }

    let mut csv = String::from("check,value,relation,threshold,passed\n");
    for c in &checks {
        let _ = writeln!(csv, "{},{:.12e},{},{:e},{}", c.name, c.value, c.relation, c.threshold, c.passed);
    }

    let mut plots = Vec::new();
    if config.plots {
        let grid: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
        let mut chart = Chart::new("Annulus gradient factor f(kappa)", "kappa", "f");
        for &n in &a.dimensions {
            chart = chart.with(
                &format!("N={n}"),
                grid.iter().map(|&k| [k, analytic::gradient_factor(n, k)]).collect(),
                Style::Line,
            );
        }
        if a.dimensions.contains(&2) {
            chart = chart.with(
                "N=2 printed",
                grid.iter().map(|&k| [k, analytic::gradient_factor_printed_2d(k)]).collect(),
                Style::Line,
            );
        }
        plots.push(("gradient_factor.svg".to_string(), chart.render()));
    }

    Ok(Outcome {
        results: json!({
            "seed": config.seed,
            "omega_n": "surface area of the unit sphere, N*|B_1|",
            "gradient_constants": constants,
            "capacities": capacities,
            "radial_solutions": radial.iter().zip(&radial_checks).map(|(r, c)| json!({"solution": r, "check": c})).collect::<Vec<_>>(),
            "cone_checks": cones,
            "hardy": hardy,
        }),
        checks,
        summary_csv: csv,
        plots,
    })
}
