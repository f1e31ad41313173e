//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero on any failure not listed in `UNATTAINABLE`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use symlab::analytic;
use symlab::fem::Degree;
use symlab::geometry::BoundaryCurve;
use symlab::identities::{identity_suite, IdentityId, IdentityResidual};
use symlab::mesh::triangulate;
use symlab::stability::{deficit_report, explicit_bound_checks, stability_sweep, SweepOptions};
use symlab::torsion::{solve_torsion, torsional_rigidity, DIMENSION};

/// Criteria that cannot pass as stated, with the reason. They still run and
/// print FAIL; every other sub-check inside them must pass.
const UNATTAINABLE: [(u32, &str); 1] = [(
    6,
    "differentiating the annulus solution gives sup f = 1 for N = 2, not 3/2",
)];

struct Outcome {
    passed: bool,
    /// Sub-checks that must hold even when the criterion is listed as unattainable.
    required_ok: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome {
            passed,
            required_ok: passed,
            detail,
        }
    }
}

fn circle() -> BoundaryCurve {
    BoundaryCurve::circle(1.0, [0.0, 0.0]).unwrap()
}

fn cos_mode(mode: usize, eps: f64) -> BoundaryCurve {
    BoundaryCurve::cosine_mode(1.0, mode, eps).unwrap()
}

fn corpus() -> Vec<(&'static str, BoundaryCurve, bool)> {
    vec![
        ("circle", circle(), true),
        ("1+0.1cos2t", cos_mode(2, 0.1), true),
        ("1+0.05cos2t", cos_mode(2, 0.05), true),
        ("1+0.1cos5t", cos_mode(5, 0.1), false),
        ("1+0.15cos3t", cos_mode(3, 0.15), false),
        ("1+0.1cos2t@(0.3,-0.2)", cos_mode(2, 0.1).translated([0.3, -0.2]), true),
    ]
}

const CORPUS_H: f64 = 0.025;

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mesh = Arc::new(triangulate(&circle(), 0.05).unwrap());
    let u = solve_torsion(mesh, Degree::Quadratic).unwrap();
    let flux_err = u.vertex_flux().iter().map(|f| (f - 1.0).abs()).fold(0.0, f64::max);
    let min_u = u.dof_values.iter().copied().fold(f64::INFINITY, f64::min);
    let tau = torsional_rigidity(&u).unwrap().energy;
    let secs = t.elapsed().as_secs_f64();
    let ok = flux_err <= 1e-3 && (min_u + 0.5).abs() <= 1e-3 && (tau - PI / 2.0).abs() <= 1e-3 * PI / 2.0 && secs <= 5.0;
    Outcome::new(
        ok,
        format!("‖u_ν−1‖∞ = {flux_err:.2e}, min u = {min_u:.6}, τ = {tau:.6} (π/2 = {:.6}), {secs:.2}s", PI / 2.0),
    )
}

fn residual(rows: &[IdentityResidual], id: IdentityId) -> &IdentityResidual {
    rows.iter().find(|r| r.identity_id == id).unwrap()
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let curve = cos_mode(2, 0.1);
    let coarse = identity_suite(&curve, 0.02, Degree::Quadratic).unwrap();
    let fine = identity_suite(&curve, 0.01, Degree::Quadratic).unwrap();
    let disk = identity_suite(&circle(), 0.01, Degree::Quadratic).unwrap();
    let secs = t.elapsed().as_secs_f64();

    let mut worst: f64 = 0.0;
    let mut plateaus = Vec::new();
    let mut failures = Vec::new();
    for id in IdentityId::ALL {
        let c = residual(&coarse, id);
        let f = residual(&fine, id);
        if !c.applicable {
            failures.push(format!("{} not applicable", id.name()));
            continue;
        }
        worst = worst.max(c.relative_residual);
        if c.relative_residual > 5e-3 {
            failures.push(format!("{} = {:.2e}", id.name(), c.relative_residual));
        }
        let floor = residual(&disk, id).scaled_residual.max(1e-14);
        if c.relative_residual < 2.0 * f.relative_residual {
            if f.relative_residual <= 10.0 * floor {
                plateaus.push(format!("{} ({:.1e} at floor {:.1e})", id.name(), f.relative_residual, floor));
            } else {
                failures.push(format!(
                    "{} ratio {:.2}",
                    id.name(),
                    c.relative_residual / f.relative_residual
                ));
            }
        }
    }
    if plateaus.len() > 1 {
        failures.push(format!("{} plateaus", plateaus.len()));
    }
    let ok = failures.is_empty() && secs <= 120.0;
    Outcome::new(
        ok,
        format!(
            "worst residual {worst:.2e} at h=0.02; plateau: [{}]; {}{secs:.1}s",
            plateaus.join(", "),
            if failures.is_empty() { String::new() } else { format!("failures: {}; ", failures.join(", ")) }
        ),
    )
}

fn criterion_3_and_5() -> (Outcome, Outcome) {
    let mut fails3 = Vec::new();
    let mut fails5 = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut worst_gap: f64 = 0.0;
    let mut disk_hk = f64::NAN;
    for (name, curve, convex) in corpus() {
        let rep = deficit_report(&curve, CORPUS_H, Degree::Quadratic).unwrap();
        for b in explicit_bound_checks(&rep) {
            let rel = b.margin / b.rhs.abs().max(1e-300);
            min_margin = min_margin.min(rel);
            if !b.passed {
                fails3.push(format!("{name}:{} ({:.4} vs {:.4})", b.name, b.lhs, b.rhs));
            }
        }
        if convex {
            let n_area = DIMENSION * rep.geometry.area;
            match (rep.hk_deficit, rep.obvp_deficit) {
                (Some(hk), Some(obvp)) => {
                    worst_gap = worst_gap.max((hk - obvp).abs());
                    if hk < -1e-3 * n_area {
                        fails5.push(format!("{name}: hk = {hk:.3e}"));
                    }
                    if (hk - obvp).abs() > 1e-12 {
                        fails5.push(format!("{name}: |hk−obvp| = {:.2e}", (hk - obvp).abs()));
                    }
                    if name == "circle" {
                        disk_hk = hk;
                        if hk > 1e-3 {
                            fails5.push(format!("disk hk = {hk:.3e}"));
                        }
                    }
                }
                _ => fails5.push(format!("{name}: not applicable")),
            }
        }
    }
    let o3 = Outcome::new(
        fails3.is_empty(),
        format!(
            "6 curves × 7 bounds at h={CORPUS_H}, min relative margin {min_margin:.3}{}",
            if fails3.is_empty() { String::new() } else { format!("; failures: {}", fails3.join(", ")) }
        ),
    );
    let o5 = Outcome::new(
        fails5.is_empty(),
        format!(
            "max |hk−obvp| = {worst_gap:.2e}, disk hk = {disk_hk:.2e}{}",
            if fails5.is_empty() { String::new() } else { format!("; failures: {}", fails5.join(", ")) }
        ),
    );
    (o3, o5)
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let sweep = stability_sweep(
        "cos2",
        |e| BoundaryCurve::cosine_mode(1.0, 2, e),
        &[0.02, 0.04, 0.06, 0.08],
        SweepOptions::default(),
    )
    .unwrap();
    let secs = t.elapsed().as_secs_f64();
    let mut ok = secs <= 600.0;
    let mut parts = Vec::new();
    for name in ["serrin_l2", "sbt_l2"] {
        match sweep.fit(name).and_then(|f| f.fit) {
            Some(fit) => {
                ok &= fit.slope >= 0.9 && fit.r_squared >= 0.98;
                parts.push(format!("{name} slope {:.3} (R² {:.5})", fit.slope, fit.r_squared));
            }
            None => {
                ok = false;
                parts.push(format!("{name} no fit"));
            }
        }
    }
    let spread = sweep.asymmetry_ratio_spread();
    ok &= spread <= 2.0;
    Outcome::new(ok, format!("{}; A/‖H₀−H‖₂ spread {spread:.4}; {secs:.1}s", parts.join(", ")))
}

fn criterion_6() -> Outcome {
    let mut required_ok = true;
    let mut parts = Vec::new();
    let mut sup_ok = true;
    for (n, stated) in [(2u32, 1.5), (3, 1.5), (4, 2.0), (5, 2.5)] {
        let g = analytic::gradient_bound_constant(n, 1e-4).unwrap();
        let hit = (g.sup - stated).abs() <= 1e-3;
        sup_ok &= hit;
        if n == 2 {
            // the corrected factor must still be what the closed form gives
            required_ok &= (g.sup - 1.0).abs() <= 1e-3;
        } else {
            required_ok &= hit;
        }
        parts.push(format!("N={n}: {:.4}", g.sup));
    }
    let mut triangle: f64 = 0.0;
    for n in 3..=5u32 {
        for p in [1.5, 2.0, 2.5] {
            if p < n as f64 {
                triangle = triangle.max(analytic::p_capacity_ball(n, p, 1.0).unwrap().max_discrepancy);
            }
        }
    }
    let cap = analytic::p_capacity_ball(3, 2.0, 1.0).unwrap().capacity;
    let mut ode: f64 = 0.0;
    for n in 2..=6 {
        for (r, big_r) in [(1.0, 2.0), (0.1, 1.0), (0.9, 1.0)] {
            ode = ode.max(analytic::annulus_torsion(n, r, big_r).unwrap().verify(100).max_ode_residual);
        }
    }
    required_ok &= triangle <= 1e-12 && (cap - 4.0 * PI).abs() <= 1e-12 && ode <= 1e-10;
    Outcome {
        passed: sup_ok && required_ok,
        required_ok,
        detail: format!(
            "sup f: {} (stated 1.5, 1.5, 2, 2.5); capacity triangle {triangle:.1e}; Cap₂(B₁)−4π = {:.1e}; annulus ODE {ode:.1e}",
            parts.join(", "),
            cap - 4.0 * PI
        ),
    }
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut h_max: f64 = 0.0;
    for m in 1..=4 {
        let r = analytic::cone_checks(m, 1000, 11).unwrap();
        h_max = h_max.max(r.max_cone_curvature);
        ok &= r.max_cone_curvature <= 1e-8;
    }
    let mut agree = Vec::new();
    for m in 4..=8 {
        let r = analytic::cone_checks(m, 1000, 11).unwrap();
        ok &= r.sign_agreements == r.sign_samples;
        agree.push(format!("{}/{}", r.sign_agreements, r.sign_samples));
    }
    let mut violations = Vec::new();
    for m in [2, 3] {
        let r = analytic::cone_checks(m, 1000, 11).unwrap();
        ok &= r.violation.is_some();
        violations.push(r.violation.is_some());
    }
    let w7 = analytic::hardy_and_windows(7, 0.0).unwrap().window.is_some();
    let w8 = analytic::hardy_and_windows(8, 0.0).unwrap().window.is_some();
    let f9 = analytic::hardy_and_windows(9, 0.0).unwrap().stability_flag;
    let f10 = analytic::hardy_and_windows(10, 0.0).unwrap().stability_flag;
    ok &= w7 && !w8 && !f9 && f10;
    let secs = t.elapsed().as_secs_f64();
    ok &= secs <= 10.0;
    Outcome::new(
        ok,
        format!(
            "max |H| on cone {h_max:.1e}; sign agreement m=4..8 [{}]; violations m=2,3 {violations:?}; window n=7 {w7}, n=8 {w8}; flag n=9 {f9}, n=10 {f10}; {secs:.2}s",
            agree.join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let curve = cos_mode(3, 0.1);
    let a = serde_json::to_vec(&deficit_report(&curve, 0.05, Degree::Quadratic).unwrap()).unwrap();
    let b = serde_json::to_vec(&deficit_report(&curve, 0.05, Degree::Quadratic).unwrap()).unwrap();
    Outcome::new(a == b, format!("two report serializations, {} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let start = Instant::now();
    let (c3, c5) = criterion_3_and_5();
    let results = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, c3),
        (4, criterion_4()),
        (5, c5),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8()),
    ];
    let mut unexpected = 0;
    for (id, o) in &results {
        println!("criterion {id}: {} | {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            match UNATTAINABLE.iter().find(|(k, _)| k == id) {
                Some((_, why)) if o.required_ok => println!("criterion {id}: known unattainable: {why}"),
                _ => unexpected += 1,
            }
        }
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed unexpectedly");
        std::process::exit(1);
    }
}
