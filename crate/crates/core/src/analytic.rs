//! Closed-form radial solutions and arithmetic desk checks in any dimension.
//!
//! `ω_N` denotes the surface measure of the unit sphere, `N·|B₁|`. With this
//! normalization `Cap₂(B₁) = 4π` in three dimensions.
//!
//! Cone checks use the summed mean curvature `div(∇u/|∇u|)`; everything else
//! in the crate uses the averaged one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::numeric::{golden_min, integrate};
use crate::{Error, Result};

/// Tolerance on relative ODE residuals of the radial solutions.
pub const ODE_TOLERANCE: f64 = 1e-10;
/// Number of log-spaced radii used by [`RadialSolution::verify`].
pub const ODE_SAMPLES: usize = 100;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// `ω_N = N·|B₁|`, the area of the unit sphere in `R^N`.
pub fn sphere_area(n: u32) -> f64 {
    n as f64 * unit_ball_volume(n)
}

const D1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const D2: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// Eighth-order central first derivative.
fn fd1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    D1.iter()
        .enumerate()
        .map(|(k, c)| {
            let s = (k + 1) as f64 * h;
            c * (f(x + s) - f(x - s))
        })
        .sum::<f64>()
        / h
}

/// Eighth-order central second derivative.
fn fd2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let mut acc = D2[0] * f(x);
    for (k, c) in D2.iter().enumerate().skip(1) {
        let s = k as f64 * h;
        acc += c * (f(x + s) + f(x - s));
    }
    acc / (h * h)
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadialKind {
    BallTorsion,
    AnnulusTorsion,
    PCapacityExterior,
    NCapacityLog,
    PInteriorPunctured,
}

/// A radially symmetric closed-form solution `u(|x|)`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub dimension: u32,
    pub kind: RadialKind,
    /// Inner radius (0 for balls).
    pub inner_radius: f64,
    /// Outer radius (`+∞` for exterior problems, serialized as null).
    pub outer_radius: f64,
    /// Exponent of the p-Laplacian; 2 for torsion.
    pub p: f64,
    /// Boundary value of `|u'|` for the N-capacity profile; unused otherwise.
    pub gradient: f64,
}

/// Result of [`RadialSolution::verify`].
#[derive(Debug, Clone, Serialize)]
pub struct RadialCheck {
    pub samples: usize,
    pub max_ode_residual: f64,
    pub max_derivative_mismatch: f64,
    pub boundary_errors: Vec<f64>,
    pub passed: bool,
}

fn check_dimension(n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be >= 2, got {n}")));
    }
    Ok(())
}

fn check_radius(name: &str, r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {r}")));
    }
    Ok(())
}

fn check_p(n: u32, p: f64) -> Result<()> {
    if !(p > 1.0 && p < n as f64) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, {n}), got {p}")));
    }
    Ok(())
}

/// Torsion function `(|x|² − R²)/2` of the ball `B_R`.
pub fn ball_torsion(n: u32, radius: f64) -> Result<RadialSolution> {
    check_dimension(n)?;
    check_radius("radius", radius)?;
    Ok(RadialSolution {
        dimension: n,
        kind: RadialKind::BallTorsion,
        inner_radius: 0.0,
        outer_radius: radius,
        p: 2.0,
        gradient: 0.0,
    })
}

/// Solution of `Δw = N` in the annulus `r < |x| < R` with `w = 0` on both spheres.
pub fn annulus_torsion(n: u32, r: f64, big_r: f64) -> Result<RadialSolution> {
    check_dimension(n)?;
    check_radius("inner radius", r)?;
    check_radius("outer radius", big_r)?;
    if r >= big_r {
        return Err(Error::InvalidParameter(format!(
            "annulus needs inner radius < outer radius, got {r} >= {big_r}"
        )));
    }
    Ok(RadialSolution {
        dimension: n,
        kind: RadialKind::AnnulusTorsion,
        inner_radius: r,
        outer_radius: big_r,
        p: 2.0,
        gradient: 0.0,
    })
}

/// p-capacity potential of `B_ρ`: `(ρ/|x|)^{(N−p)/(p−1)}` outside the ball.
pub fn p_capacity_exterior(n: u32, p: f64, rho: f64) -> Result<RadialSolution> {
    check_dimension(n)?;
    check_p(n, p)?;
    check_radius("radius", rho)?;
    Ok(RadialSolution {
        dimension: n,
        kind: RadialKind::PCapacityExterior,
        inner_radius: rho,
        outer_radius: f64::INFINITY,
        p,
        gradient: 0.0,
    })
}

/// N-harmonic profile outside `B_ρ` equal to 1 on the sphere with `|∇u| = c` there:
/// `1 − c (|Γ|/ω_N)^{1/(N−1)} log(|x|/ρ)`.
pub fn n_capacity_log(n: u32, rho: f64, c: f64) -> Result<RadialSolution> {
    check_dimension(n)?;
    check_radius("radius", rho)?;
    check_radius("boundary gradient", c)?;
    Ok(RadialSolution {
        dimension: n,
        kind: RadialKind::NCapacityLog,
        inner_radius: rho,
        outer_radius: f64::INFINITY,
        p: n as f64,
        gradient: c,
    })
}

/// Fundamental-solution profile in the punctured ball `B_ρ \ {0}`:
/// `(p−1)/(N−p) (|Γ|/ω_N)^{1/(p−1)} |x|^{−(N−p)/(p−1)}`, with `|∇u| = 1` on the sphere.
pub fn p_interior_punctured(n: u32, p: f64, rho: f64) -> Result<RadialSolution> {
    check_dimension(n)?;
    check_p(n, p)?;
    check_radius("radius", rho)?;
    Ok(RadialSolution {
        dimension: n,
        kind: RadialKind::PInteriorPunctured,
        inner_radius: 0.0,
        outer_radius: rho,
        p,
        gradient: 1.0,
    })
}

impl RadialSolution {
    fn nf(&self) -> f64 {
        self.dimension as f64
    }

    /// `(N−p)/(p−1)`.
    fn decay(&self) -> f64 {
        (self.nf() - self.p) / (self.p - 1.0)
    }

    /// Radius of the sphere the boundary data live on, for exterior and ball kinds.
    fn rho(&self) -> f64 {
        match self.kind {
            RadialKind::PCapacityExterior | RadialKind::NCapacityLog => self.inner_radius,
            _ => self.outer_radius,
        }
    }

    fn punctured_amplitude(&self) -> f64 {
        let n = self.dimension;
        let gamma = sphere_area(n) * self.rho().powi(n as i32 - 1);
        (self.p - 1.0) / (self.nf() - self.p) * (gamma / sphere_area(n)).powf(1.0 / (self.p - 1.0))
    }

    fn annulus_parts(&self) -> (f64, f64, f64) {
        let (r, big_r) = (self.inner_radius, self.outer_radius);
        (r, big_r, r / big_r)
    }

    pub fn value(&self, x: f64) -> f64 {
        let nf = self.nf();
        match self.kind {
            RadialKind::BallTorsion => 0.5 * (x * x - self.outer_radius * self.outer_radius),
            RadialKind::AnnulusTorsion => {
                let (r, big_r, k) = self.annulus_parts();
                if self.dimension == 2 {
                    0.5 * x * x + 0.5 * big_r * big_r * (1.0 - k * k) * (x / r).ln() / k.ln() - 0.5 * r * r
                } else {
                    let scale = 0.5 * big_r * big_r / (1.0 - k.powf(nf - 2.0));
                    0.5 * x * x + scale * ((1.0 - k * k) * (x / r).powf(2.0 - nf) + k.powf(nf) - 1.0)
                }
            }
            RadialKind::PCapacityExterior => (self.rho() / x).powf(self.decay()),
            RadialKind::NCapacityLog => {
                let n = self.dimension;
                let gamma = sphere_area(n) * self.rho().powi(n as i32 - 1);
                let amp = self.gradient * (gamma / sphere_area(n)).powf(1.0 / (nf - 1.0));
                1.0 - amp * (x / self.rho()).ln()
            }
            RadialKind::PInteriorPunctured => self.punctured_amplitude() * x.powf(-self.decay()),
        }
    }

    /// Radial derivative `u'(|x|)`.
    pub fn derivative(&self, x: f64) -> f64 {
        let nf = self.nf();
        match self.kind {
            RadialKind::BallTorsion => x,
            RadialKind::AnnulusTorsion => {
                let (r, big_r, k) = self.annulus_parts();
                if self.dimension == 2 {
                    x + 0.5 * big_r * big_r * (1.0 - k * k) / (x * k.ln())
                } else {
                    let scale = 0.5 * big_r * big_r / (1.0 - k.powf(nf - 2.0));
                    x + scale * (1.0 - k * k) * (2.0 - nf) * (x / r).powf(1.0 - nf) / r
                }
            }
            RadialKind::PCapacityExterior => {
                let a = self.decay();
                -a * (self.rho() / x).powf(a) / x
            }
            RadialKind::NCapacityLog => {
                let n = self.dimension;
                let gamma = sphere_area(n) * self.rho().powi(n as i32 - 1);
                -self.gradient * (gamma / sphere_area(n)).powf(1.0 / (nf - 1.0)) / x
            }
            RadialKind::PInteriorPunctured => {
                let a = self.decay();
                -a * self.punctured_amplitude() * x.powf(-a - 1.0)
            }
        }
    }

    /// Relative residual of the defining radial ODE at `x`, with `u''` taken
    /// by finite differences of the closed-form derivative.
    ///
    /// Torsion kinds: `u'' + (N−1)u'/r = N`. The rest: `(p−1)u'' + (N−1)u'/r = 0`,
    /// the radial form of `div(|∇u|^{p−2}∇u) = 0`. The residual is divided by
    /// the largest term.
    pub fn ode_residual(&self, x: f64) -> f64 {
        let nf = self.nf();
        let d = self.derivative(x);
        let dd = fd1(|y| self.derivative(y), x, 1e-2 * x);
        match self.kind {
            RadialKind::BallTorsion | RadialKind::AnnulusTorsion => {
                let transport = (nf - 1.0) * d / x;
                (dd + transport - nf).abs() / nf.max(dd.abs()).max(transport.abs())
            }
            _ => {
                let transport = (nf - 1.0) * d / x;
                ((self.p - 1.0) * dd + transport).abs() / transport.abs().max(f64::MIN_POSITIVE)
            }
        }
    }

    /// Relative mismatch between the closed-form derivative and a finite
    /// difference of the value.
    pub fn derivative_mismatch(&self, x: f64) -> f64 {
        let fd = fd1(|y| self.value(y), x, 1e-2 * x);
        let d = self.derivative(x);
        let scale = d.abs().max(self.value(x).abs() / x).max(1e-300);
        (fd - d).abs() / scale
    }

    /// Log-spaced sample radii covering the domain.
    pub fn sample_radii(&self, count: usize) -> Vec<f64> {
        match self.kind {
            RadialKind::BallTorsion | RadialKind::PInteriorPunctured => {
                log_spaced(1e-2 * self.outer_radius, self.outer_radius, count)
            }
            RadialKind::AnnulusTorsion => log_spaced(self.inner_radius, self.outer_radius, count),
            RadialKind::PCapacityExterior | RadialKind::NCapacityLog => {
                log_spaced(self.inner_radius, 1e3 * self.inner_radius, count)
            }
        }
    }

    /// Boundary-condition errors: `u = 0` for torsion, `u = 1` and the
    /// prescribed `|u'|` for the capacity profiles, `|u'| = 1` for the punctured one.
    pub fn boundary_errors(&self) -> Vec<f64> {
        let rho = self.rho();
        match self.kind {
            RadialKind::BallTorsion => vec![self.value(self.outer_radius).abs()],
            RadialKind::AnnulusTorsion => {
                let scale = self.outer_radius * self.outer_radius;
                vec![
                    self.value(self.inner_radius).abs() / scale,
                    self.value(self.outer_radius).abs() / scale,
                ]
            }
            RadialKind::PCapacityExterior => vec![(self.value(rho) - 1.0).abs()],
            RadialKind::NCapacityLog => vec![
                (self.value(rho) - 1.0).abs(),
                (self.derivative(rho).abs() - self.gradient).abs() / self.gradient,
            ],
            RadialKind::PInteriorPunctured => vec![(self.derivative(rho).abs() - 1.0).abs()],
        }
    }

    /// ODE residual, derivative consistency and boundary data at `count` radii.
    pub fn verify(&self, count: usize) -> RadialCheck {
        let radii = self.sample_radii(count);
        let max_ode_residual = radii.iter().map(|&x| self.ode_residual(x)).fold(0.0, f64::max);
        let max_derivative_mismatch =
            radii.iter().map(|&x| self.derivative_mismatch(x)).fold(0.0, f64::max);
        let boundary_errors = self.boundary_errors();
        let passed = max_ode_residual <= ODE_TOLERANCE
            && max_derivative_mismatch <= 1e-8
            && boundary_errors.iter().all(|&e| e <= 1e-12);
        RadialCheck {
            samples: radii.len(),
            max_ode_residual,
            max_derivative_mismatch,
            boundary_errors,
            passed,
        }
    }

    /// Outward normal derivative on the inner sphere of an annulus, `−w'(r)`.
    pub fn inner_normal_derivative(&self) -> f64 {
        -self.derivative(self.inner_radius)
    }
}

/// The factor `f(κ)` in `w_ν = R(R−r)/r · f(κ)` on the inner sphere of the annulus.
///
/// For `N = 2` this is `(1 − κ² − 2κ² log(1/κ)) / (2(1−κ) log(1/κ))`, which is what
/// differentiating the annulus solution gives. See [`gradient_factor_printed_2d`]
/// for the form with the opposite sign.
pub fn gradient_factor(n: u32, kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return factor_at_zero(n);
    }
    if kappa >= 1.0 {
        return n as f64 / 2.0;
    }
    if n == 2 {
        let delta = 1.0 - kappa;
        if delta < 1e-3 {
            return 1.0 - 5.0 * delta / 6.0 - delta.powi(3) / 180.0;
        }
        let l = -kappa.ln();
        (1.0 - kappa * kappa - 2.0 * kappa * kappa * l) / (2.0 * delta * l)
    } else {
        let q = factor_quotient(n);
        let num = horner(&q, kappa);
        let den: f64 = 2.0 * (0..n - 2).map(|j| kappa.powi(j as i32)).sum::<f64>();
        num / den
    }
}

/// The `N = 2` expression `(2κ² log(1/κ) + κ² − 1) / (2(1−κ) log(1/κ))` as printed.
/// It is negative on `(0, 1)`.
pub fn gradient_factor_printed_2d(kappa: f64) -> f64 {
    -gradient_factor(2, kappa)
}

fn factor_at_zero(n: u32) -> f64 {
    if n == 2 {
        0.0
    } else {
        (n as f64 - 2.0) / 2.0
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Coefficients (ascending) of `(2κ^N − Nκ² + N − 2)/(1−κ)²`.
fn factor_quotient(n: u32) -> Vec<f64> {
    let n_us = n as usize;
    let mut g = vec![0.0; n_us + 1];
    g[0] = n as f64 - 2.0;
    g[2] -= n as f64;
    g[n_us] += 2.0;
    // Two synthetic divisions by (κ − 1); (κ−1)² = (1−κ)².
    for _ in 0..2 {
        let deg = g.len() - 1;
        let mut q = vec![0.0; deg];
        let mut carry = 0.0;
        for k in (1..=deg).rev() {
            carry = g[k] + carry;
            q[k - 1] = carry;
        }
        g = q;
    }
    g
}

/// Supremum of `f(κ)` over `(0, 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct GradientConstant {
    pub dimension: u32,
    pub step: f64,
    pub sup: f64,
    pub argsup: f64,
    pub limit_at_zero: f64,
    pub limit_at_one: f64,
    /// The value asserted for this dimension: 3/2 for `N = 2`, `N/2` otherwise.
    pub stated_sup: f64,
    /// Supremum of the printed `N = 2` expression (present only for `N = 2`).
    pub printed_formula_sup: Option<f64>,
}

/// Numerical supremum of `f(κ)` on a grid of spacing `min(step, 1e−4)`, with the
/// endpoint limits included and an interior maximum refined by golden section.
pub fn gradient_bound_constant(n: u32, step: f64) -> Result<GradientConstant> {
    check_dimension(n)?;
    let step = if step > 0.0 { step.min(1e-4) } else { 1e-4 };
    let count = (1.0 / step).ceil() as usize;
    let grid: Vec<f64> = (1..count).map(|i| i as f64 / count as f64).collect();
    let sup_of = |f: &dyn Fn(f64) -> f64| {
        let mut best = (0.0, f(0.0));
        for &k in grid.iter().chain([1.0].iter()) {
            let v = f(k);
            if v > best.1 {
                best = (k, v);
            }
        }
        if best.0 > 0.0 && best.0 < 1.0 {
            let lo = (best.0 - step).max(0.0);
            let hi = (best.0 + step).min(1.0);
            let (k, v) = golden_min(|x| -f(x), lo, hi, 1e-12);
            if -v > best.1 {
                best = (k, -v);
            }
        }
        best
    };
    let (argsup, sup) = sup_of(&|k| gradient_factor(n, k));
    let printed_formula_sup = (n == 2).then(|| {
        sup_of(&|k| if k >= 1.0 { -1.0 } else { gradient_factor_printed_2d(k) }).1
    });
    Ok(GradientConstant {
        dimension: n,
        step,
        sup,
        argsup,
        limit_at_zero: factor_at_zero(n),
        limit_at_one: gradient_factor(n, 1.0).min(if n == 2 { 1.0 } else { f64::INFINITY }),
        stated_sup: if n == 2 { 1.5 } else { n as f64 / 2.0 },
        printed_formula_sup,
    })
}

/// Closed forms attached to the p-capacity of a ball.
#[derive(Debug, Clone, Serialize)]
pub struct PCapacityBall {
    pub dimension: u32,
    pub p: f64,
    pub rho: f64,
    /// `ω_N ((N−p)/(p−1))^{p−1} ρ^{N−p}`.
    pub capacity: f64,
    /// `((N−p)/(p−1))^{p−1} |Γ|^p / (N|Ω|)^{p−1}` for the ball.
    pub capacity_isoperimetric: f64,
    /// `c^{p−1} |Γ|`.
    pub capacity_boundary: f64,
    /// `c = ((N−p)/(p−1)) H₀` with `H₀ = 1/ρ`.
    pub boundary_gradient: f64,
    /// `|u'(ρ)|` of the explicit potential.
    pub potential_gradient: f64,
    pub potential: RadialSolution,
    /// Largest relative disagreement among the capacity forms and the two gradients.
    pub max_discrepancy: f64,
}

pub fn p_capacity_ball(n: u32, p: f64, rho: f64) -> Result<PCapacityBall> {
    let potential = p_capacity_exterior(n, p, rho)?;
    let nf = n as f64;
    let k = (nf - p) / (p - 1.0);
    let omega = sphere_area(n);
    let gamma = omega * rho.powf(nf - 1.0);
    let volume = unit_ball_volume(n) * rho.powf(nf);
    let capacity = omega * k.powf(p - 1.0) * rho.powf(nf - p);
    let capacity_isoperimetric = k.powf(p - 1.0) * gamma.powf(p) / (nf * volume).powf(p - 1.0);
    let boundary_gradient = k / rho;
    let capacity_boundary = boundary_gradient.powf(p - 1.0) * gamma;
    let potential_gradient = potential.derivative(rho).abs();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
    let max_discrepancy = [
        rel(capacity, capacity_isoperimetric),
        rel(capacity, capacity_boundary),
        rel(capacity_isoperimetric, capacity_boundary),
        rel(boundary_gradient, potential_gradient),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(PCapacityBall {
        dimension: n,
        p,
        rho,
        capacity,
        capacity_isoperimetric,
        capacity_boundary,
        boundary_gradient,
        potential_gradient,
        potential,
        max_discrepancy,
    })
}

/// A sample point reduced to `(s, t) = (|x′|, |x″|)`, with its full coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct ConeSample {
    pub point: Vec<f64>,
    pub s: f64,
    pub t: f64,
    pub div_x: f64,
    pub u_tilde: f64,
}

/// Outcome of [`cone_checks`].
#[derive(Debug, Clone, Serialize)]
pub struct ConeReport {
    pub m: usize,
    pub n_points: usize,
    pub seed: u64,
    /// Largest `|div(∇u/|∇u|)|` on the cone for `u = |x′|² − |x″|²`.
    pub max_cone_curvature: f64,
    /// Largest gap between closed-form divergences and central differences.
    pub max_fd_discrepancy: f64,
    pub sign_samples: usize,
    pub sign_agreements: usize,
    /// First off-cone sample where `div X` and `ũ` disagree in sign.
    pub violation: Option<ConeSample>,
    pub violation_search_samples: usize,
    pub resampled: usize,
    pub passed: bool,
}

/// Divergence of `f(s,t) x′ + g(s,t) x″` in `R^{2m}`.
fn radial_divergence(m: f64, s: f64, t: f64, f: f64, f_s: f64, g: f64, g_t: f64) -> f64 {
    m * f + s * f_s + m * g + t * g_t
}

/// Summed mean curvature of the level sets of `s² − t²`: the field
/// `∇u/|∇u| = (x′ − x″)/√(s²+t²)`.
fn cone_curvature(m: f64, s: f64, t: f64) -> f64 {
    let r2 = s * s + t * t;
    let r = r2.sqrt();
    let f = 1.0 / r;
    let f_s = -s / (r2 * r);
    let g = -1.0 / r;
    let g_t = t / (r2 * r);
    radial_divergence(m, s, t, f, f_s, g, g_t)
}

/// `div X` for `X = ∇ũ/|∇ũ| = (s² x′ − t² x″)/√(s⁶+t⁶)`.
fn calibration_divergence(m: f64, s: f64, t: f64) -> f64 {
    let d2 = s.powi(6) + t.powi(6);
    let d = d2.sqrt();
    let d3 = d2 * d;
    let f = s * s / d;
    let f_s = 2.0 * s / d - 3.0 * s.powi(7) / d3;
    let g = -t * t / d;
    let g_t = -2.0 * t / d + 3.0 * t.powi(7) / d3;
    radial_divergence(m, s, t, f, f_s, g, g_t)
}

fn split_norms(x: &[f64], m: usize) -> (f64, f64) {
    let s = x[..m].iter().map(|v| v * v).sum::<f64>().sqrt();
    let t = x[m..].iter().map(|v| v * v).sum::<f64>().sqrt();
    (s, t)
}

/// Divergence of the unit normal field of `φ` by central differences in all
/// `2m` coordinates, given `∇φ` in closed form.
fn fd_divergence(x: &[f64], m: usize, grad: impl Fn(&[f64], usize) -> Vec<f64>, h: f64) -> f64 {
    let unit = |y: &[f64]| {
        let g = grad(y, m);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        g.into_iter().map(|v| v / norm).collect::<Vec<_>>()
    };
    let mut y = x.to_vec();
    let mut acc = 0.0;
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let plus = unit(&y)[i];
        y[i] = x[i] - h;
        let minus = unit(&y)[i];
        y[i] = x[i];
        acc += (plus - minus) / (2.0 * h);
    }
    acc
}

fn grad_quadratic(x: &[f64], m: usize) -> Vec<f64> {
    x.iter().enumerate().map(|(i, v)| if i < m { 2.0 * v } else { -2.0 * v }).collect()
}

fn grad_quartic(x: &[f64], m: usize) -> Vec<f64> {
    let (s, t) = split_norms(x, m);
    x.iter()
        .enumerate()
        .map(|(i, v)| if i < m { 4.0 * s * s * v } else { -4.0 * t * t * v })
        .collect()
}

const VIOLATION_SEARCH: usize = 10_000;
const SINGULAR_MARGIN: f64 = 5e-2;

/// Desk checks on the Simons cone `{|x′| = |x″|} ⊂ R^{2m}`.
///
/// (a) the cone has zero summed mean curvature at `n_points` samples;
/// (b) `div X` has the sign of `ũ = |x′|⁴ − |x″|⁴` at `n_points` off-cone samples;
/// (c) for `m < 4` a sign violation is searched among up to 10⁴ samples.
/// Closed forms use the `(s, t)` reduction and are cross-checked by central
/// differences with step 1e−5.
pub fn cone_checks(m: usize, n_points: usize, seed: u64) -> Result<ConeReport> {
    if m == 0 {
        return Err(Error::InvalidParameter("cone_checks needs m >= 1".into()));
    }
    let mf = m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resampled = 0;
    let draw = |rng: &mut ChaCha8Rng, resampled: &mut usize| loop {
        let x: Vec<f64> = (0..2 * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (s, t) = split_norms(&x, m);
        let q = s.powi(4) - t.powi(4);
        if s < SINGULAR_MARGIN || t < SINGULAR_MARGIN || q.abs() < 1e-6 * (s.powi(4) + t.powi(4)) {
            *resampled += 1;
            continue;
        }
        return (x, s, t);
    };

    let mut max_cone_curvature: f64 = 0.0;
    let mut max_fd_discrepancy: f64 = 0.0;
    for _ in 0..n_points {
        let (mut x, s, t) = draw(&mut rng, &mut resampled);
        // Project onto the cone: both halves to unit length.
        for v in &mut x[..m] {
            *v /= s;
        }
        for v in &mut x[m..] {
            *v /= t;
        }
        let (s, t) = split_norms(&x, m);
        let exact = cone_curvature(mf, s, t);
        let fd = fd_divergence(&x, m, grad_quadratic, 1e-5);
        max_cone_curvature = max_cone_curvature.max(exact.abs());
        max_fd_discrepancy = max_fd_discrepancy.max((fd - exact).abs());
    }

    let sample = |x: Vec<f64>, s: f64, t: f64| ConeSample {
        div_x: calibration_divergence(mf, s, t),
        u_tilde: s.powi(4) - t.powi(4),
        point: x,
        s,
        t,
    };
    let mut sign_agreements = 0;
    let mut violation = None;
    for _ in 0..n_points {
        let (x, s, t) = draw(&mut rng, &mut resampled);
        let fd = fd_divergence(&x, m, grad_quartic, 1e-5);
        let c = sample(x, s, t);
        max_fd_discrepancy = max_fd_discrepancy.max((fd - c.div_x).abs() / (1.0 + c.div_x.abs()));
        if c.div_x.signum() == c.u_tilde.signum() && c.div_x != 0.0 {
            sign_agreements += 1;
        } else if violation.is_none() {
            violation = Some(c);
        }
    }
    let mut violation_search_samples = n_points;
    if m < 4 {
        while violation.is_none() && violation_search_samples < VIOLATION_SEARCH {
            let (x, s, t) = draw(&mut rng, &mut resampled);
            violation_search_samples += 1;
            let c = sample(x, s, t);
            if c.div_x.signum() != c.u_tilde.signum() {
                violation = Some(c);
            }
        }
    }

    let curvature_ok = max_cone_curvature <= 1e-8 && max_fd_discrepancy <= 1e-6;
    let sign_ok = if m >= 4 { sign_agreements == n_points } else { violation.is_some() };
    Ok(ConeReport {
        m,
        n_points,
        seed,
        max_cone_curvature,
        max_fd_discrepancy,
        sign_samples: n_points,
        sign_agreements,
        violation,
        violation_search_samples,
        resampled,
        passed: curvature_ok && sign_ok,
    })
}

/// One Hardy-inequality evaluation for a cut-off profile.
#[derive(Debug, Clone, Serialize)]
pub struct HardyProfile {
    pub alpha: f64,
    pub cutoff: f64,
    /// `∫|ξ'|² r^{n−1} dr` over `(0, 1)`.
    pub gradient_energy: f64,
    /// `∫ξ² r^{n−3} dr` over `(0, 1)`.
    pub weighted_mass: f64,
    /// `∫ξ² r^{n−1} dr` over `(0, 1)`.
    pub mass: f64,
}

impl HardyProfile {
    /// `(∫|∇ξ|² − a∫ξ²/|x|²) / ∫ξ²`; the sphere measure cancels.
    pub fn quotient(&self, a: f64) -> f64 {
        (self.gradient_energy - a * self.weighted_mass) / self.mass
    }
}

/// Radial integrals of `ξ = r^{−α} − 1` on `(ε, 1)`, continued by the constant
/// `ε^{−α} − 1` on `(0, ε)`. Quadrature runs in `log r`.
pub fn hardy_profile(n: u32, alpha: f64, cutoff: f64) -> HardyProfile {
    let nf = n as f64;
    let lo = cutoff.ln();
    let panels = ((-lo).ceil() as usize).max(8) * 4;
    let xi = |s: f64| (-alpha * s).exp() - 1.0;
    // dr = r ds, so r^{k} dr = e^{(k+1)s} ds.
    let gradient_energy = integrate(
        |s| alpha * alpha * (-2.0 * alpha * s).exp() * ((nf - 2.0) * s).exp(),
        lo,
        0.0,
        panels,
        12,
    );
    let weighted_outer = integrate(|s| xi(s).powi(2) * ((nf - 2.0) * s).exp(), lo, 0.0, panels, 12);
    let mass_outer = integrate(|s| xi(s).powi(2) * (nf * s).exp(), lo, 0.0, panels, 12);
    let c = cutoff.powf(-alpha) - 1.0;
    let weighted_inner = integrate(|r| c * c * r.powf(nf - 3.0), 0.0, cutoff, 4, 12);
    let mass_inner = integrate(|r| c * c * r.powf(nf - 1.0), 0.0, cutoff, 4, 12);
    HardyProfile {
        alpha,
        cutoff,
        gradient_energy,
        weighted_mass: weighted_outer + weighted_inner,
        mass: mass_outer + mass_inner,
    }
}

/// Outcome of [`hardy_and_windows`].
#[derive(Debug, Clone, Serialize)]
pub struct HardyReport {
    pub n: u32,
    pub a: f64,
    /// `(n−2)²/4`.
    pub hardy_constant: f64,
    pub hardy_profiles: Vec<HardyProfile>,
    /// Every sampled profile satisfies `∫|∇ξ|² > (n−2)²/4 ∫ξ²/|x|²`.
    pub hardy_holds: bool,
    /// Exponent used for the unbounded-quotient sequence when `a > (n−2)²/4`.
    pub sequence_alpha: Option<f64>,
    /// `(cutoff, quotient)` pairs, shrinking cutoffs.
    pub quotient_sequence: Vec<(f64, f64)>,
    /// Witnesses `(α, β)` with `α², β² < 2` and `α < (n−5)/2 < β`, if any.
    pub window: Option<(f64, f64)>,
    /// Largest relative residual of `−Δ(−2 log r) = 2(n−2) r^{−2}`.
    pub extremal_residual: f64,
    /// `2(n−2) ≤ (n−2)²/4`.
    pub stability_flag: bool,
}

/// Default bound the quotient sequence is driven below.
pub const QUOTIENT_TARGET: f64 = -1e3;

/// Hardy-inequality profiles, the `α, β` window and the stability flag in dimension `n`.
pub fn hardy_and_windows(n: u32, a: f64) -> Result<HardyReport> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("hardy_and_windows needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    let half = (nf - 2.0) / 2.0;
    let hardy_constant = half * half;

    let mut hardy_profiles = Vec::new();
    for alpha in [0.5 * half, half, 1.5 * half] {
        for cutoff in [1e-2, 1e-6] {
            hardy_profiles.push(hardy_profile(n, alpha, cutoff));
        }
    }
    let hardy_holds = hardy_profiles
        .iter()
        .all(|p| p.gradient_energy > hardy_constant * p.weighted_mass);

    let (sequence_alpha, quotient_sequence) = if a > hardy_constant {
        let alpha = 0.5 * (half + a.sqrt());
        let mut seq = Vec::new();
        for k in 1..=300 {
            let cutoff = 10f64.powi(-k);
            let q = hardy_profile(n, alpha, cutoff).quotient(a);
            seq.push((cutoff, q));
            if q < QUOTIENT_TARGET {
                break;
            }
        }
        (Some(alpha), seq)
    } else {
        (None, Vec::new())
    };

    // (n−5)²/4 < 2 in integers.
    let shift = n as i64 - 5;
    let window = (shift * shift < 8).then(|| {
        let centre = shift as f64 / 2.0;
        let root = 2f64.sqrt();
        (0.5 * (centre - root), 0.5 * (centre + root))
    });

    let phi = |r: f64| -2.0 * r.ln();
    let extremal_residual = log_spaced(1e-2, 1.0, 10)
        .into_iter()
        .map(|r| {
            let h = 1e-2 * r;
            let lap = fd2(phi, r, h) + (nf - 1.0) * fd1(phi, r, h) / r;
            let rhs = 2.0 * (nf - 2.0) * phi(r).exp();
            (-lap - rhs).abs() / rhs
        })
        .fold(0.0, f64::max);

    let m = n as i64 - 2;
    Ok(HardyReport {
        n,
        a,
        hardy_constant,
        hardy_profiles,
        hardy_holds,
        sequence_alpha,
        quotient_sequence,
        window,
        extremal_residual,
        stability_flag: 8 * m <= m * m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn all_radial_solutions_satisfy_their_odes() {
        let mut sols = vec![ball_torsion(2, 1.0).unwrap(), ball_torsion(5, 0.3).unwrap()];
        for n in 2..=6 {
            sols.push(annulus_torsion(n, 1.0, 2.0).unwrap());
            sols.push(annulus_torsion(n, 0.05, 3.0).unwrap());
            sols.push(n_capacity_log(n, 1.5, 0.7).unwrap());
        }
        for (n, p) in [(3, 1.5), (3, 2.0), (4, 3.0), (5, 2.5)] {
            sols.push(p_capacity_exterior(n, p, 0.8).unwrap());
            sols.push(p_interior_punctured(n, p, 2.0).unwrap());
        }
        for s in &sols {
            let c = s.verify(ODE_SAMPLES);
            assert!(c.passed, "{:?} N={} -> {c:?}", s.kind, s.dimension);
        }
    }

    #[test]
    fn annulus_rejects_inverted_radii() {
        assert!(annulus_torsion(2, 2.0, 1.0).is_err());
        assert!(annulus_torsion(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn annulus_value_matches_direct_formula() {
        // Oracle: general radial solution r²/2 + A + B r^{2−N}, fitted to the two
        // boundary conditions by hand.
        let (r, big_r, x) = (1.0f64, 2.0f64, 1.5f64);
        let b = (big_r * big_r - r * r) / (2.0 * (r.powi(-1) - big_r.powi(-1)));
        let a = -r * r / 2.0 - b / r;
        let expected = x * x / 2.0 + a + b / x;
        let w = annulus_torsion(3, r, big_r).unwrap();
        assert!((w.value(x) - expected).abs() < 1e-14);
    }

    #[test]
    fn inner_normal_derivative_matches_factor() {
        for n in 2..=5 {
            for (r, big_r) in [(1.0, 2.0), (0.3, 0.5), (2.0, 9.0)] {
                let w = annulus_torsion(n, r, big_r).unwrap();
                let expected = big_r * (big_r - r) / r * gradient_factor(n, r / big_r);
                let got = w.inner_normal_derivative();
                assert!((got - expected).abs() < 1e-12 * expected.abs(), "N={n}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn factor_series_matches_direct_evaluation() {
        let k: f64 = 1.0 - 2e-3;
        let l = -k.ln();
        let direct = (1.0 - k * k - 2.0 * k * k * l) / (2.0 * (1.0 - k) * l);
        let d = 1.0 - k;
        let series = 1.0 - 5.0 * d / 6.0 - d.powi(3) / 180.0;
        assert!((direct - series).abs() < 1e-10);
        assert!(gradient_factor_printed_2d(0.5) < 0.0);
    }

    #[test]
    fn factor_quotient_three_dimensions() {
        // (2κ³ − 3κ² + 1)/(1−κ)² = 2κ + 1.
        assert_eq!(factor_quotient(3), vec![1.0, 2.0]);
    }

    #[test]
    fn gradient_constants() {
        for n in 3..=6 {
            let g = gradient_bound_constant(n, 1e-4).unwrap();
            assert!((g.sup - n as f64 / 2.0).abs() < 1e-3, "{g:?}");
        }
        let g2 = gradient_bound_constant(2, 1e-4).unwrap();
        assert!((g2.sup - 1.0).abs() < 1e-3);
        assert!(g2.printed_formula_sup.unwrap() <= 1e-12);
    }

    #[test]
    fn capacity_of_unit_ball_in_three_dimensions() {
        // Oracle: ∫_{r>1} |∇(1/r)|² dx = 4π ∫_1^∞ r^{-2} dr, by quadrature in 1/r.
        let direct = 4.0 * PI * integrate(|_| 1.0, 0.0, 1.0, 1, 4);
        let cap = p_capacity_ball(3, 2.0, 1.0).unwrap();
        assert!((cap.capacity - direct).abs() < 1e-12);
        assert!((cap.boundary_gradient - 1.0).abs() < 1e-15);
    }

    #[test]
    fn capacity_triangle() {
        for n in 3..=5u32 {
            for p in [1.5, 2.0, 2.5] {
                if p >= n as f64 {
                    continue;
                }
                let cap = p_capacity_ball(n, p, 0.7).unwrap();
                assert!(cap.max_discrepancy <= 1e-12, "{cap:?}");
            }
        }
        let cap = p_capacity_ball(4, 3.0, 2.0).unwrap();
        assert!(cap.max_discrepancy <= 1e-12);
        assert!(p_capacity_ball(3, 3.0, 1.0).is_err());
        assert!(p_capacity_ball(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn cone_point_in_four_dimensions() {
        let x = [1.0, 0.0, 1.0, 0.0];
        let (s, t) = split_norms(&x, 2);
        assert!(cone_curvature(2.0, s, t).abs() <= 1e-8);
        assert!(fd_divergence(&x, 2, grad_quadratic, 1e-5).abs() <= 1e-6);
    }

    #[test]
    fn cone_sign_checks() {
        let r4 = cone_checks(4, 1000, 7).unwrap();
        assert!(r4.passed, "{r4:?}");
        assert_eq!(r4.sign_agreements, 1000);
        for m in [2, 3] {
            let r = cone_checks(m, 200, 7).unwrap();
            assert!(r.violation.is_some() && r.passed);
        }
    }

    #[test]
    fn windows_and_flags() {
        assert!(hardy_and_windows(7, 0.0).unwrap().window.is_some());
        assert!(hardy_and_windows(8, 0.0).unwrap().window.is_none());
        assert!(hardy_and_windows(10, 0.0).unwrap().stability_flag);
        assert!(!hardy_and_windows(9, 0.0).unwrap().stability_flag);
        let r = hardy_and_windows(5, 9.0 / 4.0 + 1.0).unwrap();
        assert!(r.hardy_holds);
        assert!(r.extremal_residual < 1e-10);
        assert!(r.quotient_sequence.last().unwrap().1 < QUOTIENT_TARGET);
    }

    #[test]
    fn window_witnesses_satisfy_constraints() {
        for n in 3..=7 {
            let (a, b) = hardy_and_windows(n, 0.0).unwrap().window.unwrap();
            let c = (n as f64 - 5.0) / 2.0;
            assert!(a * a < 2.0 && b * b < 2.0 && a < c && c < b, "n={n}");
        }
    }
}
