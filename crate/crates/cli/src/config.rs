//! Run configuration: a single JSON document, validated before any work starts.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symlab::fem::Degree;
use symlab::geometry::{BoundaryCurve, Point};
use symlab::stability::SweepOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Identities,
    Report,
    Sweep,
    Analytic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Identities => "identities",
            Command::Report => "report",
            Command::Sweep => "sweep",
            Command::Analytic => "analytic",
        }
    }
}

/// `r(θ) = a0 + ε·cos(mode·θ)` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(default = "one")]
    pub a0: f64,
    pub mode: usize,
    #[serde(default)]
    pub center: Point,
}

impl FamilySpec {
    pub fn id(&self) -> String {
        format!("a0={}+eps*cos({}t)", self.a0, self.mode)
    }

    pub fn curve(&self, eps: f64) -> symlab::Result<BoundaryCurve> {
        let c = BoundaryCurve::cosine_mode(self.a0, self.mode, eps)?;
        Ok(c.translated(self.center))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    #[serde(default = "one")]
    pub c_mesh: f64,
    #[serde(default = "default_h_min")]
    pub h_min: f64,
    #[serde(default = "default_h_cap")]
    pub h_cap: f64,
    /// Only ε at or below this value enter the fits; absent means all.
    #[serde(default)]
    pub fit_cutoff: Option<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            c_mesh: 1.0,
            h_min: default_h_min(),
            h_cap: default_h_cap(),
            fit_cutoff: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Identity residual bound (on the scaled residual).
    #[serde(default = "default_identity_tol")]
    pub identity: f64,
    /// Relative slack on explicit inequalities.
    #[serde(default = "default_bound_slack")]
    pub bound_slack: f64,
    /// `|hk_deficit − obvp_deficit|` bound.
    #[serde(default = "default_quadrature_agreement")]
    pub quadrature_agreement: f64,
    #[serde(default = "default_min_slope")]
    pub min_slope: f64,
    #[serde(default = "default_min_r_squared")]
    pub min_r_squared: f64,
    /// Largest allowed max/min of `A(Ω)/‖H₀ − H‖₂` across a sweep.
    #[serde(default = "default_ratio_spread")]
    pub ratio_spread: f64,
    /// Allowed distance of `sup f(κ)` from its stated value.
    #[serde(default = "default_gradient_constant")]
    pub gradient_constant: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: default_identity_tol(),
            bound_slack: default_bound_slack(),
            quadrature_agreement: default_quadrature_agreement(),
            min_slope: default_min_slope(),
            min_r_squared: default_min_r_squared(),
            ratio_spread: default_ratio_spread(),
            gradient_constant: default_gradient_constant(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSettings {
    #[serde(default = "default_dimensions")]
    pub dimensions: Vec<u32>,
    #[serde(default = "default_kappa_step")]
    pub kappa_step: f64,
    #[serde(default = "default_cone_m")]
    pub cone_m: Vec<usize>,
    #[serde(default = "default_cone_points")]
    pub cone_points: usize,
    #[serde(default = "default_hardy_n")]
    pub hardy_n: Vec<u32>,
    /// Coefficient `a` of the Hardy quotient; `None` uses `(n−2)²/4 + 1` per `n`.
    #[serde(default)]
    pub hardy_a: Option<f64>,
}

impl Default for AnalyticSettings {
    fn default() -> Self {
        AnalyticSettings {
            dimensions: default_dimensions(),
            kappa_step: default_kappa_step(),
            cone_m: default_cone_m(),
            cone_points: default_cone_points(),
            hardy_n: default_hardy_n(),
            hardy_a: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<BoundaryCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub analytic: AnalyticSettings,
    #[serde(default = "yes")]
    pub plots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_degree() -> u32 {
    2
}
fn default_h_min() -> f64 {
    0.01
}
fn default_h_cap() -> f64 {
    0.05
}
fn default_identity_tol() -> f64 {
    5e-3
}
fn default_bound_slack() -> f64 {
    symlab::stability::BOUND_SLACK
}
fn default_quadrature_agreement() -> f64 {
    1e-12
}
fn default_min_slope() -> f64 {
    0.9
}
fn default_min_r_squared() -> f64 {
    0.98
}
fn default_ratio_spread() -> f64 {
    2.0
}
fn default_gradient_constant() -> f64 {
    1e-3
}
fn default_dimensions() -> Vec<u32> {
    vec![2, 3, 4, 5]
}
fn default_kappa_step() -> f64 {
    1e-4
}
fn default_cone_m() -> Vec<usize> {
    (1..=8).collect()
}
fn default_cone_points() -> usize {
    1000
}
fn default_hardy_n() -> Vec<u32> {
    (3..=12).collect()
}

/// Invalid configuration, located in the source text when possible.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
            if let Some(col) = self.column {
                write!(f, ":{col}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

/// 1-based line of the first occurrence of `"key"` as an object key.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| {
        l.find(&needle)
            .map(|i| l[i + needle.len()..].trim_start().starts_with(':'))
            .unwrap_or(false)
    })
    .map(|i| i + 1)
}

impl RunConfig {
    pub fn degree(&self) -> Degree {
        Degree::from_order(self.degree).expect("validated")
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            c_mesh: self.sweep.c_mesh,
            h_min: self.sweep.h_min,
            h_cap: self.sweep.h_cap,
            fit_cutoff: self.sweep.fit_cutoff.unwrap_or(f64::INFINITY),
            min_r_squared: self.tolerances.min_r_squared,
            degree: self.degree(),
        }
    }
}

/// Reads, parses and validates the config for `command`.
pub fn load(path: &Path, command: Command) -> Result<(RunConfig, Vec<u8>), ConfigError> {
    let err = |line, column, message: String| ConfigError {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let bytes = std::fs::read(path).map_err(|e| err(None, None, format!("cannot read config: {e}")))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| err(None, None, format!("config is not UTF-8: {e}")))?;
    let config: RunConfig = serde_json::from_str(text)
        .map_err(|e| err(Some(e.line()), Some(e.column()), e.to_string()))?;
    validate(&config, command).map_err(|(key, message)| err(line_of_key(text, key), None, message))?;
    Ok((config, bytes))
}

fn positive(key: &'static str, v: f64) -> Result<(), (&'static str, String)> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err((key, format!("{key} must be positive and finite, got {v}")))
    }
}

/// Semantic checks; the error carries the offending key.
pub fn validate(c: &RunConfig, command: Command) -> Result<(), (&'static str, String)> {
    if let Some(cmd) = c.command {
        if cmd != command {
            return Err((
                "command",
                format!("config is for `{}` but `{}` was requested", cmd.name(), command.name()),
            ));
        }
    }
    if c.degree != 1 && c.degree != 2 {
        return Err(("degree", format!("degree must be 1 or 2, got {}", c.degree)));
    }
    if let Some(h) = c.h_max {
        positive("h_max", h)?;
    }
    let t = &c.tolerances;
    positive("identity", t.identity)?;
    positive("bound_slack", t.bound_slack)?;
    positive("quadrature_agreement", t.quadrature_agreement)?;
    positive("min_slope", t.min_slope)?;
    positive("min_r_squared", t.min_r_squared)?;
    positive("ratio_spread", t.ratio_spread)?;
    positive("gradient_constant", t.gradient_constant)?;

    match command {
        Command::Solve | Command::Identities | Command::Report => {
            let curve = c.curve.as_ref().ok_or(("command", format!("`{}` needs a \"curve\"", command.name())))?;
            curve.validate().map_err(|e| ("curve", e.to_string()))?;
            let h = c.h_max.ok_or(("command", format!("`{}` needs \"h_max\"", command.name())))?;
            if h > curve.a0 / 4.0 {
                return Err(("h_max", format!("h_max must be at most a0/4 = {}, got {h}", curve.a0 / 4.0)));
            }
        }
        Command::Sweep => {
            let family = c.family.as_ref().ok_or(("command", "`sweep` needs a \"family\"".to_string()))?;
            positive("a0", family.a0)?;
            if family.mode == 0 {
                return Err(("mode", "family mode must be at least 1".into()));
            }
            let eps = c.epsilons.as_ref().ok_or(("command", "`sweep` needs \"epsilons\"".to_string()))?;
            if eps.len() < 4 {
                return Err(("epsilons", format!("a sweep needs at least 4 epsilons, got {}", eps.len())));
            }
            for &e in eps {
                positive("epsilons", e)?;
                family.curve(e).map_err(|err| ("epsilons", format!("ε = {e}: {err}")))?;
            }
            let s = &c.sweep;
            positive("c_mesh", s.c_mesh)?;
            positive("h_min", s.h_min)?;
            positive("h_cap", s.h_cap)?;
            if s.h_min > s.h_cap {
                return Err(("h_min", format!("h_min {} exceeds h_cap {}", s.h_min, s.h_cap)));
            }
            if s.h_cap > family.a0 / 4.0 {
                return Err(("h_cap", format!("h_cap must be at most a0/4 = {}", family.a0 / 4.0)));
            }
            if let Some(cut) = s.fit_cutoff {
                positive("fit_cutoff", cut)?;
            }
        }
        Command::Analytic => {
            let a = &c.analytic;
            if a.dimensions.iter().any(|&n| n < 2) {
                return Err(("dimensions", "dimensions must be at least 2".into()));
            }
            positive("kappa_step", a.kappa_step)?;
            if a.cone_m.iter().any(|&m| m == 0) {
                return Err(("cone_m", "cone_m entries must be at least 1".into()));
            }
            if a.cone_points == 0 {
                return Err(("cone_points", "cone_points must be positive".into()));
            }
            if a.hardy_n.iter().any(|&n| n < 3) {
                return Err(("hardy_n", "hardy_n entries must be at least 3".into()));
            }
            if let Some(v) = a.hardy_a {
                positive("hardy_a", v)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> RunConfig {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse(r#"{"curve": {"a0": 1.0}, "h_max": 0.05}"#);
        assert_eq!(c.degree, 2);
        assert_eq!(c.tolerances.identity, 5e-3);
        assert!(validate(&c, Command::Solve).is_ok());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"curve": {"a0": 1.0}, "hmax": 0.05}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"curve": {"a0": 1.0, "phase": 2}}"#).is_err());
    }

    #[test]
    fn negative_h_max_names_the_key() {
        let text = "{\n  \"curve\": {\"a0\": 1.0},\n  \"h_max\": -1\n}";
        let c = parse(text);
        let (key, _) = validate(&c, Command::Solve).unwrap_err();
        assert_eq!(key, "h_max");
        assert_eq!(line_of_key(text, key), Some(3));
    }

    #[test]
    fn command_mismatch() {
        let c = parse(r#"{"command": "sweep", "curve": {"a0": 1.0}, "h_max": 0.05}"#);
        assert!(validate(&c, Command::Solve).is_err());
    }

    #[test]
    fn sweep_requirements() {
        let c = parse(r#"{"family": {"mode": 2}, "epsilons": [0.02, 0.04, 0.06]}"#);
        assert_eq!(validate(&c, Command::Sweep).unwrap_err().0, "epsilons");
        let c = parse(r#"{"family": {"mode": 2}, "epsilons": [0.02, 0.04, 0.06, 1.5]}"#);
        assert_eq!(validate(&c, Command::Sweep).unwrap_err().0, "epsilons");
    }
}
