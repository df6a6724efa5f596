use serde::Serialize;
use std::fmt;
use std::path::PathBuf;
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Flow,
    #[serde(rename = "model_pde")]
    ModelPde,
    ChartsValidate,
    Norms,
    Oracle,
}

impl Experiment {
    const NAMES: [(&'static str, Experiment); 5] = [
        ("flow", Experiment::Flow),
        ("model_pde", Experiment::ModelPde),
        ("charts-validate", Experiment::ChartsValidate),
        ("norms", Experiment::Norms),
        ("oracle", Experiment::Oracle),
    ];
}

/// Initial height field of a flow run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// Lower cap of the sphere of radius `radius`.
    Sphere,
    /// `((ρ − radius)₊)²`: a flat disk of radius `radius`.
    FlatDisk,
    /// The flat disk inside the sphere of radius `outer_radius`, co-evolved.
    Nested,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    Euler,
    Rk2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Frozen,
    /// Exact sphere heights; only meaningful for sphere data.
    Prescribed,
    Extrapolate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub initial: Initial,
    pub radius: f64,
    pub outer_radius: f64,
    /// Nodes per side of the square grid (flow), or per period (model_pde).
    pub grid: usize,
    pub half_width: f64,
    pub flat_tol: f64,
    pub dt_safety: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub p: f64,
    pub integrator: IntegratorKind,
    pub boundary: BoundaryKind,
    pub denom_eps: Option<f64>,
    /// Time step of the implicit model solver.
    pub dt: f64,
    pub out: PathBuf,
    pub samples: usize,
    pub alpha: f64,
    /// Refinement levels of the norms experiment.
    pub levels: usize,
}

pub const KEYS: [&str; 20] = [
    "experiment",
    "seed",
    "initial",
    "radius",
    "outer_radius",
    "grid",
    "half_width",
    "flat_tol",
    "dt_safety",
    "t_end",
    "record_every",
    "p",
    "integrator",
    "boundary",
    "denom_eps",
    "dt",
    "out",
    "samples",
    "alpha",
    "levels",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Syntax(String),
    UnknownKey,
    Missing,
    WrongType(&'static str),
    OutOfRange(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::Syntax(m) => write!(f, "{}: syntax error: {m}", self.key),
            ViolationKind::UnknownKey => write!(f, "{}: unknown key", self.key),
            ViolationKind::Missing => write!(f, "{}: missing required field", self.key),
            ViolationKind::WrongType(want) => write!(f, "{}: expected {want}", self.key),
            ViolationKind::OutOfRange(m) => write!(f, "{}: out of range: {m}", self.key),
        }
    }
}

/// Every violation found in a config, not just the first.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl ConfigError {
    pub fn keys(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.key.as_str()).collect()
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", lines.join("\n"))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, Table::new())
}

/// [`parse_config`] with `overrides` (command-line flags) replacing the
/// corresponding keys of the text before validation.
pub fn parse_config_with(text: &str, overrides: Table) -> Result<RunConfig, ConfigError> {
    let mut table = match text.parse::<Table>() {
        Ok(t) => t,
        Err(e) => {
            let kind = ViolationKind::Syntax(e.message().to_string());
            return Err(ConfigError { violations: vec![Violation { key: "<input>".into(), kind }] });
        }
    };
    table.extend(overrides);
    Reader { table, violations: Vec::new() }.read()
}

struct Reader {
    table: Table,
    violations: Vec<Violation>,
}

impl Reader {
    fn flag(&mut self, key: &str, kind: ViolationKind) {
        self.violations.push(Violation { key: key.into(), kind });
    }

    fn range(&mut self, key: &str, msg: String) {
        self.flag(key, ViolationKind::OutOfRange(msg));
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.table.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            _ => {
                self.flag(key, ViolationKind::WrongType("a number"));
                None
            }
        }
    }

    fn integer(&mut self, key: &str) -> Option<i64> {
        match self.table.get(key)? {
            Value::Integer(v) => Some(*v),
            _ => {
                self.flag(key, ViolationKind::WrongType("an integer"));
                None
            }
        }
    }

    fn count(&mut self, key: &str, min: usize, default: usize) -> usize {
        match self.integer(key) {
            Some(v) if v >= min as i64 => v as usize,
            Some(v) => {
                self.range(key, format!("must be at least {min} (got {v})"));
                default
            }
            None => default,
        }
    }

    /// A float satisfying `ok`, described by `rule` when it does not.
    fn checked(&mut self, key: &str, default: f64, rule: &str, ok: impl Fn(f64) -> bool) -> f64 {
        match self.float(key) {
            Some(v) if ok(v) => v,
            Some(v) => {
                self.range(key, format!("must satisfy {rule} (got {v})"));
                default
            }
            None => default,
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Option<T> {
        let s = match self.table.get(key)? {
            Value::String(s) => s.clone(),
            _ => {
                self.flag(key, ViolationKind::WrongType("a string"));
                return None;
            }
        };
        let found = options.iter().find(|(name, _)| *name == s).map(|(_, v)| *v);
        if found.is_none() {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            self.range(key, format!("\"{s}\" is not one of {}", names.join(", ")));
        }
        found
    }

    fn read(mut self) -> Result<RunConfig, ConfigError> {
        let unknown: Vec<String> = self.table.keys().filter(|k| !KEYS.contains(&k.as_str())).cloned().collect();
        for key in unknown {
            self.flag(&key, ViolationKind::UnknownKey);
        }

        let experiment = self.choice("experiment", &Experiment::NAMES);
        if !self.table.contains_key("experiment") {
            self.flag("experiment", ViolationKind::Missing);
        }
        let seed = match self.integer("seed") {
            Some(s) if s >= 0 => Some(s as u64),
            Some(s) => {
                self.range("seed", format!("must be nonnegative (got {s})"));
                None
            }
            None => {
                if !self.table.contains_key("seed") {
                    self.flag("seed", ViolationKind::Missing);
                }
                None
            }
        };

        let initial = self
            .choice("initial", &[("sphere", Initial::Sphere), ("flat_disk", Initial::FlatDisk), ("nested", Initial::Nested)])
            .unwrap_or(Initial::Sphere);
        let sphere = initial == Initial::Sphere;
        let radius = self.checked("radius", if sphere { 1.0 } else { 0.5 }, "radius > 0", |v| v > 0.0);
        let outer_radius = self.checked("outer_radius", 2.0, "outer_radius > 0", |v| v > 0.0);
        let grid = self.count("grid", 5, 65);
        let half_width = self.checked("half_width", if sphere { 0.55 } else { 1.0 }, "half_width > 0", |v| v > 0.0);
        let flat_tol = self.checked("flat_tol", 1e-9, "flat_tol > 0", |v| v > 0.0);
        let dt_safety = self.checked("dt_safety", 0.5, "0 < dt_safety <= 1", |v| v > 0.0 && v <= 1.0);
        let t_end = self.checked("t_end", 0.01, "t_end >= 0", |v| v >= 0.0 && v.is_finite());
        let record_every = self.count("record_every", 1, 100);
        let p = self.checked("p", 0.5, "0 < p < 1", |v| v > 0.0 && v < 1.0);
        let integrator = self
            .choice("integrator", &[("euler", IntegratorKind::Euler), ("rk2", IntegratorKind::Rk2)])
            .unwrap_or(IntegratorKind::Euler);
        let boundary_default = if sphere { BoundaryKind::Prescribed } else { BoundaryKind::Extrapolate };
        let boundary = self
            .choice(
                "boundary",
                &[("frozen", BoundaryKind::Frozen), ("prescribed", BoundaryKind::Prescribed), ("extrapolate", BoundaryKind::Extrapolate)],
            )
            .unwrap_or(boundary_default);
        let denom_eps = self.table.contains_key("denom_eps").then(|| self.checked("denom_eps", 1e-10, "denom_eps > 0", |v| v > 0.0));
        let dt = self.checked("dt", 1e-4, "dt > 0", |v| v > 0.0);
        let out = match self.table.get("out").cloned() {
            None => PathBuf::from("out"),
            Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
            Some(_) => {
                self.flag("out", ViolationKind::WrongType("a nonempty path string"));
                PathBuf::from("out")
            }
        };
        let samples = self.count("samples", 1, 100);
        let alpha = self.checked("alpha", 0.5, "0 < alpha <= 1", |v| v > 0.0 && v <= 1.0);
        let levels = self.count("levels", 2, 3);

        // Cross-field constraints of the flow data.
        if experiment == Some(Experiment::Flow) {
            if boundary == BoundaryKind::Prescribed && !sphere {
                self.range("boundary", "prescribed heights exist only for sphere data".into());
            }
            let corner = half_width * std::f64::consts::SQRT_2;
            match initial {
                Initial::Sphere if corner * corner >= radius * radius - t_end => self.range(
                    "half_width",
                    format!("the sphere of radius {radius} must cover the grid corners up to t_end = {t_end}"),
                ),
                Initial::FlatDisk | Initial::Nested if radius >= half_width => {
                    self.range("radius", format!("the flat disk must lie inside the grid (half_width = {half_width})"))
                }
                _ => {}
            }
            if initial == Initial::Nested && corner * corner >= outer_radius * outer_radius - t_end {
                self.range("outer_radius", "the outer sphere must cover the grid corners for the whole run".into());
            }
        }

        match (experiment, seed, self.violations.is_empty()) {
            (Some(experiment), Some(seed), true) => Ok(RunConfig {
                experiment,
                seed,
                initial,
                radius,
                outer_radius,
                grid,
                half_width,
                flat_tol,
                dt_safety,
                t_end,
                record_every,
                p,
                integrator,
                boundary,
                denom_eps,
                dt,
                out,
                samples,
                alpha,
                levels,
            }),
            _ => Err(ConfigError { violations: self.violations }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sphere_run_fills_defaults() {
        let cfg = parse_config("experiment = \"flow\"\nseed = 7\n").unwrap();
        assert_eq!(cfg.experiment, Experiment::Flow);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.initial, Initial::Sphere);
        assert_eq!(cfg.boundary, BoundaryKind::Prescribed);
        assert_eq!((cfg.radius, cfg.half_width, cfg.p), (1.0, 0.55, 0.5));
        assert_eq!(cfg.denom_eps, None);
        let disk = parse_config("experiment = \"flow\"\nseed = 1\ninitial = \"flat_disk\"\n").unwrap();
        assert_eq!((disk.radius, disk.half_width, disk.boundary), (0.5, 1.0, BoundaryKind::Extrapolate));
    }

    #[test]
    fn exponent_outside_the_unit_interval_names_p() {
        let err = parse_config("experiment = \"flow\"\nseed = 1\np = 1.5\n").unwrap_err();
        assert_eq!(err.keys(), ["p"]);
        assert!(err.to_string().contains("0 < p < 1"));
    }

    #[test]
    fn empty_input_reports_the_missing_fields() {
        let err = parse_config("").unwrap_err();
        assert_eq!(err.keys(), ["experiment", "seed"]);
        assert!(err.violations.iter().all(|v| v.kind == ViolationKind::Missing));
    }

    #[test]
    fn all_violations_are_reported() {
        let text = "experiment = \"flow\"\nseed = -1\ngrid = 2\nintegrator = \"rk4\"\ncolour = 3\nt_end = \"soon\"\n";
        let err = parse_config(text).unwrap_err();
        let mut keys = err.keys();
        keys.sort();
        assert_eq!(keys, ["colour", "grid", "integrator", "seed", "t_end"]);
        assert!(matches!(err.violations[0].kind, ViolationKind::UnknownKey));
    }

    #[test]
    fn geometry_constraints_name_their_key() {
        let err = parse_config("experiment = \"flow\"\nseed = 1\nhalf_width = 0.8\n").unwrap_err();
        assert_eq!(err.keys(), ["half_width"]);
        let err = parse_config("experiment = \"flow\"\nseed = 1\ninitial = \"flat_disk\"\nboundary = \"prescribed\"\n").unwrap_err();
        assert_eq!(err.keys(), ["boundary"]);
        // Only flow runs care about the flow geometry.
        assert!(parse_config("experiment = \"norms\"\nseed = 1\nhalf_width = 0.8\n").is_ok());
    }

    #[test]
    fn overrides_replace_keys_and_syntax_errors_are_reported() {
        let mut over = Table::new();
        over.insert("seed".into(), Value::Integer(11));
        over.insert("out".into(), Value::String("elsewhere".into()));
        let cfg = parse_config_with("experiment = \"oracle\"\nseed = 1\n", over).unwrap();
        assert_eq!((cfg.seed, cfg.out), (11, PathBuf::from("elsewhere")));
        let err = parse_config("experiment = ").unwrap_err();
        assert!(matches!(err.violations[0].kind, ViolationKind::Syntax(_)));
    }
}
