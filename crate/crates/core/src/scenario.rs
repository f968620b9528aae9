//! Scenario files: a strict sectioned `key = value` format describing one
//! problem instance, its grids and its verification settings.
//!
//! ```text
//! # comment
//! [geometry]
//! n = 2
//! R = 1
//! ```
//!
//! Every section and key is checked against a closed schema; unknown or
//! duplicate entries are errors carrying the file and line.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::bounds::GainMeasure;
use crate::exprlang::Expression;
use crate::geometry::{estimate_trace_constant, BallGeometry, DEFAULT_TRACE_SAFETY_FACTOR};
use crate::problem::{BoundConstants, BoundaryKind, ProblemError, ProblemSpec};
use crate::solver::{RadialGrid, SolverOptions, TimeGrid, TimeScheme};
use crate::splitting::{SupOverrides, VerifyConfig, DEFAULT_RESIDUAL_SCALE};

/// Resolution of the trace estimate used when no constant is declared.
pub const TRACE_RESOLUTION: usize = 400;

/// Shipped Robin example.
pub const EXAMPLE_ROBIN: &str = include_str!("../scenarios/example_robin.scenario");
/// Shipped Dirichlet example.
pub const EXAMPLE_DIRICHLET: &str = include_str!("../scenarios/example_dirichlet.scenario");
/// Shipped Neumann example.
pub const EXAMPLE_NEUMANN: &str = include_str!("../scenarios/example_neumann.scenario");

struct KeySpec {
    name: &'static str,
    required: bool,
}

const fn req(name: &'static str) -> KeySpec {
    KeySpec { name, required: true }
}

const fn opt(name: &'static str) -> KeySpec {
    KeySpec { name, required: false }
}

const SCHEMA: &[(&str, &[KeySpec])] = &[
    ("geometry", &[req("n"), req("R")]),
    ("coefficients", &[req("a"), req("b"), req("c")]),
    ("nonlinearity", &[req("h")]),
    ("boundary", &[req("kind"), req("psi")]),
    ("disturbances", &[req("f"), req("d"), opt("sup_f_override"), opt("sup_d_override")]),
    ("initial", &[req("phi")]),
    (
        "grid",
        &[req("nr"), req("dt"), req("T"), req("snapshot_stride"), opt("scheme"), opt("newton_tol"), opt("newton_max")],
    ),
    (
        "bounds",
        &[
            req("a_lower"),
            req("a_upper"),
            req("b_upper"),
            req("c_lower"),
            opt("trace_constant"),
            opt("trace_safety_factor"),
            opt("neumann_gain_measure"),
        ],
    ),
    ("verify", &[req("tol"), opt("residual_scale")]),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioErrorKind {
    #[error("cannot read file: {0}")]
    Io(String),
    #[error("malformed line: {0}")]
    Syntax(String),
    #[error("entry '{0}' appears before any section header")]
    OutsideSection(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("duplicate section [{0}]")]
    DuplicateSection(String),
    #[error("unknown key '{key}' in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate key '{key}' in section [{section}]")]
    DuplicateKey { section: String, key: String },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("missing key '{key}' in section [{section}]")]
    MissingKey { section: String, key: String },
    #[error("invalid value for '{key}' in section [{section}]: {message}")]
    BadValue { section: String, key: String, message: String },
}

/// A load failure with its location.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub origin: String,
    pub line: Option<usize>,
    pub kind: ScenarioErrorKind,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.origin, line, self.kind),
            None => write!(f, "{}: {}", self.origin, self.kind),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// Time and space discretization plus Newton settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub nr: usize,
    pub dt: f64,
    pub horizon: f64,
    pub snapshot_stride: usize,
    pub scheme: Option<TimeScheme>,
    pub newton_tol: Option<f64>,
    pub newton_max: Option<usize>,
}

/// Where the trace constant of a scenario came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceSource {
    Declared,
    /// Estimated at [`TRACE_RESOLUTION`] and multiplied by the safety factor.
    Estimated {
        raw: f64,
    },
}

/// The `[bounds]` section as written.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsConfig {
    pub a_lower: f64,
    pub a_upper: f64,
    pub b_upper: f64,
    pub c_lower: f64,
    pub trace_constant: Option<f64>,
    pub trace_safety_factor: Option<f64>,
    pub neumann_gain_measure: Option<GainMeasure>,
}

impl BoundsConfig {
    pub fn safety_factor(&self) -> f64 {
        self.trace_safety_factor.unwrap_or(DEFAULT_TRACE_SAFETY_FACTOR)
    }

    pub fn measure(&self) -> GainMeasure {
        self.neumann_gain_measure.unwrap_or_default()
    }
}

/// A loaded scenario. `spec.constants.trace_constant` holds the effective
/// constant (declared, or estimated and inflated).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ProblemSpec,
    pub grid: GridConfig,
    pub bounds: BoundsConfig,
    pub trace_source: TraceSource,
    pub overrides: SupOverrides,
    pub tol: f64,
    pub residual_scale: Option<f64>,
}

struct Entry {
    value: String,
    line: usize,
}

struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

struct Document<'a> {
    origin: &'a str,
    sections: BTreeMap<String, Section>,
}

impl<'a> Document<'a> {
    fn parse(text: &str, origin: &'a str) -> Result<Self, ScenarioError> {
        let err = |line, kind| ScenarioError { origin: origin.to_string(), line: Some(line), kind };
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<&'static [KeySpec]> = None;
        let mut current_name = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        err(line_no, ScenarioErrorKind::Syntax(format!("unterminated section header '{line}'")))
                    })?
                    .trim();
                let keys = SCHEMA
                    .iter()
                    .find(|(s, _)| *s == name)
                    .map(|(_, k)| *k)
                    .ok_or_else(|| err(line_no, ScenarioErrorKind::UnknownSection(name.to_string())))?;
                if sections.contains_key(name) {
                    return Err(err(line_no, ScenarioErrorKind::DuplicateSection(name.to_string())));
                }
                sections.insert(name.to_string(), Section { line: line_no, entries: BTreeMap::new() });
                current = Some(keys);
                current_name = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                err(line_no, ScenarioErrorKind::Syntax(format!("expected 'key = value', got '{line}'")))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(err(line_no, ScenarioErrorKind::Syntax(format!("missing key in '{line}'"))));
            }
            let keys = current.ok_or_else(|| err(line_no, ScenarioErrorKind::OutsideSection(key.to_string())))?;
            if !keys.iter().any(|k| k.name == key) {
                return Err(err(
                    line_no,
                    ScenarioErrorKind::UnknownKey { section: current_name.clone(), key: key.to_string() },
                ));
            }
            let section = sections.get_mut(&current_name).expect("current section registered");
            if section.entries.contains_key(key) {
                return Err(err(
                    line_no,
                    ScenarioErrorKind::DuplicateKey { section: current_name.clone(), key: key.to_string() },
                ));
            }
            section.entries.insert(key.to_string(), Entry { value: value.to_string(), line: line_no });
        }
        let doc = Document { origin, sections };
        for (name, keys) in SCHEMA {
            let section = doc
                .sections
                .get(*name)
                .ok_or_else(|| doc.error(None, ScenarioErrorKind::MissingSection(name.to_string())))?;
            if let Some(missing) = keys.iter().find(|k| k.required && !section.entries.contains_key(k.name)) {
                return Err(doc.error(
                    Some(section.line),
                    ScenarioErrorKind::MissingKey { section: name.to_string(), key: missing.name.to_string() },
                ));
            }
        }
        Ok(doc)
    }

    fn error(&self, line: Option<usize>, kind: ScenarioErrorKind) -> ScenarioError {
        ScenarioError { origin: self.origin.to_string(), line, kind }
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.entries.get(key))
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.entry(section, key).map(|e| e.line)
    }

    fn bad_value(&self, section: &str, key: &str, message: impl Into<String>) -> ScenarioError {
        self.error(
            self.line_of(section, key),
            ScenarioErrorKind::BadValue { section: section.into(), key: key.into(), message: message.into() },
        )
    }

    fn optional<T>(
        &self,
        section: &str,
        key: &str,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ScenarioError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|m| self.bad_value(section, key, m)),
        }
    }

    fn required<T>(
        &self,
        section: &str,
        key: &str,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<T, ScenarioError> {
        Ok(self.optional(section, key, parse)?.expect("required keys checked at parse time"))
    }
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be non-negative, got {v}"))
    }
}

fn count(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
}

fn expression(s: &str) -> Result<Expression, String> {
    Expression::parse(s).map_err(|e| e.to_string())
}

/// Section and key of each problem field, for locating variable errors.
fn field_location(field: &str) -> (&'static str, &'static str) {
    match field {
        "a" => ("coefficients", "a"),
        "b" => ("coefficients", "b"),
        "c" => ("coefficients", "c"),
        "h" => ("nonlinearity", "h"),
        "psi" => ("boundary", "psi"),
        "f" => ("disturbances", "f"),
        "d" => ("disturbances", "d"),
        _ => ("initial", "phi"),
    }
}

impl Scenario {
    /// Reads and parses a scenario file.
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
            origin: origin.clone(),
            line: None,
            kind: ScenarioErrorKind::Io(e.to_string()),
        })?;
        Scenario::parse(&text, &origin)
    }

    /// Parses scenario text; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
        let doc = Document::parse(text, origin)?;

        let n = doc.required("geometry", "n", count)?;
        let radius = doc.required("geometry", "R", positive)?;
        let geometry = BallGeometry::new(n, radius).map_err(|e| doc.bad_value("geometry", "n", e.to_string()))?;

        let a = doc.required("coefficients", "a", expression)?;
        let b = doc.required("coefficients", "b", expression)?;
        let c = doc.required("coefficients", "c", expression)?;
        let h = doc.required("nonlinearity", "h", expression)?;
        let boundary: BoundaryKind = doc.required("boundary", "kind", str::parse)?;
        let psi = doc.required("boundary", "psi", expression)?;
        let f = doc.required("disturbances", "f", expression)?;
        let d = doc.required("disturbances", "d", expression)?;
        let overrides = SupOverrides {
            sup_f: doc.optional("disturbances", "sup_f_override", non_negative)?,
            sup_d: doc.optional("disturbances", "sup_d_override", non_negative)?,
        };
        let phi = doc.required("initial", "phi", expression)?;

        let grid = GridConfig {
            nr: doc.required("grid", "nr", count)?,
            dt: doc.required("grid", "dt", positive)?,
            horizon: doc.required("grid", "T", positive)?,
            snapshot_stride: doc.required("grid", "snapshot_stride", count)?,
            scheme: doc.optional("grid", "scheme", str::parse)?,
            newton_tol: doc.optional("grid", "newton_tol", positive)?,
            newton_max: doc.optional("grid", "newton_max", count)?,
        };
        RadialGrid::new(&geometry, grid.nr).map_err(|e| doc.bad_value("grid", "nr", e.to_string()))?;
        TimeGrid::new(grid.dt, grid.horizon).map_err(|e| doc.bad_value("grid", "dt", e.to_string()))?;
        if grid.snapshot_stride == 0 {
            return Err(doc.bad_value("grid", "snapshot_stride", "must be at least 1"));
        }
        if grid.newton_max == Some(0) {
            return Err(doc.bad_value("grid", "newton_max", "must be at least 1"));
        }

        let bounds = BoundsConfig {
            a_lower: doc.required("bounds", "a_lower", number)?,
            a_upper: doc.required("bounds", "a_upper", number)?,
            b_upper: doc.required("bounds", "b_upper", number)?,
            c_lower: doc.required("bounds", "c_lower", number)?,
            trace_constant: doc.optional("bounds", "trace_constant", positive)?,
            trace_safety_factor: doc.optional("bounds", "trace_safety_factor", |s| {
                let v = number(s)?;
                if v >= 1.0 {
                    Ok(v)
                } else {
                    Err(format!("must be at least 1, got {v}"))
                }
            })?,
            neumann_gain_measure: doc.optional("bounds", "neumann_gain_measure", str::parse)?,
        };
        let tol = doc.required("verify", "tol", non_negative)?;
        let residual_scale = doc.optional("verify", "residual_scale", positive)?;

        let (trace_constant, trace_source) = match bounds.trace_constant {
            Some(c) => (c, TraceSource::Declared),
            None => {
                let est = estimate_trace_constant(&geometry, TRACE_RESOLUTION)
                    .map_err(|e| doc.bad_value("bounds", "trace_constant", format!("estimation failed: {e}")))?;
                (est.inflated(bounds.safety_factor()), TraceSource::Estimated { raw: est.value })
            }
        };
        let constants =
            BoundConstants::new(bounds.a_lower, bounds.a_upper, bounds.b_upper, bounds.c_lower, trace_constant)
                .map_err(|e| {
                    let key = match &e {
                        ProblemError::InvalidConstants(m) if m.contains("c_lower") => "c_lower",
                        ProblemError::InvalidConstants(m) if m.contains("b_") => "b_upper",
                        ProblemError::InvalidConstants(m) if m.contains("trace") => "trace_constant",
                        _ => "a_lower",
                    };
                    doc.bad_value("bounds", key, e.to_string())
                })?;

        let spec = ProblemSpec { geometry, a, b, c, h, psi, f, d, phi, boundary, constants };
        spec.check_variables().map_err(|e| match &e {
            ProblemError::UnexpectedVariable { field, .. } => {
                let (section, key) = field_location(field);
                doc.bad_value(section, key, e.to_string())
            }
            _ => doc.error(
                None,
                ScenarioErrorKind::BadValue { section: "coefficients".into(), key: "a".into(), message: e.to_string() },
            ),
        })?;

        Ok(Scenario { spec, grid, bounds, trace_source, overrides, tol, residual_scale })
    }

    /// The built-in superlinear example with boundary `kind` and disturbance
    /// amplitude `amplitude`.
    pub fn example(kind: BoundaryKind, amplitude: f64) -> Scenario {
        let geometry = BallGeometry::new(2, 1.0).expect("valid example geometry");
        let est = estimate_trace_constant(&geometry, TRACE_RESOLUTION).expect("trace estimate of the unit disk");
        let trace_constant = est.inflated(DEFAULT_TRACE_SAFETY_FACTOR);
        let spec = ProblemSpec::superlinear_example(geometry, kind, amplitude, trace_constant);
        let c = &spec.constants;
        Scenario {
            bounds: BoundsConfig {
                a_lower: c.a_lower,
                a_upper: c.a_upper,
                b_upper: c.b_upper,
                c_lower: c.c_lower,
                trace_constant: None,
                trace_safety_factor: Some(DEFAULT_TRACE_SAFETY_FACTOR),
                neumann_gain_measure: Some(GainMeasure::Sphere),
            },
            spec,
            grid: GridConfig {
                nr: 201,
                dt: 1e-3,
                horizon: 2.0,
                snapshot_stride: 100,
                scheme: None,
                newton_tol: None,
                newton_max: None,
            },
            trace_source: TraceSource::Estimated { raw: est.value },
            overrides: SupOverrides::default(),
            tol: 0.02,
            residual_scale: None,
        }
    }

    /// The shipped text of the example for `kind`.
    pub fn shipped_example(kind: BoundaryKind) -> &'static str {
        match kind {
            BoundaryKind::Robin => EXAMPLE_ROBIN,
            BoundaryKind::Dirichlet => EXAMPLE_DIRICHLET,
            BoundaryKind::Neumann => EXAMPLE_NEUMANN,
        }
    }

    /// The same scenario with `d` (and its declared sup) scaled by `factor`.
    pub fn with_disturbance_scale(&self, factor: f64) -> Scenario {
        let mut out = self.clone();
        if factor != 1.0 {
            out.spec.d = self.spec.d.scaled(factor);
        }
        out.overrides.sup_d = self.overrides.sup_d.map(|s| s * factor.abs());
        out
    }

    pub fn radial_grid(&self) -> RadialGrid {
        RadialGrid::new(&self.spec.geometry, self.grid.nr).expect("grid validated at load")
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.grid.dt, self.grid.horizon).expect("time grid validated at load")
    }

    pub fn solver_options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            newton_tol: self.grid.newton_tol.unwrap_or(d.newton_tol),
            newton_max: self.grid.newton_max.unwrap_or(d.newton_max),
            scheme: self.grid.scheme.unwrap_or(d.scheme),
            ..d
        }
    }

    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            tol: self.tol,
            residual_scale: self.residual_scale.unwrap_or(DEFAULT_RESIDUAL_SCALE),
            overrides: self.overrides,
            measure: self.bounds.measure(),
            ..VerifyConfig::default()
        }
    }

    /// Serializes to the scenario format; [`Scenario::parse`] of the output
    /// reproduces the scenario.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.spec;
        let b = &self.bounds;
        let g = &self.grid;
        // writing to a String cannot fail
        let _ = (|| -> fmt::Result {
            writeln!(out, "# issparabolic scenario ({} boundary)", s.boundary)?;
            writeln!(out, "\n[geometry]\nn = {}\nR = {}", s.geometry.dimension(), s.geometry.radius())?;
            writeln!(out, "\n[coefficients]\na = {}\nb = {}\nc = {}", s.a, s.b, s.c)?;
            writeln!(out, "\n[nonlinearity]\nh = {}", s.h)?;
            writeln!(out, "\n[boundary]\nkind = {}\npsi = {}", s.boundary, s.psi)?;
            writeln!(out, "\n[disturbances]\nf = {}\nd = {}", s.f, s.d)?;
            if let Some(v) = self.overrides.sup_f {
                writeln!(out, "sup_f_override = {v}")?;
            }
            if let Some(v) = self.overrides.sup_d {
                writeln!(out, "sup_d_override = {v}")?;
            }
            writeln!(out, "\n[initial]\nphi = {}", s.phi)?;
            writeln!(
                out,
                "\n[grid]\nnr = {}\ndt = {}\nT = {}\nsnapshot_stride = {}",
                g.nr, g.dt, g.horizon, g.snapshot_stride
            )?;
            if let Some(v) = g.scheme {
                writeln!(out, "scheme = {v}")?;
            }
            if let Some(v) = g.newton_tol {
                writeln!(out, "newton_tol = {v}")?;
            }
            if let Some(v) = g.newton_max {
                writeln!(out, "newton_max = {v}")?;
            }
            writeln!(
                out,
                "\n[bounds]\na_lower = {}\na_upper = {}\nb_upper = {}\nc_lower = {}",
                b.a_lower, b.a_upper, b.b_upper, b.c_lower
            )?;
            if let Some(v) = b.trace_constant {
                writeln!(out, "trace_constant = {v}")?;
            }
            if let Some(v) = b.trace_safety_factor {
                writeln!(out, "trace_safety_factor = {v}")?;
            }
            if let Some(v) = b.neumann_gain_measure {
                writeln!(out, "neumann_gain_measure = {v}")?;
            }
            writeln!(out, "\n[verify]\ntol = {}", self.tol)?;
            if let Some(v) = self.residual_scale {
                writeln!(out, "residual_scale = {v}")?;
            }
            Ok(())
        })();
        out
    }
}
