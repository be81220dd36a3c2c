//! Scenario files: one chart, one metallic pair, the suites to run on it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chart::{
    christoffel, Chart, ConnectionField, ConnectionKind, EndoField, ExprMatrix, MetricField, OneFormField,
    METRIC_EIGEN_FLOOR,
};
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::metallic::{from_projection, MetallicParams};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SAMPLES: usize = 32;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Largest base dimension for suites that need a symbolic inverse metric.
pub const SYMBOLIC_INVERSE_MAX: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Core,
    Genbundle,
    Genconn,
    Karaman,
    LiftsTangent,
    LiftsCotangent,
    Commutation,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Core,
        Suite::Genbundle,
        Suite::Genconn,
        Suite::Karaman,
        Suite::LiftsTangent,
        Suite::LiftsCotangent,
        Suite::Commutation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Core => "core",
            Suite::Genbundle => "genbundle",
            Suite::Genconn => "genconn",
            Suite::Karaman => "karaman",
            Suite::LiftsTangent => "lifts-tangent",
            Suite::LiftsCotangent => "lifts-cotangent",
            Suite::Commutation => "commutation",
        }
    }

    pub fn from_name(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum StructureSpec {
    /// `J` given directly.
    Matrix(Vec<Vec<String>>),
    /// A `g`-symmetric projection `P`; `J = σP + (p − σ)(I − P)`.
    Projection(Vec<Vec<String>>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConnectionSpec {
    #[default]
    LeviCivita,
    /// `Γ^k_{ij}` as `[k][i][j]`.
    Christoffel(Vec<Vec<Vec<String>>>),
}

/// The file as written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub dimension: usize,
    pub coords: Vec<String>,
    pub domain: Vec<[f64; 2]>,
    pub p: f64,
    pub q: f64,
    pub metric: Vec<Vec<String>>,
    #[serde(rename = "J")]
    pub j: StructureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<String>>,
    #[serde(default)]
    pub connection: ConnectionSpec,
    #[serde(default = "all_suites")]
    pub suites: Vec<Suite>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expect: BTreeMap<String, Expectation>,
}

fn all_suites() -> Vec<Suite> {
    Suite::ALL.to_vec()
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

/// A validated scenario with every expression parsed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub chart: Chart,
    pub params: MetallicParams,
    pub sigma: f64,
    pub metric: MetricField,
    pub j: EndoField,
    pub projection: Option<EndoField>,
    pub omega: Option<OneFormField>,
    /// `None` means the Levi-Civita connection of the metric.
    pub connection: Option<ConnectionField>,
    pub suites: Vec<Suite>,
    pub samples: usize,
    pub tolerance: f64,
    pub expect: BTreeMap<String, Expectation>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn seed(&self) -> u64 {
        self.chart.seed()
    }

    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        self.chart.samples(self.samples)
    }

    /// The scenario's connection, building Levi-Civita when none was given.
    pub fn connection(&self, samples: &[Vec<f64>]) -> Result<ConnectionField> {
        match &self.connection {
            Some(c) => Ok(c.clone()),
            None => christoffel(&self.metric, samples),
        }
    }

    pub fn with_overrides(
        mut self,
        suites: Option<Vec<Suite>>,
        samples: Option<usize>,
        seed: Option<u64>,
        tolerance: Option<f64>,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if let Some(s) = suites {
            problems.extend(suite_problems(&s, self.dim(), self.params, self.omega.is_some()));
            self.suites = s;
        }
        if let Some(n) = samples {
            if n == 0 {
                problems.push("samples must be at least 1".to_string());
            }
            self.samples = n;
        }
        if let Some(t) = tolerance {
            if !(t > 0.0 && t.is_finite()) {
                problems.push(format!("tolerance must be positive, got {t}"));
            }
            self.tolerance = t;
        }
        if let Some(seed) = seed {
            self.chart = self.chart.with_seed(seed);
        }
        if problems.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(problems))
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    scenario_from_str(&text)
}

pub fn scenario_from_str(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    build_scenario(&file)
}

fn shape_problems(file: &ScenarioFile) -> Vec<String> {
    let n = file.dimension;
    let mut out = Vec::new();
    let square = |label: &str, m: &[Vec<String>], out: &mut Vec<String>| {
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            let cols = m.iter().map(Vec::len).max().unwrap_or(0);
            out.push(format!("{label} must be {n}x{n}, got {}x{cols}", m.len()));
        }
    };
    if file.coords.len() != n {
        out.push(format!("coords has {} names for dimension {n}", file.coords.len()));
    }
    if file.domain.len() != n {
        out.push(format!("domain has {} intervals for dimension {n}", file.domain.len()));
    }
    square("metric", &file.metric, &mut out);
    match &file.j {
        StructureSpec::Matrix(m) => square("J.matrix", m, &mut out),
        StructureSpec::Projection(m) => square("J.projection", m, &mut out),
    }
    if let Some(w) = &file.omega {
        if w.len() != n {
            out.push(format!("omega has {} components for dimension {n}", w.len()));
        }
    }
    if let ConnectionSpec::Christoffel(c) = &file.connection {
        if c.len() != n || c.iter().any(|m| m.len() != n || m.iter().any(|r| r.len() != n)) {
            out.push(format!("connection.christoffel must be {n}x{n}x{n}"));
        }
    }
    out
}

fn suite_problems(suites: &[Suite], n: usize, params: MetallicParams, has_omega: bool) -> Vec<String> {
    let mut out = Vec::new();
    if suites.contains(&Suite::Karaman) {
        if params.q == 0.0 {
            out.push("karaman suite needs q != 0 (J^{-1} = (1/q)J - (p/q)I exists only for q != 0)".to_string());
        }
        if !has_omega {
            out.push("karaman suite needs omega".to_string());
        }
    }
    let symbolic = [Suite::Karaman, Suite::LiftsTangent, Suite::LiftsCotangent, Suite::Commutation];
    for s in suites.iter().filter(|s| symbolic.contains(s)) {
        if n > SYMBOLIC_INVERSE_MAX {
            out.push(format!("suite {s} supports dimension <= {SYMBOLIC_INVERSE_MAX}, got {n}"));
        }
    }
    let mut seen = Vec::new();
    for s in suites {
        if seen.contains(s) {
            out.push(format!("suite {s} listed twice"));
        }
        seen.push(*s);
    }
    out
}

fn parse_all(label: &str, m: &[Vec<String>], coords: &[String], problems: &mut Vec<String>) -> ExprMatrix {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    ExprMatrix::from_fn(rows, cols, |i, j| parse_one(&format!("{label}[{i}][{j}]"), &m[i][j], coords, problems))
}

fn parse_one(label: &str, src: &str, coords: &[String], problems: &mut Vec<String>) -> Expr {
    parse(src, coords).unwrap_or_else(|e| {
        problems.push(format!("{label} = {src:?}: {e}"));
        Expr::zero()
    })
}

/// Validates and parses; every problem found is reported together.
pub fn build_scenario(file: &ScenarioFile) -> Result<Scenario> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    if !(2..=6).contains(&file.dimension) {
        return Err(Error::Schema(format!("dimension must be in 2..=6, got {}", file.dimension)));
    }
    let shapes = shape_problems(file);
    if !shapes.is_empty() {
        return Err(Error::Schema(shapes.join("; ")));
    }

    let n = file.dimension;
    let params = MetallicParams::new(file.p, file.q);
    let mut problems = Vec::new();
    if file.name.trim().is_empty() {
        problems.push("name is empty".to_string());
    }
    if let Err(e) = parse("0", &file.coords) {
        problems.push(format!("coords: {}", e.message));
    }
    for (k, [lo, hi]) in file.domain.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            problems.push(format!("domain[{k}] = [{lo}, {hi}] is empty or unbounded"));
        }
    }
    if !(file.tolerance > 0.0 && file.tolerance.is_finite()) {
        problems.push(format!("tolerance must be positive, got {}", file.tolerance));
    }
    if file.samples == 0 {
        problems.push("samples must be at least 1".to_string());
    }
    let sigma = match params.sigma() {
        Ok(s) => Some(s),
        Err(e) => {
            problems.push(format!("(p, q) = ({}, {}): {e}", file.p, file.q));
            None
        }
    };
    problems.extend(suite_problems(&file.suites, n, params, file.omega.is_some()));
    for id in file.expect.keys() {
        if !id.contains('.') {
            problems.push(format!("expect key {id:?} is not a check id"));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let coords = &file.coords;
    let metric_m = parse_all("metric", &file.metric, coords, &mut problems);
    let (structure_m, is_projection) = match &file.j {
        StructureSpec::Matrix(m) => (parse_all("J.matrix", m, coords, &mut problems), false),
        StructureSpec::Projection(m) => (parse_all("J.projection", m, coords, &mut problems), true),
    };
    let omega = file
        .omega
        .as_ref()
        .map(|w| OneFormField::new(w.iter().enumerate().map(|(k, s)| parse_one(&format!("omega[{k}]"), s, coords, &mut problems)).collect()));
    let connection_exprs = match &file.connection {
        ConnectionSpec::LeviCivita => None,
        ConnectionSpec::Christoffel(c) => {
            let mut v = Vec::with_capacity(n * n * n);
            for (k, m) in c.iter().enumerate() {
                for (i, r) in m.iter().enumerate() {
                    for (j, s) in r.iter().enumerate() {
                        v.push(parse_one(&format!("christoffel[{k}][{i}][{j}]"), s, coords, &mut problems));
                    }
                }
            }
            Some(v)
        }
    };
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let domain: Vec<(f64, f64)> = file.domain.iter().map(|[a, b]| (*a, *b)).collect();
    let chart = Chart::new(coords.clone(), domain, file.seed)?;
    let metric = MetricField::from_upper(&metric_m)?;
    let samples = chart.samples(file.samples);

    // the metric must be symmetric, finite and positive definite on the samples
    let lower = ExprMatrix::from_fn(n, n, |i, j| metric_m.get(j, i).clone());
    for pt in &samples {
        match (metric_m.eval_at(pt), lower.eval_at(pt)) {
            (Ok(a), Ok(b)) => {
                let asym = (&a - &b).amax();
                if !(asym <= file.tolerance) {
                    problems.push(format!("metric is not symmetric at {pt:?} (|g - g^T| = {asym:e})"));
                    break;
                }
                let min = a.symmetric_eigenvalues().min();
                if !(min > METRIC_EIGEN_FLOOR) {
                    problems.push(format!("metric is not positive definite at {pt:?} (min eigenvalue {min:e})"));
                    break;
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                problems.push(format!("metric: {e}"));
                break;
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let structure = EndoField::new(structure_m)?;
    let (j, projection) = if is_projection {
        match from_projection(&structure, &metric, params, &samples, file.tolerance.max(1e-9)) {
            Ok(ms) => (ms.j, Some(structure)),
            Err(e) => return Err(Error::Validation(vec![format!("J.projection: {e}")])),
        }
    } else {
        (structure, None)
    };
    let connection = match connection_exprs {
        None => None,
        Some(v) => Some(ConnectionField::from_components(n, v, ConnectionKind::UserSupplied)?),
    };

    Ok(Scenario {
        name: file.name.clone(),
        chart,
        params,
        sigma: sigma.expect("checked above"),
        metric,
        j,
        projection,
        omega,
        connection,
        suites: file.suites.clone(),
        samples: file.samples,
        tolerance: file.tolerance,
        expect: file.expect.clone(),
    })
}
