//! Scenario files: TOML with dotted keys such as `model.name`, `run.hbar`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;
use wavepacket_core::floquet::{FloquetOptions, TOL_STAB};
use wavepacket_core::{make_model, Error, FlowOptions, HamiltonianModel, PhaseSpacePoint, SiegelForm};

use crate::runner::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Propagate,
    Floquet,
    Compare,
    Scaling,
}

impl Analysis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Analysis::Propagate => "propagate",
            Analysis::Floquet => "floquet",
            Analysis::Compare => "compare",
            Analysis::Scaling => "scaling",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Vector {
    Scalar(f64),
    List(Vec<f64>),
}

impl Vector {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            Vector::Scalar(v) => vec![*v],
            Vector::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Matrix {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl Matrix {
    fn to_matrix(&self, what: &str) -> Result<DMatrix<f64>, Error> {
        match self {
            Matrix::Scalar(v) => Ok(DMatrix::from_element(1, 1, *v)),
            Matrix::Rows(rows) => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidArgument(format!("`{what}` must be a square matrix")));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ModelSection {
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub p: Vector,
    pub q: Vector,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSection {
    pub re: Matrix,
    pub im: Matrix,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub hbar: f64,
    pub t_end: f64,
    pub dt_out: f64,
    /// Floquet period; required when the Hessian is constant along the orbit.
    pub period: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub period: f64,
    pub stab: f64,
    pub rat: f64,
    pub n_max: u64,
    /// Relative width deviation accepted at multiples of the period.
    pub recurrence: f64,
    /// Number of periods checked for width recurrence.
    pub k_max: usize,
    /// Shape distance accepted by the recurrence search.
    pub shape_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let flow = FlowOptions::default();
        let floquet = FloquetOptions::default();
        Self {
            rtol: flow.rtol,
            atol: flow.atol,
            max_steps: flow.max_steps,
            period: floquet.period_tol,
            stab: TOL_STAB,
            rat: floquet.tol_rat,
            n_max: floquet.n_max,
            recurrence: 1e-7,
            k_max: 10,
            shape_eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    /// Largest split step; shortened to divide `run.dt_out`.
    pub dt: f64,
    /// Predicted standard deviations kept inside the grid.
    pub margin: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { dt: 1e-3, margin: 12.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub hbars: Vec<f64>,
    /// Defaults to `run.t_end`.
    pub t_probe: Option<f64>,
    /// Split step at ħ = 1, scaled by √ħ.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted key overridden in each run, e.g. `run.hbar`.
    pub parameter: String,
    pub values: Vec<f64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub initial: InitialSection,
    pub shape: ShapeSection,
    pub run: RunSection,
    pub analyses: Option<Vec<Analysis>>,
    #[serde(default)]
    pub tol: Tolerances,
    #[serde(default)]
    pub oracle: OracleSection,
    pub scaling: Option<ScalingSection>,
    #[serde(default)]
    pub output: OutputSection,
    pub seed: Option<u64>,
    pub sweep: Option<SweepSection>,
}

/// Validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub model: HamiltonianModel,
    pub x0: PhaseSpacePoint,
    pub z0: SiegelForm,
}

impl Scenario {
    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions { rtol: self.config.tol.rtol, atol: self.config.tol.atol, max_steps: self.config.tol.max_steps }
    }

    pub fn floquet_options(&self) -> FloquetOptions {
        let tol = &self.config.tol;
        FloquetOptions { period_tol: tol.period, tol_stab: tol.stab, tol_rat: tol.rat, n_max: tol.n_max, extend: true }
    }

    pub fn hbar(&self) -> f64 {
        self.config.run.hbar
    }
}

pub fn read_table(path: &Path) -> Result<toml::Table, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<toml::Table>().map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

/// Overrides a dotted key such as `run.hbar`, creating tables as needed.
pub fn set_dotted(table: &mut toml::Table, key: &str, value: f64) -> Result<(), Failure> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Failure::config(format!("invalid sweep parameter `{key}`")));
    }
    let mut current = table;
    for part in &parts[..parts.len() - 1] {
        let entry = current.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| Failure::config(format!("sweep parameter `{key}`: `{part}` is not a table")))?;
    }
    current.insert(parts[parts.len() - 1].to_string(), toml::Value::Float(value));
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<(), Error> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("`{name}` must be positive, got {v}")))
    }
}

pub fn parse(table: toml::Table) -> Result<Scenario, Failure> {
    let config: Config = table.try_into().map_err(|e: toml::de::Error| Failure::config(e.to_string()))?;
    let in_module = |module: &'static str| move |error: Error| Failure::core(module, error);

    let run = &config.run;
    for (name, v) in [("run.hbar", run.hbar), ("run.t_end", run.t_end), ("run.dt_out", run.dt_out)] {
        positive(name, v).map_err(in_module("cli"))?;
    }
    if let Some(t) = run.period {
        positive("run.period", t).map_err(in_module("cli"))?;
    }
    positive("oracle.dt", config.oracle.dt).map_err(in_module("cli"))?;
    positive("oracle.margin", config.oracle.margin).map_err(in_module("cli"))?;
    if let Some(s) = &config.scaling {
        if let Some(t) = s.t_probe {
            positive("scaling.t_probe", t).map_err(in_module("cli"))?;
        }
        if let Some(dt) = s.dt {
            positive("scaling.dt", dt).map_err(in_module("cli"))?;
        }
    }

    let model = make_model(&config.model.name, &config.model.params).map_err(in_module("hamiltonian-models"))?;
    let (p, q) = (config.initial.p.to_vec(), config.initial.q.to_vec());
    if p.len() != model.dim() || q.len() != model.dim() {
        return Err(Failure::core(
            "cli",
            Error::InvalidDimension(format!(
                "initial point has {} momenta and {} positions but `{}` has d = {}",
                p.len(),
                q.len(),
                model.name(),
                model.dim()
            )),
        ));
    }
    let x0 = PhaseSpacePoint::new(p.into(), q.into()).map_err(in_module("symplectic-core"))?;
    let re = config.shape.re.to_matrix("shape.re").map_err(in_module("cli"))?;
    let im = config.shape.im.to_matrix("shape.im").map_err(in_module("cli"))?;
    if re.nrows() != model.dim() || im.nrows() != model.dim() {
        return Err(Failure::core(
            "cli",
            Error::InvalidDimension(format!("shape must be {0}×{0} for `{1}`", model.dim(), model.name())),
        ));
    }
    let z0 = SiegelForm::from_parts(&re, &im).map_err(in_module("symplectic-core"))?;
    Ok(Scenario { config, model, x0, z0 })
}
