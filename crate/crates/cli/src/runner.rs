//! Executes a scenario stage by stage and records what happened.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};
use wavepacket_core::floquet::{
    analyze, check_width_recurrence, ehrenfest_time, recurrence_search, shapes_at_multiples, widths_at_multiples,
    FloquetAnalysis, PeriodSource, Stability,
};
use wavepacket_core::gaussian::{propagate_gaussian, width_observable_error, GaussianEvolution};
use wavepacket_core::oracle::{
    exact_width, fidelity, grid_for_evolution, hbar_scaling_study, split_step_evolve, GridWavefunction, ScalingOptions,
};
use wavepacket_core::{integrate_flow, Error, Trajectory};

use crate::config::{Analysis, Scenario};
use crate::output::{complex_pair, num, scaling_csv, trajectory_csv, width_csv, write_json, Csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const DEFAULT_SCALING_HBARS: [f64; 3] = [0.1, 0.05, 0.025];

/// Every file a run may produce; stale copies are removed before a run.
pub const ARTIFACTS: [&str; 7] =
    ["trajectory.csv", "width.csv", "floquet.json", "compare.csv", "scaling.csv", "summary.json", "failure.json"];

fn clear_artifacts(dir: &Path) {
    for name in ARTIFACTS {
        let _ = fs::remove_file(dir.join(name));
    }
}

/// A failed run: the module and guard that fired, and the exit code.
#[derive(Debug, Clone)]
pub struct Failure {
    pub module: &'static str,
    pub guard: String,
    pub message: String,
    pub exit_code: i32,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { module: "cli", guard: "config".into(), message: message.into(), exit_code: EXIT_VALIDATION }
    }

    pub fn output(path: &Path, err: std::io::Error) -> Self {
        Self {
            module: "cli",
            guard: "output".into(),
            message: format!("cannot write {}: {err}", path.display()),
            exit_code: EXIT_VALIDATION,
        }
    }

    pub fn core(module: &'static str, error: Error) -> Self {
        let exit_code = if error.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL };
        Self { module, guard: error.guard().into(), message: error.to_string(), exit_code }
    }

    pub fn to_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("module".into(), json!(self.module));
        m.insert("guard".into(), json!(self.guard));
        m.insert("message".into(), json!(self.message));
        m.insert("exit_code".into(), json!(self.exit_code));
        m
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub quiet: bool,
    pub seed: Option<u64>,
}

struct Report<'a> {
    dir: &'a Path,
    summary: Map<String, Value>,
    files: Vec<String>,
    quiet: bool,
}

impl Report<'_> {
    fn write_csv(&mut self, name: &str, csv: &Csv) -> Result<(), Failure> {
        let path = self.dir.join(name);
        csv.write(&path).map_err(|e| Failure::output(&path, e))?;
        self.files.push(name.into());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &Map<String, Value>) -> Result<(), Failure> {
        let path = self.dir.join(name);
        write_json(&path, value).map_err(|e| Failure::output(&path, e))?;
        self.files.push(name.into());
        Ok(())
    }

    fn note(&self, stage: &str, message: String) {
        if !self.quiet {
            eprintln!("[{stage}] {message}");
        }
    }
}

/// Writes `failure.json` and a minimal summary for runs that fail before a
/// scenario exists.
pub fn record_early_failure(dir: &Path, failure: &Failure) {
    if fs::create_dir_all(dir).is_ok() {
        clear_artifacts(dir);
        let _ = write_json(&dir.join("failure.json"), &failure.to_json());
        let mut summary = Map::new();
        summary.insert("status".into(), json!("failed"));
        summary.insert("exit_code".into(), json!(failure.exit_code));
        summary.insert("files".into(), json!(["failure.json"]));
        let _ = write_json(&dir.join("summary.json"), &summary);
    }
}

/// Runs the flow and the requested analyses in dependency order; returns
/// the exit code. All artifacts go to `dir`.
pub fn run_scenario(scenario: &Scenario, analyses: &BTreeSet<Analysis>, dir: &Path, opts: RunOptions) -> i32 {
    if let Err(e) = fs::create_dir_all(dir) {
        let failure = Failure::output(dir, e);
        if !opts.quiet {
            eprintln!("error [{}:{}]: {}", failure.module, failure.guard, failure.message);
        }
        return failure.exit_code;
    }
    clear_artifacts(dir);
    let mut report = Report { dir, summary: Map::new(), files: Vec::new(), quiet: opts.quiet };
    scenario_header(&mut report.summary, scenario, analyses, opts.seed);
    let result = execute(scenario, analyses, &mut report);
    let exit_code = match &result {
        Ok(()) => EXIT_OK,
        Err(f) => f.exit_code,
    };
    if let Err(f) = &result {
        if !opts.quiet {
            eprintln!("error [{}:{}]: {}", f.module, f.guard, f.message);
        }
        if report.write_json("failure.json", &f.to_json()).is_err() {
            eprintln!("could not write failure record to {}", dir.display());
        }
    }
    let mut summary = std::mem::take(&mut report.summary);
    summary.insert("status".into(), json!(if result.is_ok() { "ok" } else { "failed" }));
    summary.insert("exit_code".into(), json!(exit_code));
    let mut files = report.files.clone();
    files.push("summary.json".into());
    summary.insert("files".into(), json!(files));
    if let Err(f) = report.write_json("summary.json", &summary) {
        eprintln!("error [{}:{}]: {}", f.module, f.guard, f.message);
        return exit_code.max(f.exit_code);
    }
    exit_code
}

fn scenario_header(summary: &mut Map<String, Value>, scenario: &Scenario, analyses: &BTreeSet<Analysis>, seed: Option<u64>) {
    let run = &scenario.config.run;
    let params: Map<String, Value> = scenario.model.params().iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    summary.insert("model".into(), json!(scenario.model.name()));
    summary.insert("params".into(), Value::Object(params));
    summary.insert("dim".into(), json!(scenario.model.dim()));
    summary.insert("hbar".into(), num(run.hbar));
    summary.insert("t_end".into(), num(run.t_end));
    summary.insert("dt_out".into(), num(run.dt_out));
    summary.insert("analyses".into(), json!(analyses.iter().map(|a| a.as_str()).collect::<Vec<_>>()));
    if let Some(s) = seed {
        summary.insert("seed".into(), json!(s));
    }
}

fn execute(scenario: &Scenario, analyses: &BTreeSet<Analysis>, report: &mut Report) -> Result<(), Failure> {
    let traj = flow_stage(scenario, report)?;
    let needs_states = analyses.contains(&Analysis::Propagate) || analyses.contains(&Analysis::Compare);
    let evo = if needs_states { Some(gaussian_stage(scenario, &traj, report)?) } else { None };
    if analyses.contains(&Analysis::Floquet) {
        floquet_stage(scenario, &traj, report)?;
    }
    if let (true, Some(evo)) = (analyses.contains(&Analysis::Compare), &evo) {
        compare_stage(scenario, evo, report)?;
    }
    if analyses.contains(&Analysis::Scaling) {
        scaling_stage(scenario, report)?;
    }
    Ok(())
}

fn flow_stage(scenario: &Scenario, report: &mut Report) -> Result<Trajectory, Failure> {
    let run = &scenario.config.run;
    let traj = match integrate_flow(&scenario.model, &scenario.x0, run.t_end, run.dt_out, &scenario.flow_options()) {
        Ok(t) => t,
        Err(abort) => {
            report.write_csv("trajectory.csv", &trajectory_csv(&abort.partial))?;
            return Err(Failure::core("classical-flow", abort.error));
        }
    };
    report.write_csv("trajectory.csv", &trajectory_csv(&traj))?;
    let stats = traj.stats();
    let h0 = scenario.model.energy(&traj.first().x);
    let drift = traj.samples().iter().map(|s| (scenario.model.energy(&s.x) - h0).abs()).fold(0.0, f64::max);
    let defect = traj.samples().iter().map(|s| s.sympl_defect).fold(0.0, f64::max);
    report.note("flow", format!("{} samples to t = {}, max symplectic defect {defect:.2e}", traj.len(), traj.t_end()));
    report.summary.insert(
        "flow".into(),
        json!({
            "samples": traj.len(),
            "steps": stats.steps,
            "rejected_steps": stats.rejected,
            "evaluations": stats.evaluations,
            "max_sympl_defect": num(defect),
            "max_energy_drift": num(drift),
        }),
    );
    Ok(traj)
}

fn gaussian_stage(scenario: &Scenario, traj: &Trajectory, report: &mut Report) -> Result<GaussianEvolution, Failure> {
    let evo = propagate_gaussian(traj, &scenario.z0, scenario.hbar())
        .map_err(|e| Failure::core("gaussian-evolution", e))?;
    report.write_csv("width.csv", &width_csv(&evo.widths))?;
    let w = &evo.widths;
    let lo = w.sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = w.sigma.iter().copied().fold(0.0, f64::max);
    report.note("propagate", format!("σ in [{lo:.6e}, {hi:.6e}], dual-path gap {:.2e}", w.max_dual_path_gap()));
    report.summary.insert(
        "widths".into(),
        json!({
            "sigma_0": num(w.sigma[0]),
            "sigma_min": num(lo),
            "sigma_max": num(hi),
            "max_dual_path_gap": num(w.max_dual_path_gap()),
        }),
    );
    Ok(evo)
}

fn floquet_stage(scenario: &Scenario, traj: &Trajectory, report: &mut Report) -> Result<(), Failure> {
    let floquet = |e: Error| Failure::core("floquet-analyzer", e);
    let tol = &scenario.config.tol;
    let hbar = scenario.hbar();
    let a = analyze(traj, scenario.config.run.period, &scenario.floquet_options()).map_err(floquet)?;
    let widths = widths_at_multiples(traj, &scenario.z0, hbar, a.period, tol.k_max).map_err(floquet)?;
    let rec = check_width_recurrence(&widths, a.period, tol.k_max, tol.recurrence).map_err(floquet)?;
    let recurrence_n = if a.spectrum.stability == Stability::Elliptic {
        let n_max = tol.n_max as usize;
        let shapes = shapes_at_multiples(traj, &scenario.z0, a.period, n_max).map_err(floquet)?;
        recurrence_search(&shapes, tol.shape_eps, n_max).map_err(floquet)?
    } else {
        None
    };
    let json = floquet_json(&a, &rec, recurrence_n, hbar, tol);
    report.write_json("floquet.json", &json)?;
    report.note(
        "floquet",
        format!("T = {:.10}, {}, nu = {:.3e}, K = {:.3e}", a.period, a.spectrum.stability.as_str(), a.spectrum.nu, a.gronwall.k_factor),
    );
    report.summary.insert(
        "floquet".into(),
        json!({
            "T": num(a.period),
            "stability": a.spectrum.stability.as_str(),
            "nu": num(a.spectrum.nu),
            "width_recurrence_pass": rec.pass,
        }),
    );
    Ok(())
}

fn floquet_json(
    a: &FloquetAnalysis,
    rec: &wavepacket_core::floquet::WidthRecurrence,
    recurrence_n: Option<usize>,
    hbar: f64,
    tol: &crate::config::Tolerances,
) -> Map<String, Value> {
    let s = &a.spectrum;
    let m = a.monodromy.matrix();
    let mut j = Map::new();
    j.insert("T".into(), num(a.period));
    j.insert(
        "period_source".into(),
        json!(match a.period_source {
            PeriodSource::Detected => "detected",
            PeriodSource::Supplied => "supplied",
        }),
    );
    j.insert("monodromy".into(), Value::Array((0..m.nrows()).map(|r| Value::Array(m.row(r).iter().map(|v| num(*v)).collect())).collect()));
    j.insert("multipliers".into(), Value::Array(s.multipliers.iter().map(|z| complex_pair(z.re, z.im)).collect()));
    j.insert("exponents".into(), Value::Array(s.exponents.iter().map(|z| complex_pair(z.re, z.im)).collect()));
    j.insert("stability".into(), json!(s.stability.as_str()));
    j.insert("nu".into(), num(s.nu));
    j.insert("pairing_defect".into(), num(s.pairing_defect));
    j.insert("orthogonal_monodromy".into(), json!(s.orthogonal_monodromy));
    j.insert("kappa".into(), num(a.gronwall.kappa));
    j.insert("K".into(), num(a.gronwall.k_factor));
    j.insert("revival_predicted".into(), json!(a.revival.is_some()));
    if let Some(r) = &a.revival {
        j.insert("n_R".into(), json!(r.n_r));
        j.insert("T_R".into(), num(r.t_r));
    }
    j.insert("recurrence_found".into(), json!(recurrence_n.is_some()));
    if let Some(n) = recurrence_n {
        j.insert("recurrence_n".into(), json!(n));
    }
    j.insert("recurrence_eps".into(), num(tol.shape_eps));
    j.insert(
        "width_recurrence".into(),
        json!({
            "k_max": tol.k_max,
            "tolerance": num(tol.recurrence),
            "max_deviation": num(rec.max_deviation),
            "pass": rec.pass,
        }),
    );
    if let Ok((t_e, regime)) = ehrenfest_time(hbar, s) {
        j.insert("ehrenfest_time".into(), num(t_e));
        j.insert("ehrenfest_regime".into(), json!(regime.as_str()));
    }
    j
}

fn compare_stage(scenario: &Scenario, evo: &GaussianEvolution, report: &mut Report) -> Result<(), Failure> {
    let oracle = |e: Error| Failure::core("quantum-oracle", e);
    let model = &scenario.model;
    if !model.is_split_1d() {
        return Err(oracle(Error::UnsupportedModel(format!(
            "`{}` is not a one-dimensional p²/2 + V(q) model; the grid oracle cannot compare it",
            model.name()
        ))));
    }
    let run = &scenario.config.run;
    let steps = (run.dt_out / scenario.config.oracle.dt).ceil();
    let dt = run.dt_out / steps;
    let grid = grid_for_evolution(evo, scenario.config.oracle.margin).map_err(oracle)?;
    let psi0 = GridWavefunction::from_state(&evo.states[0], grid).map_err(oracle)?;
    let (series, failure) = match split_step_evolve(model, &psi0, dt, run.t_end, run.dt_out) {
        Ok(s) => (s, None),
        Err(abort) => (abort.partial, Some(oracle(abort.error))),
    };

    let mut rows = Vec::with_capacity(series.states.len());
    for (k, psi) in series.states.iter().enumerate() {
        let f = fidelity(psi, &evo.states[k]).map_err(oracle)?;
        let width = exact_width(psi).map_err(oracle)?;
        rows.push((series.times[k], f, width));
    }
    let exact: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let delta = if failure.is_none() {
        width_observable_error(&evo.widths, &series.times, &exact).map_err(|e| Failure::core("gaussian-evolution", e))?
    } else {
        exact.iter().zip(&evo.widths.sigma).map(|(e, s)| e - s).collect()
    };
    let mut csv = Csv::new(&["t", "fidelity", "phase_mismatch", "norm_error", "exact_width", "sigma", "delta"]);
    for (k, (t, f, width)) in rows.iter().enumerate() {
        csv.row(&[*t, f.modulus, f.phase_mismatch, f.norm_error, *width, evo.widths.sigma[k], delta[k]]);
    }
    report.write_csv("compare.csv", &csv)?;
    if let Some(f) = failure {
        return Err(f);
    }

    let min_fid = rows.iter().map(|r| r.1.modulus).fold(f64::INFINITY, f64::min);
    let max_err = rows.iter().map(|r| r.1.norm_error).fold(0.0, f64::max);
    let max_raw = rows.iter().map(|r| r.1.raw_norm_error).fold(0.0, f64::max);
    let max_delta = delta.iter().map(|d| d.abs()).fold(0.0, f64::max);
    report.note("compare", format!("N = {}, dt = {dt:.3e}, min fidelity {min_fid:.12}, max |Δ| {max_delta:.2e}", grid.n));
    report.summary.insert(
        "compare".into(),
        json!({
            "grid_points": grid.n,
            "grid_x0": num(grid.x0),
            "grid_dx": num(grid.dx),
            "oracle_dt": num(dt),
            "min_fidelity": num(min_fid),
            "max_norm_error": num(max_err),
            "max_raw_norm_error": num(max_raw),
            "max_abs_delta": num(max_delta),
            "norm_drift": num(series.norm_drift),
            "max_tail_mass": num(series.max_tail_mass),
            "max_edge_mass": num(series.max_edge_mass),
        }),
    );
    Ok(())
}

fn scaling_stage(scenario: &Scenario, report: &mut Report) -> Result<(), Failure> {
    let section = scenario.config.scaling.as_ref();
    let hbars = section.map(|s| s.hbars.clone()).unwrap_or_else(|| DEFAULT_SCALING_HBARS.to_vec());
    let t_probe = section.and_then(|s| s.t_probe).unwrap_or(scenario.config.run.t_end);
    let mut opts = ScalingOptions { flow: scenario.flow_options(), margin: scenario.config.oracle.margin, ..Default::default() };
    if let Some(dt) = section.and_then(|s| s.dt) {
        opts.dt = dt;
    }
    let study = match hbar_scaling_study(&scenario.model, &scenario.x0, &scenario.z0, &hbars, t_probe, &opts) {
        Ok(s) => s,
        Err(abort) => {
            report.write_csv("scaling.csv", &scaling_csv(&abort.completed))?;
            return Err(Failure::core("quantum-oracle", abort.error));
        }
    };
    report.write_csv("scaling.csv", &scaling_csv(&study.points))?;
    report.note("scaling", format!("slope {:.4}, residual {:.2e}", study.slope, study.residual));
    report.summary.insert(
        "scaling".into(),
        json!({
            "t_probe": num(t_probe),
            "hbars": hbars.iter().map(|h| num(*h)).collect::<Vec<_>>(),
            "slope": num(study.slope),
            "residual": num(study.residual),
            "exact_regime": study.exact_regime,
        }),
    );
    Ok(())
}
