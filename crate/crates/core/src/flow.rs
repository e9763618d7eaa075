//! Joint integration of a phase-space trajectory, its flow differential and
//! the classical action.
//!
//! The augmented state is `[p, q, vec(S), W]` with `S` stored column-major and
//! evolves by `Ẋ = J H'(X)`, `Ṡ = J H''(X) S`, `Ẇ = p·∂_p H − H`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::models::HamiltonianModel;
use crate::ode::{Dop853, StepStats};
use crate::symplectic::{symplectic_defect, PhaseSpacePoint, SymplecticMatrix};

pub use crate::symplectic::hs_norm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Step budget for a single output interval.
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 200_000 }
    }
}

impl FlowOptions {
    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.rtol.is_finite() && self.atol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "integrator tolerances must be positive (rtol {}, atol {})",
                self.rtol, self.atol
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FlowSample {
    pub t: f64,
    pub x: PhaseSpacePoint,
    pub s: SymplecticMatrix,
    pub w: f64,
    pub sympl_defect: f64,
}

impl FlowSample {
    fn initial(t: f64, x: PhaseSpacePoint) -> Self {
        let d = x.dim();
        Self { t, x, s: SymplecticMatrix::identity(d).expect("d >= 1"), w: 0.0, sympl_defect: 0.0 }
    }

    fn pack(&self) -> Vec<f64> {
        let d = self.x.dim();
        let mut y = Vec::with_capacity(2 * d + 4 * d * d + 1);
        y.extend(self.x.p.iter());
        y.extend(self.x.q.iter());
        y.extend(self.s.matrix().iter());
        y.push(self.w);
        y
    }

    fn unpack(t: f64, d: usize, y: &[f64]) -> Self {
        let n = 2 * d;
        let x = PhaseSpacePoint::from_stacked(&y[..n]).expect("finite state");
        let m = DMatrix::from_column_slice(n, n, &y[n..n + n * n]);
        let sympl_defect = symplectic_defect(&m);
        let s = SymplecticMatrix::new_unchecked(m).expect("square even matrix");
        Self { t, x, s, w: y[n + n * n], sympl_defect }
    }

    /// Stacked `(p, q)`.
    pub fn stacked(&self) -> Vec<f64> {
        self.x.to_stacked().as_slice().to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub rtol: f64,
    pub atol: f64,
}

/// Samples of one classical trajectory, ordered in time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    model: HamiltonianModel,
    samples: Vec<FlowSample>,
    stats: IntegratorStats,
    opts: FlowOptions,
}

impl Trajectory {
    pub fn model(&self) -> &HamiltonianModel {
        &self.model
    }

    pub fn samples(&self) -> &[FlowSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    pub fn options(&self) -> FlowOptions {
        self.opts
    }

    pub fn first(&self) -> &FlowSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("trajectory holds at least the initial sample")
    }

    pub fn t_end(&self) -> f64 {
        self.last().t
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Exact-time sample obtained by re-integrating from the nearest stored
    /// sample at or before `t`.
    pub fn sample_at(&self, t: f64) -> Result<FlowSample> {
        let t0 = self.first().t;
        if !(t >= t0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("time {t} precedes the trajectory start {t0}")));
        }
        let k = match self.samples.partition_point(|s| s.t <= t) {
            0 => 0,
            k => k - 1,
        };
        let base = &self.samples[k];
        if base.t == t {
            return Ok(base.clone());
        }
        let mut solver = Dop853::new(self.opts.rtol, self.opts.atol, self.opts.max_steps);
        advance_sample(&self.model, &mut solver, base, t)
    }

    /// Largest discrepancy, over all consecutive pairs, between a stored sample
    /// and the result of re-integrating from its predecessor, measured on the
    /// full augmented state in units of the local tolerance.
    pub fn consistency_ratio(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for pair in self.samples.windows(2) {
            let mut solver = Dop853::new(self.opts.rtol, self.opts.atol, self.opts.max_steps);
            let again = advance_sample(&self.model, &mut solver, &pair[0], pair[1].t)?;
            let a = again.pack();
            let b = pair[1].pack();
            for (u, v) in a.iter().zip(&b) {
                let tol = self.opts.atol + self.opts.rtol * v.abs().max(1.0);
                worst = worst.max((u - v).abs() / tol);
            }
        }
        Ok(worst)
    }
}

/// Integration failure with everything computed before the failure.
#[derive(Debug, Clone)]
pub struct FlowAbort {
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for FlowAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} samples retained up to t = {})", self.error, self.partial.len(), self.partial.t_end())
    }
}

impl std::error::Error for FlowAbort {}

impl From<FlowAbort> for Error {
    fn from(a: FlowAbort) -> Self {
        a.error
    }
}

fn rhs(model: &HamiltonianModel, d: usize, y: &[f64], dy: &mut [f64]) {
    let n = 2 * d;
    let x = &y[..n];
    let grad = model.gradient(x);
    let hess = model.hessian(x);
    for i in 0..d {
        dy[i] = -grad[d + i];
        dy[d + i] = grad[i];
    }
    // K = J H'' has rows (−H''_q·, H''_p·).
    let s = &y[n..n + n * n];
    for col in 0..n {
        for row in 0..n {
            let src = if row < d { row + d } else { row - d };
            let sign = if row < d { -1.0 } else { 1.0 };
            let mut acc = 0.0;
            for k in 0..n {
                acc += hess[(src, k)] * s[col * n + k];
            }
            dy[n + col * n + row] = sign * acc;
        }
    }
    let mut p_dot_hp = 0.0;
    for i in 0..d {
        p_dot_hp += x[i] * grad[i];
    }
    dy[n + n * n] = p_dot_hp - model.value(x);
}

fn advance_sample(model: &HamiltonianModel, solver: &mut Dop853, from: &FlowSample, t: f64) -> Result<FlowSample> {
    let d = from.x.dim();
    let mut y = from.pack();
    let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| rhs(model, d, y, dy);
    solver.advance(&mut f, from.t, &mut y, t)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t });
    }
    Ok(FlowSample::unpack(t, d, &y))
}

fn check_start(model: &HamiltonianModel, x0: &PhaseSpacePoint, opts: &FlowOptions) -> Result<()> {
    if x0.dim() != model.dim() {
        return Err(Error::InvalidDimension(format!(
            "initial point has d = {} but model `{}` has d = {}",
            x0.dim(),
            model.name(),
            model.dim()
        )));
    }
    opts.validate()
}

/// Output grid `t_k = k·Δt_out` up to `t_end`; a final shorter interval is
/// appended when `t_end` is not a multiple of `Δt_out`.
pub fn output_grid(t_end: f64, dt_out: f64) -> Result<Vec<f64>> {
    if !(dt_out > 0.0 && dt_out.is_finite()) {
        return Err(Error::InvalidArgument(format!("output spacing must be positive, got {dt_out}")));
    }
    if !(t_end >= dt_out && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} must be at least the output spacing {dt_out}")));
    }
    let ratio = t_end / dt_out;
    let n = (ratio + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt_out).collect();
    let last = *times.last().expect("non-empty");
    if (t_end - last).abs() <= 1e-9 * t_end {
        *times.last_mut().expect("non-empty") = t_end;
    } else {
        times.push(t_end);
    }
    Ok(times)
}

/// Integrates on the uniform grid of [`output_grid`].
pub fn integrate_flow(
    model: &HamiltonianModel,
    x0: &PhaseSpacePoint,
    t_end: f64,
    dt_out: f64,
    opts: &FlowOptions,
) -> std::result::Result<Trajectory, FlowAbort> {
    let times = output_grid(t_end, dt_out).map_err(|e| abort_before_start(model, x0, opts, e))?;
    integrate_flow_times(model, x0, &times, opts)
}

/// Integrates from `x0` at `times[0]` and samples at every entry of `times`,
/// which must be strictly increasing.
pub fn integrate_flow_times(
    model: &HamiltonianModel,
    x0: &PhaseSpacePoint,
    times: &[f64],
    opts: &FlowOptions,
) -> std::result::Result<Trajectory, FlowAbort> {
    if let Err(e) = check_start(model, x0, opts) {
        return Err(abort_before_start(model, x0, opts, e));
    }
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        let e = Error::InvalidArgument("sample times must be finite and strictly increasing".into());
        return Err(abort_before_start(model, x0, opts, e));
    }
    let mut solver = Dop853::new(opts.rtol, opts.atol, opts.max_steps);
    let mut samples = Vec::with_capacity(times.len());
    samples.push(FlowSample::initial(times[0], x0.clone()));
    let mut failure = None;
    for &t in &times[1..] {
        match advance_sample(model, &mut solver, samples.last().expect("non-empty"), t) {
            Ok(s) => samples.push(s),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let traj = Trajectory { model: model.clone(), samples, stats: collect_stats(solver.stats(), opts), opts: *opts };
    match failure {
        None => Ok(traj),
        Some(error) => Err(FlowAbort { error, partial: traj }),
    }
}

fn collect_stats(s: StepStats, opts: &FlowOptions) -> IntegratorStats {
    IntegratorStats { steps: s.accepted, rejected: s.rejected, evaluations: s.evaluations, rtol: opts.rtol, atol: opts.atol }
}

fn abort_before_start(model: &HamiltonianModel, x0: &PhaseSpacePoint, opts: &FlowOptions, error: Error) -> FlowAbort {
    let samples = if x0.dim() == model.dim() { vec![FlowSample::initial(0.0, x0.clone())] } else { Vec::new() };
    let partial = Trajectory { model: model.clone(), samples, stats: collect_stats(StepStats::default(), opts), opts: *opts };
    FlowAbort { error, partial }
}

/// Finite-time estimate of the largest Lyapunov exponent.
#[derive(Debug, Clone)]
pub struct LyapunovEstimate {
    pub gamma: f64,
    pub times: Vec<f64>,
    /// `ln s_max(t) / t` at each sample with `t > 0`.
    pub series: Vec<f64>,
}

pub fn lyapunov_estimate(traj: &Trajectory) -> Result<LyapunovEstimate> {
    if traj.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "Lyapunov estimate needs at least 10 samples, trajectory has {}",
            traj.len()
        )));
    }
    let mut times = Vec::new();
    let mut series = Vec::new();
    for s in traj.samples().iter().filter(|s| s.t > 0.0) {
        let smax = s.s.matrix().singular_values().max();
        times.push(s.t);
        series.push(smax.ln() / s.t);
    }
    let gamma = *series.last().expect("at least nine positive times");
    Ok(LyapunovEstimate { gamma, times, series })
}
