//! Reference solution of the one-dimensional Schrödinger equation
//! `iħ ∂ψ/∂t = (−ħ²/2 ∂² + V(q)) ψ` by Strang-split Fourier propagation.
//!
//! Momentum on the grid is `p = ħk`. Two guards watch every run: the
//! momentum-space mass beyond `0.9 p_Nyquist` (aliasing) and the position mass
//! in the outer [`EDGE_FRACTION`] of the window (periodic wrap-around).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::flow::{integrate_flow, FlowOptions};
use crate::gaussian::{evaluate_wavefunction, propagate_gaussian, GaussianEvolution, GaussianState};
use crate::models::HamiltonianModel;
use crate::symplectic::{PhaseSpacePoint, SiegelForm};

pub const DEFAULT_POINTS: usize = 4096;

/// Largest momentum-space mass tolerated beyond `0.9 p_Nyquist`.
pub const TAIL_MASS_LIMIT: f64 = 1e-8;

/// Largest position mass tolerated near the window edges.
pub const EDGE_MASS_LIMIT: f64 = 1e-6;

/// Fraction of the window, on each side, watched by the boundary monitor.
pub const EDGE_FRACTION: f64 = 0.05;

/// Largest phase advance per step accepted by the resolution pre-check.
pub const MAX_PHASE_STEP: f64 = PI / 4.0;

/// Guards are evaluated at least this often, in steps.
const GUARD_INTERVAL: usize = 64;

/// Uniform periodic grid `x_j = x0 + j·dx`, `j < n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(x0: f64, dx: f64, n: usize) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite() && x0.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {dx}")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("grid size must be a power of two >= 16, got {n}")));
        }
        Ok(Self { x0, dx, n })
    }

    /// `N = 4096` points on `center ± max(20√ħ, 10)`.
    pub fn default_for(center: f64, hbar: f64) -> Result<Self> {
        let half = (20.0 * hbar.sqrt()).max(10.0);
        Self::new(center - half, 2.0 * half / DEFAULT_POINTS as f64, DEFAULT_POINTS)
    }

    /// Smallest power-of-two grid (at least the default) that contains
    /// `[lo, hi]` and resolves momenta up to `p_max` below `0.8 p_Nyquist`.
    pub fn covering(lo: f64, hi: f64, p_max: f64, hbar: f64) -> Result<Self> {
        if !(hi > lo) || !(p_max >= 0.0) {
            return Err(Error::InvalidArgument(format!("cannot cover [{lo}, {hi}] with p_max {p_max}")));
        }
        let center = 0.5 * (lo + hi);
        let base = Self::default_for(center, hbar)?;
        let length = (hi - lo).max(base.length());
        let dx_needed = if p_max > 0.0 { 0.8 * PI * hbar / p_max } else { f64::INFINITY };
        let mut n = DEFAULT_POINTS;
        while length / n as f64 > dx_needed.min(base.dx) {
            n *= 2;
            if n > 1 << 24 {
                return Err(Error::Resolution(format!(
                    "covering [{lo}, {hi}] at p_max = {p_max} needs more than 2^24 points"
                )));
            }
        }
        Self::new(center - 0.5 * length, length / n as f64, n)
    }

    pub fn length(&self) -> f64 {
        self.dx * self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x0 + j as f64 * self.dx).collect()
    }

    pub fn p_nyquist(&self, hbar: f64) -> f64 {
        PI * hbar / self.dx
    }

    /// Momenta `ħk` in FFT order.
    pub fn momenta(&self, hbar: f64) -> Vec<f64> {
        let n = self.n as i64;
        let dk = 2.0 * PI / self.length();
        (0..n).map(|j| hbar * dk * (if j < n / 2 { j } else { j - n }) as f64).collect()
    }

    /// Same window with twice the points.
    pub fn refined(&self) -> Self {
        Self { x0: self.x0, dx: 0.5 * self.dx, n: 2 * self.n }
    }
}

/// Wavefunction values on a [`GridSpec`].
#[derive(Clone)]
pub struct GridWavefunction {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    pub hbar: f64,
}

impl fmt::Debug for GridWavefunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridWavefunction")
            .field("grid", &self.grid)
            .field("hbar", &self.hbar)
            .field("norm_squared", &self.norm_squared())
            .finish_non_exhaustive()
    }
}

fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

impl GridWavefunction {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, hbar: f64) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!("{} values for a grid of {} points", values.len(), grid.n)));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { grid, values, hbar })
    }

    /// Samples a `d = 1` Gaussian state on `grid`.
    pub fn from_state(state: &GaussianState, grid: GridSpec) -> Result<Self> {
        let values = evaluate_wavefunction(state, &grid.points())?;
        Self::new(grid, values, state.hbar)
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    /// Discrete Fourier coefficients, normalized so that their squared
    /// moduli sum to the quadrature norm.
    fn spectrum(&self, forward: &dyn Fft<f64>) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        forward.process(&mut buf);
        let scale = (self.grid.dx / self.grid.n as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }

    /// Fraction of momentum-space mass beyond `0.9 p_Nyquist`.
    pub fn tail_mass(&self) -> f64 {
        let (forward, _) = fft_pair(self.grid.n);
        tail_fraction(&self.spectrum(forward.as_ref()), &self.grid, self.hbar)
    }

    /// Fraction of position mass in the outer [`EDGE_FRACTION`] of the window.
    pub fn edge_mass(&self) -> f64 {
        edge_fraction(&self.values)
    }

    fn support(&self, threshold: f64) -> Vec<usize> {
        let peak = self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        (0..self.grid.n).filter(|&j| self.values[j].norm_sqr() > threshold * peak).collect()
    }
}

fn tail_fraction(spec: &[Complex64], grid: &GridSpec, hbar: f64) -> f64 {
    let cut = 0.9 * grid.p_nyquist(hbar);
    let p = grid.momenta(hbar);
    let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
    let tail: f64 = spec.iter().zip(&p).filter(|(_, p)| p.abs() > cut).map(|(v, _)| v.norm_sqr()).sum();
    tail / total
}

fn edge_fraction(values: &[Complex64]) -> f64 {
    let n = values.len();
    let m = ((EDGE_FRACTION * n as f64).ceil() as usize).max(1);
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    let edge: f64 = values[..m].iter().chain(&values[n - m..]).map(|v| v.norm_sqr()).sum();
    edge / total
}

/// Output of [`split_step_evolve`] on the grid `t_k = k·Δt_out`.
#[derive(Debug, Clone)]
pub struct OracleSeries {
    pub times: Vec<f64>,
    pub states: Vec<GridWavefunction>,
    pub dt: f64,
    pub steps: usize,
    /// `max_k |‖ψ_k‖² − ‖ψ_0‖²|`.
    pub norm_drift: f64,
    pub max_tail_mass: f64,
    pub max_edge_mass: f64,
}

/// Guard failure with the samples produced before it.
#[derive(Debug, Clone)]
pub struct OracleAbort {
    pub error: Error,
    pub partial: OracleSeries,
}

impl fmt::Display for OracleAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} samples retained)", self.error, self.partial.times.len())
    }
}

impl std::error::Error for OracleAbort {}

impl From<OracleAbort> for Error {
    fn from(a: OracleAbort) -> Self {
        a.error
    }
}

fn step_count(span: f64, step: f64, what: &str) -> Result<usize> {
    let ratio = span / step;
    let n = ratio.round();
    if !(n >= 1.0) || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidArgument(format!("{what} = {span} is not a positive integer multiple of {step}")));
    }
    Ok(n as usize)
}

/// Largest per-step phase advance of the potential and kinetic factors over
/// the part of phase space where the state has weight.
pub fn phase_advance(model: &HamiltonianModel, psi: &GridWavefunction, dt: f64) -> Result<(f64, f64)> {
    let x = psi.grid.points();
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for j in psi.support(1e-12) {
        let v = model.potential(x[j]).ok_or_else(|| Error::UnsupportedModel(model.name().into()))?;
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    let (forward, _) = fft_pair(psi.grid.n);
    let spec = psi.spectrum(forward.as_ref());
    let peak = spec.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let p = psi.grid.momenta(psi.hbar);
    let pmax = spec
        .iter()
        .zip(&p)
        .filter(|(v, _)| v.norm_sqr() > 1e-12 * peak)
        .map(|(_, p)| p.abs())
        .fold(0.0, f64::max);
    let potential = (vmax - vmin).max(0.0) * dt / psi.hbar;
    let kinetic = 0.5 * pmax * pmax * dt / psi.hbar;
    Ok((potential, kinetic))
}

/// Strang-split propagation: half potential phase, full kinetic phase in
/// momentum space, half potential phase.
pub fn split_step_evolve(
    model: &HamiltonianModel,
    psi0: &GridWavefunction,
    dt: f64,
    t_end: f64,
    dt_out: f64,
) -> std::result::Result<OracleSeries, OracleAbort> {
    let hbar = psi0.hbar;
    let grid = psi0.grid;
    let mut series = OracleSeries {
        times: vec![0.0],
        states: vec![psi0.clone()],
        dt,
        steps: 0,
        norm_drift: 0.0,
        max_tail_mass: 0.0,
        max_edge_mass: 0.0,
    };
    let fail = |series: OracleSeries, error: Error| Err(OracleAbort { error, partial: series });
    if !model.is_split_1d() {
        return fail(series, Error::UnsupportedModel(format!("`{}` is not of the form p²/2 + V(q) in one dimension", model.name())));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return fail(series, Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let (per_out, n_out) = match (step_count(dt_out, dt, "output spacing"), step_count(t_end, dt_out, "t_end")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return fail(series, e),
    };
    match phase_advance(model, psi0, dt) {
        Ok((pot, kin)) if pot < MAX_PHASE_STEP && kin < MAX_PHASE_STEP => {}
        Ok((pot, kin)) => {
            return fail(
                series,
                Error::Resolution(format!(
                    "time step {dt} advances the phase by {:.3} rad per step (limit π/4)",
                    pot.max(kin)
                )),
            )
        }
        Err(e) => return fail(series, e),
    }

    let x = grid.points();
    let half_v: Vec<Complex64> = x
        .iter()
        .map(|&xi| Complex64::from_polar(1.0, -0.5 * model.potential(xi).expect("split model") * dt / hbar))
        .collect();
    let kinetic: Vec<Complex64> = grid
        .momenta(hbar)
        .iter()
        .map(|&p| Complex64::from_polar(1.0, -0.5 * p * p * dt / hbar))
        .collect();
    let (forward, inverse) = fft_pair(grid.n);
    let inv_n = 1.0 / grid.n as f64;
    let norm0 = psi0.norm_squared();
    let mut psi = psi0.values.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len())];
    let pnyq_cut = 0.9 * grid.p_nyquist(hbar);
    let momenta = grid.momenta(hbar);

    for k in 1..=n_out {
        for s in 1..=per_out {
            psi.iter_mut().zip(&half_v).for_each(|(a, b)| *a *= b);
            forward.process_with_scratch(&mut psi, &mut scratch);
            psi.iter_mut().zip(&kinetic).for_each(|(a, b)| *a *= b);
            let check = s == per_out || (series.steps + 1) % GUARD_INTERVAL == 0;
            if check {
                let total: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
                let tail: f64 = psi
                    .iter()
                    .zip(&momenta)
                    .filter(|(_, p)| p.abs() > pnyq_cut)
                    .map(|(v, _)| v.norm_sqr())
                    .sum();
                let frac = tail / total;
                series.max_tail_mass = series.max_tail_mass.max(frac);
                if frac > TAIL_MASS_LIMIT {
                    let t = (series.steps + 1) as f64 * dt;
                    return fail(
                        series,
                        Error::Aliasing { t, detail: format!("momentum tail mass {frac:.3e} beyond 0.9 p_Nyquist") },
                    );
                }
            }
            inverse.process_with_scratch(&mut psi, &mut scratch);
            psi.iter_mut().zip(&half_v).for_each(|(a, b)| *a *= b * inv_n);
            series.steps += 1;
            if check {
                let edge = edge_fraction(&psi);
                series.max_edge_mass = series.max_edge_mass.max(edge);
                if edge > EDGE_MASS_LIMIT {
                    let t = series.steps as f64 * dt;
                    return fail(
                        series,
                        Error::Coverage(format!("boundary mass {edge:.3e} near the window edge at t = {t}")),
                    );
                }
            }
        }
        let state = GridWavefunction { grid, values: psi.clone(), hbar };
        series.norm_drift = series.norm_drift.max((state.norm_squared() - norm0).abs());
        series.times.push(k as f64 * dt_out);
        series.states.push(state);
    }
    Ok(series)
}

/// Overlap diagnostics between a grid wavefunction and a Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity {
    /// `|⟨ψ, ψ_sc⟩|`.
    pub modulus: f64,
    /// `arg ⟨ψ, ψ_sc⟩`.
    pub phase_mismatch: f64,
    /// `‖ψ − e^{iφ} ψ_sc‖` minimized over the global phase φ.
    pub norm_error: f64,
    /// `‖ψ − ψ_sc‖` including the tracked phase.
    pub raw_norm_error: f64,
}

pub fn fidelity(psi: &GridWavefunction, state: &GaussianState) -> Result<Fidelity> {
    if (psi.hbar - state.hbar).abs() > 1e-14 * psi.hbar {
        return Err(Error::GridMismatch(format!("oracle ħ = {} but state ħ = {}", psi.hbar, state.hbar)));
    }
    let sc = evaluate_wavefunction(state, &psi.grid.points())?;
    let dx = psi.grid.dx;
    let overlap: Complex64 = psi.values.iter().zip(&sc).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dx;
    let modulus = overlap.norm();
    let align = if modulus > 0.0 { overlap / modulus } else { Complex64::new(1.0, 0.0) };
    let distance = |rot: Complex64| {
        (psi.values.iter().zip(&sc).map(|(a, b)| (a - rot * b).norm_sqr()).sum::<f64>() * dx).sqrt()
    };
    Ok(Fidelity {
        modulus,
        phase_mismatch: overlap.arg(),
        norm_error: distance(align.conj()),
        raw_norm_error: distance(Complex64::new(1.0, 0.0)),
    })
}

/// `(⟨x²⟩ − ⟨x⟩²) + (⟨p²⟩ − ⟨p⟩²)`, momentum moments taken spectrally.
pub fn exact_width(psi: &GridWavefunction) -> Result<f64> {
    let (forward, _) = fft_pair(psi.grid.n);
    let spec = psi.spectrum(forward.as_ref());
    let tail = tail_fraction(&spec, &psi.grid, psi.hbar);
    if tail > TAIL_MASS_LIMIT {
        return Err(Error::Aliasing { t: f64::NAN, detail: format!("momentum tail mass {tail:.3e} beyond 0.9 p_Nyquist") });
    }
    let x = psi.grid.points();
    let w: Vec<f64> = psi.values.iter().map(|v| v.norm_sqr()).collect();
    let total: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / total;
    let vx = x.iter().zip(&w).map(|(x, w)| (x - mx).powi(2) * w).sum::<f64>() / total;
    let p = psi.grid.momenta(psi.hbar);
    let wp: Vec<f64> = spec.iter().map(|v| v.norm_sqr()).collect();
    let total_p: f64 = wp.iter().sum();
    let mp = p.iter().zip(&wp).map(|(p, w)| p * w).sum::<f64>() / total_p;
    let vp = p.iter().zip(&wp).map(|(p, w)| (p - mp).powi(2) * w).sum::<f64>() / total_p;
    Ok(vx + vp)
}

/// Grid that contains the predicted semiclassical packet at every sample
/// with a margin of `margin` standard deviations in position and momentum.
pub fn grid_for_evolution(evo: &GaussianEvolution, margin: f64) -> Result<GridSpec> {
    let hbar = evo.states[0].hbar;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut p_max: f64 = 0.0;
    for (state, (dx2, dp2)) in evo.states.iter().zip(evo.widths.dx2.iter().zip(&evo.widths.dp2)) {
        if state.dim() != 1 {
            return Err(Error::InvalidDimension("oracle grids are one-dimensional".into()));
        }
        let q = state.center.q[0];
        let p = state.center.p[0];
        let sx = dx2.sqrt();
        let sp = dp2.sqrt();
        lo = lo.min(q - margin * sx);
        hi = hi.max(q + margin * sx);
        p_max = p_max.max(p.abs() + margin * sp);
    }
    // leave the edge monitor strip outside the covered interval
    let pad = (hi - lo) * EDGE_FRACTION / (1.0 - 2.0 * EDGE_FRACTION) + 1e-12;
    GridSpec::covering(lo - pad, hi + pad, p_max, hbar)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingOptions {
    /// Split-step size at ħ = 1; each run uses `dt·√ħ`, shortened so that it
    /// divides `t_probe`. The Strang phase error of the center motion scales
    /// like `dt²/ħ`.
    pub dt: f64,
    /// Number of output intervals used for phase tracking up to `t_probe`.
    pub samples: usize,
    /// Standard deviations of predicted packet kept inside the grid.
    pub margin: f64,
    pub flow: FlowOptions,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self { dt: 2e-3, samples: 100, margin: 12.0, flow: FlowOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub hbar: f64,
    pub norm_error: f64,
    pub fidelity: Fidelity,
    pub grid_points: usize,
}

#[derive(Debug, Clone)]
pub struct ScalingStudy {
    /// Ordered by decreasing ħ.
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln(norm error)` against `ln ħ`.
    pub slope: f64,
    /// Root-mean-square residual of that fit.
    pub residual: f64,
    /// All errors below `1e-6`: the propagation is exact and the slope meaningless.
    pub exact_regime: bool,
}

#[derive(Debug, Clone)]
pub struct ScalingAbort {
    pub completed: Vec<ScalingPoint>,
    pub hbar: f64,
    pub error: Error,
}

impl fmt::Display for ScalingAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scaling run at ħ = {} failed: {} ({} runs completed)", self.hbar, self.error, self.completed.len())
    }
}

impl std::error::Error for ScalingAbort {}

impl From<ScalingAbort> for Error {
    fn from(a: ScalingAbort) -> Self {
        a.error
    }
}

/// Semiclassical state against the oracle at `t_probe` for a single ħ.
pub fn scaling_point(
    model: &HamiltonianModel,
    x0: &PhaseSpacePoint,
    z0: &SiegelForm,
    hbar: f64,
    t_probe: f64,
    opts: &ScalingOptions,
) -> Result<ScalingPoint> {
    let dt_out = t_probe / opts.samples as f64;
    let traj = integrate_flow(model, x0, t_probe, dt_out, &opts.flow)?;
    let evo = propagate_gaussian(&traj, z0, hbar)?;
    let grid = grid_for_evolution(&evo, opts.margin)?;
    let psi0 = GridWavefunction::from_state(&evo.states[0], grid)?;
    let steps = (t_probe / (opts.dt * hbar.sqrt())).ceil();
    let series = split_step_evolve(model, &psi0, t_probe / steps, t_probe, t_probe)?;
    let fid = fidelity(series.states.last().expect("final state"), evo.states.last().expect("final state"))?;
    Ok(ScalingPoint { hbar, norm_error: fid.raw_norm_error, fidelity: fid, grid_points: grid.n })
}

/// Fits the ħ-exponent of the semiclassical norm error at `t_probe`. Runs
/// for different ħ execute concurrently.
pub fn hbar_scaling_study(
    model: &HamiltonianModel,
    x0: &PhaseSpacePoint,
    z0: &SiegelForm,
    hbars: &[f64],
    t_probe: f64,
    opts: &ScalingOptions,
) -> std::result::Result<ScalingStudy, ScalingAbort> {
    let reject = |error: Error| ScalingAbort { completed: Vec::new(), hbar: f64::NAN, error };
    if hbars.len() < 3 {
        return Err(reject(Error::InvalidArgument(format!("need at least three ħ values, got {}", hbars.len()))));
    }
    if hbars.iter().any(|h| !(*h > 0.0)) || hbars.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(reject(Error::InvalidArgument("ħ values must be positive and strictly decreasing".into())));
    }
    let ratio = hbars[1] / hbars[0];
    if hbars.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) {
        return Err(reject(Error::InvalidArgument("ħ values must be geometrically spaced".into())));
    }
    if !(t_probe > 0.0) {
        return Err(reject(Error::InvalidArgument(format!("t_probe must be positive, got {t_probe}"))));
    }

    let results: Vec<(f64, Result<ScalingPoint>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = hbars
            .iter()
            .map(|&h| scope.spawn(move || (h, scaling_point(model, x0, z0, h, t_probe, opts))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("scaling worker panicked")).collect()
    });

    let mut completed = Vec::new();
    let mut failure = None;
    for (h, r) in results {
        match r {
            Ok(p) => completed.push(p),
            Err(e) => {
                if failure.is_none() {
                    failure = Some((h, e));
                }
            }
        }
    }
    if let Some((hbar, error)) = failure {
        return Err(ScalingAbort { completed, hbar, error });
    }

    let xs: Vec<f64> = completed.iter().map(|p| p.hbar.ln()).collect();
    let ys: Vec<f64> = completed.iter().map(|p| p.norm_error.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    let exact_regime = completed.iter().all(|p| p.norm_error < 1e-6);
    Ok(ScalingStudy { points: completed, slope, residual, exact_regime })
}
