//! Squeezed Gaussian states carried along a classical trajectory.
//!
//! A state with center `(p, q)`, shape `Z` and unit phase factor `c` is
//!
//! ```text
//! ψ(x) = c (det Im Z)^{1/4} (πħ)^{-d/4} exp{(i/ħ)[pᵀ(x−q) + ½(x−q)ᵀZ(x−q)]}
//! ```
//!
//! Along the flow the shape follows the Möbius action of `S_t`, the Wigner
//! form is transported as `G_t = S_t^{-T} G_0 S_t^{-1}` and the phase picks up
//! `e^{iW/ħ}` times the continuous branch of `det(C_t Z_0 + D_t)^{-1/2}`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::flow::{FlowSample, Trajectory};
use crate::symplectic::{
    hs_norm, mobius_parts, wigner_form_from_siegel, PhaseSpacePoint, SiegelForm, WignerForm,
};

/// Largest change of `arg det(C Z₀ + D)` accepted between consecutive samples.
pub const MAX_BRANCH_STEP: f64 = PI / 2.0;

/// Norm deficit above which a wavefunction grid is rejected.
pub const COVERAGE_DEFICIT: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GaussianState {
    pub hbar: f64,
    pub center: PhaseSpacePoint,
    pub shape: SiegelForm,
    pub phase: Complex64,
}

impl GaussianState {
    pub fn new(hbar: f64, center: PhaseSpacePoint, shape: SiegelForm) -> Result<Self> {
        check_hbar(hbar)?;
        if center.dim() != shape.dim() {
            return Err(Error::InvalidDimension(format!(
                "center has d = {} but shape has d = {}",
                center.dim(),
                shape.dim()
            )));
        }
        Ok(Self { hbar, center, shape, phase: Complex64::new(1.0, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn wigner_form(&self) -> WignerForm {
        wigner_form_from_siegel(&self.shape).expect("shape lies in the Siegel half-space")
    }

    /// Total width `(ħ/2) tr G`.
    pub fn sigma(&self) -> f64 {
        0.5 * self.hbar * self.wigner_form().trace()
    }
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
    }
    Ok(())
}

/// Width diagnostics on the trajectory's time grid.
#[derive(Debug, Clone, Default)]
pub struct WidthSeries {
    pub times: Vec<f64>,
    /// `(ħ/2) tr G_t`.
    pub sigma: Vec<f64>,
    /// Position spread `(ħ/2) tr G_pp`.
    pub dx2: Vec<f64>,
    /// Momentum spread `(ħ/2) tr G_qq`.
    pub dp2: Vec<f64>,
    pub tr_g: Vec<f64>,
    /// `‖S_t‖²_HS`.
    pub hs_s2: Vec<f64>,
    /// `‖G_t − G(Z_t)‖_HS / max(1, ‖G_t‖_HS)` between transport and Möbius routes.
    pub dual_path_gap: Vec<f64>,
}

impl WidthSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_dual_path_gap(&self) -> f64 {
        self.dual_path_gap.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct GaussianEvolution {
    pub states: Vec<GaussianState>,
    /// Wigner forms obtained by transport with `S_t`.
    pub forms: Vec<WignerForm>,
    pub widths: WidthSeries,
}

/// `G_t = S^{-T} G_0 S^{-1}` with the symplectic inverse of `S`.
pub fn transport_form(sample: &FlowSample, g0: &WignerForm) -> WignerForm {
    let s_inv = sample.s.symplectic_inverse();
    WignerForm::new_trusted(s_inv.transpose() * g0.matrix() * &s_inv)
}

fn shape_at(sample: &FlowSample, z0: &SiegelForm) -> Result<(SiegelForm, Complex64)> {
    let (num, den) = mobius_parts(&sample.s, z0)?;
    let det = den.determinant();
    let inv = den.try_inverse().ok_or(Error::Conditioning { condition: f64::INFINITY })?;
    Ok((SiegelForm::new(num * inv)?, det))
}

fn width_row(series: &mut WidthSeries, sample: &FlowSample, g: &WignerForm, g_mobius: &WignerForm, hbar: f64) {
    let (tpp, tqq) = g.block_traces();
    let tr = g.trace();
    series.times.push(sample.t);
    series.sigma.push(0.5 * hbar * tr);
    series.dx2.push(0.5 * hbar * tpp);
    series.dp2.push(0.5 * hbar * tqq);
    series.tr_g.push(tr);
    series.hs_s2.push(sample.s.matrix().norm_squared());
    let gap = hs_norm(&(g.matrix() - g_mobius.matrix())) / hs_norm(g.matrix()).max(1.0);
    series.dual_path_gap.push(gap);
}

fn check_shape(traj: &Trajectory, z0: &SiegelForm, hbar: f64) -> Result<()> {
    check_hbar(hbar)?;
    if z0.dim() != traj.model().dim() {
        return Err(Error::InvalidDimension(format!(
            "shape has d = {} but model `{}` has d = {}",
            z0.dim(),
            traj.model().name(),
            traj.model().dim()
        )));
    }
    Ok(())
}

/// Evolves a Gaussian with initial shape `z0` centered at the trajectory's
/// starting point, tracking shape, phase and widths at every sample.
pub fn propagate_gaussian(traj: &Trajectory, z0: &SiegelForm, hbar: f64) -> Result<GaussianEvolution> {
    check_shape(traj, z0, hbar)?;
    let g0 = wigner_form_from_siegel(z0)?;
    let mut states = Vec::with_capacity(traj.len());
    let mut forms = Vec::with_capacity(traj.len());
    let mut widths = WidthSeries::default();
    let mut branch = 0.0;
    let mut prev: Option<(f64, Complex64)> = None;
    for sample in traj.samples() {
        let (shape, det) = shape_at(sample, z0)?;
        match prev {
            Some((t_prev, det_prev)) => {
                let step = (det / det_prev).arg();
                if step.abs() > MAX_BRANCH_STEP {
                    return Err(Error::Resolution(format!(
                        "arg det(C Z0 + D) moved by {step:.3} rad between t = {t_prev} and t = {}; use a finer output grid",
                        sample.t
                    )));
                }
                branch += step;
            }
            None => branch = det.arg(),
        }
        prev = Some((sample.t, det));
        let phase = Complex64::from_polar(1.0, sample.w / hbar - 0.5 * branch);
        let g = transport_form(sample, &g0);
        let g_mobius = wigner_form_from_siegel(&shape)?;
        width_row(&mut widths, sample, &g, &g_mobius, hbar);
        states.push(GaussianState { hbar, center: sample.x.clone(), shape, phase });
        forms.push(g);
    }
    Ok(GaussianEvolution { states, forms, widths })
}

/// Width series alone; no phase tracking, so any output spacing is accepted.
pub fn transport_widths(traj: &Trajectory, z0: &SiegelForm, hbar: f64) -> Result<WidthSeries> {
    check_shape(traj, z0, hbar)?;
    let g0 = wigner_form_from_siegel(z0)?;
    let mut widths = WidthSeries::default();
    for sample in traj.samples() {
        let (shape, _) = shape_at(sample, z0)?;
        let g = transport_form(sample, &g0);
        let g_mobius = wigner_form_from_siegel(&shape)?;
        width_row(&mut widths, sample, &g, &g_mobius, hbar);
    }
    Ok(widths)
}

/// Standard deviation of the position density of a `d = 1` state.
pub fn position_spread(state: &GaussianState) -> f64 {
    let y = state.shape.matrix()[(0, 0)].im;
    (0.5 * state.hbar / y).sqrt()
}

fn require_1d(state: &GaussianState) -> Result<()> {
    if state.dim() != 1 {
        return Err(Error::InvalidDimension(format!(
            "wavefunction grids are one-dimensional, state has d = {}",
            state.dim()
        )));
    }
    Ok(())
}

fn raw_values(state: &GaussianState, x: &[f64]) -> Vec<Complex64> {
    let hbar = state.hbar;
    let p = state.center.p[0];
    let q = state.center.q[0];
    let z = state.shape.matrix()[(0, 0)];
    let amp = z.im.powf(0.25) * (PI * hbar).powf(-0.25);
    x.iter()
        .map(|&xi| {
            let dx = xi - q;
            let exponent = Complex64::i() / hbar * (p * dx + 0.5 * z * dx * dx);
            state.phase * amp * exponent.exp()
        })
        .collect()
}

/// Samples `ψ` on a uniform one-dimensional grid, rejecting grids that miss
/// a noticeable part of the state.
pub fn evaluate_wavefunction(state: &GaussianState, x: &[f64]) -> Result<Vec<Complex64>> {
    require_1d(state)?;
    if x.len() < 2 {
        return Err(Error::Coverage("grid needs at least two points".into()));
    }
    let dx = x[1] - x[0];
    let uniform = x.windows(2).all(|w| ((w[1] - w[0]) - dx).abs() <= 1e-9 * dx.abs().max(1e-300));
    if !(dx > 0.0) || !uniform {
        return Err(Error::InvalidArgument("wavefunction grid must be uniform and increasing".into()));
    }
    let q = state.center.q[0];
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let sd = position_spread(state);
    if q < lo || q > hi {
        return Err(Error::Coverage(format!("center q = {q} lies outside [{lo}, {hi}]")));
    }
    if hi - lo < 8.0 * sd {
        return Err(Error::Coverage(format!(
            "grid extent {:.3e} is below 8 standard deviations ({:.3e})",
            hi - lo,
            8.0 * sd
        )));
    }
    if dx > sd {
        return Err(Error::Coverage(format!("grid spacing {dx:.3e} exceeds the position spread {sd:.3e}")));
    }
    let psi = raw_values(state, x);
    let norm: f64 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
    if 1.0 - norm > COVERAGE_DEFICIT {
        return Err(Error::Coverage(format!("grid captures only {norm:.6} of the norm")));
    }
    Ok(psi)
}

/// `(πħ)^{-d} exp(−(Y−X)ᵀ G (Y−X)/ħ)`.
pub fn wigner_function(state: &GaussianState, y: &PhaseSpacePoint) -> f64 {
    let g = state.wigner_form();
    let diff = y.to_stacked() - state.center.to_stacked();
    let quad = (diff.transpose() * g.matrix() * &diff)[(0, 0)];
    let d = state.dim() as i32;
    (PI * state.hbar).powi(-d) * (-quad / state.hbar).exp()
}

/// `Δ(t)` = oracle width minus semiclassical width, pointwise.
pub fn width_observable_error(series: &WidthSeries, oracle_times: &[f64], oracle_sigma: &[f64]) -> Result<Vec<f64>> {
    if oracle_times.len() != oracle_sigma.len() {
        return Err(Error::GridMismatch(format!(
            "oracle series has {} times but {} widths",
            oracle_times.len(),
            oracle_sigma.len()
        )));
    }
    if oracle_times.len() != series.len() {
        return Err(Error::GridMismatch(format!(
            "semiclassical series has {} samples, oracle has {}",
            series.len(),
            oracle_times.len()
        )));
    }
    for (a, b) in series.times.iter().zip(oracle_times) {
        if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("time {a} does not match oracle time {b}")));
        }
    }
    Ok(oracle_sigma.iter().zip(&series.sigma).map(|(o, s)| o - s).collect())
}

/// Shape and unit phase of the initial state, for callers that build their own grid.
pub fn initial_state(traj: &Trajectory, z0: &SiegelForm, hbar: f64) -> Result<GaussianState> {
    check_shape(traj, z0, hbar)?;
    GaussianState::new(hbar, traj.first().x.clone(), z0.clone())
}
