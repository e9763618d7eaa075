//! Floquet analysis of the variational equation along a trajectory whose
//! Hessian `H''(X_t)` is periodic.
//!
//! Exponents are `ln μ / T` on the principal branch, so they are only defined
//! modulo `2πi / T`. Multipliers that agree to [`CLUSTER_TOL`] are treated as
//! one repeated multiplier: a Jordan block perturbed by integration error
//! splits its eigenvalue by roughly the square root of that error, which would
//! otherwise push a parabolic monodromy off the unit circle.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_integer::Integer;

use crate::error::{Error, Result};
use crate::flow::{integrate_flow_times, Trajectory};
use crate::gaussian::{transport_widths, WidthSeries};
use crate::symplectic::{hs_norm, mobius_transform, SiegelForm, SymplecticMatrix};

/// Deviation of `|μ|` from one above which a multiplier counts as hyperbolic.
pub const TOL_STAB: f64 = 1e-7;

/// Relative singular-value threshold for the numerical rank of `M − μI`.
pub const RANK_THRESHOLD: f64 = 1e-6;

/// Multipliers closer than this are merged into one repeated multiplier.
pub const CLUSTER_TOL: f64 = 1e-4;

/// Largest revival multiple reported; beyond it there is no practical revival.
pub const REVIVAL_CAP: u64 = 1_000_000;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeriodDetection {
    Period(f64),
    /// `H''(X_t)` does not change along the trajectory.
    ConstantHessian,
    NotFound,
}

/// Minimizes a unimodal function on `[a, b]` by golden-section search.
fn golden_min<F>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

struct HessianGrid {
    times: Vec<f64>,
    hessians: Vec<DMatrix<f64>>,
    dt: f64,
}

fn hessian_grid(traj: &Trajectory) -> Result<HessianGrid> {
    let samples = traj.samples();
    if samples.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "period detection needs at least 10 samples, trajectory has {}",
            samples.len()
        )));
    }
    let dt = samples[1].t - samples[0].t;
    // a shorter closing interval is not part of the uniform grid
    let n = samples
        .windows(2)
        .position(|w| ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt)
        .map_or(samples.len(), |k| k + 1);
    let model = traj.model();
    let times = samples[..n].iter().map(|s| s.t - samples[0].t).collect();
    let hessians = samples[..n].iter().map(|s| model.hessian(&s.stacked())).collect();
    Ok(HessianGrid { times, hessians, dt })
}

/// `sup_k ‖H''(X(t_k + τ)) − H''(X(t_k))‖_HS` over all grid points with
/// `t_k + τ` inside the window, re-integrating from the exact state at `τ`.
fn shifted_mismatch(traj: &Trajectory, grid: &HessianGrid, tau: f64) -> Result<f64> {
    let horizon = *grid.times.last().expect("non-empty grid");
    let n = grid.times.partition_point(|t| t + tau <= horizon * (1.0 + 1e-12));
    if n < 2 {
        return Err(Error::InsufficientData(format!("shift {tau} leaves no overlap in the window")));
    }
    let start = traj.sample_at(traj.first().t + tau)?;
    let shifted = integrate_flow_times(traj.model(), &start.x, &grid.times[..n], &traj.options())?;
    let model = traj.model();
    let mut worst: f64 = 0.0;
    for (s, h) in shifted.samples().iter().zip(&grid.hessians) {
        worst = worst.max(hs_norm(&(model.hessian(&s.stacked()) - h)));
    }
    Ok(worst)
}

fn refine_period(traj: &Trajectory, grid: &HessianGrid, lag: usize) -> Result<(f64, f64)> {
    let center = lag as f64 * grid.dt;
    let tol = 1e-12 * center.max(1.0);
    golden_min(center - grid.dt, center + grid.dt, tol, |tau| shifted_mismatch(traj, grid, tau))
}

/// Smallest shift `T` with `sup_t ‖H''(X_{t+T}) − H''(X_t)‖_HS < tol` over the
/// sampled window.
///
/// Grid lags are screened first, then each candidate is refined by
/// golden-section search on the exact-time mismatch. Candidates must fit three
/// times into the window.
pub fn detect_hessian_period(traj: &Trajectory, tol: f64) -> Result<PeriodDetection> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("period tolerance must be positive, got {tol}")));
    }
    let grid = hessian_grid(traj)?;
    let h = &grid.hessians;
    let n = h.len();
    if h.iter().all(|m| hs_norm(&(m - &h[0])) < tol) {
        return Ok(PeriodDetection::ConstantHessian);
    }
    let step_var = h.windows(2).map(|w| hs_norm(&(&w[1] - &w[0]))).fold(0.0, f64::max);
    let threshold = tol + 2.0 * step_var;
    let max_lag = (n - 1) / 3;
    if max_lag < 3 {
        return Err(Error::InsufficientData("window too short for period detection".into()));
    }
    let grid_mismatch: Vec<f64> = (0..=max_lag + 1)
        .map(|j| (0..n - j).map(|k| hs_norm(&(&h[k + j] - &h[k]))).fold(0.0, f64::max))
        .collect();
    // skip the initial rise of the mismatch away from lag zero
    let Some(rise) = (1..=max_lag).find(|&j| grid_mismatch[j] > threshold) else {
        return Ok(PeriodDetection::NotFound);
    };
    let candidates: Vec<usize> = (rise + 1..=max_lag)
        .filter(|&j| {
            grid_mismatch[j] < threshold
                && grid_mismatch[j] <= grid_mismatch[j - 1]
                && grid_mismatch[j] <= grid_mismatch[j + 1]
        })
        .collect();

    let mut found: Option<(f64, f64)> = None;
    for &j in &candidates {
        let tau = j as f64 * grid.dt;
        if let Some((t1, _)) = found {
            if tau >= 2.0 * t1 - 2.0 * grid.dt {
                break;
            }
            if tau <= t1 + 2.0 * grid.dt {
                continue;
            }
            let (t2, m2) = refine_period(traj, &grid, j)?;
            if m2 < tol {
                return Err(Error::AmbiguousPeriod { candidates: vec![t1, t2] });
            }
            continue;
        }
        let (t, m) = refine_period(traj, &grid, j)?;
        if m < tol {
            found = Some((t, m));
        }
    }
    Ok(match found {
        Some((t, _)) => PeriodDetection::Period(t),
        None => PeriodDetection::NotFound,
    })
}

/// Flow differential at exactly `t = period`. With `extend` the trajectory
/// is integrated past its end when needed.
pub fn monodromy(traj: &Trajectory, period: f64, extend: bool) -> Result<SymplecticMatrix> {
    check_period(period)?;
    let t = traj.first().t + period;
    if t > traj.t_end() * (1.0 + 1e-12) && !extend {
        return Err(Error::Coverage(format!(
            "period {period} exceeds the trajectory span {}",
            traj.t_end() - traj.first().t
        )));
    }
    let sample = traj.sample_at(t)?;
    let m = sample.s.into_matrix();
    let tol = 1e-6 * m.norm_squared().max(1.0);
    SymplecticMatrix::new(m, tol)
}

fn check_period(period: f64) -> Result<()> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Elliptic => "elliptic",
            Stability::Parabolic => "parabolic",
            Stability::Hyperbolic => "hyperbolic",
        }
    }
}

/// Multipliers merged by [`CLUSTER_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierCluster {
    pub mean: Complex64,
    pub multiplicity: usize,
    /// Numerical nullity of `M − mean·I`.
    pub geometric_multiplicity: usize,
}

impl MultiplierCluster {
    pub fn is_defective(&self) -> bool {
        self.geometric_multiplicity < self.multiplicity
    }
}

#[derive(Debug, Clone)]
pub struct FloquetSpectrum {
    pub period: f64,
    /// Eigenvalues of the monodromy matrix as computed.
    pub multipliers: Vec<Complex64>,
    /// `ln μ / T`; multipliers classified on the unit circle have their real part set to zero.
    pub exponents: Vec<Complex64>,
    pub clusters: Vec<MultiplierCluster>,
    pub stability: Stability,
    pub nu: f64,
    pub orthogonal_monodromy: bool,
    /// `max_i min_j |μ_i − 1/μ_j|`.
    pub pairing_defect: f64,
}

fn cluster_multipliers(m: &DMatrix<f64>, mu: &[Complex64]) -> Vec<(MultiplierCluster, Vec<usize>)> {
    let mut assigned = vec![false; mu.len()];
    let mut out = Vec::new();
    let scale = hs_norm(m).max(1.0);
    let n = m.nrows();
    for i in 0..mu.len() {
        if assigned[i] {
            continue;
        }
        let members: Vec<usize> = (i..mu.len())
            .filter(|&j| !assigned[j] && (mu[j] - mu[i]).norm() < CLUSTER_TOL * mu[i].norm().max(1.0))
            .collect();
        for &j in &members {
            assigned[j] = true;
        }
        let mean = members.iter().map(|&j| mu[j]).sum::<Complex64>() / members.len() as f64;
        let shifted = m.map(|v| Complex64::new(v, 0.0)) - DMatrix::<Complex64>::identity(n, n) * mean;
        let sv = shifted.singular_values();
        let nullity = sv.iter().filter(|&&s| s < RANK_THRESHOLD * scale).count();
        out.push((
            MultiplierCluster { mean, multiplicity: members.len(), geometric_multiplicity: nullity.min(members.len()) },
            members,
        ));
    }
    out
}

/// Multipliers, exponents and stability class of a monodromy matrix.
pub fn floquet_spectrum(m: &SymplecticMatrix, period: f64, tol_stab: f64) -> Result<FloquetSpectrum> {
    check_period(period)?;
    let mat = m.matrix();
    let mu: Vec<Complex64> = mat.complex_eigenvalues().iter().copied().collect();
    let clusters = cluster_multipliers(mat, &mu);
    let mut exponents = vec![Complex64::new(0.0, 0.0); mu.len()];
    let mut hyperbolic = false;
    let mut defective = false;
    for (cluster, members) in &clusters {
        let off_circle = (cluster.mean.norm() - 1.0).abs() > tol_stab;
        hyperbolic |= off_circle;
        defective |= !off_circle && cluster.is_defective();
        for &j in members {
            let mut l = mu[j].ln() / period;
            if !off_circle {
                l.re = 0.0;
            }
            exponents[j] = l;
        }
    }
    let stability = if hyperbolic {
        Stability::Hyperbolic
    } else if defective {
        Stability::Parabolic
    } else {
        Stability::Elliptic
    };
    let nu = exponents.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let n = mat.nrows();
    let orthogonal_monodromy = hs_norm(&(mat.transpose() * mat - DMatrix::identity(n, n))) < 1e-7;
    let pairing_defect = mu
        .iter()
        .map(|a| mu.iter().map(|b| (a - b.inv()).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(FloquetSpectrum {
        period,
        multipliers: mu,
        exponents,
        clusters: clusters.into_iter().map(|(c, _)| c).collect(),
        stability,
        nu,
        orthogonal_monodromy,
        pairing_defect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallBound {
    pub kappa: f64,
    /// `K = e^κ`.
    pub k_factor: f64,
    /// `sup_{t∈[0,T]} ‖J H''(X_t)‖_HS`.
    pub sup_norm: f64,
    pub t_sup: f64,
}

/// `κ = 2T sup_{t∈[0,T]} ‖J H''(X_t)‖_HS`, refined around the best sample.
pub fn gronwall_bound(traj: &Trajectory, period: f64) -> Result<GronwallBound> {
    check_period(period)?;
    let t0 = traj.first().t;
    if t0 + period > traj.t_end() * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::Coverage(format!("trajectory does not cover one period {period}")));
    }
    let model = traj.model();
    // ‖J A‖_HS = ‖A‖_HS because J is orthogonal
    let norm_at = |x: &[f64]| hs_norm(&model.hessian(x));
    let inside: Vec<(f64, f64)> = traj
        .samples()
        .iter()
        .filter(|s| s.t - t0 <= period * (1.0 + 1e-12))
        .map(|s| (s.t, norm_at(&s.stacked())))
        .collect();
    if inside.len() < 50 {
        return Err(Error::Resolution(format!(
            "only {} samples in one period; at least 50 are needed for the Grönwall supremum",
            inside.len()
        )));
    }
    let (k_best, &(t_best, n_best)) = inside
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty");
    let lo = inside[k_best.saturating_sub(1)].0;
    let hi = inside[(k_best + 1).min(inside.len() - 1)].0;
    let (mut sup_norm, mut t_sup) = (n_best, t_best);
    if hi > lo {
        let (t, neg) = golden_min(lo, hi, 1e-10 * (hi - lo).max(1e-300), |t| {
            Ok(-norm_at(&traj.sample_at(t)?.stacked()))
        })?;
        if -neg > sup_norm {
            sup_norm = -neg;
            t_sup = t;
        }
    }
    let kappa = 2.0 * period * sup_norm;
    Ok(GronwallBound { kappa, k_factor: kappa.exp(), sup_norm, t_sup })
}

/// Widths at `t = kT`, `k = 0..=k_max`, from a trajectory integrated to hit
/// each multiple exactly.
pub fn widths_at_multiples(
    traj: &Trajectory,
    z0: &SiegelForm,
    hbar: f64,
    period: f64,
    k_max: usize,
) -> Result<WidthSeries> {
    let stroboscopic = stroboscopic_trajectory(traj, period, k_max)?;
    transport_widths(&stroboscopic, z0, hbar)
}

fn stroboscopic_trajectory(traj: &Trajectory, period: f64, k_max: usize) -> Result<Trajectory> {
    check_period(period)?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("at least one period is required".into()));
    }
    let t0 = traj.first().t;
    let times: Vec<f64> = (0..=k_max).map(|k| t0 + k as f64 * period).collect();
    Ok(integrate_flow_times(traj.model(), &traj.first().x, &times, &traj.options())?)
}

/// `Z_{kT}` for `k = 0..=n_max`.
pub fn shapes_at_multiples(traj: &Trajectory, z0: &SiegelForm, period: f64, n_max: usize) -> Result<Vec<SiegelForm>> {
    let stroboscopic = stroboscopic_trajectory(traj, period, n_max)?;
    stroboscopic.samples().iter().map(|s| mobius_transform(&s.s, z0)).collect()
}

#[derive(Debug, Clone)]
pub struct WidthRecurrence {
    /// `(k, |σ_{kT} − σ_0| / σ_0)` for `k = 1..=k_max`.
    pub deviations: Vec<(usize, f64)>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Relative width deviations at multiples of `period`, read from a series
/// whose time grid contains every multiple.
pub fn check_width_recurrence(widths: &WidthSeries, period: f64, k_max: usize, tol_rec: f64) -> Result<WidthRecurrence> {
    check_period(period)?;
    if widths.is_empty() {
        return Err(Error::Coverage("empty width series".into()));
    }
    let t0 = widths.times[0];
    let sigma0 = widths.sigma[0];
    let mut deviations = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let target = t0 + k as f64 * period;
        let slack = 1e-9 * target.abs().max(1.0);
        let idx = widths.times.partition_point(|t| *t < target - slack);
        if idx >= widths.len() {
            return Err(Error::Coverage(format!(
                "width series ends at {} before {k} periods ({target})",
                widths.times[widths.len() - 1]
            )));
        }
        if (widths.times[idx] - target).abs() > slack {
            return Err(Error::Resolution(format!(
                "t = {target} ({k} periods) is not on the output grid; sample at multiples of the period"
            )));
        }
        deviations.push((k, (widths.sigma[idx] - sigma0).abs() / sigma0));
    }
    let max_deviation = deviations.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(WidthRecurrence { deviations, max_deviation, pass: max_deviation < tol_rec })
}

/// Best rational approximation `p/q` of `x` among its continued-fraction
/// convergents with `q ≤ q_max` and `|x − p/q| < tol`.
pub fn rational_approximation(x: f64, tol: f64, q_max: u64) -> Option<(i64, u64)> {
    let (mut h_prev, mut h) = (1i64, x.floor() as i64);
    let (mut k_prev, mut k) = (0u64, 1u64);
    let mut rest = x - x.floor();
    loop {
        if (x - h as f64 / k as f64).abs() < tol {
            return Some((h, k));
        }
        if rest < 1e-15 {
            return None;
        }
        let inv = 1.0 / rest;
        let a = inv.floor();
        rest = inv - a;
        if a > q_max as f64 {
            return None;
        }
        let a = a as u64;
        let k_next = a.checked_mul(k)?.checked_add(k_prev)?;
        if k_next > q_max {
            return None;
        }
        let h_next = (a as i64).checked_mul(h)?.checked_add(h_prev)?;
        (h_prev, h) = (h, h_next);
        (k_prev, k) = (k, k_next);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Revival {
    pub n_r: u64,
    pub t_r: f64,
    /// Rotation numbers `θ_i ∈ [0, 1)` with their approximations `p_i/q_i`.
    pub fractions: Vec<(f64, i64, u64)>,
}

/// Predicts the smallest multiple of the period after which every multiplier
/// returns to one, from rational approximations of the rotation numbers.
pub fn revival_predictor(spectrum: &FloquetSpectrum, tol_rat: f64, n_max: u64) -> Result<Option<Revival>> {
    if spectrum.stability != Stability::Elliptic {
        return Err(Error::Domain(format!(
            "revival prediction needs an elliptic monodromy, got {}",
            spectrum.stability.as_str()
        )));
    }
    let mut fractions = Vec::with_capacity(spectrum.multipliers.len());
    let mut n_r: u64 = 1;
    for mu in &spectrum.multipliers {
        let theta = (mu.arg() / std::f64::consts::TAU).rem_euclid(1.0);
        let Some((p, q)) = rational_approximation(theta, tol_rat, n_max) else {
            return Ok(None);
        };
        n_r = n_r.lcm(&q);
        if n_r > REVIVAL_CAP {
            return Ok(None);
        }
        fractions.push((theta, p, q));
    }
    Ok(Some(Revival { n_r, t_r: n_r as f64 * spectrum.period, fractions }))
}

/// Smallest `n ∈ 1..=n_max` with `‖Z_{nT} − Z_0‖ < eps`.
pub fn recurrence_search(shapes: &[SiegelForm], eps: f64, n_max: usize) -> Result<Option<usize>> {
    if shapes.len() <= n_max {
        return Err(Error::Coverage(format!(
            "shape series covers {} periods, {n_max} requested",
            shapes.len().saturating_sub(1)
        )));
    }
    Ok((1..=n_max).find(|&n| shapes[n].distance(&shapes[0]) < eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EhrenfestRegime {
    Logarithmic,
    Algebraic,
}

impl EhrenfestRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            EhrenfestRegime::Logarithmic => "logarithmic",
            EhrenfestRegime::Algebraic => "algebraic",
        }
    }
}

/// `|ln ħ| / (6ν)` for hyperbolic monodromy, `ħ^{-1/2}` otherwise; the
/// proportionality constant is fixed to one by convention.
pub fn ehrenfest_time(hbar: f64, spectrum: &FloquetSpectrum) -> Result<(f64, EhrenfestRegime)> {
    if !(hbar > 0.0 && hbar < 1.0) {
        return Err(Error::InvalidArgument(format!("hbar must lie in (0, 1), got {hbar}")));
    }
    Ok(ehrenfest_for_rate(hbar, spectrum.stability, spectrum.nu))
}

pub(crate) fn ehrenfest_for_rate(hbar: f64, stability: Stability, nu: f64) -> (f64, EhrenfestRegime) {
    if stability == Stability::Hyperbolic && nu > 0.0 {
        (hbar.ln().abs() / (6.0 * nu), EhrenfestRegime::Logarithmic)
    } else {
        (hbar.powf(-0.5), EhrenfestRegime::Algebraic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetOptions {
    pub period_tol: f64,
    pub tol_stab: f64,
    pub tol_rat: f64,
    pub n_max: u64,
    /// Integrate past the trajectory end when the period requires it.
    pub extend: bool,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        Self { period_tol: 1e-6, tol_stab: TOL_STAB, tol_rat: 1e-6, n_max: 1000, extend: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodSource {
    Detected,
    Supplied,
}

#[derive(Debug, Clone)]
pub struct FloquetAnalysis {
    pub period: f64,
    pub period_source: PeriodSource,
    pub monodromy: SymplecticMatrix,
    pub spectrum: FloquetSpectrum,
    pub gronwall: GronwallBound,
    /// Present only for elliptic monodromy with commensurate rotation numbers.
    pub revival: Option<Revival>,
}

/// Full analysis: the period (detected unless supplied), monodromy, spectrum,
/// Grönwall constant and revival prediction.
pub fn analyze(traj: &Trajectory, supplied_period: Option<f64>, opts: &FloquetOptions) -> Result<FloquetAnalysis> {
    let (period, period_source) = match supplied_period {
        Some(t) => {
            check_period(t)?;
            (t, PeriodSource::Supplied)
        }
        None => match detect_hessian_period(traj, opts.period_tol)? {
            PeriodDetection::Period(t) => (t, PeriodSource::Detected),
            PeriodDetection::ConstantHessian => {
                return Err(Error::PeriodRequired(format!(
                    "model `{}` has a constant Hessian along this trajectory, so there is no period to detect; \
                     supply one explicitly",
                    traj.model().name()
                )))
            }
            PeriodDetection::NotFound => {
                return Err(Error::InsufficientData(
                    "no Hessian period found within a third of the window; extend t_end or supply a period".into(),
                ))
            }
        },
    };
    let monodromy = monodromy(traj, period, opts.extend)?;
    let spectrum = floquet_spectrum(&monodromy, period, opts.tol_stab)?;
    let gronwall = gronwall_bound(traj, period)?;
    let revival = match spectrum.stability {
        Stability::Elliptic => revival_predictor(&spectrum, opts.tol_rat, opts.n_max)?,
        _ => None,
    };
    Ok(FloquetAnalysis { period, period_source, monodromy, spectrum, gronwall, revival })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn spectrum_of(m: DMatrix<f64>, t: f64) -> FloquetSpectrum {
        floquet_spectrum(&SymplecticMatrix::new(m, 1e-10).unwrap(), t, TOL_STAB).unwrap()
    }

    #[test]
    fn identity_is_elliptic_and_orthogonal() {
        let s = spectrum_of(DMatrix::identity(2, 2), 1.0);
        assert_eq!(s.stability, Stability::Elliptic);
        assert!(s.orthogonal_monodromy);
        assert!(s.multipliers.iter().all(|m| (m - Complex64::new(1.0, 0.0)).norm() < 1e-14));
        assert_eq!(s.nu, 0.0);
    }

    #[test]
    fn shear_is_parabolic() {
        let s = spectrum_of(dmatrix![1.0, 0.0; 2.5, 1.0], 2.5);
        assert_eq!(s.stability, Stability::Parabolic);
        assert_eq!(s.nu, 0.0);
        assert!(!s.orthogonal_monodromy);
    }

    #[test]
    fn hyperbolic_rotation() {
        let (c, sh) = (1f64.cosh(), 1f64.sinh());
        let s = spectrum_of(dmatrix![c, sh; sh, c], 1.0);
        assert_eq!(s.stability, Stability::Hyperbolic);
        assert!((s.nu - 1.0).abs() < 1e-12);
        let mut moduli: Vec<f64> = s.multipliers.iter().map(|m| m.re).collect();
        moduli.sort_by(f64::total_cmp);
        assert!((moduli[0] - (-1f64).exp()).abs() < 1e-12);
        assert!((moduli[1] - 1f64.exp()).abs() < 1e-12);
        assert!(s.pairing_defect < 1e-12);
    }

    #[test]
    fn perturbed_jordan_block_stays_parabolic() {
        // −1 Jordan block with a 1e-11 perturbation splits its eigenvalues by ~3e-6
        let s = spectrum_of(dmatrix![-1.0, 1e-11; 0.7, -1.0], 1.0);
        assert_eq!(s.stability, Stability::Parabolic);
    }

    #[test]
    fn rational_approximations() {
        assert_eq!(rational_approximation(0.5, 1e-6, 1000), Some((1, 2)));
        assert_eq!(rational_approximation(0.0, 1e-6, 1000), Some((0, 1)));
        assert_eq!(rational_approximation(1.0 - 1e-12, 1e-6, 1000), Some((1, 1)));
        assert_eq!(rational_approximation(1.0 / 3.0, 1e-9, 1000), Some((1, 3)));
        let frac_sqrt2 = std::f64::consts::SQRT_2 / 2.0;
        assert_eq!(rational_approximation(frac_sqrt2, 1e-6, 1000), None);
        assert_eq!(rational_approximation(frac_sqrt2, 1e-5, 1000), Some((169, 239)));
        assert_eq!(rational_approximation(frac_sqrt2, 2e-6, 1000), Some((408, 577)));
    }

    #[test]
    fn ehrenfest_examples() {
        let hyper = (Stability::Hyperbolic, 1.0);
        let (t, r) = ehrenfest_for_rate((-6.0f64).exp(), hyper.0, hyper.1);
        assert!((t - 1.0).abs() < 1e-12);
        assert_eq!(r, EhrenfestRegime::Logarithmic);
        let (t, r) = ehrenfest_for_rate(0.01, Stability::Elliptic, 0.0);
        assert!((t - 10.0).abs() < 1e-12);
        assert_eq!(r.as_str(), "algebraic");
        let (t2, _) = ehrenfest_for_rate(0.005, Stability::Parabolic, 0.0);
        assert!((t2 / t - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_v_shaped_minimum() {
        let (x, fx) = golden_min(0.0, 2.0, 1e-13, |x| Ok((x - 1.234_567_890_1f64).abs())).unwrap();
        assert!((x - 1.234_567_890_1).abs() < 1e-12);
        assert!(fx < 1e-12);
    }
}
