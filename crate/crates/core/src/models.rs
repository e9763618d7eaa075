//! Catalog of classical symbols `H(p, q)` with analytic gradient and Hessian.
//!
//! Gradients are ordered `(∂_p H, ∂_q H)` to match the `(p, q)` phase-space
//! layout. Every member grows at most polynomially together with all of its
//! derivatives, which is not checked at runtime.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symplectic::PhaseSpacePoint;

/// Names accepted by [`make_model`].
pub const CATALOG: [&str; 7] = [
    "harmonic",
    "free",
    "inverted",
    "pendulum",
    "wannier_stark",
    "quartic",
    "aniso_harmonic_2d",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `p²/2 + ω² q²/2`
    Harmonic { omega: f64 },
    /// `p²/2`
    Free,
    /// `p²/2 − λ² q²/2`
    Inverted { lambda: f64 },
    /// `p²/2 + V₀ (1 − cos q)`
    Pendulum { v0: f64 },
    /// `p²/2 + v cos q + ε q`
    WannierStark { v: f64, epsilon: f64 },
    /// `p²/2 + q⁴/4`
    Quartic,
    /// `|p|²/2 + (ω₁² q₁² + ω₂² q₂²)/2`
    AnisoHarmonic2d { omega1: f64, omega2: f64 },
}

/// A catalog Hamiltonian together with the parameters it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    kind: ModelKind,
    params: BTreeMap<String, f64>,
}

fn expected_params(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "harmonic" => &["omega"],
        "free" | "quartic" => &[],
        "inverted" => &["lambda"],
        "pendulum" => &["v0"],
        "wannier_stark" => &["v", "epsilon"],
        "aniso_harmonic_2d" => &["omega1", "omega2"],
        _ => return None,
    })
}

/// Builds a catalog model from its name and named parameters.
pub fn make_model(name: &str, params: &BTreeMap<String, f64>) -> Result<HamiltonianModel> {
    let expected = expected_params(name).ok_or_else(|| Error::UnknownModel(name.to_string()))?;
    let invalid = |reason: String| Error::InvalidParameter { model: name.to_string(), reason };
    if let Some(extra) = params.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(invalid(format!("unexpected parameter `{extra}`")));
    }
    let get = |key: &str| -> Result<f64> {
        let v = *params.get(key).ok_or_else(|| invalid(format!("missing parameter `{key}`")))?;
        if !v.is_finite() {
            return Err(invalid(format!("parameter `{key}` is not finite")));
        }
        Ok(v)
    };
    let positive = |key: &str| -> Result<f64> {
        let v = get(key)?;
        if v <= 0.0 {
            return Err(invalid(format!("parameter `{key}` must be positive, got {v}")));
        }
        Ok(v)
    };
    let kind = match name {
        "harmonic" => ModelKind::Harmonic { omega: positive("omega")? },
        "free" => ModelKind::Free,
        "inverted" => ModelKind::Inverted { lambda: positive("lambda")? },
        "pendulum" => ModelKind::Pendulum { v0: positive("v0")? },
        "wannier_stark" => ModelKind::WannierStark { v: get("v")?, epsilon: get("epsilon")? },
        "quartic" => ModelKind::Quartic,
        "aniso_harmonic_2d" => ModelKind::AnisoHarmonic2d {
            omega1: positive("omega1")?,
            omega2: positive("omega2")?,
        },
        _ => unreachable!(),
    };
    Ok(HamiltonianModel { kind, params: params.clone() })
}

impl HamiltonianModel {
    /// Shorthand for [`make_model`] with `(key, value)` pairs.
    pub fn from_pairs(name: &str, pairs: &[(&str, f64)]) -> Result<Self> {
        let params = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        make_model(name, &params)
    }

    pub fn harmonic(omega: f64) -> Result<Self> {
        Self::from_pairs("harmonic", &[("omega", omega)])
    }

    pub fn free() -> Self {
        Self::from_pairs("free", &[]).expect("free particle has no parameters")
    }

    pub fn inverted(lambda: f64) -> Result<Self> {
        Self::from_pairs("inverted", &[("lambda", lambda)])
    }

    pub fn pendulum(v0: f64) -> Result<Self> {
        Self::from_pairs("pendulum", &[("v0", v0)])
    }

    pub fn wannier_stark(v: f64, epsilon: f64) -> Result<Self> {
        Self::from_pairs("wannier_stark", &[("v", v), ("epsilon", epsilon)])
    }

    pub fn quartic() -> Self {
        Self::from_pairs("quartic", &[]).expect("quartic oscillator has no parameters")
    }

    pub fn aniso_harmonic_2d(omega1: f64, omega2: f64) -> Result<Self> {
        Self::from_pairs("aniso_harmonic_2d", &[("omega1", omega1), ("omega2", omega2)])
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Harmonic { .. } => "harmonic",
            ModelKind::Free => "free",
            ModelKind::Inverted { .. } => "inverted",
            ModelKind::Pendulum { .. } => "pendulum",
            ModelKind::WannierStark { .. } => "wannier_stark",
            ModelKind::Quartic => "quartic",
            ModelKind::AnisoHarmonic2d { .. } => "aniso_harmonic_2d",
        }
    }

    /// Configuration-space dimension `d`.
    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::AnisoHarmonic2d { .. } => 2,
            _ => 1,
        }
    }

    /// Potential `V(q)` for `d = 1` models of the form `p²/2 + V(q)`.
    ///
    /// Every one-dimensional catalog member has this form.
    pub fn potential(&self, q: f64) -> Option<f64> {
        Some(match self.kind {
            ModelKind::Harmonic { omega } => 0.5 * omega * omega * q * q,
            ModelKind::Free => 0.0,
            ModelKind::Inverted { lambda } => -0.5 * lambda * lambda * q * q,
            ModelKind::Pendulum { v0 } => v0 * (1.0 - q.cos()),
            ModelKind::WannierStark { v, epsilon } => v * q.cos() + epsilon * q,
            ModelKind::Quartic => 0.25 * q.powi(4),
            ModelKind::AnisoHarmonic2d { .. } => return None,
        })
    }

    /// Whether the quantum oracle can propagate this model.
    pub fn is_split_1d(&self) -> bool {
        self.dim() == 1
    }

    fn check_len(&self, x: &[f64]) {
        assert_eq!(x.len(), 2 * self.dim(), "phase-space vector has wrong length for {}", self.name());
    }

    /// `H(X)` for a stacked `(p, q)` vector.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.check_len(x);
        match self.kind {
            ModelKind::AnisoHarmonic2d { omega1, omega2 } => {
                let (p1, p2, q1, q2) = (x[0], x[1], x[2], x[3]);
                0.5 * (p1 * p1 + p2 * p2) + 0.5 * (omega1 * omega1 * q1 * q1 + omega2 * omega2 * q2 * q2)
            }
            _ => 0.5 * x[0] * x[0] + self.potential(x[1]).expect("one-dimensional model"),
        }
    }

    /// `H'(X) = (∂_p H, ∂_q H)`.
    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.check_len(x);
        match self.kind {
            ModelKind::AnisoHarmonic2d { omega1, omega2 } => DVector::from_vec(vec![
                x[0],
                x[1],
                omega1 * omega1 * x[2],
                omega2 * omega2 * x[3],
            ]),
            _ => DVector::from_vec(vec![x[0], self.potential_derivative(x[1])]),
        }
    }

    /// Symmetric Hessian `H''(X)`.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.check_len(x);
        match self.kind {
            ModelKind::AnisoHarmonic2d { omega1, omega2 } => {
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, omega1 * omega1, omega2 * omega2]))
            }
            _ => DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, self.potential_curvature(x[1])])),
        }
    }

    fn potential_derivative(&self, q: f64) -> f64 {
        match self.kind {
            ModelKind::Harmonic { omega } => omega * omega * q,
            ModelKind::Free => 0.0,
            ModelKind::Inverted { lambda } => -lambda * lambda * q,
            ModelKind::Pendulum { v0 } => v0 * q.sin(),
            ModelKind::WannierStark { v, epsilon } => -v * q.sin() + epsilon,
            ModelKind::Quartic => q.powi(3),
            ModelKind::AnisoHarmonic2d { .. } => unreachable!(),
        }
    }

    fn potential_curvature(&self, q: f64) -> f64 {
        match self.kind {
            ModelKind::Harmonic { omega } => omega * omega,
            ModelKind::Free => 0.0,
            ModelKind::Inverted { lambda } => -lambda * lambda,
            ModelKind::Pendulum { v0 } => v0 * q.cos(),
            ModelKind::WannierStark { v, .. } => -v * q.cos(),
            ModelKind::Quartic => 3.0 * q * q,
            ModelKind::AnisoHarmonic2d { .. } => unreachable!(),
        }
    }

    pub fn energy(&self, x: &PhaseSpacePoint) -> f64 {
        self.value(x.to_stacked().as_slice())
    }
}

impl fmt::Display for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        if !self.params.is_empty() {
            let list: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", list.join(", "))?;
        }
        Ok(())
    }
}

/// Largest relative discrepancies between analytic and central-difference derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifferenceReport {
    pub gradient_error: f64,
    pub hessian_error: f64,
}

/// Compares `H'` and `H''` against central differences of step `h`.
///
/// Each component error is `|analytic − numeric| / (1 + |analytic|)`.
pub fn finite_difference_check(model: &HamiltonianModel, x: &PhaseSpacePoint, h: f64) -> FiniteDifferenceReport {
    let x0 = x.to_stacked();
    let n = x0.len();
    let grad = model.gradient(x0.as_slice());
    let hess = model.hessian(x0.as_slice());
    let shifted = |i: usize, delta: f64| {
        let mut y = x0.clone();
        y[i] += delta;
        y
    };
    let rel = |analytic: f64, numeric: f64| (analytic - numeric).abs() / (1.0 + analytic.abs());

    let mut gradient_error: f64 = 0.0;
    let mut hessian_error: f64 = 0.0;
    for i in 0..n {
        let plus = shifted(i, h);
        let minus = shifted(i, -h);
        let numeric = (model.value(plus.as_slice()) - model.value(minus.as_slice())) / (2.0 * h);
        gradient_error = gradient_error.max(rel(grad[i], numeric));

        let dg = (model.gradient(plus.as_slice()) - model.gradient(minus.as_slice())) / (2.0 * h);
        for j in 0..n {
            hessian_error = hessian_error.max(rel(hess[(j, i)], dg[j]));
        }
    }
    FiniteDifferenceReport { gradient_error, hessian_error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    pub(crate) fn sample_catalog() -> Vec<HamiltonianModel> {
        vec![
            HamiltonianModel::harmonic(1.3).unwrap(),
            HamiltonianModel::free(),
            HamiltonianModel::inverted(0.8).unwrap(),
            HamiltonianModel::pendulum(1.0).unwrap(),
            HamiltonianModel::wannier_stark(1.0, 0.1).unwrap(),
            HamiltonianModel::quartic(),
            HamiltonianModel::aniso_harmonic_2d(1.0, 2f64.sqrt()).unwrap(),
        ]
    }

    #[test]
    fn harmonic_hessian_is_identity() {
        let m = HamiltonianModel::harmonic(1.0).unwrap();
        for x in [[0.0, 0.0], [1.5, -2.0], [-3.0, 4.0]] {
            assert_eq!(m.hessian(&x), DMatrix::identity(2, 2));
        }
    }

    #[test]
    fn pendulum_hessian() {
        let m = HamiltonianModel::pendulum(1.0).unwrap();
        let q: f64 = 0.9;
        let h = m.hessian(&[0.2, q]);
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, q.cos()]));
    }

    #[test]
    fn wannier_stark_gradient_at_origin() {
        let m = HamiltonianModel::wannier_stark(1.0, 0.1).unwrap();
        let g = m.gradient(&[0.0, 0.0]);
        assert_eq!(g.as_slice(), &[0.0, 0.1]);
    }

    #[test]
    fn catalog_constructs_by_name() {
        for name in CATALOG {
            let params: BTreeMap<String, f64> = expected_params(name)
                .unwrap()
                .iter()
                .map(|k| (k.to_string(), 1.0))
                .collect();
            let m = make_model(name, &params).unwrap();
            assert_eq!(m.name(), name);
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(matches!(make_model("morse", &BTreeMap::new()), Err(Error::UnknownModel(_))));
        assert!(matches!(HamiltonianModel::harmonic(0.0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(HamiltonianModel::harmonic(-1.0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(
            make_model("harmonic", &BTreeMap::new()),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            HamiltonianModel::from_pairs("free", &[("omega", 1.0)]),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            HamiltonianModel::from_pairs("pendulum", &[("v0", f64::NAN)]),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn finite_difference_examples() {
        let harmonic = HamiltonianModel::harmonic(1.0).unwrap();
        let r = finite_difference_check(&harmonic, &PhaseSpacePoint::scalar(0.7, -1.9).unwrap(), 1e-5);
        assert!(r.gradient_error < 1e-9 && r.hessian_error < 1e-9, "{r:?}");

        let pendulum = HamiltonianModel::pendulum(1.0).unwrap();
        let r = finite_difference_check(&pendulum, &PhaseSpacePoint::scalar(0.3, 1.1).unwrap(), 1e-5);
        assert!(r.gradient_error < 1e-6 && r.hessian_error < 1e-6, "{r:?}");

        let quartic = HamiltonianModel::quartic();
        let r = finite_difference_check(&quartic, &PhaseSpacePoint::scalar(0.0, 2.0).unwrap(), 1e-4);
        assert!(r.gradient_error < 1e-6, "{r:?}");
    }

    #[test]
    fn catalog_passes_finite_differences_at_random_points() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for model in sample_catalog() {
            let d = model.dim();
            for _ in 0..20 {
                let x: Vec<f64> = loop {
                    let v: Vec<f64> = (0..2 * d).map(|_| rng.gen_range(-5.0..5.0)).collect();
                    if v.iter().map(|a| a * a).sum::<f64>().sqrt() <= 5.0 {
                        break v;
                    }
                };
                let point = PhaseSpacePoint::from_stacked(&x).unwrap();
                let r = finite_difference_check(&model, &point, 1e-5);
                assert!(r.gradient_error < 1e-6, "{model}: {r:?} at {x:?}");
                assert!(r.hessian_error < 1e-5, "{model}: {r:?} at {x:?}");
                let h = model.hessian(&x);
                assert_eq!(h, h.transpose());
            }
        }
    }

    #[test]
    fn only_one_dimensional_models_have_split_potential() {
        for model in sample_catalog() {
            assert_eq!(model.potential(0.3).is_some(), model.dim() == 1, "{model}");
        }
    }
}
