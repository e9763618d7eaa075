//! Dense linear algebra on phase space: symplectic matrices, the Siegel upper
//! half-space and the quadratic forms of pure Gaussian Wigner functions.
//!
//! Phase-space vectors are ordered as `X = (p, q)` and the symplectic unity is
//! `J = [[0, -I], [I, 0]]`, so that Hamilton's equations read `Ẋ = J H'(X)`.
//! A symplectic matrix is split into `d × d` blocks `[[A, B], [C, D]]` and acts
//! on shapes by the linear fractional map `Z ↦ (A Z + B)(C Z + D)⁻¹`.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default tolerance for structural symplecticity checks.
pub const DEFAULT_TOL_SYMPL: f64 = 1e-8;

/// Largest asymmetry `‖Z − Zᵀ‖ / max(1, ‖Z‖)` accepted before a shape is symmetrized.
pub const SIEGEL_ASYMMETRY_TOL: f64 = 1e-10;

/// Relative floor on the smallest eigenvalue of `Im Z`.
pub const SIEGEL_POSITIVITY_REL: f64 = 1e-12;

/// Condition estimate above which `C Z + D` is treated as singular.
pub const MOBIUS_CONDITION_LIMIT: f64 = 1e12;

/// Hilbert–Schmidt (Frobenius) norm `√tr(M†M)`, for real or complex matrices.
pub fn hs_norm<T: ComplexField>(m: &DMatrix<T>) -> T::RealField {
    m.norm()
}

/// The symplectic unity `J = [[0, -I], [I, 0]]` of size `2d × 2d`.
pub fn symplectic_unity(d: usize) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidDimension("phase-space dimension d must be at least 1".into()));
    }
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = -1.0;
        j[(d + i, i)] = 1.0;
    }
    Ok(j)
}

fn unity(d: usize) -> DMatrix<f64> {
    symplectic_unity(d).expect("dimension validated by caller")
}

/// `‖Sᵀ J S − J‖_HS`, the distance of `S` from the symplectic group.
pub fn symplectic_defect(s: &DMatrix<f64>) -> f64 {
    let d = s.nrows() / 2;
    let j = unity(d);
    hs_norm(&(s.transpose() * &j * s - j))
}

/// A classical state `X = (p, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpacePoint {
    pub p: DVector<f64>,
    pub q: DVector<f64>,
}

impl PhaseSpacePoint {
    pub fn new(p: DVector<f64>, q: DVector<f64>) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::InvalidDimension(format!(
                "momentum and position must have the same length d >= 1 (got {} and {})",
                p.len(),
                q.len()
            )));
        }
        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("phase-space point has non-finite entries".into()));
        }
        Ok(Self { p, q })
    }

    /// Convenience constructor for `d = 1`.
    pub fn scalar(p: f64, q: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, p), DVector::from_element(1, q))
    }

    /// Split a stacked `(p, q)` vector of length `2d`.
    pub fn from_stacked(x: &[f64]) -> Result<Self> {
        if x.is_empty() || x.len() % 2 != 0 {
            return Err(Error::InvalidDimension(format!(
                "stacked phase-space vector must have even length, got {}",
                x.len()
            )));
        }
        let d = x.len() / 2;
        Self::new(DVector::from_column_slice(&x[..d]), DVector::from_column_slice(&x[d..]))
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn to_stacked(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.dim(), self.p.iter().chain(self.q.iter()).copied())
    }
}

/// A real `2d × 2d` matrix intended to satisfy `Sᵀ J S = J`.
///
/// [`SymplecticMatrix::new`] validates the group condition; matrices produced
/// by the flow integrator are wrapped unchecked and carry their defect as a
/// diagnostic instead.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    m: DMatrix<f64>,
}

impl SymplecticMatrix {
    pub fn new(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        let s = Self::new_unchecked(m)?;
        let defect = s.defect();
        if !(defect < tol) {
            return Err(Error::NotSymplectic { defect, tol });
        }
        let det_gap = (s.m.determinant() - 1.0).abs();
        if !(det_gap < tol.max(f64::EPSILON * s.m.norm_squared())) {
            return Err(Error::NotSymplectic { defect: det_gap, tol });
        }
        Ok(s)
    }

    /// Wraps `m` after checking only its shape.
    pub fn new_unchecked(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 || m.nrows() % 2 != 0 {
            return Err(Error::InvalidDimension(format!(
                "symplectic matrix must be 2d x 2d, got {} x {}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m })
    }

    pub fn identity(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension("d must be at least 1".into()));
        }
        Ok(Self { m: DMatrix::identity(2 * d, 2 * d) })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn defect(&self) -> f64 {
        symplectic_defect(&self.m)
    }

    /// Blocks `(A, B, C, D)`.
    pub fn blocks(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let d = self.dim();
        (
            self.m.view((0, 0), (d, d)).into_owned(),
            self.m.view((0, d), (d, d)).into_owned(),
            self.m.view((d, 0), (d, d)).into_owned(),
            self.m.view((d, d), (d, d)).into_owned(),
        )
    }

    /// `S⁻¹ = J Sᵀ J⁻¹`, exact for group elements.
    pub fn symplectic_inverse(&self) -> DMatrix<f64> {
        let j = unity(self.dim());
        &j * self.m.transpose() * j.transpose()
    }

    pub fn compose(&self, rhs: &SymplecticMatrix) -> SymplecticMatrix {
        SymplecticMatrix { m: &self.m * &rhs.m }
    }
}

/// Factors of `S = Q P`.
#[derive(Debug, Clone)]
pub struct PolarDecomposition {
    /// Orthogonal symplectic factor.
    pub orthogonal: DMatrix<f64>,
    /// Symmetric positive-definite symplectic factor `(SᵀS)^{1/2}`.
    pub positive: DMatrix<f64>,
}

/// Polar decomposition of a symplectic matrix through the symmetric
/// eigendecomposition of `SᵀS`.
pub fn polar_decompose(s: &SymplecticMatrix, tol: f64) -> Result<PolarDecomposition> {
    let defect = s.defect();
    if !(defect < tol) {
        return Err(Error::NotSymplectic { defect, tol });
    }
    let gram = s.matrix().transpose() * s.matrix();
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = SymmetricEigen::new(gram);
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Domain("SᵀS is not positive definite".into()));
    }
    let v = &eig.eigenvectors;
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let positive = v * sqrt * v.transpose();
    let positive = (&positive + positive.transpose()) * 0.5;
    let orthogonal = s.matrix() * (v * inv_sqrt * v.transpose());
    Ok(PolarDecomposition { orthogonal, positive })
}

/// A point of the Siegel upper half-space: complex symmetric `Z` with `Im Z > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelForm {
    z: DMatrix<Complex64>,
}

impl SiegelForm {
    /// Symmetrizes `z` and checks positivity of its imaginary part.
    pub fn new(z: DMatrix<Complex64>) -> Result<Self> {
        if z.nrows() != z.ncols() || z.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "shape matrix must be square d x d with d >= 1, got {} x {}",
                z.nrows(),
                z.ncols()
            )));
        }
        if z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NotSiegel("shape matrix has non-finite entries".into()));
        }
        let asym = hs_norm(&(&z - z.transpose()));
        let scale = hs_norm(&z).max(1.0);
        if asym > SIEGEL_ASYMMETRY_TOL * scale {
            return Err(Error::NotSiegel(format!(
                "Z is not symmetric (‖Z − Zᵀ‖ = {asym:.3e})"
            )));
        }
        let z = (&z + z.transpose()).scale(0.5);
        let im = z.map(|c| c.im);
        let eig = SymmetricEigen::new(im.clone());
        let min = eig.eigenvalues.min();
        let floor = SIEGEL_POSITIVITY_REL * hs_norm(&im);
        if !(min > floor) || !(min > 0.0) {
            return Err(Error::NotSiegel(format!(
                "Im(Z) is not positive definite (smallest eigenvalue {min:.3e})"
            )));
        }
        Ok(Self { z })
    }

    /// `Z = x + i y` for `d = 1`.
    pub fn scalar(re: f64, im: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, Complex64::new(re, im)))
    }

    /// Builds `Z = Re + i Im` from real and imaginary parts.
    pub fn from_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::InvalidDimension("real and imaginary parts differ in shape".into()));
        }
        Self::new(re.zip_map(im, Complex64::new))
    }

    /// Diagonal shape `diag(i·y₁, …, i·y_d)`.
    pub fn diagonal_imag(y: &[f64]) -> Result<Self> {
        let d = y.len();
        let mut z = DMatrix::zeros(d, d);
        for (i, &v) in y.iter().enumerate() {
            z[(i, i)] = Complex64::new(0.0, v);
        }
        Self::new(z)
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.z
    }

    pub fn re(&self) -> DMatrix<f64> {
        self.z.map(|c| c.re)
    }

    pub fn im(&self) -> DMatrix<f64> {
        self.z.map(|c| c.im)
    }

    /// `‖Z − W‖_HS`.
    pub fn distance(&self, other: &SiegelForm) -> f64 {
        hs_norm(&(&self.z - &other.z))
    }
}

/// Real symmetric `2d × 2d` quadratic form of a pure Gaussian Wigner function.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerForm {
    g: DMatrix<f64>,
}

impl WignerForm {
    /// Validates symmetry, positivity, `det G = 1` and `Jᵀ G J = G⁻¹` within `tol`.
    pub fn new(g: DMatrix<f64>, tol: f64) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() == 0 || g.nrows() % 2 != 0 {
            return Err(Error::InvalidDimension(format!(
                "Wigner form must be 2d x 2d, got {} x {}",
                g.nrows(),
                g.ncols()
            )));
        }
        let scale = hs_norm(&g).max(1.0);
        if hs_norm(&(&g - g.transpose())) > tol * scale {
            return Err(Error::Domain("Wigner form is not symmetric".into()));
        }
        let g = (&g + g.transpose()) * 0.5;
        let eig = SymmetricEigen::new(g.clone());
        if !(eig.eigenvalues.min() > 0.0) {
            return Err(Error::Domain("Wigner form is not positive definite".into()));
        }
        let form = Self { g };
        let det_gap = (form.determinant() - 1.0).abs();
        if det_gap > tol * scale {
            return Err(Error::Domain(format!("det G deviates from 1 by {det_gap:.3e}")));
        }
        let purity_gap = form.purity_defect();
        if purity_gap > tol * scale * scale {
            return Err(Error::Domain(format!("Jᵀ G J differs from G⁻¹ by {purity_gap:.3e}")));
        }
        Ok(form)
    }

    pub(crate) fn new_trusted(g: DMatrix<f64>) -> Self {
        Self { g: (&g + g.transpose()) * 0.5 }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn trace(&self) -> f64 {
        self.g.trace()
    }

    pub fn determinant(&self) -> f64 {
        self.g.determinant()
    }

    /// `‖Jᵀ G J − G⁻¹‖_HS`.
    pub fn purity_defect(&self) -> f64 {
        let j = unity(self.dim());
        match self.g.clone().try_inverse() {
            Some(inv) => hs_norm(&(j.transpose() * &self.g * &j - inv)),
            None => f64::INFINITY,
        }
    }

    /// Position block `G_pp` and momentum block `G_qq` traces.
    pub fn block_traces(&self) -> (f64, f64) {
        let d = self.dim();
        let upper = self.g.view((0, 0), (d, d)).trace();
        let lower = self.g.view((d, d), (d, d)).trace();
        (upper, lower)
    }
}

/// `G(Z)` from the block formula in terms of `Re Z` and `(Im Z)⁻¹`.
pub fn wigner_form_from_siegel(z: &SiegelForm) -> Result<WignerForm> {
    let d = z.dim();
    let x = z.re();
    let y = z.im();
    let y_inv = y
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("Im(Z) is singular".into()))?;
    let mut g = DMatrix::zeros(2 * d, 2 * d);
    g.view_mut((0, 0), (d, d)).copy_from(&y_inv);
    g.view_mut((0, d), (d, d)).copy_from(&(-(&y_inv * &x)));
    g.view_mut((d, 0), (d, d)).copy_from(&(-(&x * &y_inv)));
    g.view_mut((d, d), (d, d)).copy_from(&(&y + &x * &y_inv * &x));
    Ok(WignerForm::new_trusted(g))
}

/// Inverse of [`wigner_form_from_siegel`]: `Im Z = G_pp⁻¹`, `Re Z = −G_pp⁻¹ G_pq`.
pub fn siegel_from_wigner_form(g: &WignerForm) -> Result<SiegelForm> {
    let d = g.dim();
    let gpp = g.matrix().view((0, 0), (d, d)).into_owned();
    let gpq = g.matrix().view((0, d), (d, d)).into_owned();
    let gpp_inv = gpp
        .try_inverse()
        .ok_or_else(|| Error::Domain("upper block G_pp is singular".into()))?;
    let re = -(&gpp_inv * gpq);
    let im = (&gpp_inv + gpp_inv.transpose()) * 0.5;
    // Re Z is symmetric only up to round-off in G
    let re = (&re + re.transpose()) * 0.5;
    SiegelForm::from_parts(&re, &im)
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Numerator `A Z + B` and denominator `C Z + D` of the linear fractional map.
pub(crate) fn mobius_parts(
    s: &SymplecticMatrix,
    z: &SiegelForm,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    if s.dim() != z.dim() {
        return Err(Error::InvalidDimension(format!(
            "symplectic matrix acts on d = {}, shape has d = {}",
            s.dim(),
            z.dim()
        )));
    }
    let (a, b, c, d) = s.blocks();
    let zm = z.matrix();
    let num = complexify(&a) * zm + complexify(&b);
    let den = complexify(&c) * zm + complexify(&d);
    Ok((num, den))
}

/// Linear fractional action `S[Z] = (A Z + B)(C Z + D)⁻¹`.
pub fn mobius_transform(s: &SymplecticMatrix, z: &SiegelForm) -> Result<SiegelForm> {
    let (num, den) = mobius_parts(s, z)?;
    let inv = den
        .clone()
        .try_inverse()
        .ok_or(Error::Conditioning { condition: f64::INFINITY })?;
    let condition = hs_norm(&den) * hs_norm(&inv);
    if !(condition < MOBIUS_CONDITION_LIMIT) {
        return Err(Error::Conditioning { condition });
    }
    SiegelForm::new(num * inv)
}
