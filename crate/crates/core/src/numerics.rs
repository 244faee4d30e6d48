//! Dense complex linear algebra substrate.
//!
//! Everything above this module manipulates small dense complex matrices:
//! Hermitian eigendecompositions, general eigenvalues, linear solves with a
//! conditioning guard, determinants and PSD square roots. The heavy lifting
//! is delegated to `nalgebra`; this module pins the contracts (ordering,
//! tolerances, error reporting, iteration caps) the rest of the crate relies
//! on.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::assignment::optimal_assignment;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Iteration budget per dimension for the iterative decompositions. Finite so
/// that pathological input (huge or denormal entries) fails instead of
/// spinning.
const ITERATIONS_PER_DIM: usize = 200;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn all_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Frobenius norm.
pub fn frobenius(a: &CMatrix) -> f64 {
    a.norm()
}

fn iteration_cap(n: usize) -> usize {
    ITERATIONS_PER_DIM * n.max(4)
}

/// A square complex matrix known to satisfy `A = A*` (exactly, after
/// symmetrization at construction).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates `‖A − A*‖ ≤ tol_herm·‖A‖` (Frobenius) and stores the exact
    /// Hermitian part.
    pub fn new(a: CMatrix, tol_herm: f64) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        if !all_finite(&a) {
            return Err(Error::NonFinite("Hermitian matrix"));
        }
        let scale = frobenius(&a);
        if !scale.is_finite() {
            return Err(Error::NonFinite("Hermitian matrix norm"));
        }
        let defect = frobenius(&(&a - a.adjoint()));
        if defect > tol_herm * scale {
            return Err(Error::NonHermitianInput { defect, scale });
        }
        Ok(Self::hermitian_part(&a))
    }

    /// `(A + A*)/2`, with no tolerance check.
    ///
    /// # Panics
    /// If `a` is not square.
    pub fn hermitian_part(a: &CMatrix) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "hermitian_part needs a square matrix");
        Self((a + a.adjoint()) * real(0.5))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(CMatrix::from_fn(
            n,
            n,
            |i, j| if i == j { real(d[i]) } else { real(0.0) },
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

impl AsRef<CMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: CMatrix,
}

impl HermEig {
    /// `V diag(f(λ)) V*`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let w = real(f(lam));
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

pub fn herm_eig(a: &HermitianMatrix) -> Result<HermEig> {
    let n = a.dim();
    let eig = SymmetricEigen::try_new(a.0.clone(), f64::EPSILON, iteration_cap(n)).ok_or(Error::EigenFailure(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure(n));
    }
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermEig { values, vectors })
}

/// Eigenvalues of a square complex matrix, repeated by algebraic
/// multiplicity. The order is unspecified; compare results as multisets.
pub fn general_eig(a: &CMatrix) -> Result<Vec<Complex64>> {
    require_square(a, "general_eig")?;
    let n = a.nrows();
    if !all_finite(a) {
        return Err(Error::NonFinite("general_eig input"));
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, iteration_cap(n)).ok_or(Error::EigenFailure(n))?;
    let values = schur.eigenvalues().ok_or(Error::EigenFailure(n))?;
    let values: Vec<Complex64> = values.iter().copied().collect();
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigenFailure(n));
    }
    Ok(values)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    if !all_finite(a) {
        return Err(Error::NonFinite("singular value input"));
    }
    let n = a.nrows().max(a.ncols());
    let svd = SVD::try_new(a.clone(), false, false, f64::EPSILON, iteration_cap(n)).ok_or(Error::EigenFailure(n))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Operator (spectral) norm: the largest singular value.
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

pub fn smallest_singular_value(a: &CMatrix) -> Result<f64> {
    Ok(singular_values(a)?.last().copied().unwrap_or(0.0))
}

/// Unit vector spanning the (numerical) kernel direction of `a`: the right
/// singular vector of its smallest singular value.
pub fn null_vector(a: &CMatrix) -> Result<CVector> {
    require_square(a, "null_vector")?;
    let n = a.nrows();
    let svd = SVD::try_new(a.clone(), false, true, f64::EPSILON, iteration_cap(n)).ok_or(Error::EigenFailure(n))?;
    let v_t = svd.v_t.ok_or(Error::EigenFailure(n))?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::EigenFailure(n))?;
    Ok(v_t.row(idx).adjoint())
}

/// Eigenvector of `a` for a given (already computed) eigenvalue.
pub fn eigenvector_for(a: &CMatrix, eigenvalue: Complex64) -> Result<CVector> {
    let shifted = a - CMatrix::identity(a.nrows(), a.ncols()) * eigenvalue;
    null_vector(&shifted)
}

/// Result of a guarded linear solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: CMatrix,
    /// Reciprocal condition number `σ_min/σ_max` in the spectral norm.
    pub rcond: f64,
}

/// Solves `A X = B`, refusing when `σ_min(A) ≤ tol_sing·σ_max(A)`.
pub fn solve(a: &CMatrix, b: &CMatrix, tol_sing: f64) -> Result<Solution> {
    require_square(a, "solve")?;
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve: A is {}x{}, B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let sv = singular_values(a)?;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    if sigma_max == 0.0 || sigma_min <= tol_sing * sigma_max {
        return Err(Error::NumericallySingular { sigma_min, sigma_max });
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or(Error::NumericallySingular { sigma_min, sigma_max })?;
    Ok(Solution {
        x,
        rcond: sigma_min / sigma_max,
    })
}

pub fn det(a: &CMatrix) -> Result<Complex64> {
    require_square(a, "det")?;
    Ok(a.clone().lu().determinant())
}

/// Square root of a positive semidefinite matrix. Eigenvalues in
/// `[−tol_psd·‖A‖, 0)` are clamped to zero.
pub fn psd_sqrt(a: &HermitianMatrix, tol_psd: f64) -> Result<HermitianMatrix> {
    let eig = herm_eig(a)?;
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = tol_psd * scale;
    if let Some(&min) = eig.values.first() {
        if min < -threshold {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
                threshold: -threshold,
            });
        }
    }
    let root = eig.reconstruct_with(|v| v.max(0.0).sqrt());
    Ok(HermitianMatrix::hermitian_part(&root))
}

/// Orthogonal projection onto the span of eigenvectors of `a` whose
/// eigenvalue exceeds `rel_cut·max|eig|`.
pub fn range_projection(a: &HermitianMatrix, rel_cut: f64) -> Result<CMatrix> {
    let eig = herm_eig(a)?;
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = rel_cut * scale;
    Ok(eig.reconstruct_with(|v| if v > cut { 1.0 } else { 0.0 }))
}

/// Distance between two multisets of complex numbers: the largest pair
/// distance under the pairing that minimizes the total distance.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| (x - y).norm()).collect()).collect();
    let perm = optimal_assignment(&cost);
    perm.iter().enumerate().map(|(i, &j)| cost[i][j]).fold(0.0, f64::max)
}

fn require_square(a: &CMatrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            c(re, im)
        })
    }

    pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
        HermitianMatrix::hermitian_part(&random_matrix(rng, n, n))
    }

    /// Characteristic polynomial coefficients (monic, highest degree first)
    /// by Faddeev–LeVerrier.
    pub fn charpoly(a: &CMatrix) -> Vec<Complex64> {
        let n = a.nrows();
        let mut coeffs = vec![real(1.0)];
        let mut m = CMatrix::zeros(n, n);
        for k in 1..=n {
            m = a * &m + CMatrix::identity(n, n) * coeffs[k - 1];
            let am = a * &m;
            coeffs.push(-am.trace() / real(k as f64));
        }
        coeffs
    }

    /// All roots of a monic polynomial by Durand–Kerner iteration.
    pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
        let deg = coeffs.len() - 1;
        let eval = |z: Complex64| coeffs.iter().fold(real(0.0), |acc, &a| acc * z + a);
        let seed = c(0.4, 0.9);
        let mut roots: Vec<Complex64> = (0..deg).map(|i| seed.powu(i as u32)).collect();
        for _ in 0..2000 {
            let mut delta = 0.0f64;
            for i in 0..deg {
                let mut denom = real(1.0);
                for j in 0..deg {
                    if i != j {
                        denom *= roots[i] - roots[j];
                    }
                }
                let step = eval(roots[i]) / denom;
                roots[i] -= step;
                delta = delta.max(step.norm());
            }
            if delta < 1e-15 {
                break;
            }
        }
        roots
    }

    /// Determinant by cofactor expansion along the first row.
    pub fn cofactor_det(a: &CMatrix) -> Complex64 {
        let n = a.nrows();
        if n == 1 {
            return a[(0, 0)];
        }
        let mut total = real(0.0);
        for j in 0..n {
            let minor = a.clone().remove_row(0).remove_column(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            total += a[(0, j)] * cofactor_det(&minor) * sign;
        }
        total
    }
}
