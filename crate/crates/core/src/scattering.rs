//! Stationary scattering matrix
//!
//! ```text
//! S(z, s) = 1 − 2is·√(Im T_z)·J·(1 + sT_zJ)⁻¹·√(Im T_z)
//! ```
//!
//! and its companion `M(z, s) = (1 + sT_z̄J)(1 + sT_zJ)⁻¹`, together with the
//! identities tying them (intertwining, isospectrality, range preservation)
//! exposed as residuals.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{SpectralParameter, ValidatedInstance};
use crate::numerics::{self, c, identity, CMatrix, HermitianMatrix};
use crate::resolvent::{sandwiched_resolvent, SandwichedResolvent};

#[derive(Debug, Clone)]
pub struct ScatteringMatrix {
    pub z: SpectralParameter,
    pub s: Complex64,
    pub matrix: CMatrix,
}

impl ScatteringMatrix {
    /// `‖S*S − I‖`.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }
}

#[derive(Debug, Clone)]
pub struct MFunction {
    pub z: SpectralParameter,
    pub s: Complex64,
    pub matrix: CMatrix,
    /// Spectral-norm distance between the product form and the form
    /// `1 − 2is·Im T·J·(1 + sTJ)⁻¹`.
    pub form_residual: f64,
}

/// Smallest singular values at a coupling `s` and the resulting
/// classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invertibility {
    /// `None` when `S` is undefined because `s` is resonant.
    pub s_matrix: Option<f64>,
    /// `1 + sT_zJ`; vanishes at resonance points (poles of `S`).
    pub factor: f64,
    /// `1 + sT_z̄J`; vanishes at anti-resonance points (zeros of `S`).
    pub conjugate_factor: f64,
    pub resonant: bool,
    pub anti_resonant: bool,
}

impl Invertibility {
    pub fn is_critical(&self) -> bool {
        self.resonant || self.anti_resonant
    }
}

/// Relative threshold below which a smallest singular value is treated as
/// zero when classifying couplings.
pub const CLASSIFY_THRESHOLD: f64 = 1e-8;

pub fn unitarity_defect(s: &CMatrix) -> f64 {
    let k = s.nrows();
    let defect = s.adjoint() * s - identity(k);
    numerics::spectral_norm(&defect).unwrap_or(f64::INFINITY)
}

/// Everything at a fixed spectral parameter; evaluating at many couplings
/// reuses the resolvent and `√(Im T)`.
#[derive(Debug, Clone)]
pub struct Scattering {
    resolvent: SandwichedResolvent,
    j: CMatrix,
    tol_sing: f64,
    tol_psd: f64,
}

impl Scattering {
    pub fn new(inst: &ValidatedInstance, z: SpectralParameter) -> Result<Self> {
        let resolvent = sandwiched_resolvent(inst, 0.0, z)?;
        Ok(Self::from_resolvent(inst, resolvent))
    }

    pub fn from_resolvent(inst: &ValidatedInstance, resolvent: SandwichedResolvent) -> Self {
        let tol = inst.tolerances();
        Self {
            resolvent,
            j: inst.j().as_matrix().clone(),
            tol_sing: tol.tol_sing,
            tol_psd: tol.tol_psd,
        }
    }

    pub fn z(&self) -> SpectralParameter {
        self.resolvent.z()
    }

    pub fn resolvent(&self) -> &SandwichedResolvent {
        &self.resolvent
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    /// `1 + sT_zJ`.
    pub fn factor(&self, s: Complex64) -> CMatrix {
        identity(self.dim()) + self.resolvent.matrix() * &self.j * s
    }

    /// `1 + sT_z̄J` with `T_z̄ = T_z*`.
    pub fn conjugate_factor(&self, s: Complex64) -> CMatrix {
        identity(self.dim()) + self.resolvent.matrix().adjoint() * &self.j * s
    }

    /// `(1 + sT_zJ)⁻¹·rhs`, refusing resonant `s`.
    fn solve_factor(&self, s: Complex64, rhs: &CMatrix) -> Result<CMatrix> {
        let a = self.factor(s);
        let sv = numerics::singular_values(&a)?;
        let sigma_max = sv.first().copied().unwrap_or(0.0);
        let sigma_min = sv.last().copied().unwrap_or(0.0);
        if sigma_min <= self.tol_sing * sigma_max.max(1.0) {
            return Err(Error::ResonantParameter { s, sigma_min });
        }
        a.lu().solve(rhs).ok_or(Error::ResonantParameter { s, sigma_min })
    }

    pub fn s_matrix(&self, s: Complex64) -> Result<ScatteringMatrix> {
        let root = self.resolvent.sqrt_im_part()?.as_matrix();
        let x = self.solve_factor(s, root)?;
        let k = self.dim();
        let matrix = if self.z().is_boundary() {
            identity(k)
        } else {
            identity(k) - root * &self.j * &x * (c(0.0, 2.0) * s)
        };
        Ok(ScatteringMatrix { z: self.z(), s, matrix })
    }

    pub fn m_function(&self, s: Complex64) -> Result<MFunction> {
        let k = self.dim();
        let inv = self.solve_factor(s, &identity(k))?;
        let product = self.conjugate_factor(s) * &inv;
        let im = self.resolvent.im_part().as_matrix();
        let second = identity(k) - im * &self.j * &inv * (c(0.0, 2.0) * s);
        let form_residual = numerics::spectral_norm(&(&product - &second))?;
        Ok(MFunction {
            z: self.z(),
            s,
            matrix: product,
            form_residual,
        })
    }

    /// `‖√(Im T)·S − M·√(Im T)‖`.
    pub fn intertwining_residual(&self, s: Complex64) -> Result<f64> {
        let root = self.resolvent.sqrt_im_part()?.as_matrix();
        let sm = self.s_matrix(s)?.matrix;
        let m = self.m_function(s)?.matrix;
        numerics::spectral_norm(&(root * sm - m * root))
    }

    pub fn invertibility(&self, s: Complex64) -> Result<Invertibility> {
        let a = self.factor(s);
        let b = self.conjugate_factor(s);
        let sa = numerics::singular_values(&a)?;
        let sb = numerics::singular_values(&b)?;
        let factor = sa.last().copied().unwrap_or(0.0);
        let conjugate_factor = sb.last().copied().unwrap_or(0.0);
        let resonant = factor <= CLASSIFY_THRESHOLD * sa[0].max(1.0);
        let anti_resonant = conjugate_factor <= CLASSIFY_THRESHOLD * sb[0].max(1.0);
        let s_matrix = match self.s_matrix(s) {
            Ok(m) => Some(numerics::smallest_singular_value(&m.matrix)?),
            Err(Error::ResonantParameter { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Invertibility {
            s_matrix,
            factor,
            conjugate_factor,
            resonant,
            anti_resonant,
        })
    }

    /// `‖(1 − P)·S·P‖` with `P` the orthogonal projection onto
    /// `range(Im T)`.
    pub fn range_preservation_residual(&self, s: Complex64) -> Result<f64> {
        let p = numerics::range_projection(self.resolvent.im_part(), self.tol_psd)?;
        let sm = self.s_matrix(s)?.matrix;
        let complement = identity(self.dim()) - &p;
        numerics::spectral_norm(&(complement * sm * p))
    }

    pub fn im_part(&self) -> &HermitianMatrix {
        self.resolvent.im_part()
    }
}

pub fn scattering_matrix(inst: &ValidatedInstance, z: SpectralParameter, s: Complex64) -> Result<ScatteringMatrix> {
    Scattering::new(inst, z)?.s_matrix(s)
}

pub fn m_function(inst: &ValidatedInstance, z: SpectralParameter, s: Complex64) -> Result<MFunction> {
    Scattering::new(inst, z)?.m_function(s)
}

pub fn intertwining_residual(inst: &ValidatedInstance, z: SpectralParameter, s: Complex64) -> Result<f64> {
    Scattering::new(inst, z)?.intertwining_residual(s)
}

pub fn invertibility_check(inst: &ValidatedInstance, z: SpectralParameter, s: Complex64) -> Result<Invertibility> {
    if z.is_boundary() {
        return Err(Error::InvalidArgument("invertibility_check needs y > 0".into()));
    }
    Scattering::new(inst, z)?.invertibility(s)
}

pub fn range_preservation_residual(inst: &ValidatedInstance, z: SpectralParameter, s: Complex64) -> Result<f64> {
    Scattering::new(inst, z)?.range_preservation_residual(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_instance, validate_instance, Instance, ToleranceConfig};
    use crate::numerics::{real, testing};

    fn one(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, real(x))
    }

    fn scalar() -> ValidatedInstance {
        let inst = Instance::new(one(-1.0), one(1.0), one(1.0)).unwrap();
        validate_instance(&inst, &ToleranceConfig::default()).unwrap()
    }

    fn random(seed: u64) -> (ValidatedInstance, SpectralParameter, f64) {
        let n = 2 + (seed as usize % 5);
        let k = 1 + (seed as usize % n.min(4));
        let sig: Vec<i8> = (0..k)
            .map(|i| if (seed as usize >> i) & 1 == 0 { 1 } else { -1 })
            .collect();
        let inst = validate_instance(&random_instance(n, k, &sig, seed).unwrap(), &ToleranceConfig::default()).unwrap();
        let lambda = ((seed as f64) * 0.731).sin() * 2.5;
        let y = 0.05 + ((seed as f64) * 0.37).cos().abs() * 2.0;
        let s = ((seed as f64) * 1.3).sin() * 1.5;
        (inst, SpectralParameter::new(lambda, y).unwrap(), s)
    }

    /// `S(−0.5 + iy, 1)` for the scalar instance.
    fn scalar_s(y: f64) -> Complex64 {
        let y2 = y * y - 0.25;
        c(y2, -y) / c(y2, y)
    }

    #[test]
    fn scalar_closed_form_at_half() {
        let inst = scalar();
        let z = SpectralParameter::new(-0.5, 0.5).unwrap();
        let s = scattering_matrix(&inst, z, real(1.0)).unwrap();
        assert!((s.matrix[(0, 0)] - real(-1.0)).norm() < 1e-10);
        assert!((scalar_s(0.5) - real(-1.0)).norm() < 1e-12);
        let m = m_function(&inst, z, real(1.0)).unwrap();
        assert!((m.matrix[(0, 0)] - real(-1.0)).norm() < 1e-12);
        assert!(m.form_residual < 1e-12);
    }

    #[test]
    fn scalar_closed_form_along_y() {
        let inst = scalar();
        for y in [1e-4, 0.01, 0.3, 0.7, 2.0, 50.0] {
            let z = SpectralParameter::new(-0.5, y).unwrap();
            let s = scattering_matrix(&inst, z, real(1.0)).unwrap();
            assert!((s.matrix[(0, 0)] - scalar_s(y)).norm() < 1e-10, "y = {y}");
        }
    }

    #[test]
    fn identity_cases() {
        let inst = scalar();
        let z = SpectralParameter::new(-0.5, 0.3).unwrap();
        let s0 = scattering_matrix(&inst, z, real(0.0)).unwrap();
        assert_eq!(s0.matrix, identity(1));
        let m0 = m_function(&inst, z, real(0.0)).unwrap();
        assert!((m0.matrix.clone() - identity(1)).norm() < 1e-15);
        assert_eq!(intertwining_residual(&inst, z, real(0.0)).unwrap(), 0.0);

        // boundary value: S = I for non-resonant s
        let (inst, z, _) = random(3);
        let b = SpectralParameter::boundary(crate::model::lambda_grid(&inst, 1)[0]).unwrap();
        let s = scattering_matrix(&inst, b, real(0.37)).unwrap();
        assert_eq!(s.matrix, identity(inst.k()));
        let _ = z;
    }

    #[test]
    fn boundary_resonance_is_refused() {
        let inst = scalar();
        let b = SpectralParameter::boundary(-0.5).unwrap();
        let err = scattering_matrix(&inst, b, real(0.5)).unwrap_err();
        assert!(matches!(err, Error::ResonantParameter { .. }));
    }

    #[test]
    fn scalar_invertibility_classification() {
        let inst = scalar();
        let z = SpectralParameter::new(-0.5, 0.1).unwrap();
        let at_pole = invertibility_check(&inst, z, c(0.5, 0.1)).unwrap();
        assert!(at_pole.factor < 1e-12);
        assert!(at_pole.resonant && !at_pole.anti_resonant);
        assert_eq!(at_pole.s_matrix, None);

        let at_zero = invertibility_check(&inst, z, c(0.5, -0.1)).unwrap();
        assert!(at_zero.s_matrix.unwrap() < 1e-12);
        assert!(at_zero.anti_resonant && !at_zero.resonant);

        for s in [0.0, 0.3, 0.5, 1.0, -2.0] {
            let r = invertibility_check(&inst, z, real(s)).unwrap();
            assert!(!r.is_critical());
            assert!(r.s_matrix.unwrap() > 0.5);
        }
    }

    #[test]
    fn random_identities() {
        for seed in 0..200u64 {
            let (inst, z, s) = random(seed);
            let sc = Scattering::new(&inst, z).unwrap();
            let s = real(s);
            let sm = sc.s_matrix(s).unwrap();
            assert!(sm.unitarity_defect() <= 1e-8, "seed {seed}");
            let m = sc.m_function(s).unwrap();
            assert!(m.form_residual <= 1e-9 * (1.0 + numerics::spectral_norm(&m.matrix).unwrap()));
            let scale = numerics::spectral_norm(sc.resolvent().sqrt_im_part().unwrap().as_matrix()).unwrap();
            assert!(sc.intertwining_residual(s).unwrap() <= 1e-8 * scale.max(1.0));
            let es = numerics::general_eig(&sm.matrix).unwrap();
            let em = numerics::general_eig(&m.matrix).unwrap();
            let norm_s = numerics::spectral_norm(&sm.matrix).unwrap();
            assert!(
                numerics::multiset_distance(&es, &em) <= 1e-8 * (1.0 + norm_s),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn complex_coupling_identities() {
        // isospectrality and intertwining hold off the real axis as well
        let mut rng = testing::rng(11);
        use rand::Rng;
        for seed in 0..50u64 {
            let (inst, z, _) = random(seed);
            let sc = Scattering::new(&inst, z).unwrap();
            let s = c(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
            let sm = match sc.s_matrix(s) {
                Ok(m) => m,
                Err(Error::ResonantParameter { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let m = sc.m_function(s).unwrap();
            let es = numerics::general_eig(&sm.matrix).unwrap();
            let em = numerics::general_eig(&m.matrix).unwrap();
            let norm_s = numerics::spectral_norm(&sm.matrix).unwrap();
            assert!(numerics::multiset_distance(&es, &em) <= 1e-7 * (1.0 + norm_s));
            let root_norm = numerics::spectral_norm(sc.resolvent().sqrt_im_part().unwrap().as_matrix()).unwrap();
            assert!(sc.intertwining_residual(s).unwrap() <= 1e-8 * (1.0 + norm_s) * root_norm.max(1.0));
        }
    }

    #[test]
    fn eigenvector_correspondence() {
        for seed in 0..40u64 {
            let (inst, z, s) = random(seed);
            let sc = Scattering::new(&inst, z).unwrap();
            let sm = sc.s_matrix(real(s)).unwrap().matrix;
            let m = sc.m_function(real(s)).unwrap().matrix;
            let root = sc.resolvent().sqrt_im_part().unwrap().as_matrix().clone();
            for ev in numerics::general_eig(&sm).unwrap() {
                if (ev - real(1.0)).norm() <= 1e-6 {
                    continue;
                }
                let phi = numerics::eigenvector_for(&sm, ev).unwrap();
                let psi = &root * phi;
                let norm = psi.norm();
                assert!(norm > 0.0);
                let residual = (&m * &psi - &psi * ev).norm() / norm;
                assert!(residual <= 1e-6, "seed {seed}: residual {residual}");
            }
        }
    }

    #[test]
    fn range_preservation() {
        let tol = ToleranceConfig::default();
        // F = I: Im T has full rank, P = I
        let h0 = CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.2), real(0.2), real(-1.0)]);
        let inst = validate_instance(&Instance::new(h0, identity(2), identity(2)).unwrap(), &tol).unwrap();
        let z = SpectralParameter::new(0.1, 0.4).unwrap();
        assert!(range_preservation_residual(&inst, z, real(0.7)).unwrap() < 1e-12);
        assert!(range_preservation_residual(&inst, z, real(0.0)).unwrap() < 1e-15);

        // rank-one F into a 3-dimensional space with k = 2
        let mut rng = testing::rng(5);
        let h0 = testing::random_hermitian(&mut rng, 3).into_inner();
        let row = testing::random_matrix(&mut rng, 1, 3);
        let f = CMatrix::from_fn(2, 3, |i, j| row[(0, j)] * real(1.0 + i as f64));
        let j = CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)]);
        let inst = validate_instance(&Instance::new(h0, f, j).unwrap(), &tol).unwrap();
        for s in [0.3, 1.0, -0.8] {
            assert!(range_preservation_residual(&inst, z, real(s)).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn convergence_as_y_grows() {
        let (inst, _, _) = random(9);
        let lambda = 0.3;
        let sup = |y: f64| {
            let sc = Scattering::new(&inst, SpectralParameter::new(lambda, y).unwrap()).unwrap();
            (0..=20)
                .map(|i| {
                    let sm = sc.s_matrix(real(i as f64 / 20.0)).unwrap().matrix;
                    numerics::spectral_norm(&(sm - identity(inst.k()))).unwrap()
                })
                .fold(0.0, f64::max)
        };
        let mut prev = f64::INFINITY;
        for j in 0..6 {
            let v = sup(1e3 * 2f64.powi(j));
            assert!(v <= prev * (1.0 + 1e-9));
            prev = v;
        }
        assert!(prev < 0.01);
    }
}
