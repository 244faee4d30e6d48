//! Sandwiched resolvent `T_z(H) = F(H − z)⁻¹F*`.
//!
//! The boundary value `T_{λ+i0}` is computed by a direct real solve at
//! `y = 0` (exact in finite dimension) and symmetrized so that its imaginary
//! part is exactly zero. For `y > 0` the imaginary part is formed as
//! `y·X*X` with `X = (H − z)⁻¹F*`, which equals `(T − T*)/(2i)` and is
//! positive semidefinite by construction.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{perturbed_operator, SpectralParameter, ValidatedInstance};
use crate::numerics::{self, real, CMatrix, HermitianMatrix};

#[derive(Debug, Clone)]
pub struct SandwichedResolvent {
    z: SpectralParameter,
    s_base: f64,
    t: CMatrix,
    /// `(H − z)⁻¹F*`, n×k.
    x: CMatrix,
    im: OnceLock<HermitianMatrix>,
    sqrt_im: OnceLock<Result<HermitianMatrix>>,
    psd_tol: f64,
}

/// `T_z(H_{s_base})`.
///
/// Fails with [`Error::LambdaInSpectrum`] when `y = 0` and `λ` is within
/// `10·tol_sing·max(1, ‖H‖)` of `spec(H_{s_base})`.
pub fn sandwiched_resolvent(
    inst: &ValidatedInstance,
    s_base: f64,
    z: SpectralParameter,
) -> Result<SandwichedResolvent> {
    let tol = inst.tolerances();
    let h = if s_base == 0.0 {
        inst.h0().clone()
    } else {
        perturbed_operator(inst, s_base)
    };
    if z.is_boundary() {
        let (distance, scale) = if s_base == 0.0 {
            (inst.distance_to_spectrum(z.lambda), inst.energy_scale())
        } else {
            let spec = numerics::herm_eig(&h)?.values;
            let d = spec.iter().map(|e| (e - z.lambda).abs()).fold(f64::INFINITY, f64::min);
            let norm = spec.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            (d, norm.max(1.0))
        };
        if distance <= 10.0 * tol.tol_sing * scale {
            return Err(Error::LambdaInSpectrum {
                lambda: z.lambda,
                distance,
            });
        }
    }
    let n = inst.n();
    let shifted = h.as_matrix() - CMatrix::identity(n, n) * z.z();
    let x = match numerics::solve(&shifted, inst.f_adjoint(), tol.tol_sing) {
        Ok(sol) => sol.x,
        Err(Error::NumericallySingular { .. }) if z.is_boundary() => {
            return Err(Error::LambdaInSpectrum {
                lambda: z.lambda,
                distance: inst.distance_to_spectrum(z.lambda),
            })
        }
        Err(e) => return Err(e),
    };
    let mut t = inst.f() * &x;
    if z.is_boundary() {
        t = HermitianMatrix::hermitian_part(&t).into_inner();
    }
    Ok(SandwichedResolvent {
        z,
        s_base,
        t,
        x,
        im: OnceLock::new(),
        sqrt_im: OnceLock::new(),
        psd_tol: tol.tol_psd,
    })
}

impl SandwichedResolvent {
    pub fn z(&self) -> SpectralParameter {
        self.z
    }

    pub fn s_base(&self) -> f64 {
        self.s_base
    }

    /// `T_z`.
    pub fn matrix(&self) -> &CMatrix {
        &self.t
    }

    /// `T_{z̄} = T_z*` (H is self-adjoint).
    pub fn conjugate_point(&self) -> CMatrix {
        self.t.adjoint()
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// `Im T_z`; identically zero on the boundary.
    pub fn im_part(&self) -> &HermitianMatrix {
        self.im.get_or_init(|| {
            if self.z.is_boundary() {
                HermitianMatrix::zeros(self.dim())
            } else {
                let gram = self.x.adjoint() * &self.x * real(self.z.y);
                HermitianMatrix::hermitian_part(&gram)
            }
        })
    }

    /// `√(Im T_z)`, cached.
    pub fn sqrt_im_part(&self) -> Result<&HermitianMatrix> {
        self.sqrt_im
            .get_or_init(|| numerics::psd_sqrt(self.im_part(), self.psd_tol))
            .as_ref()
            .map_err(Clone::clone)
    }
}

/// `(T − T*)/(2i)` for an arbitrary matrix, exactly symmetrized. For a
/// resolvent with `y > 0` the result is checked to be PSD within
/// `tol_psd·‖T‖`.
pub fn im_part(t: &SandwichedResolvent) -> Result<HermitianMatrix> {
    let m = t.matrix();
    let diff = (m - m.adjoint()) * numerics::c(0.0, -0.5);
    let im = HermitianMatrix::hermitian_part(&diff);
    if !t.z().is_boundary() {
        let eig = numerics::herm_eig(&im)?;
        let scale = numerics::spectral_norm(m)?;
        let threshold = t.psd_tol * scale;
        if let Some(&min) = eig.values.first() {
            if min < -threshold {
                return Err(Error::NotPositiveSemidefinite {
                    min_eigenvalue: min,
                    threshold: -threshold,
                });
            }
        }
    }
    Ok(im)
}

/// `‖T_{λ+iy}(H₀)‖` for each `y`.
pub fn t_norm_decay(inst: &ValidatedInstance, lambda: f64, ys: &[f64]) -> Result<Vec<f64>> {
    ys.iter()
        .map(|&y| {
            if !(y > 0.0) {
                return Err(Error::InvalidArgument(format!("decay probe needs y > 0, got {y}")));
            }
            let t = sandwiched_resolvent(inst, 0.0, SpectralParameter::new(lambda, y)?)?;
            numerics::spectral_norm(t.matrix())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_instance, validate_instance, Instance, ToleranceConfig};
    use crate::numerics::{c, identity, spectral_norm};

    fn scalar() -> ValidatedInstance {
        let m = |x: f64| CMatrix::from_element(1, 1, real(x));
        let inst = Instance::new(m(-1.0), m(1.0), m(1.0)).unwrap();
        validate_instance(&inst, &ToleranceConfig::default()).unwrap()
    }

    fn diag() -> ValidatedInstance {
        let h0 = CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)]);
        let inst = Instance::new(h0, identity(2), identity(2)).unwrap();
        validate_instance(&inst, &ToleranceConfig::default()).unwrap()
    }

    #[test]
    fn scalar_closed_form() {
        let inst = scalar();
        let t = sandwiched_resolvent(&inst, 0.0, SpectralParameter::new(-0.5, 0.5).unwrap()).unwrap();
        let expected = real(1.0) / c(-0.5, -0.5);
        assert!((t.matrix()[(0, 0)] - expected).norm() < 1e-14);
        assert!((expected - c(-1.0, 1.0)).norm() < 1e-14);
        let im = t.im_part().as_matrix()[(0, 0)];
        assert!((im - real(1.0)).norm() < 1e-14);
        let im2 = im_part(&t).unwrap().as_matrix()[(0, 0)];
        assert!((im2 - real(1.0)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_boundary_value() {
        let inst = diag();
        let t = sandwiched_resolvent(&inst, 0.0, SpectralParameter::boundary(-0.5).unwrap()).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[real(2.0 / 3.0), real(0.0), real(0.0), real(-2.0)]);
        assert!((t.matrix() - expected).norm() < 1e-14);
        assert_eq!(t.im_part().as_matrix(), &CMatrix::zeros(2, 2));
        assert!(im_part(&t).unwrap().as_matrix().norm() < 1e-15);
    }

    #[test]
    fn eigenvalue_of_h0_is_rejected() {
        let inst = diag();
        for lambda in [1.0, -1.0] {
            let err = sandwiched_resolvent(&inst, 0.0, SpectralParameter::boundary(lambda).unwrap()).unwrap_err();
            assert!(matches!(err, Error::LambdaInSpectrum { .. }));
        }
        // same point with y > 0 is fine
        assert!(sandwiched_resolvent(&inst, 0.0, SpectralParameter::new(1.0, 0.1).unwrap()).is_ok());
    }

    #[test]
    fn scalar_decay_closed_form() {
        let inst = scalar();
        let norms = t_norm_decay(&inst, -0.5, &[1.0, 10.0, 100.0]).unwrap();
        for (norm, y) in norms.iter().zip([1.0f64, 10.0, 100.0]) {
            let expected = 1.0 / c(-0.5, -y).norm();
            assert!((norm - expected).abs() < 1e-14);
        }
        assert!((norms[0] - 0.894).abs() < 1e-3);
        assert!((norms[1] - 0.0999).abs() < 1e-4);
        assert!((norms[2] - 0.0100).abs() < 1e-4);
    }

    #[test]
    fn random_resolvent_invariants() {
        let tol = ToleranceConfig::default();
        for seed in 0..100u64 {
            let n = 2 + (seed as usize % 6);
            let k = 1 + (seed as usize % n.min(4));
            let sig: Vec<i8> = (0..k)
                .map(|i| if (seed as usize + i) % 2 == 0 { 1 } else { -1 })
                .collect();
            let inst = validate_instance(&random_instance(n, k, &sig, seed).unwrap(), &tol).unwrap();
            let lambda = (seed as f64 * 0.37).sin() * 2.0;
            let y = 10f64.powf(-3.0 + (seed % 7) as f64);
            let t = sandwiched_resolvent(&inst, 0.0, SpectralParameter::new(lambda, y).unwrap()).unwrap();
            let tn = spectral_norm(t.matrix()).unwrap();
            // Im T is PSD, and the gram form agrees with (T - T*)/(2i)
            let diff_form = im_part(&t).unwrap();
            let eig = numerics::herm_eig(t.im_part()).unwrap();
            assert!(eig.values[0] >= -tol.tol_psd * tn);
            assert!((diff_form.as_matrix() - t.im_part().as_matrix()).norm() <= 1e-10 * tn.max(1e-300));
            // decay bound
            assert!(tn <= inst.f_norm().powi(2) / y * (1.0 + 1e-12));
        }
    }

    #[test]
    fn boundary_value_is_hermitian() {
        let tol = ToleranceConfig::default();
        let inst = validate_instance(&random_instance(5, 3, &[1, -1, 1], 4).unwrap(), &tol).unwrap();
        let lambda = crate::model::lambda_grid(&inst, 3)[1];
        let t = sandwiched_resolvent(&inst, 0.0, SpectralParameter::boundary(lambda).unwrap()).unwrap();
        let m = t.matrix();
        assert!((m - m.adjoint()).norm() <= tol.tol_herm * m.norm());
    }

    #[test]
    fn first_resolvent_identity() {
        // T_z - T_w = (z - w) F R_z R_w F*, with R built independently by inversion
        let tol = ToleranceConfig::default();
        for seed in 0..20u64 {
            let inst = validate_instance(&random_instance(4, 2, &[1, -1], 100 + seed).unwrap(), &tol).unwrap();
            let z = SpectralParameter::new(0.3 * seed as f64 - 2.0, 0.2 + 0.1 * seed as f64).unwrap();
            let w = SpectralParameter::new(1.0 - 0.1 * seed as f64, 0.7).unwrap();
            let tz = sandwiched_resolvent(&inst, 0.0, z).unwrap();
            let tw = sandwiched_resolvent(&inst, 0.0, w).unwrap();
            let n = inst.n();
            let rz = (inst.h0().as_matrix() - identity(n) * z.z()).try_inverse().unwrap();
            let rw = (inst.h0().as_matrix() - identity(n) * w.z()).try_inverse().unwrap();
            let rhs = inst.f() * rz * rw * inst.f_adjoint() * (z.z() - w.z());
            let lhs = tz.matrix() - tw.matrix();
            assert!((lhs - &rhs).norm() <= 1e-9 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn decay_tail_is_monotone() {
        let tol = ToleranceConfig::default();
        let inst = validate_instance(&random_instance(6, 3, &[1, 1, -1], 8).unwrap(), &tol).unwrap();
        let diameter = inst.spectrum().last().unwrap() - inst.spectrum()[0];
        let ys: Vec<f64> = (0..8).map(|i| (diameter + 1.0) * 2f64.powi(i)).collect();
        let norms = t_norm_decay(&inst, 0.1, &ys).unwrap();
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}
