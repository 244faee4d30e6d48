//! Problem instances `(H₀, F, J)`, their validation, seeded generation,
//! tolerance configuration and λ grids.
//!
//! An instance describes the pair `H₀` and `H₁ = H₀ + V` on `ℂⁿ` with the
//! perturbation given in factored form `V = F*JF`, `F: ℂⁿ → ℂᵏ`. In finite
//! dimension the sandwiched resolvent `F(H₀ − z)⁻¹F*` exists with a boundary
//! value at every real `λ` outside `spec(H₀)`, so validation only has to
//! check Hermiticity and shapes; the spectrum is cached for later gap checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, c, real, CMatrix, HermitianMatrix};

/// Largest dimension the random generator accepts.
pub const MAX_GENERATED_DIM: usize = 32;

/// Every numerical threshold used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub tol_herm: f64,
    pub tol_psd: f64,
    pub tol_sing: f64,
    /// Relative realness test for eigenvalues of `T·J` at the boundary.
    pub tol_real: f64,
    pub tol_unitary: f64,
    /// Resonance-group cluster radius as a fraction of the distance to the
    /// nearest neighbouring point or window edge.
    pub cluster_factor: f64,
    /// Largest per-step eigenvalue phase move (radians) before a path step
    /// is bisected.
    pub max_step_phase: f64,
    pub min_contour_samples: usize,
    pub max_adaptive_depth: usize,
    /// Angles within this distance of `0 mod 2π` are rejected as flow targets.
    pub theta_margin: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            tol_herm: 1e-10,
            tol_psd: 1e-10,
            tol_sing: 1e-12,
            tol_real: 1e-8,
            tol_unitary: 1e-8,
            cluster_factor: 0.25,
            max_step_phase: 0.2,
            min_contour_samples: 64,
            max_adaptive_depth: 20,
            theta_margin: 0.1,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_herm", self.tol_herm),
            ("tol_psd", self.tol_psd),
            ("tol_sing", self.tol_sing),
            ("tol_real", self.tol_real),
            ("tol_unitary", self.tol_unitary),
            ("cluster_factor", self.cluster_factor),
            ("max_step_phase", self.max_step_phase),
            ("theta_margin", self.theta_margin),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.min_contour_samples < 4 {
            return Err(Error::InvalidConfig("min_contour_samples must be at least 4".into()));
        }
        if self.max_adaptive_depth == 0 || self.max_adaptive_depth > 60 {
            return Err(Error::InvalidConfig("max_adaptive_depth must be in 1..=60".into()));
        }
        if self.cluster_factor >= 0.5 {
            return Err(Error::InvalidConfig("cluster_factor must be below 0.5".into()));
        }
        if self.theta_margin >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::InvalidConfig("theta_margin must be below pi/2".into()));
        }
        if self.max_step_phase >= std::f64::consts::PI {
            return Err(Error::InvalidConfig("max_step_phase must be below pi".into()));
        }
        Ok(())
    }
}

/// `z = λ + iy` with `y ≥ 0`; `y = 0` denotes the boundary value `λ + i0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter {
    pub lambda: f64,
    pub y: f64,
}

impl SpectralParameter {
    pub fn new(lambda: f64, y: f64) -> Result<Self> {
        if !lambda.is_finite() || !y.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite spectral parameter {lambda} + {y}i"
            )));
        }
        if y < 0.0 {
            return Err(Error::InvalidArgument(format!("imaginary part must be >= 0, got {y}")));
        }
        Ok(Self { lambda, y })
    }

    pub fn boundary(lambda: f64) -> Result<Self> {
        Self::new(lambda, 0.0)
    }

    pub fn z(&self) -> num_complex::Complex64 {
        c(self.lambda, self.y)
    }

    pub fn is_boundary(&self) -> bool {
        self.y == 0.0
    }
}

/// Closed interval `[a, b]` of real coupling constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingWindow {
    pub a: f64,
    pub b: f64,
}

impl Default for CouplingWindow {
    fn default() -> Self {
        Self { a: 0.0, b: 1.0 }
    }
}

impl CouplingWindow {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidArgument(format!(
                "coupling window needs a < b, got [{a}, {b}]"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn contains(&self, r: f64) -> bool {
        self.a <= r && r <= self.b
    }

    pub fn span(&self) -> f64 {
        self.b - self.a
    }

    pub fn distance_to_edge(&self, r: f64) -> f64 {
        (r - self.a).abs().min((self.b - r).abs())
    }
}

/// Raw instance data as read from disk or produced by the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub h0: CMatrix,
    pub f: CMatrix,
    pub j: CMatrix,
}

impl Instance {
    pub fn new(h0: CMatrix, f: CMatrix, j: CMatrix) -> Result<Self> {
        let inst = Self { h0, f, j };
        inst.check_shapes()?;
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.h0.nrows()
    }

    pub fn k(&self) -> usize {
        self.f.nrows()
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.h0.nrows();
        if n == 0 || self.h0.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "H0 must be a non-empty square matrix, got {}x{}",
                self.h0.nrows(),
                self.h0.ncols()
            )));
        }
        let k = self.f.nrows();
        if k == 0 || self.f.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "F must be k x {n} with k >= 1, got {}x{}",
                self.f.nrows(),
                self.f.ncols()
            )));
        }
        if self.j.nrows() != k || self.j.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "J must be {k}x{k}, got {}x{}",
                self.j.nrows(),
                self.j.ncols()
            )));
        }
        Ok(())
    }
}

/// An instance whose invariants have been checked, with derived data cached.
#[derive(Debug, Clone)]
pub struct ValidatedInstance {
    h0: HermitianMatrix,
    f: CMatrix,
    f_adjoint: CMatrix,
    j: HermitianMatrix,
    v: HermitianMatrix,
    spectrum: Vec<f64>,
    h0_norm: f64,
    f_norm: f64,
    j_norm: f64,
    tol: ToleranceConfig,
}

/// Checks shapes, finiteness and Hermiticity of `H₀`, `J` and `V = F*JF`.
pub fn validate_instance(inst: &Instance, tol: &ToleranceConfig) -> Result<ValidatedInstance> {
    tol.validate()?;
    inst.check_shapes()?;
    if !numerics::all_finite(&inst.f) || !numerics::frobenius(&inst.f).is_finite() {
        return Err(Error::NonFinite("F"));
    }
    let h0 = HermitianMatrix::new(inst.h0.clone(), tol.tol_herm)?;
    let j = HermitianMatrix::new(inst.j.clone(), tol.tol_herm)?;
    let f = inst.f.clone();
    let f_adjoint = f.adjoint();
    let v_raw = &f_adjoint * j.as_matrix() * &f;
    let v = HermitianMatrix::new(v_raw, tol.tol_herm)?;
    let spectrum = numerics::herm_eig(&h0)?.values;
    let h0_norm = spectrum.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let f_norm = numerics::spectral_norm(&f)?;
    let j_norm = numerics::spectral_norm(j.as_matrix())?;
    Ok(ValidatedInstance {
        h0,
        f,
        f_adjoint,
        j,
        v,
        spectrum,
        h0_norm,
        f_norm,
        j_norm,
        tol: *tol,
    })
}

impl ValidatedInstance {
    pub fn n(&self) -> usize {
        self.h0.dim()
    }

    pub fn k(&self) -> usize {
        self.j.dim()
    }

    pub fn h0(&self) -> &HermitianMatrix {
        &self.h0
    }

    pub fn f(&self) -> &CMatrix {
        &self.f
    }

    pub fn f_adjoint(&self) -> &CMatrix {
        &self.f_adjoint
    }

    pub fn j(&self) -> &HermitianMatrix {
        &self.j
    }

    pub fn v(&self) -> &HermitianMatrix {
        &self.v
    }

    /// Ascending eigenvalues of `H₀`.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn h0_norm(&self) -> f64 {
        self.h0_norm
    }

    pub fn f_norm(&self) -> f64 {
        self.f_norm
    }

    pub fn j_norm(&self) -> f64 {
        self.j_norm
    }

    /// Scale used for relative thresholds on energies: `max(1, ‖H₀‖)`.
    pub fn energy_scale(&self) -> f64 {
        self.h0_norm.max(1.0)
    }

    pub fn tolerances(&self) -> &ToleranceConfig {
        &self.tol
    }

    pub fn with_tolerances(mut self, tol: ToleranceConfig) -> Result<Self> {
        tol.validate()?;
        self.tol = tol;
        Ok(self)
    }

    pub fn distance_to_spectrum(&self, lambda: f64) -> f64 {
        self.spectrum
            .iter()
            .map(|e| (e - lambda).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the boundary value `T_{λ+i0}(H₀)` exists, i.e. `λ ∉ spec(H₀)`
    /// beyond the singularity threshold. Compactness of `T_z` and existence
    /// of the boundary value are automatic in finite dimension.
    pub fn admits_boundary_value(&self, lambda: f64) -> bool {
        self.distance_to_spectrum(lambda) > 10.0 * self.tol.tol_sing * self.energy_scale()
    }

    /// Original (unsymmetrized) representation, e.g. for serialization.
    pub fn to_instance(&self) -> Instance {
        Instance {
            h0: self.h0.as_matrix().clone(),
            f: self.f.clone(),
            j: self.j.as_matrix().clone(),
        }
    }
}

/// `H_s = H₀ + s·F*JF`.
pub fn perturbed_operator(inst: &ValidatedInstance, s: f64) -> HermitianMatrix {
    let m = inst.h0.as_matrix() + inst.v.as_matrix() * real(s);
    HermitianMatrix::hermitian_part(&m)
}

/// Parses a signature given either as a sign string (`"+-+"`) or as a
/// comma-separated list of `±1` (`"1,-1,1"`).
pub fn parse_signature(text: &str) -> Result<Vec<i8>> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::Parse("empty signature".into()));
    }
    let signs: Result<Vec<i8>> = if t.contains(',') {
        t.split(',')
            .map(|p| match p.trim() {
                "1" | "+1" | "+" => Ok(1),
                "-1" | "-" => Ok(-1),
                other => Err(Error::Parse(format!("bad signature entry {other:?}"))),
            })
            .collect()
    } else {
        t.chars()
            .map(|ch| match ch {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("bad signature character {other:?}"))),
            })
            .collect()
    };
    signs
}

pub fn format_signature(signature: &[i8]) -> String {
    signature.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> num_complex::Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Seeded random instance: `H₀` the Hermitian part of a complex Gaussian
/// matrix, `F` complex Gaussian, `J = diag(signature)`.
///
/// The stream is ChaCha8 seeded from `seed`; entries of `H₀` are drawn first
/// in row-major order, then those of `F`.
pub fn random_instance(n: usize, k: usize, signature: &[i8], seed: u64) -> Result<Instance> {
    if k == 0 || k > n || n > MAX_GENERATED_DIM {
        return Err(Error::InvalidArgument(format!(
            "random_instance needs 1 <= k <= n <= {MAX_GENERATED_DIM}, got n={n}, k={k}"
        )));
    }
    if signature.len() != k {
        return Err(Error::InvalidArgument(format!(
            "signature has length {}, expected k = {k}",
            signature.len()
        )));
    }
    if signature.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidArgument("signature entries must be +1 or -1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = complex_gaussian(&mut rng);
        }
    }
    let h0 = HermitianMatrix::hermitian_part(&a).into_inner();
    let mut f = CMatrix::zeros(k, n);
    for i in 0..k {
        for j in 0..n {
            f[(i, j)] = complex_gaussian(&mut rng);
        }
    }
    let j = CMatrix::from_fn(
        k,
        k,
        |r, col| if r == col { real(signature[r] as f64) } else { real(0.0) },
    );
    Instance::new(h0, f, j)
}

/// Energies away from `spec(H₀)`: points inside each spectral gap, plus
/// points below the bottom and above the top of the spectrum.
///
/// Candidate points are generated interval by interval (each gap gets
/// equally spaced interior points, the two unbounded intervals get points
/// at multiples of a spacing `d`), sorted, and `count` of them are picked
/// evenly spaced through the sorted list. Gaps narrower than
/// `1e-6·max(1, ‖H₀‖)` are skipped. Fewer than `count` values are returned
/// only if no candidate exists, which cannot happen for `count ≥ 1`.
pub fn lambda_grid(inst: &ValidatedInstance, count: usize) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    let spec = inst.spectrum();
    let scale = inst.energy_scale();
    let min_gap = 1e-6 * scale;
    let gaps: Vec<(f64, f64)> = spec
        .windows(2)
        .filter(|w| w[1] - w[0] > min_gap)
        .map(|w| (w[0], w[1]))
        .collect();
    let lo = spec[0];
    let hi = spec[spec.len() - 1];
    let mean_gap = if spec.len() > 1 {
        (hi - lo) / (spec.len() - 1) as f64
    } else {
        0.0
    };
    let outer_step = 0.5 * mean_gap.max(1.0);
    let intervals = gaps.len() + 2;
    let per_interval = count.div_ceil(intervals).max(1);

    let mut candidates = Vec::with_capacity(intervals * per_interval);
    for m in 1..=per_interval {
        candidates.push(lo - outer_step * m as f64);
        candidates.push(hi + outer_step * m as f64);
    }
    for &(a, b) in &gaps {
        for m in 1..=per_interval {
            candidates.push(a + (b - a) * m as f64 / (per_interval + 1) as f64);
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let len = candidates.len();
    if count >= len {
        return candidates;
    }
    if count == 1 {
        return vec![candidates[len / 2]];
    }
    (0..count)
        .map(|i| {
            let idx = (i as f64 * (len - 1) as f64 / (count - 1) as f64).round() as usize;
            candidates[idx]
        })
        .collect()
}
