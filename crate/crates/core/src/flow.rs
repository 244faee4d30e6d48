//! Spectral flow of scattering-matrix eigenvalues.
//!
//! A path `t ↦ U(t)`, `t ∈ [0, 1]`, is sampled and its eigenvalues tracked
//! (see [`crate::track`]). The μ-invariant at angle `θ` is the net number of
//! clockwise passages of tracked eigenvalues through `e^{iθ}`.
//!
//! * `μ`: the path `y ↦ S(λ + iy, 1)` from `y = 0` to a certified `Y_max`
//!   beyond which no eigenvalue can reach `e^{iθ}`.
//! * `μ⁽ᵃ⁾`: the path `s ↦ S(λ + i0, s)` from `s = 1` to `0`, with small
//!   balls around real resonance points excised.
//! * `μ⁽ˢ⁾ = μ − μ⁽ᵃ⁾`, independent of `θ`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::contour::path_det_winding;
use crate::error::{Error, Result};
use crate::model::{SpectralParameter, ToleranceConfig, ValidatedInstance};
use crate::numerics::{self, real, CMatrix};
use crate::resonance::{self, ResonancePoint};
use crate::scattering::{unitarity_defect, Scattering};
use crate::track::{self, Sample, TrackOptions};

/// Relative width of the real-axis samples near `y = 0`:
/// `y_min = 1e-6·max(1, ‖H₀‖)`.
pub const Y_MIN_REL: f64 = 1e-6;

/// Bound on `‖F‖²‖J‖/Y_max`. Since `‖T_{λ+iy}‖ ≤ ‖F‖²/y`, it caps
/// `‖S(λ+iy, 1) − I‖ ≤ 2δ/(1 − δ)` for every `y ≥ Y_max`.
pub const TAIL_RESIDUAL: f64 = 0.004;

/// Radius of the excised balls along the boundary path, relative to the
/// window span.
pub const EXCISION_REL: f64 = 1e-4;

/// Endpoint phases closer than this to `θ` (mod 2π) are rejected.
pub const PHASE_ON_TARGET: f64 = 1e-6;

pub type MatrixFn = Arc<dyn Fn(f64) -> Result<CMatrix> + Send + Sync>;
pub type ParamFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A matrix-valued path over `t ∈ [0, 1]`, evaluable on `segments`.
#[derive(Clone)]
pub struct UnitaryPath {
    pub description: String,
    eval: MatrixFn,
    param: ParamFn,
    segments: Vec<(f64, f64)>,
    unitary: bool,
    min_samples: usize,
}

impl std::fmt::Debug for UnitaryPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryPath")
            .field("description", &self.description)
            .field("segments", &self.segments)
            .field("unitary", &self.unitary)
            .finish()
    }
}

impl UnitaryPath {
    /// `param` maps `t` to the physical parameter recorded with each
    /// sample (`y` or `s`).
    pub fn new(description: impl Into<String>, eval: MatrixFn, param: ParamFn) -> Self {
        Self {
            description: description.into(),
            eval,
            param,
            segments: vec![(0.0, 1.0)],
            unitary: true,
            min_samples: 0,
        }
    }

    /// Restrict evaluation to disjoint increasing sub-intervals of `[0, 1]`.
    pub fn with_segments(mut self, segments: Vec<(f64, f64)>) -> Self {
        self.segments = segments;
        self
    }

    /// Lower bound on the initial samples used when tracking this path.
    pub fn with_min_samples(mut self, samples: usize) -> Self {
        self.min_samples = samples;
        self
    }

    pub fn min_samples(&self) -> usize {
        self.min_samples
    }

    /// Skip the per-sample unitarity check (complex couplings).
    pub fn allow_non_unitary(mut self) -> Self {
        self.unitary = false;
        self
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    pub fn evaluate(&self, t: f64) -> Result<CMatrix> {
        (self.eval)(t)
    }

    pub fn param(&self, t: f64) -> f64 {
        (self.param)(t)
    }

    pub fn reversed(&self) -> Self {
        let eval = Arc::clone(&self.eval);
        let param = Arc::clone(&self.param);
        Self {
            description: format!("reversed({})", self.description),
            eval: Arc::new(move |t| eval(1.0 - t)),
            param: Arc::new(move |t| param(1.0 - t)),
            segments: self.segments.iter().rev().map(|&(a, b)| (1.0 - b, 1.0 - a)).collect(),
            unitary: self.unitary,
            min_samples: self.min_samples,
        }
    }

    /// `self` on `[0, 1/2]` followed by `next` on `[1/2, 1]`.
    pub fn then(&self, next: &UnitaryPath) -> Self {
        let (e1, e2) = (Arc::clone(&self.eval), Arc::clone(&next.eval));
        let (p1, p2) = (Arc::clone(&self.param), Arc::clone(&next.param));
        let mut segments: Vec<(f64, f64)> = self.segments.iter().map(|&(a, b)| (0.5 * a, 0.5 * b)).collect();
        for &(a, b) in &next.segments {
            let seg = (0.5 + 0.5 * a, 0.5 + 0.5 * b);
            match segments.last_mut() {
                Some(last) if last.1 == seg.0 => last.1 = seg.1,
                _ => segments.push(seg),
            }
        }
        Self {
            description: format!("{} then {}", self.description, next.description),
            eval: Arc::new(move |t| if t <= 0.5 { e1(2.0 * t) } else { e2(2.0 * t - 1.0) }),
            param: Arc::new(move |t| if t <= 0.5 { p1(2.0 * t) } else { p2(2.0 * t - 1.0) }),
            segments,
            unitary: self.unitary && next.unitary,
            min_samples: 2 * self.min_samples.max(next.min_samples),
        }
    }
}

/// Matched, phase-lifted eigenvalue tracks of a path.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub description: String,
    pub t: Vec<f64>,
    /// The physical parameter (`y` or `s`) at each sample.
    pub param: Vec<f64>,
    pub eigenvalues: Vec<Vec<Complex64>>,
    pub phases: Vec<Vec<f64>>,
    pub dets: Vec<Complex64>,
    pub max_depth_used: usize,
    pub evaluations: usize,
}

impl Trajectory {
    pub fn tracks(&self) -> usize {
        self.eigenvalues.first().map_or(0, Vec::len)
    }

    pub fn samples(&self) -> usize {
        self.t.len()
    }

    /// `(φ_j(1) − φ_j(0)) / 2π` per track.
    pub fn phase_windings(&self) -> Vec<f64> {
        match (self.phases.first(), self.phases.last()) {
            (Some(a), Some(b)) => a.iter().zip(b).map(|(x, y)| (y - x) / TAU).collect(),
            _ => Vec::new(),
        }
    }

    pub fn total_phase_winding(&self) -> f64 {
        self.phase_windings().iter().sum()
    }

    /// Winding of `det U` along the samples, computed from the
    /// determinants alone.
    pub fn det_winding(&self) -> f64 {
        path_det_winding(&self.dets)
    }
}

/// Tracks the eigenvalues of a path; unitary paths are checked sample by
/// sample against `tol_unitary`.
pub fn track_eigenvalues(path: &UnitaryPath, initial_samples: usize, tol: &ToleranceConfig) -> Result<Trajectory> {
    let check = path.unitary;
    let tol_unitary = tol.tol_unitary;
    let eval = |t: f64| -> Result<Sample> {
        let m = path.evaluate(t)?;
        if check {
            let defect = unitarity_defect(&m);
            if !(defect <= tol_unitary) {
                return Err(Error::NotUnitary { t, defect });
            }
        }
        Ok(Sample {
            eigenvalues: numerics::general_eig(&m)?,
            det: numerics::det(&m)?,
        })
    };
    let tracks = track::track(
        &eval,
        &path.segments,
        TrackOptions {
            initial_samples: initial_samples.max(path.min_samples),
            max_step: tol.max_step_phase,
            max_depth: tol.max_adaptive_depth,
        },
    )?;
    Ok(Trajectory {
        description: path.description.clone(),
        param: tracks.params.iter().map(|&t| path.param(t)).collect(),
        t: tracks.params,
        eigenvalues: tracks.values,
        phases: tracks.phases,
        dets: tracks.dets,
        max_depth_used: tracks.max_depth_used,
        evaluations: tracks.evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossings {
    /// Net anticlockwise passages through `e^{iθ}` per track.
    pub per_track: Vec<i64>,
    /// `−Σ per_track`: net clockwise passages.
    pub mu: i64,
}

fn check_theta(theta: f64, margin: f64) -> Result<()> {
    if !(theta > margin && theta < TAU - margin) {
        return Err(Error::ThetaOutOfRange { theta, margin });
    }
    Ok(())
}

/// Signed passages through `e^{iθ}` of every track, from the lifted end
/// phases: `N_j = ⌊(φ_j(1) − θ)/2π⌋ − ⌊(φ_j(0) − θ)/2π⌋`.
pub fn crossings(trajectory: &Trajectory, theta: f64, margin: f64) -> Result<Crossings> {
    check_theta(theta, margin)?;
    let (Some(start), Some(end)) = (trajectory.phases.first(), trajectory.phases.last()) else {
        return Ok(Crossings {
            per_track: Vec::new(),
            mu: 0,
        });
    };
    let mut per_track = Vec::with_capacity(start.len());
    for (j, (&p0, &p1)) in start.iter().zip(end).enumerate() {
        for phase in [p0, p1] {
            let off = (phase - theta).rem_euclid(TAU);
            if off.min(TAU - off) < PHASE_ON_TARGET {
                return Err(Error::PhaseOnTarget { track: j, phase, theta });
            }
        }
        let n = ((p1 - theta) / TAU).floor() - ((p0 - theta) / TAU).floor();
        per_track.push(n as i64);
    }
    let mu = -per_track.iter().sum::<i64>();
    Ok(Crossings { per_track, mu })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowDiagnostics {
    pub samples: usize,
    pub evaluations: usize,
    pub refinement_depth: usize,
    /// Upper end of the `y` range, for `y`-paths.
    pub y_max: Option<f64>,
    /// Unrounded winding of `det U` along the samples.
    pub det_winding_raw: f64,
    /// `Σ_j (φ_j(1) − φ_j(0))/2π`.
    pub phase_winding_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowResult {
    pub mu: i64,
    pub theta: f64,
    pub per_track_crossings: Vec<i64>,
    /// Rounded winding of `det U`; equals the rounded sum of track
    /// windings.
    pub det_winding: i64,
    pub diagnostics: FlowDiagnostics,
}

impl FlowResult {
    /// Whether the determinant winding and the summed track windings agree.
    pub fn windings_consistent(&self) -> bool {
        let d = &self.diagnostics;
        d.phase_winding_raw.round() as i64 == self.det_winding
            && (d.phase_winding_raw - d.det_winding_raw).abs() <= 1e-6
    }
}

pub fn flow_result(trajectory: &Trajectory, theta: f64, margin: f64, y_max: Option<f64>) -> Result<FlowResult> {
    let cr = crossings(trajectory, theta, margin)?;
    let det_raw = trajectory.det_winding();
    Ok(FlowResult {
        mu: cr.mu,
        theta,
        per_track_crossings: cr.per_track,
        det_winding: det_raw.round() as i64,
        diagnostics: FlowDiagnostics {
            samples: trajectory.samples(),
            evaluations: trajectory.evaluations,
            refinement_depth: trajectory.max_depth_used,
            y_max,
            det_winding_raw: det_raw,
            phase_winding_raw: trajectory.total_phase_winding(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions {
    pub initial_samples: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { initial_samples: 65 }
    }
}

/// Certified upper end of the `y`-path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YMax {
    pub y_max: f64,
    pub y_min: f64,
    /// `‖T_{λ+iY}‖·‖J‖`.
    pub t_norm: f64,
    /// `sup_s ‖S(λ+iY, s) − I‖` over 21 points of `[0, 1]`.
    pub sup_deviation: f64,
    /// Largest `|arg|` of an eigenvalue of `S(λ+iY, 1)`.
    pub max_angle: f64,
    /// `‖F‖²‖J‖/Y`.
    pub tail_bound: f64,
}

/// Smallest `Y = y₀·2^j`, `y₀ = max(1, ‖H₀‖)`, with `‖T_{λ+iY}‖‖J‖ ≤ 0.1`,
/// every eigenvalue of `S(λ+iY, 1)` within `θ_margin/2` of `1`,
/// `sup_s ‖S − I‖ ≤ 0.01` on the grid, and `‖F‖²‖J‖/Y ≤ TAIL_RESIDUAL`.
pub fn choose_y_max(inst: &ValidatedInstance, lambda: f64) -> Result<YMax> {
    let tol = inst.tolerances();
    let scale = inst.energy_scale();
    let tail_const = inst.f_norm().powi(2) * inst.j_norm();
    let mut y = scale;
    for _ in 0..400 {
        let tail_bound = tail_const / y;
        if tail_bound <= TAIL_RESIDUAL {
            let sc = Scattering::new(inst, SpectralParameter::new(lambda, y)?)?;
            let t_norm = numerics::spectral_norm(sc.resolvent().matrix())? * inst.j_norm();
            let s1 = sc.s_matrix(real(1.0))?.matrix;
            let max_angle = numerics::general_eig(&s1)?
                .iter()
                .map(|e| e.arg().abs())
                .fold(0.0, f64::max);
            let sup_deviation = sup_deviation(&sc)?;
            if t_norm <= 0.1 && max_angle <= 0.5 * tol.theta_margin && sup_deviation <= 0.01 {
                return Ok(YMax {
                    y_max: y,
                    y_min: Y_MIN_REL * scale,
                    t_norm,
                    sup_deviation,
                    max_angle,
                    tail_bound,
                });
            }
        }
        y *= 2.0;
    }
    Err(Error::RefinementExhausted { t: y })
}

/// `sup ‖S(z, s) − I‖` over `s ∈ {0, 0.05, …, 1}`.
pub fn sup_deviation(sc: &Scattering) -> Result<f64> {
    let k = sc.dim();
    let mut sup = 0.0f64;
    for i in 0..=20 {
        let m = sc.s_matrix(real(i as f64 / 20.0))?.matrix;
        sup = sup.max(numerics::spectral_norm(&(m - numerics::identity(k)))?);
    }
    Ok(sup)
}

/// `t ↦ S(λ + i·g(t), s)` with `g(t) = y_min(R^t − 1)`,
/// `R = 1 + Y_max/y_min`: geometric near `y = 0`, exact `g(0) = 0`.
pub fn y_path(inst: &ValidatedInstance, lambda: f64, s: f64, y_min: f64, y_max: f64) -> UnitaryPath {
    let inst = inst.clone();
    let ratio = 1.0 + y_max / y_min;
    let g = move |t: f64| {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            y_max
        } else {
            y_min * (ratio.powf(t) - 1.0)
        }
    };
    let eval = move |t: f64| -> Result<CMatrix> {
        let z = SpectralParameter::new(lambda, g(t))?;
        Ok(Scattering::new(&inst, z)?.s_matrix(real(s))?.matrix)
    };
    UnitaryPath::new(format!("y-path at s = {s}"), Arc::new(eval), Arc::new(g))
}

fn ensure_regular_endpoint(inst: &ValidatedInstance, lambda: f64, s: f64) -> Result<()> {
    if let Some(point) = resonance::nearby_real_point(inst, lambda, s)? {
        return Err(Error::ResonantEndpoint {
            endpoint: s,
            point,
            distance: (point - s).abs(),
        });
    }
    Ok(())
}

/// The `y`-path trajectory at `s = 1` used by [`mu_invariant`].
pub fn mu_trajectory(inst: &ValidatedInstance, lambda: f64, opts: FlowOptions) -> Result<(Trajectory, YMax)> {
    if !inst.admits_boundary_value(lambda) {
        return Err(Error::LambdaInSpectrum {
            lambda,
            distance: inst.distance_to_spectrum(lambda),
        });
    }
    ensure_regular_endpoint(inst, lambda, 1.0)?;
    let ymax = choose_y_max(inst, lambda)?;
    let path = y_path(inst, lambda, 1.0, ymax.y_min, ymax.y_max);
    let traj = track_eigenvalues(&path, opts.initial_samples, inst.tolerances())?;
    Ok((traj, ymax))
}

/// `μ(θ, λ)`: net clockwise passages through `e^{iθ}` of the eigenvalues of
/// `S(λ + iy, 1)` as `y` runs from `0` to `∞`.
pub fn mu_invariant(inst: &ValidatedInstance, lambda: f64, theta: f64, opts: FlowOptions) -> Result<FlowResult> {
    check_theta(theta, inst.tolerances().theta_margin)?;
    let (traj, ymax) = mu_trajectory(inst, lambda, opts)?;
    flow_result(&traj, theta, inst.tolerances().theta_margin, Some(ymax.y_max))
}

/// `t ↦ S(λ + i0, 1 − t)` with balls of radius `1e-4` around real resonance
/// points in `[0, 1]` removed.
pub fn mu_a_trajectory(inst: &ValidatedInstance, lambda: f64, opts: FlowOptions) -> Result<Trajectory> {
    let eps = EXCISION_REL;
    let points = resonance::all_real_points(inst, lambda)?;
    let mut gaps: Vec<(f64, f64)> = points
        .iter()
        .map(|&(r, _)| r)
        .filter(|&r| r > -eps && r < 1.0 + eps)
        .map(|r| (1.0 - r - eps, 1.0 - r + eps))
        .collect();
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &(lo, hi) in &gaps {
        if lo <= 0.0 {
            return Err(Error::ResonantEndpoint {
                endpoint: 1.0,
                point: 1.0 - 0.5 * (lo + hi),
                distance: (0.5 * (lo + hi)).abs(),
            });
        }
        if hi >= 1.0 {
            return Err(Error::ResonantEndpoint {
                endpoint: 0.0,
                point: 1.0 - 0.5 * (lo + hi),
                distance: (1.0 - 0.5 * (lo + hi)).abs(),
            });
        }
    }
    let mut segments = Vec::new();
    let mut start = 0.0;
    for (lo, hi) in gaps {
        if lo > start {
            segments.push((start, lo));
        }
        start = start.max(hi);
    }
    segments.push((start, 1.0));
    let sc = Arc::new(Scattering::new(inst, SpectralParameter::boundary(lambda)?)?);
    let eval = move |t: f64| -> Result<CMatrix> { Ok(sc.s_matrix(real(1.0 - t))?.matrix) };
    let path = UnitaryPath::new("s-path at y = 0", Arc::new(eval), Arc::new(|t| 1.0 - t)).with_segments(segments);
    match track_eigenvalues(&path, opts.initial_samples, inst.tolerances()) {
        Err(Error::GapTooWide { s, jump }) => Err(Error::GapTooWide { s: 1.0 - s, jump }),
        other => other,
    }
}

/// `μ⁽ᵃ⁾(θ, λ)`: flow of `S(λ + i0, s)` as `s` runs from `1` to `0`.
pub fn mu_a_invariant(inst: &ValidatedInstance, lambda: f64, theta: f64, opts: FlowOptions) -> Result<FlowResult> {
    check_theta(theta, inst.tolerances().theta_margin)?;
    let traj = mu_a_trajectory(inst, lambda, opts)?;
    flow_result(&traj, theta, inst.tolerances().theta_margin, None)
}

/// One piece of the coupling path at fixed `y`.
#[derive(Debug, Clone, Copy)]
enum Piece {
    Line(Complex64, Complex64),
    /// Upper semicircle around a real centre from angle 0 to π.
    Arc(f64, f64),
    /// The diameter `[r + ρ, r − ρ]`, sampled densely near `r` through
    /// `s = r + ρ·sinh(a(1 − 2u))/sinh(a)`.
    Graded(f64, f64, f64),
}

impl Piece {
    fn at(&self, u: f64) -> Complex64 {
        match *self {
            Piece::Line(a, b) => a + (b - a) * u,
            Piece::Arc(r, rho) => real(r) + Complex64::from_polar(rho, PI * u),
            Piece::Graded(r, rho, a) => real(r + rho * (a * (1.0 - 2.0 * u)).sinh() / a.sinh()),
        }
    }
}

/// Samples per piece guaranteed by [`rectangle_path`].
const PIECE_SAMPLES: usize = 16;

/// Sharpness `a` of the graded diameter such that the spacing at the centre,
/// `2ρa/(sinh(a)·PIECE_SAMPLES)`, is at most `gap/4`.
fn grading(rho: f64, gap: f64) -> f64 {
    let spacing = |a: f64| 2.0 * rho * a / (a.sinh() * PIECE_SAMPLES as f64);
    let mut a = 1.0;
    while spacing(a) > 0.25 * gap && a < 600.0 {
        a += 1.0;
    }
    a
}

fn coupling_pieces(crossings: &[(f64, Piece)]) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut at = real(1.0);
    let mut sorted = crossings.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, piece) in sorted {
        pieces.push(Piece::Line(at, piece.at(0.0)));
        at = piece.at(1.0);
        pieces.push(piece);
    }
    pieces.push(Piece::Line(at, real(0.0)));
    pieces
}

/// Each piece gets an equal share of `u ∈ [0, 1]`.
fn piece_point(pieces: &[Piece], u: f64) -> Complex64 {
    let scaled = u.clamp(0.0, 1.0) * pieces.len() as f64;
    let idx = (scaled.floor() as usize).min(pieces.len() - 1);
    pieces[idx].at(scaled - idx as f64)
}

/// Composite path `(y: 0 → y₀ at s = 1)`, `(s: 1 → 0 at y = y₀)`,
/// `(y: y₀ → 0 at s = 0)`. With `detour`, the middle leg replaces each
/// diameter `[r − ρ, r + ρ]` around a real resonance point `r` by the
/// upper semicircle.
pub fn rectangle_path(inst: &ValidatedInstance, lambda: f64, y0: f64, rho: f64, detour: bool) -> Result<UnitaryPath> {
    if !(y0 > 0.0) || !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need y0 > 0 and rho > 0, got {y0}, {rho}"
        )));
    }
    ensure_regular_endpoint(inst, lambda, 1.0)?;
    let reals = resonance::all_real_points(inst, lambda)?;
    let mut centers = Vec::new();
    for &(r, multiplicity) in &reals {
        if r <= 0.0 || r >= 1.0 {
            continue;
        }
        if r - rho <= 0.0 || r + rho >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "detour disc around {r} with radius {rho} leaves (0, 1)"
            )));
        }
        let point = ResonancePoint {
            location: real(r),
            multiplicity,
            group_id: centers.len(),
            base_y: 0.0,
            cluster_radius: rho,
        };
        let members = resonance::resonance_group(inst, lambda, &point, y0)?;
        let gap = members.iter().map(|m| m.im.abs()).fold(rho, f64::min);
        let piece = if detour {
            Piece::Arc(r, rho)
        } else {
            Piece::Graded(r, rho, grading(rho, gap))
        };
        centers.push((r, piece));
    }
    centers.sort_by(|a, b| a.0.total_cmp(&b.0));
    if centers.windows(2).any(|w| w[1].0 - w[0].0 <= 2.0 * rho) {
        return Err(Error::InvalidArgument(format!("detour discs of radius {rho} overlap")));
    }
    let pieces = coupling_pieces(&centers);
    let min_samples = 3 * PIECE_SAMPLES * pieces.len();
    let inst_leg = inst.clone();
    let fixed = Arc::new(Scattering::new(inst, SpectralParameter::new(lambda, y0)?)?);
    let pieces_eval = pieces.clone();
    let eval = move |t: f64| -> Result<CMatrix> {
        if t <= 1.0 / 3.0 {
            let z = SpectralParameter::new(lambda, y0 * (3.0 * t).min(1.0))?;
            Ok(Scattering::new(&inst_leg, z)?.s_matrix(real(1.0))?.matrix)
        } else if t < 2.0 / 3.0 {
            Ok(fixed.s_matrix(piece_point(&pieces_eval, 3.0 * t - 1.0))?.matrix)
        } else {
            Ok(numerics::identity(inst_leg.k()))
        }
    };
    let param = move |t: f64| {
        if t <= 1.0 / 3.0 {
            y0 * 3.0 * t
        } else if t < 2.0 / 3.0 {
            piece_point(&pieces, 3.0 * t - 1.0).re
        } else {
            y0 * (3.0 - 3.0 * t).max(0.0)
        }
    };
    let name = if detour {
        "detoured rectangle"
    } else {
        "straight rectangle"
    };
    Ok(UnitaryPath::new(name, Arc::new(eval), Arc::new(param))
        .allow_non_unitary()
        .with_min_samples(min_samples))
}

/// Flow along the rectangle that circumvents every real resonance point
/// from above at height `y₀` with radius `ρ`. Equals `μ⁽ᵃ⁾`.
pub fn mu_a_contour(
    inst: &ValidatedInstance,
    lambda: f64,
    theta: f64,
    y0: f64,
    rho: f64,
    opts: FlowOptions,
) -> Result<FlowResult> {
    check_theta(theta, inst.tolerances().theta_margin)?;
    let path = rectangle_path(inst, lambda, y0, rho, true)?;
    let traj = track_eigenvalues(&path, opts.initial_samples, inst.tolerances())?;
    flow_result(&traj, theta, inst.tolerances().theta_margin, None)
}

/// `θ_i = π(2i + 1)/m`, `i = 0..m`.
pub fn theta_grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| PI * (2 * i + 1) as f64 / m as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaRow {
    pub theta: f64,
    pub mu: i64,
    pub mu_a: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularFlow {
    /// The common value of `μ(θ) − μ⁽ᵃ⁾(θ)`.
    pub mu_s: i64,
    pub rows: Vec<ThetaRow>,
    pub mu_flow: FlowResult,
    pub mu_a_flow: FlowResult,
}

/// `μ⁽ˢ⁾ = μ(θ) − μ⁽ᵃ⁾(θ)` on every angle of the grid; the values must
/// coincide. Both trajectories are computed once.
pub fn mu_singular(inst: &ValidatedInstance, lambda: f64, thetas: &[f64], opts: FlowOptions) -> Result<SingularFlow> {
    let margin = inst.tolerances().theta_margin;
    if thetas.is_empty() {
        return Err(Error::InvalidArgument("empty theta grid".into()));
    }
    for &theta in thetas {
        check_theta(theta, margin)?;
    }
    let (mu_traj, ymax) = mu_trajectory(inst, lambda, opts)?;
    let a_traj = mu_a_trajectory(inst, lambda, opts)?;
    let mut rows = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let mu = crossings(&mu_traj, theta, margin)?.mu;
        let mu_a = crossings(&a_traj, theta, margin)?.mu;
        rows.push(ThetaRow { theta, mu, mu_a });
    }
    let first = rows[0].mu - rows[0].mu_a;
    if rows.iter().any(|r| r.mu - r.mu_a != first) {
        return Err(Error::ThetaDependence {
            values: rows.iter().map(|r| (r.theta, r.mu - r.mu_a)).collect(),
        });
    }
    Ok(SingularFlow {
        mu_s: first,
        mu_flow: flow_result(&mu_traj, thetas[0], margin, Some(ymax.y_max))?,
        mu_a_flow: flow_result(&a_traj, thetas[0], margin, None)?,
        rows,
    })
}
