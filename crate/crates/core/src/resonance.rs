//! Real resonance points, their groups off the axis, and the resonance
//! index `N₊ − N₋`.
//!
//! At `z = λ + i0` a coupling `r` is a resonance point when `1 + rT_zJ` is
//! singular. Working from a non-resonant base `s₀`, these are
//! `r = s₀ − 1/σ` for the nonzero eigenvalues `σ` of `T_{λ+i0}(H_{s₀})·J`.
//! Moving `λ` to `λ + iy` splits a point of multiplicity `N` into `N`
//! non-real points; the index counts how many went up versus down.

use num_complex::Complex64;
use serde::Serialize;

use crate::contour::{self, Contour};
use crate::error::{Error, Result};
use crate::model::{perturbed_operator, CouplingWindow, SpectralParameter, ValidatedInstance};
use crate::numerics::{self, identity, real, CMatrix};
use crate::resolvent::sandwiched_resolvent;

/// Relative distance under which boundary eigenvalues are counted as one
/// point.
pub const CLUSTER_TOL: f64 = 1e-6;

/// Points closer than this to a window endpoint make the index undefined.
pub const ENDPOINT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonancePoint {
    pub location: Complex64,
    pub multiplicity: usize,
    pub group_id: usize,
    pub base_y: f64,
    /// Radius within which the group of this point must stay for `y > 0`.
    pub cluster_radius: f64,
}

impl ResonancePoint {
    pub fn real(&self) -> f64 {
        self.location.re
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointIndex {
    pub location: f64,
    pub multiplicity: usize,
    pub n_plus: usize,
    pub n_minus: usize,
    pub index: i64,
    /// `y` at which the counts were taken.
    pub y: f64,
    pub cluster_radius: f64,
    pub members: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexReport {
    pub lambda: f64,
    pub window: CouplingWindow,
    pub points: Vec<PointIndex>,
    pub total: i64,
}

/// Eigen-analysis of `T_{λ+i0}(H_{s₀})·J`.
#[derive(Debug, Clone)]
pub(crate) struct BoundaryAnalysis {
    pub s_base: f64,
    /// `s₀ − 1/σ` for every nonzero eigenvalue, real or not.
    pub mapped: Vec<Complex64>,
    /// Real points, clustered and sorted: (location, multiplicity).
    pub real_points: Vec<(f64, usize)>,
    /// `T_{λ+i0}(H_{s₀})·J`.
    pub tj: CMatrix,
}

fn cluster_tol(r: f64) -> f64 {
    CLUSTER_TOL * r.abs().max(1.0)
}

pub(crate) fn analyze_boundary(inst: &ValidatedInstance, lambda: f64, s_base: f64) -> Result<BoundaryAnalysis> {
    if !inst.admits_boundary_value(lambda) {
        return Err(Error::LambdaInSpectrum {
            lambda,
            distance: inst.distance_to_spectrum(lambda),
        });
    }
    let z = SpectralParameter::boundary(lambda)?;
    let t = match sandwiched_resolvent(inst, s_base, z) {
        Ok(t) => t,
        Err(Error::LambdaInSpectrum { .. }) if s_base != 0.0 => return Err(Error::BasePointResonant { s_base }),
        Err(e) => return Err(e),
    };
    let tj = t.matrix() * inst.j().as_matrix();
    let tol_real = inst.tolerances().tol_real;
    let mut mapped = Vec::new();
    let mut reals = Vec::new();
    for sigma in numerics::general_eig(&tj)? {
        if sigma.norm() == 0.0 {
            continue;
        }
        let r = real(s_base) - sigma.inv();
        if !(r.re.is_finite() && r.im.is_finite()) {
            continue;
        }
        if sigma.im.abs() <= tol_real * sigma.norm() {
            let r = s_base - 1.0 / sigma.re;
            if (r - s_base).abs() <= ENDPOINT_TOL * s_base.abs().max(1.0) {
                return Err(Error::BasePointResonant { s_base });
            }
            reals.push(r);
            mapped.push(real(r));
        } else {
            mapped.push(r);
        }
    }
    reals.sort_by(f64::total_cmp);
    let mut real_points: Vec<(f64, usize)> = Vec::new();
    let mut members: Vec<f64> = Vec::new();
    for r in reals {
        if let Some(&last) = members.last() {
            if r - last > cluster_tol(last) {
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                real_points.push((mean, members.len()));
                members.clear();
            }
        }
        members.push(r);
    }
    if !members.is_empty() {
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        real_points.push((mean, members.len()));
    }
    Ok(BoundaryAnalysis {
        s_base,
        mapped,
        real_points,
        tj,
    })
}

impl BoundaryAnalysis {
    /// Distance from `r` to the nearest mapped point that does not belong
    /// to the cluster at `r`.
    fn separation(&self, r: f64) -> f64 {
        self.mapped
            .iter()
            .map(|m| (m - real(r)).norm())
            .filter(|&d| d > cluster_tol(r) * 2.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of zeros of `det(1 + (s − s₀)·TJ)` inside a circle around `r`.
    fn winding_multiplicity(&self, r: f64, samples: usize, max_depth: usize) -> Result<i64> {
        let sep = self.separation(r);
        let radius = if sep.is_finite() { 0.5 * sep } else { r.abs().max(1.0) };
        let k = self.tj.nrows();
        let contour = Contour::new(real(r), radius, samples)?;
        let s_base = self.s_base;
        let tj = &self.tj;
        let w = contour::det_winding(|s| Ok(identity(k) + tj * (s - real(s_base))), &contour, max_depth)?;
        Ok(w.winding)
    }
}

/// Real resonance points in `window`, computed from base coupling `s_base`.
pub fn resonance_points(
    inst: &ValidatedInstance,
    lambda: f64,
    s_base: f64,
    window: CouplingWindow,
) -> Result<Vec<ResonancePoint>> {
    let analysis = analyze_boundary(inst, lambda, s_base)?;
    points_in_window(inst, &analysis, window)
}

fn points_in_window(
    inst: &ValidatedInstance,
    analysis: &BoundaryAnalysis,
    window: CouplingWindow,
) -> Result<Vec<ResonancePoint>> {
    let tol = inst.tolerances();
    let mut out = Vec::new();
    for &(r, multiplicity) in &analysis.real_points {
        if !window.contains(r) {
            continue;
        }
        let winding = analysis.winding_multiplicity(r, tol.min_contour_samples, tol.max_adaptive_depth)?;
        if winding != multiplicity as i64 {
            return Err(Error::MultiplicityMismatch {
                point: r,
                cluster: multiplicity,
                winding,
            });
        }
        let reach = analysis.separation(r).min(window.distance_to_edge(r));
        out.push(ResonancePoint {
            location: real(r),
            multiplicity,
            group_id: out.len(),
            base_y: 0.0,
            cluster_radius: tol.cluster_factor * reach,
        });
    }
    Ok(out)
}

/// The points into which `point` splits at `λ + iy`.
///
/// Computed from base `Re(point)`: the eigenvalues `σ` of
/// `T_{λ+iy}(H_r)·J` mapped to `r − 1/σ`, keeping those within the cluster
/// radius. The result is sorted by argument around `r`.
pub fn resonance_group(
    inst: &ValidatedInstance,
    lambda: f64,
    point: &ResonancePoint,
    y: f64,
) -> Result<Vec<Complex64>> {
    if !(y > 0.0) {
        return Err(Error::InvalidArgument(format!("resonance_group needs y > 0, got {y}")));
    }
    let r = point.real();
    let all = mapped_points(inst, lambda, r, y)?;
    let radius = point.cluster_radius;
    let mut members: Vec<Complex64> = all.into_iter().filter(|m| (m - real(r)).norm() <= radius).collect();
    if members.len() != point.multiplicity {
        return Err(Error::ClusterSeparationFailure {
            point: r,
            y,
            radius,
            expected: point.multiplicity,
            found: members.len(),
        });
    }
    members.sort_by(|a, b| (a - real(r)).arg().total_cmp(&(b - real(r)).arg()));
    Ok(members)
}

/// `s₀ − 1/σ` over the nonzero eigenvalues of `T_{λ+iy}(H_{s₀})·J`.
pub(crate) fn mapped_points(inst: &ValidatedInstance, lambda: f64, s_base: f64, y: f64) -> Result<Vec<Complex64>> {
    let t = sandwiched_resolvent(inst, s_base, SpectralParameter::new(lambda, y)?)?;
    let tj = t.matrix() * inst.j().as_matrix();
    Ok(numerics::general_eig(&tj)?
        .into_iter()
        .filter(|s| s.norm() > 0.0)
        .map(|s| real(s_base) - s.inv())
        .filter(|r| r.re.is_finite() && r.im.is_finite())
        .collect())
}

fn half_plane_counts(members: &[Complex64]) -> (usize, usize) {
    let plus = members.iter().filter(|m| m.im > 0.0).count();
    (plus, members.len() - plus)
}

/// `(N₊, N₋, N₊ − N₋)` for a real resonance point.
///
/// `y` starts at `min(0.01, 0.1·ρ)` and is halved until the group separates
/// and every member is clearly off the real axis; the counts must then
/// survive one more halving.
pub fn resonance_index(inst: &ValidatedInstance, lambda: f64, point: &ResonancePoint) -> Result<PointIndex> {
    let tol = inst.tolerances();
    let clean = |members: &[Complex64]| members.iter().all(|m| m.im.abs() > 10.0 * tol.tol_real * m.norm());
    let mut y = (0.01f64).min(0.1 * point.cluster_radius);
    if !(y > 0.0) {
        return Err(Error::ClusterSeparationFailure {
            point: point.real(),
            y,
            radius: point.cluster_radius,
            expected: point.multiplicity,
            found: 0,
        });
    }
    let mut last_err = None;
    let mut candidate: Option<(f64, Vec<Complex64>)> = None;
    for _ in 0..=tol.max_adaptive_depth {
        match resonance_group(inst, lambda, point, y) {
            Ok(members) if clean(&members) => {
                if let Some((y_prev, prev)) = candidate.take() {
                    let first = half_plane_counts(&prev);
                    let second = half_plane_counts(&members);
                    if first != second {
                        return Err(Error::UnstableIndex {
                            point: point.real(),
                            y: y_prev,
                            first_plus: first.0,
                            first_minus: first.1,
                            second_plus: second.0,
                            second_minus: second.1,
                        });
                    }
                    return Ok(PointIndex {
                        location: point.real(),
                        multiplicity: point.multiplicity,
                        n_plus: first.0,
                        n_minus: first.1,
                        index: first.0 as i64 - first.1 as i64,
                        y: y_prev,
                        cluster_radius: point.cluster_radius,
                        members: prev,
                    });
                }
                candidate = Some((y, members));
            }
            Ok(_) => candidate = None,
            Err(e @ Error::ClusterSeparationFailure { .. }) => {
                candidate = None;
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
        y *= 0.5;
    }
    Err(last_err.unwrap_or(Error::ClusterSeparationFailure {
        point: point.real(),
        y,
        radius: point.cluster_radius,
        expected: point.multiplicity,
        found: point.multiplicity,
    }))
}

/// Sum of resonance indices over all real resonance points in `window`.
pub fn total_resonance_index(inst: &ValidatedInstance, lambda: f64, window: CouplingWindow) -> Result<IndexReport> {
    let analysis = analyze_boundary(inst, lambda, 0.0)?;
    check_endpoints(&analysis, window)?;
    let points = points_in_window(inst, &analysis, window)?;
    let indices = points
        .iter()
        .map(|p| resonance_index(inst, lambda, p))
        .collect::<Result<Vec<_>>>()?;
    let total = indices.iter().map(|p| p.index).sum();
    Ok(IndexReport {
        lambda,
        window,
        points: indices,
        total,
    })
}

fn check_endpoints(analysis: &BoundaryAnalysis, window: CouplingWindow) -> Result<()> {
    for &(r, _) in &analysis.real_points {
        for endpoint in [window.a, window.b] {
            let distance = (r - endpoint).abs();
            if distance <= ENDPOINT_TOL {
                return Err(Error::ResonantEndpoint {
                    endpoint,
                    point: r,
                    distance,
                });
            }
        }
    }
    Ok(())
}

/// Whether `s` (real, at the boundary) is within [`ENDPOINT_TOL`] of a real
/// resonance point; returns that point.
pub(crate) fn nearby_real_point(inst: &ValidatedInstance, lambda: f64, s: f64) -> Result<Option<f64>> {
    let analysis = analyze_boundary(inst, lambda, 0.0)?;
    Ok(analysis
        .real_points
        .iter()
        .map(|&(r, _)| r)
        .find(|r| (r - s).abs() <= ENDPOINT_TOL))
}

/// All real resonance points (any location) with multiplicities, from base 0.
pub fn all_real_points(inst: &ValidatedInstance, lambda: f64) -> Result<Vec<(f64, usize)>> {
    Ok(analyze_boundary(inst, lambda, 0.0)?.real_points)
}

/// Whether the resonance sets from every base agree within `1e-6`
/// (relative, multiplicities expanded).
pub fn base_independence_check(
    inst: &ValidatedInstance,
    lambda: f64,
    window: CouplingWindow,
    s_bases: &[f64],
) -> Result<bool> {
    let sets = s_bases
        .iter()
        .map(|&b| {
            let pts = resonance_points(inst, lambda, b, window)?;
            Ok(pts
                .iter()
                .flat_map(|p| std::iter::repeat(p.location).take(p.multiplicity))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let Some(first) = sets.first() else {
        return Ok(true);
    };
    Ok(sets.iter().all(|set| {
        set.len() == first.len()
            && first
                .iter()
                .zip(set)
                .all(|(a, b)| (a - b).norm() <= 1e-6 * a.norm().max(1.0))
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    /// Located crossing coupling (bisected to machine precision).
    pub s: f64,
    /// Net signed count at this location: `+1` per eigenvalue moving up
    /// through `λ`.
    pub net: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingCount {
    pub net: i64,
    pub crossings: Vec<Crossing>,
}

/// Signed count of eigenvalues of `H_s` passing upward through `λ` as `s`
/// runs over the window, by dense diagonalization on a grid with bisection
/// at each change of the count below `λ`.
pub fn crossing_oracle(
    inst: &ValidatedInstance,
    lambda: f64,
    window: CouplingWindow,
    grid_size: usize,
) -> Result<CrossingCount> {
    let tol = inst.tolerances();
    let below = |s: f64| -> Result<(usize, f64)> {
        let eig = numerics::herm_eig(&perturbed_operator(inst, s))?.values;
        let gap = eig.iter().map(|e| (e - lambda).abs()).fold(f64::INFINITY, f64::min);
        let scale = eig.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        Ok((eig.iter().filter(|&&e| e < lambda).count(), gap / scale))
    };
    let endpoint_guard = 10.0 * tol.tol_sing;
    let (count_a, gap_a) = below(window.a)?;
    let (count_b, gap_b) = below(window.b)?;
    if gap_a <= endpoint_guard {
        return Err(Error::CrossingAtEndpoint { s: window.a });
    }
    if gap_b <= endpoint_guard {
        return Err(Error::CrossingAtEndpoint { s: window.b });
    }
    let m = grid_size.max(2);
    let mut crossings = Vec::new();
    let mut prev = (window.a, count_a);
    for i in 1..=m {
        let s = if i == m {
            window.b
        } else {
            window.a + window.span() * i as f64 / m as f64
        };
        let count = if i == m { count_b } else { below(s)?.0 };
        if count != prev.1 {
            let (mut lo, mut hi) = (prev.0, s);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if below(mid)?.0 == prev.1 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push(Crossing {
                s: 0.5 * (lo + hi),
                net: prev.1 as i64 - count as i64,
            });
        }
        prev = (s, count);
    }
    Ok(CrossingCount {
        net: count_a as i64 - count_b as i64,
        crossings,
    })
}
