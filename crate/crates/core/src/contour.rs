//! Argument-principle machinery in the coupling plane: determinant windings
//! along circles, pole/zero counts of `S(z, ·)`, and S-indices of resonance
//! and anti-resonance points.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{SpectralParameter, ValidatedInstance};
use crate::numerics::{self, real, CMatrix};
use crate::resolvent::sandwiched_resolvent;
use crate::resonance::{resonance_group, ResonancePoint};
use crate::scattering::Scattering;
use crate::track::{self, Sample, TrackOptions};

/// Anticlockwise circle `center + radius·e^{2πit}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contour {
    pub center: Complex64,
    pub radius: f64,
    pub samples: usize,
}

impl Contour {
    pub fn new(center: Complex64, radius: f64, samples: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "contour radius must be positive, got {radius}"
            )));
        }
        if !(center.re.is_finite() && center.im.is_finite()) {
            return Err(Error::InvalidArgument("contour center must be finite".into()));
        }
        if samples < 4 {
            return Err(Error::InvalidArgument("a contour needs at least 4 samples".into()));
        }
        Ok(Self {
            center,
            radius,
            samples,
        })
    }

    pub fn point(&self, t: f64) -> Complex64 {
        self.center + Complex64::from_polar(self.radius, TAU * t)
    }

    /// Whether `p` lies strictly inside the certification annulus
    /// `[radius/2, 3·radius/2]`.
    pub fn near(&self, p: Complex64) -> bool {
        let d = (p - self.center).norm();
        d > 0.5 * self.radius && d < 1.5 * self.radius
    }

    pub fn encloses(&self, p: Complex64) -> bool {
        (p - self.center).norm() < self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingResult {
    pub winding: i64,
    pub raw_phase_change: f64,
    pub refinement_depth: usize,
    pub evaluations: usize,
}

/// Relative modulus under which a determinant sample counts as zero.
const ZERO_REL: f64 = 1e-12;

struct Winder<'a, G> {
    g: &'a G,
    contour: &'a Contour,
    max_depth: usize,
    scale: f64,
    total: f64,
    depth_used: usize,
    evaluations: usize,
}

impl<G> Winder<'_, G>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    fn value(&mut self, t: f64) -> Result<Complex64> {
        let s = self.contour.point(t);
        let d = (self.g)(s)?;
        self.evaluations += 1;
        if !(d.re.is_finite() && d.im.is_finite()) {
            return Err(Error::ZeroOnContour { s });
        }
        self.scale = self.scale.max(d.norm());
        if d.norm() < ZERO_REL * self.scale || d.norm() == 0.0 {
            return Err(Error::ZeroOnContour { s });
        }
        Ok(d)
    }

    fn step(&mut self, t0: f64, d0: Complex64, t1: f64, d1: Complex64, depth: usize) -> Result<()> {
        let delta = (d1 / d0).arg();
        if delta.abs() <= FRAC_PI_2 {
            self.total += delta;
            self.depth_used = self.depth_used.max(depth);
            return Ok(());
        }
        if depth >= self.max_depth {
            return Err(Error::RefinementExhausted { t: t0 });
        }
        let tm = 0.5 * (t0 + t1);
        let dm = self.value(tm)?;
        self.step(t0, d0, tm, dm, depth + 1)?;
        self.step(tm, dm, t1, d1, depth + 1)
    }
}

/// Winding number of a scalar function along the contour.
pub fn scalar_winding<G>(g: G, contour: &Contour, max_depth: usize) -> Result<WindingResult>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let mut w = Winder {
        g: &g,
        contour,
        max_depth,
        scale: 0.0,
        total: 0.0,
        depth_used: 0,
        evaluations: 0,
    };
    let n = contour.samples;
    let first = w.value(0.0)?;
    let mut prev = first;
    for i in 1..=n {
        let t = i as f64 / n as f64;
        // the closing sample reuses the first value so the loop is exact
        let d = if i == n { first } else { w.value(t)? };
        w.step((i - 1) as f64 / n as f64, prev, t, d, 0)?;
        prev = d;
    }
    let winding = (w.total / TAU).round() as i64;
    if (w.total - TAU * winding as f64).abs() > 1e-6 * (1.0 + winding.abs() as f64) {
        return Err(Error::RefinementExhausted { t: 1.0 });
    }
    Ok(WindingResult {
        winding,
        raw_phase_change: w.total,
        refinement_depth: w.depth_used,
        evaluations: w.evaluations,
    })
}

/// Winding of `det f(s)` along the contour: zeros minus poles enclosed.
pub fn det_winding<F>(f: F, contour: &Contour, max_depth: usize) -> Result<WindingResult>
where
    F: Fn(Complex64) -> Result<CMatrix>,
{
    scalar_winding(|s| numerics::det(&f(s)?), contour, max_depth)
}

/// Total winding of a sampled determinant along an open path, in turns
/// (not rounded).
pub fn path_det_winding(dets: &[Complex64]) -> f64 {
    dets.windows(2)
        .map(|w| {
            let d = (w[1] / w[0]).arg();
            if d <= -PI {
                d + TAU
            } else {
                d
            }
        })
        .sum::<f64>()
        / TAU
}

/// Poles (resonance points) and zeros (anti-resonance points) of
/// `S(λ + iy, ·)`, located exactly from eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoints {
    pub poles: Vec<Complex64>,
    pub zeros: Vec<Complex64>,
}

/// From base `s_base`: poles are `s_base − 1/σ` over the eigenvalues of
/// `T_z(H_{s_base})·J`, zeros the same over `T_z̄(H_{s_base})·J`.
pub fn critical_points(inst: &ValidatedInstance, lambda: f64, y: f64, s_base: f64) -> Result<CriticalPoints> {
    let t = sandwiched_resolvent(inst, s_base, SpectralParameter::new(lambda, y)?)?;
    let j = inst.j().as_matrix();
    let map = |m: CMatrix| -> Result<Vec<Complex64>> {
        Ok(numerics::general_eig(&m)?
            .into_iter()
            .filter(|s| s.norm() > 0.0)
            .map(|s| real(s_base) - s.inv())
            .filter(|r| r.re.is_finite() && r.im.is_finite())
            .collect())
    };
    Ok(CriticalPoints {
        poles: map(t.matrix() * j)?,
        zeros: map(t.conjugate_point() * j)?,
    })
}

fn certify(sc: &Scattering, contour: &Contour, crit: &CriticalPoints, check_zeros: bool) -> Result<()> {
    let points = crit
        .poles
        .iter()
        .chain(if check_zeros { crit.zeros.iter() } else { [].iter() });
    for &p in points {
        if contour.near(p) {
            return Err(Error::CriticalPointNearContour {
                s: p,
                sigma_min: (p - contour.center).norm() - contour.radius,
            });
        }
    }
    for i in 0..contour.samples {
        let s = contour.point(i as f64 / contour.samples as f64);
        let mut mats = vec![sc.factor(s)];
        if check_zeros {
            mats.push(sc.conjugate_factor(s));
        }
        for m in mats {
            let sv = numerics::singular_values(&m)?;
            let sigma_min = *sv.last().unwrap_or(&0.0);
            if sigma_min <= 1e-6 * sv[0].max(1.0) {
                return Err(Error::CriticalPointNearContour { s, sigma_min });
            }
        }
    }
    Ok(())
}

/// Number of resonance points (zeros of `det(1 + sT_{λ+iy}J)`, with
/// multiplicity) inside the contour.
pub fn resonance_multiplicity_contour(
    inst: &ValidatedInstance,
    lambda: f64,
    y: f64,
    center: Complex64,
    radius: f64,
) -> Result<i64> {
    let tol = inst.tolerances();
    let contour = Contour::new(center, radius, tol.min_contour_samples)?;
    let sc = Scattering::new(inst, SpectralParameter::new(lambda, y)?)?;
    let crit = critical_points(inst, lambda, y, 0.0)?;
    certify(&sc, &contour, &crit, false)?;
    Ok(det_winding(|s| Ok(sc.factor(s)), &contour, tol.max_adaptive_depth)?.winding)
}

/// S-index: the winding of `det S(λ + iy, s)` along the contour. Equals
/// zeros minus poles of `S` inside.
pub fn s_index(inst: &ValidatedInstance, lambda: f64, y: f64, center: Complex64, radius: f64) -> Result<WindingResult> {
    if !(y > 0.0) {
        return Err(Error::InvalidArgument(format!("s_index needs y > 0, got {y}")));
    }
    let tol = inst.tolerances();
    let contour = Contour::new(center, radius, tol.min_contour_samples)?;
    let sc = Scattering::new(inst, SpectralParameter::new(lambda, y)?)?;
    let crit = critical_points(inst, lambda, y, 0.0)?;
    s_index_on(&sc, &contour, &crit, tol.max_adaptive_depth)
}

fn s_index_on(sc: &Scattering, contour: &Contour, crit: &CriticalPoints, max_depth: usize) -> Result<WindingResult> {
    certify(sc, contour, crit, true)?;
    det_winding(|s| Ok(sc.s_matrix(s)?.matrix), contour, max_depth)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSIndex {
    /// `−Σ` S-indices of the circles; equals `N₊ − N₋`.
    pub value: i64,
    pub y: f64,
    pub circles: Vec<(Contour, i64)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Pole,
    Zero,
}

/// Sum of S-indices over minimal contours around the upper half-plane
/// critical points of the group of `point`, negated.
///
/// A group member above the axis is a pole of `S`; one below the axis has
/// its conjugate, an anti-resonance point and zero of `S`, above the axis.
/// Coincident or nearly coincident points share a circle. When a point of
/// the group sits too close to a critical point outside it, `y` is moved by
/// +20% and then −20% before giving up.
pub fn group_s_index(inst: &ValidatedInstance, lambda: f64, point: &ResonancePoint, y: f64) -> Result<GroupSIndex> {
    let mut last = None;
    for factor in [1.0, 1.2, 0.8] {
        match group_s_index_at(inst, lambda, point, y * factor) {
            Ok(r) => return Ok(r),
            Err(e @ (Error::CollisionDetected { .. } | Error::CriticalPointNearContour { .. })) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    match last {
        Some(Error::CriticalPointNearContour { .. }) | None => Err(Error::CollisionDetected { y }),
        Some(e) => Err(e),
    }
}

fn group_s_index_at(inst: &ValidatedInstance, lambda: f64, point: &ResonancePoint, y: f64) -> Result<GroupSIndex> {
    let tol = inst.tolerances();
    let members = resonance_group(inst, lambda, point, y)?;
    let r = point.real();
    let crit = critical_points(inst, lambda, y, r)?;
    let all: Vec<(Complex64, Kind)> = crit
        .poles
        .iter()
        .map(|&p| (p, Kind::Pole))
        .chain(crit.zeros.iter().map(|&p| (p, Kind::Zero)))
        .collect();
    let nearest = |target: Complex64, kind: Kind, taken: &[usize]| -> Option<usize> {
        all.iter()
            .enumerate()
            .filter(|(i, (_, k))| *k == kind && !taken.contains(i))
            .min_by(|a, b| (a.1 .0 - target).norm().total_cmp(&(b.1 .0 - target).norm()))
            .map(|(i, _)| i)
    };
    // indices into `all` of the upper half-plane points of the group
    let mut upper: Vec<usize> = Vec::new();
    for m in &members {
        let idx = if m.im > 0.0 {
            nearest(*m, Kind::Pole, &upper)
        } else {
            nearest(m.conj(), Kind::Zero, &upper)
        };
        upper.push(idx.ok_or(Error::CollisionDetected { y })?);
    }
    let mut clusters: Vec<Vec<usize>> = upper.iter().map(|&i| vec![i]).collect();
    let floor = 1e-4 * point.cluster_radius;
    'merge: loop {
        for ci in 0..clusters.len() {
            let (center, r_in) = centroid(&clusters[ci], &all);
            let outside = all
                .iter()
                .enumerate()
                .filter(|(i, _)| !clusters[ci].contains(i))
                .min_by(|a, b| (a.1 .0 - center).norm().total_cmp(&(b.1 .0 - center).norm()));
            let Some((q, (qp, _))) = outside else { continue };
            let r_out = (qp - center).norm();
            if r_in >= 0.25 * r_out || r_out < floor {
                match clusters.iter().position(|c| c.contains(&q)) {
                    Some(cj) => {
                        let moved = clusters.remove(cj.max(ci));
                        clusters[cj.min(ci)].extend(moved);
                        continue 'merge;
                    }
                    None => return Err(Error::CollisionDetected { y }),
                }
            }
        }
        break;
    }
    let sc = Scattering::new(inst, SpectralParameter::new(lambda, y)?)?;
    let mut circles = Vec::new();
    let mut sum = 0;
    for cluster in &clusters {
        let (center, _) = centroid(cluster, &all);
        let r_out = all
            .iter()
            .enumerate()
            .filter(|(i, _)| !cluster.contains(i))
            .map(|(_, (p, _))| (p - center).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = if r_out.is_finite() {
            0.5 * r_out
        } else {
            point.cluster_radius
        };
        let contour = Contour::new(center, radius, tol.min_contour_samples)?;
        let w = s_index_on(&sc, &contour, &crit, tol.max_adaptive_depth)?.winding;
        sum += w;
        circles.push((contour, w));
    }
    Ok(GroupSIndex {
        value: -sum,
        y,
        circles,
    })
}

fn centroid(cluster: &[usize], all: &[(Complex64, Kind)]) -> (Complex64, f64) {
    let center = cluster.iter().map(|&i| all[i].0).sum::<Complex64>() / real(cluster.len() as f64);
    let r_in = cluster.iter().map(|&i| (all[i].0 - center).norm()).fold(0.0, f64::max);
    (center, r_in)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleWinding {
    pub tracks: Vec<usize>,
    /// Total phase change of the cycle's tracks over one loop, in turns.
    pub winding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourTracking {
    /// `permutation[j]`: the initial track that track `j` ends on.
    pub permutation: Vec<usize>,
    pub track_windings: Vec<f64>,
    pub cycles: Vec<CycleWinding>,
}

impl ContourTracking {
    pub fn total_winding(&self) -> f64 {
        self.cycles.iter().map(|c| c.winding).sum()
    }
}

/// Eigenvalues of `S(λ + iy, s)` followed once around the contour.
pub fn track_contour(inst: &ValidatedInstance, lambda: f64, y: f64, contour: &Contour) -> Result<ContourTracking> {
    let tol = inst.tolerances();
    let sc = Scattering::new(inst, SpectralParameter::new(lambda, y)?)?;
    let crit = critical_points(inst, lambda, y, 0.0)?;
    certify(&sc, contour, &crit, true)?;
    let eval = |t: f64| -> Result<Sample> {
        let m = sc.s_matrix(contour.point(t))?.matrix;
        Ok(Sample {
            eigenvalues: numerics::general_eig(&m)?,
            det: numerics::det(&m)?,
        })
    };
    let tracks = track::track(
        &eval,
        &[(0.0, 1.0)],
        TrackOptions {
            initial_samples: contour.samples + 1,
            max_step: tol.max_step_phase,
            max_depth: tol.max_adaptive_depth,
        },
    )?;
    let first = tracks.values.first().cloned().unwrap_or_default();
    let last = tracks.values.last().cloned().unwrap_or_default();
    let cost: Vec<Vec<f64>> = last
        .iter()
        .map(|a| first.iter().map(|&b| track::log_distance(*a, b)).collect())
        .collect();
    let permutation = crate::assignment::optimal_assignment(&cost);
    let track_windings = tracks.windings();
    let cycles = track::cycles(&permutation)
        .into_iter()
        .map(|c| CycleWinding {
            winding: c.iter().map(|&j| track_windings[j]).sum(),
            tracks: c,
        })
        .collect();
    Ok(ContourTracking {
        permutation,
        track_windings,
        cycles,
    })
}
