//! Eigenvalue continuation along a parametrized path.
//!
//! Samples are matched to their predecessor by optimal assignment under the
//! distance `|log(b/a)|` (the phase distance on the unit circle). A step
//! whose best assignment still moves some eigenvalue by more than the step
//! bound is bisected. Phases are lifted by adding the principal argument of
//! each ratio, so every per-step increment lies in `(−π, π]`.

use num_complex::Complex64;

use crate::assignment::optimal_assignment;
use crate::error::{Error, Result};

/// Eigenvalues (and determinant) of the path matrix at one parameter.
#[derive(Debug, Clone)]
pub struct Sample {
    pub eigenvalues: Vec<Complex64>,
    pub det: Complex64,
}

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    pub initial_samples: usize,
    pub max_step: f64,
    pub max_depth: usize,
}

/// Matched, phase-lifted tracks.
#[derive(Debug, Clone, Default)]
pub struct Tracks {
    pub params: Vec<f64>,
    /// `values[i][j]`: track `j` at sample `i`.
    pub values: Vec<Vec<Complex64>>,
    pub phases: Vec<Vec<f64>>,
    pub dets: Vec<Complex64>,
    pub max_depth_used: usize,
    pub evaluations: usize,
}

impl Tracks {
    pub fn width(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// `(φ_j(end) − φ_j(start)) / 2π` per track.
    pub fn windings(&self) -> Vec<f64> {
        match (self.phases.first(), self.phases.last()) {
            (Some(a), Some(b)) => a.iter().zip(b).map(|(x, y)| (y - x) / std::f64::consts::TAU).collect(),
            _ => Vec::new(),
        }
    }
}

/// `|log(b/a)|`.
pub fn log_distance(a: Complex64, b: Complex64) -> f64 {
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return if a == b { 0.0 } else { f64::INFINITY };
    }
    (b / a).ln().norm()
}

fn phase_step(a: Complex64, b: Complex64) -> f64 {
    let d = (b / a).arg();
    // arg is in [-π, π]; fold -π to π so increments live in (-π, π]
    if d <= -std::f64::consts::PI {
        d + std::f64::consts::TAU
    } else {
        d
    }
}

/// Initial ordering: by principal argument, then modulus.
fn initial_order(mut v: Vec<Complex64>) -> Vec<Complex64> {
    v.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
    v
}

struct Tracker<'a, F> {
    eval: &'a F,
    opts: TrackOptions,
    out: Tracks,
}

impl<'a, F> Tracker<'a, F>
where
    F: Fn(f64) -> Result<Sample>,
{
    fn sample(&mut self, t: f64) -> Result<Sample> {
        self.out.evaluations += 1;
        (self.eval)(t)
    }

    fn start(&mut self, t: f64) -> Result<()> {
        let s = self.sample(t)?;
        let values = initial_order(s.eigenvalues);
        let phases = values.iter().map(|v| v.arg()).collect();
        self.out.params.push(t);
        self.out.values.push(values);
        self.out.phases.push(phases);
        self.out.dets.push(s.det);
        Ok(())
    }

    /// Best matching of `next` onto the last accepted sample and the largest
    /// move it implies.
    fn matching(&self, next: &[Complex64]) -> (Vec<usize>, f64) {
        let prev = self.out.values.last().expect("tracker started");
        let cost: Vec<Vec<f64>> = prev
            .iter()
            .map(|a| next.iter().map(|&b| log_distance(*a, b)).collect())
            .collect();
        let perm = optimal_assignment(&cost);
        let worst = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).fold(0.0, f64::max);
        (perm, worst)
    }

    fn accept(&mut self, t: f64, sample: Sample, perm: &[usize]) {
        let prev_values = self.out.values.last().expect("tracker started");
        let prev_phases = self.out.phases.last().expect("tracker started");
        let values: Vec<Complex64> = perm.iter().map(|&j| sample.eigenvalues[j]).collect();
        let phases = prev_values
            .iter()
            .zip(prev_phases)
            .zip(&values)
            .map(|((a, phi), b)| phi + phase_step(*a, *b))
            .collect();
        self.out.params.push(t);
        self.out.values.push(values);
        self.out.phases.push(phases);
        self.out.dets.push(sample.det);
    }

    fn advance(&mut self, t: f64, sample: Sample, depth: usize) -> Result<()> {
        if sample.eigenvalues.len() != self.out.width() {
            return Err(Error::DimensionMismatch(format!(
                "path changed dimension from {} to {} at t = {t}",
                self.out.width(),
                sample.eigenvalues.len()
            )));
        }
        let (perm, worst) = self.matching(&sample.eigenvalues);
        if worst <= self.opts.max_step {
            self.out.max_depth_used = self.out.max_depth_used.max(depth);
            self.accept(t, sample, &perm);
            return Ok(());
        }
        let t_prev = *self.out.params.last().expect("tracker started");
        let mid = 0.5 * (t_prev + t);
        if depth >= self.opts.max_depth || mid <= t_prev || mid >= t {
            return Err(Error::MatchingAmbiguous { t, max_move: worst });
        }
        let mid_sample = self.sample(mid)?;
        self.advance(mid, mid_sample, depth + 1)?;
        self.advance(t, sample, depth + 1)
    }

    /// Jump across an excised gap without refinement.
    fn jump(&mut self, t: f64, gap_mid: f64) -> Result<()> {
        let sample = self.sample(t)?;
        let (perm, worst) = self.matching(&sample.eigenvalues);
        if worst > self.opts.max_step {
            return Err(Error::GapTooWide {
                s: gap_mid,
                jump: worst,
            });
        }
        self.accept(t, sample, &perm);
        Ok(())
    }
}

/// Tracks eigenvalues over the union of `segments` (increasing, disjoint
/// closed intervals). Consecutive segments are joined by an unrefined jump;
/// a jump larger than the step bound is a [`Error::GapTooWide`] reported at
/// the gap midpoint.
pub fn track<F>(eval: &F, segments: &[(f64, f64)], opts: TrackOptions) -> Result<Tracks>
where
    F: Fn(f64) -> Result<Sample>,
{
    if opts.initial_samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 initial samples".into()));
    }
    if segments.is_empty() || segments.iter().any(|&(a, b)| !(a <= b)) {
        return Err(Error::InvalidArgument("empty or reversed path segment".into()));
    }
    let total: f64 = segments.iter().map(|(a, b)| b - a).sum();
    let mut tracker = Tracker {
        eval,
        opts,
        out: Tracks::default(),
    };
    for (idx, &(a, b)) in segments.iter().enumerate() {
        if idx == 0 {
            tracker.start(a)?;
        } else {
            let prev_end = segments[idx - 1].1;
            tracker.jump(a, 0.5 * (prev_end + a))?;
        }
        if b == a {
            continue;
        }
        let share = if total > 0.0 { (b - a) / total } else { 1.0 };
        let steps = ((opts.initial_samples - 1) as f64 * share).ceil().max(1.0) as usize;
        for i in 1..=steps {
            let t = if i == steps {
                b
            } else {
                a + (b - a) * i as f64 / steps as f64
            };
            let s = tracker.sample(t)?;
            tracker.advance(t, s, 0)?;
        }
    }
    Ok(tracker.out)
}

/// Cycles of a permutation given as `perm[i] = image of i`, each starting at
/// its smallest element.
pub fn cycles(perm: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            cycle.push(i);
            i = perm[i];
        }
        out.push(cycle);
    }
    out
}
