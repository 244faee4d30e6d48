//! End-to-end checks of `−μ⁽ˢ⁾(λ) = Σ ind_res` and seeded sweeps over
//! random instances.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{self, FlowOptions};
use crate::format;
use crate::model::{
    lambda_grid, random_instance, validate_instance, CouplingWindow, Instance, ToleranceConfig, ValidatedInstance,
};
use crate::numerics::real;
use crate::resonance::{self, IndexReport};

/// Grid resolution used for the eigenvalue-crossing oracle.
pub const ORACLE_GRID: usize = 400;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub resonance_ms: f64,
    pub flow_ms: f64,
    pub oracle_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationRecord {
    pub lambda: f64,
    pub window: CouplingWindow,
    pub total_index: i64,
    pub mu: i64,
    pub mu_a: i64,
    pub mu_s: i64,
    pub equality_holds: bool,
    /// Net upward eigenvalue crossings of `λ` by `H_s`; `None` if the
    /// oracle itself failed.
    pub oracle_crossings: Option<i64>,
    /// Determinant and summed track windings agree on both flow paths.
    pub windings_consistent: bool,
    pub thetas: Vec<flow::ThetaRow>,
    pub resonances: IndexReport,
    pub timings: Timings,
}

impl VerificationRecord {
    pub fn oracle_agrees(&self) -> bool {
        self.oracle_crossings == Some(self.total_index)
    }
}

/// The instance whose coupling window `[0, 1]` corresponds to `[a, b]` of
/// `inst`: `(H₀ + aV, F, (b − a)J)`.
pub fn rescale_to_unit_window(inst: &ValidatedInstance, window: CouplingWindow) -> Result<ValidatedInstance> {
    if window.a == 0.0 && window.b == 1.0 {
        return Ok(inst.clone());
    }
    let raw = inst.to_instance();
    let h0 = crate::model::perturbed_operator(inst, window.a).into_inner();
    let j = raw.j * real(window.span());
    validate_instance(&Instance::new(h0, raw.f, j)?, inst.tolerances())
}

/// Runs the resonance count, both flows over `theta_count` angles, and the
/// crossing oracle at one `λ`.
pub fn verify_lambda(
    inst: &ValidatedInstance,
    lambda: f64,
    window: CouplingWindow,
    theta_count: usize,
    opts: FlowOptions,
) -> Result<VerificationRecord> {
    if theta_count < 5 {
        return Err(Error::InvalidArgument(format!(
            "need at least 5 angles, got {theta_count}"
        )));
    }
    let clock = Instant::now();
    let resonances = resonance::total_resonance_index(inst, lambda, window)?;
    let resonance_ms = ms(clock);

    let clock = Instant::now();
    let unit = rescale_to_unit_window(inst, window)?;
    let singular = flow::mu_singular(&unit, lambda, &flow::theta_grid(theta_count), opts)?;
    let flow_ms = ms(clock);

    let clock = Instant::now();
    let oracle = resonance::crossing_oracle(inst, lambda, window, ORACLE_GRID)
        .ok()
        .map(|c| c.net);
    let oracle_ms = ms(clock);

    let total_index = resonances.total;
    Ok(VerificationRecord {
        lambda,
        window,
        total_index,
        mu: singular.mu_flow.mu,
        mu_a: singular.mu_a_flow.mu,
        mu_s: singular.mu_s,
        equality_holds: -singular.mu_s == total_index,
        oracle_crossings: oracle,
        windings_consistent: singular.mu_flow.windings_consistent() && singular.mu_a_flow.windings_consistent(),
        thetas: singular.rows,
        resonances,
        timings: Timings {
            resonance_ms,
            flow_ms,
            oracle_ms,
        },
    })
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Parameters of a seeded sweep. Unset `n`, `k` and `signatures` are drawn
/// per seed: `n ∈ 2..=8`, `k ∈ 1..=min(4, n)`, random signs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub seeds: u64,
    pub first_seed: u64,
    pub n: Option<usize>,
    pub k: Option<usize>,
    /// Candidate signatures; those of length `k` are cycled through.
    pub signatures: Vec<Vec<i8>>,
    pub lambdas_per_instance: usize,
    pub theta_count: usize,
    pub window: CouplingWindow,
    pub initial_samples: usize,
    pub tolerances: ToleranceConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            seeds: 100,
            first_seed: 0,
            n: None,
            k: None,
            signatures: Vec::new(),
            lambdas_per_instance: 3,
            theta_count: 5,
            window: CouplingWindow { a: 0.0, b: 1.0 },
            initial_samples: FlowOptions::default().initial_samples,
            tolerances: ToleranceConfig::default(),
        }
    }
}

const SHAPE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// `(n, k, signature)` for one seed of the sweep.
pub fn sweep_shape(spec: &SweepSpec, seed: u64) -> Result<(usize, usize, Vec<i8>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHAPE_STREAM);
    let n = spec.n.unwrap_or_else(|| rng.random_range(2..=8));
    let k = spec.k.unwrap_or_else(|| rng.random_range(1..=n.min(4)));
    let matching: Vec<&Vec<i8>> = spec.signatures.iter().filter(|s| s.len() == k).collect();
    let signature = if !spec.signatures.is_empty() {
        if matching.is_empty() {
            return Err(Error::InvalidArgument(format!("no signature of length {k} given")));
        }
        matching[(seed % matching.len() as u64) as usize].clone()
    } else {
        (0..k).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
    };
    Ok((n, k, signature))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCase {
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub signature: Vec<i8>,
    pub lambda: f64,
    pub record: Option<VerificationRecord>,
    pub error: Option<SweepFailure>,
}

impl SweepCase {
    pub fn passed(&self) -> bool {
        self.record.as_ref().is_some_and(|r| r.equality_holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub cases: Vec<SweepCase>,
    pub passed: usize,
    pub failed: usize,
    pub oracle_discrepancies: usize,
    pub elapsed_ms: f64,
}

impl SweepReport {
    pub fn pass_rate(&self) -> f64 {
        if self.cases.is_empty() {
            1.0
        } else {
            self.passed as f64 / self.cases.len() as f64
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

fn failure(e: &Error) -> SweepFailure {
    SweepFailure {
        kind: e.kind().to_string(),
        message: e.to_string(),
    }
}

/// Instance of one sweep seed, exactly as the sweep builds it.
pub fn sweep_instance(spec: &SweepSpec, seed: u64) -> Result<Instance> {
    let (n, k, signature) = sweep_shape(spec, seed)?;
    random_instance(n, k, &signature, seed)
}

/// Runs every `(seed, λ)` case, in parallel; case order follows the seeds.
pub fn sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.tolerances.validate()?;
    let clock = Instant::now();
    let opts = FlowOptions {
        initial_samples: spec.initial_samples,
    };
    let seeds: Vec<u64> = (0..spec.seeds).map(|i| spec.first_seed.wrapping_add(i)).collect();
    let cases: Vec<SweepCase> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<SweepCase>> {
            let (n, k, signature) = sweep_shape(spec, seed)?;
            let inst = validate_instance(&random_instance(n, k, &signature, seed)?, &spec.tolerances)?;
            Ok(lambda_grid(&inst, spec.lambdas_per_instance)
                .into_par_iter()
                .map(|lambda| {
                    let outcome = verify_lambda(&inst, lambda, spec.window, spec.theta_count, opts);
                    let (record, error) = match outcome {
                        Ok(r) => (Some(r), None),
                        Err(e) => (None, Some(failure(&e))),
                    };
                    SweepCase {
                        seed,
                        n,
                        k,
                        signature: signature.clone(),
                        lambda,
                        record,
                        error,
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let passed = cases.iter().filter(|c| c.passed()).count();
    let oracle_discrepancies = cases
        .iter()
        .filter(|c| c.record.as_ref().is_some_and(|r| !r.oracle_agrees()))
        .count();
    Ok(SweepReport {
        failed: cases.len() - passed,
        passed,
        oracle_discrepancies,
        cases,
        elapsed_ms: ms(clock),
    })
}

/// Writes `seed<S>.json` (the instance) and `seed<S>_case<I>.json` (the
/// failing case) for every case selected by `select`. Returns the written
/// paths.
pub fn dump_cases<F>(spec: &SweepSpec, report: &SweepReport, dir: &Path, select: F) -> Result<Vec<PathBuf>>
where
    F: Fn(&SweepCase) -> bool,
{
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (i, case) in report.cases.iter().enumerate().filter(|(_, c)| select(c)) {
        let inst_path = dir.join(format!("seed{}.json", case.seed));
        if !inst_path.exists() {
            format::save_instance(&inst_path, &sweep_instance(spec, case.seed)?)?;
            written.push(inst_path);
        }
        let case_path = dir.join(format!("seed{}_case{i}.json", case.seed));
        let body = serde_json::to_string_pretty(case).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(&case_path, body)?;
        written.push(case_path);
    }
    Ok(written)
}
