//! `resflow`: command-line experiments on resonance indices and spectral flow.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical contract
//! violation, 4 the identity `−μ⁽ˢ⁾ = Σ ind_res` failed.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use resflow::flow::{self, FlowOptions};
use resflow::format;
use resflow::model::{format_signature, parse_signature};
use resflow::verify::{self, SweepSpec};
use resflow::{
    contour, lambda_grid, random_instance, resonance, validate_instance, Error, ToleranceConfig, ValidatedInstance,
};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_INEQUALITY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "resflow", version, about = "Resonance index and spectral flow experiments")]
struct Cli {
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// TOML file overriding tolerance defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    tol: TolFlags,

    #[command(subcommand)]
    command: Command,
}

/// Per-field tolerance overrides; they take precedence over `--config`.
#[derive(Args, Debug, Default)]
struct TolFlags {
    #[arg(long, global = true)]
    tol_herm: Option<f64>,
    #[arg(long, global = true)]
    tol_psd: Option<f64>,
    #[arg(long, global = true)]
    tol_sing: Option<f64>,
    #[arg(long, global = true)]
    tol_real: Option<f64>,
    #[arg(long, global = true)]
    tol_unitary: Option<f64>,
    #[arg(long, global = true)]
    tol_cluster_factor: Option<f64>,
    #[arg(long, global = true)]
    tol_max_step_phase: Option<f64>,
    #[arg(long, global = true)]
    tol_min_contour_samples: Option<usize>,
    #[arg(long, global = true)]
    tol_max_adaptive_depth: Option<usize>,
    #[arg(long, global = true)]
    tol_theta_margin: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded random instance as JSON.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Signs of J, e.g. `+-` or `1,-1`.
        #[arg(long, allow_hyphen_values = true)]
        signature: String,
        #[arg(long, env = "RESFLOW_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List real resonance points in a coupling window.
    Resonances {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value = "0,1", allow_hyphen_values = true)]
        window: String,
    },
    /// Check `−μ⁽ˢ⁾ = Σ ind_res` at one energy or on a λ grid.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, allow_negative_numbers = true, conflicts_with = "lambda_grid")]
        lambda: Option<f64>,
        /// Number of energies from the built-in grid.
        #[arg(long)]
        lambda_grid: Option<usize>,
        #[arg(long, default_value_t = 5)]
        thetas: usize,
        #[arg(long, default_value = "0,1", allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = FlowOptions::default().initial_samples)]
        samples: usize,
    },
    /// μ-invariant at one angle, optionally with the eigenvalue trajectory.
    Mu {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        theta: f64,
        #[arg(long, value_name = "CSV")]
        trajectory: Option<PathBuf>,
        #[arg(long, default_value_t = FlowOptions::default().initial_samples)]
        samples: usize,
    },
    /// S-index: winding of det S(λ+iy, ·) around a circle.
    Sindex {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        y: f64,
        /// `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        center: String,
        #[arg(long)]
        radius: f64,
    },
    /// Verify the identity over seeded random instances.
    Sweep {
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// First seed of the range.
        #[arg(long, env = "RESFLOW_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated sign strings, e.g. `+-,+,-+-`.
        #[arg(long, allow_hyphen_values = true)]
        signatures: Option<String>,
        #[arg(long, default_value_t = 3)]
        lambdas_per_instance: usize,
        #[arg(long, default_value_t = 5)]
        thetas: usize,
        #[arg(long, default_value = "0,1", allow_hyphen_values = true)]
        window: String,
        /// Directory receiving replay files for failing cases.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
}

struct Outcome {
    text: String,
    json: Value,
    code: u8,
}

impl Outcome {
    fn ok(text: String, json: Value) -> Self {
        Self { text, json, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    let result = tolerances(&cli).and_then(|tol| run(cli.command, &tol));
    let mut stdout = std::io::stdout().lock();
    match result {
        Ok(out) => {
            let body = if json { format!("{:#}", out.json) } else { out.text };
            let _ = writeln!(stdout, "{}", body.trim_end());
            ExitCode::from(out.code)
        }
        Err(e) => {
            let code = if e.is_usage() { EXIT_USAGE } else { EXIT_NUMERICAL };
            if json {
                let err = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
                let _ = writeln!(stdout, "{err:#}");
            } else {
                eprintln!("error [{}]: {e}", e.kind());
            }
            ExitCode::from(code)
        }
    }
}

fn tolerances(cli: &Cli) -> Result<ToleranceConfig, Error> {
    let mut tol = match &cli.config {
        Some(path) => format::load_tolerances(path)?,
        None => ToleranceConfig::default(),
    };
    let f = &cli.tol;
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut tol.tol_herm, f.tol_herm);
    set(&mut tol.tol_psd, f.tol_psd);
    set(&mut tol.tol_sing, f.tol_sing);
    set(&mut tol.tol_real, f.tol_real);
    set(&mut tol.tol_unitary, f.tol_unitary);
    set(&mut tol.cluster_factor, f.tol_cluster_factor);
    set(&mut tol.max_step_phase, f.tol_max_step_phase);
    set(&mut tol.theta_margin, f.tol_theta_margin);
    if let Some(v) = f.tol_min_contour_samples {
        tol.min_contour_samples = v;
    }
    if let Some(v) = f.tol_max_adaptive_depth {
        tol.max_adaptive_depth = v;
    }
    tol.validate()?;
    Ok(tol)
}

fn load(path: &Path, tol: &ToleranceConfig) -> Result<ValidatedInstance, Error> {
    validate_instance(&format::load_instance(path)?, tol)
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn run(command: Command, tol: &ToleranceConfig) -> Result<Outcome, Error> {
    match command {
        Command::Gen {
            n,
            k,
            signature,
            seed,
            out,
        } => {
            let signature = parse_signature(&signature)?;
            let inst = random_instance(n, k, &signature, seed)?;
            validate_instance(&inst, tol)?;
            format::save_instance(&out, &inst)?;
            Ok(Outcome::ok(
                format!(
                    "wrote {} (n = {n}, k = {k}, signature {}, seed {seed})",
                    out.display(),
                    format_signature(&signature)
                ),
                json!({"path": out, "n": n, "k": k, "signature": signature, "seed": seed}),
            ))
        }
        Command::Resonances {
            instance,
            lambda,
            window,
        } => {
            let inst = load(&instance, tol)?;
            let window = format::parse_window(&window)?;
            let points = resonance::resonance_points(&inst, lambda, 0.0, window)?;
            let mut text = format!(
                "resonance points at lambda = {lambda} in [{}, {}]\n",
                window.a, window.b
            );
            text.push_str(&format!("{:>22}  {:>12}\n", "r", "multiplicity"));
            for p in &points {
                text.push_str(&format!("{:>22.15}  {:>12}\n", p.real(), p.multiplicity));
            }
            if points.is_empty() {
                text.push_str("(none)\n");
            }
            let rows: Vec<Value> = points
                .iter()
                .map(|p| json!({"r": p.real(), "multiplicity": p.multiplicity, "cluster_radius": p.cluster_radius}))
                .collect();
            Ok(Outcome::ok(
                text,
                json!({"lambda": lambda, "window": window, "points": rows}),
            ))
        }
        Command::Verify {
            instance,
            lambda,
            lambda_grid: grid,
            thetas,
            window,
            samples,
        } => {
            let inst = load(&instance, tol)?;
            let window = format::parse_window(&window)?;
            let lambdas = match (lambda, grid) {
                (Some(l), _) => vec![l],
                (None, Some(m)) if m > 0 => lambda_grid(&inst, m),
                _ => {
                    return Err(Error::InvalidArgument(
                        "give --lambda or --lambda-grid N with N >= 1".into(),
                    ))
                }
            };
            let opts = FlowOptions {
                initial_samples: samples,
            };
            let records = lambdas
                .iter()
                .map(|&l| verify::verify_lambda(&inst, l, window, thetas, opts))
                .collect::<Result<Vec<_>, _>>()?;
            let all = records.iter().all(|r| r.equality_holds);
            let mut text = format!(
                "{:>20}  {:>6}  {:>4}  {:>5}  {:>5}  {:>8}  {:>6}\n",
                "lambda", "total", "mu", "mu_a", "mu_s", "equality", "oracle"
            );
            for r in &records {
                let oracle = r.oracle_crossings.map_or("n/a".to_string(), |o| o.to_string());
                text.push_str(&format!(
                    "{:>20.12}  {:>6}  {:>4}  {:>5}  {:>5}  {:>8}  {:>6}\n",
                    r.lambda, r.total_index, r.mu, r.mu_a, r.mu_s, r.equality_holds, oracle
                ));
            }
            Ok(Outcome {
                text,
                json: json!({"records": to_json(&records), "all_equalities_hold": all}),
                code: if all { 0 } else { EXIT_INEQUALITY },
            })
        }
        Command::Mu {
            instance,
            lambda,
            theta,
            trajectory,
            samples,
        } => {
            let inst = load(&instance, tol)?;
            let margin = inst.tolerances().theta_margin;
            if !(theta > margin && theta < std::f64::consts::TAU - margin) {
                return Err(Error::ThetaOutOfRange { theta, margin });
            }
            let (traj, ymax) = flow::mu_trajectory(
                &inst,
                lambda,
                FlowOptions {
                    initial_samples: samples,
                },
            )?;
            let result = flow::flow_result(&traj, theta, margin, Some(ymax.y_max))?;
            if let Some(path) = &trajectory {
                let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                format::write_trajectory_csv(std::io::BufWriter::new(file), &traj)?;
            }
            let mut text = format!("mu = {} (theta = {theta}, lambda = {lambda})\n", result.mu);
            text.push_str(&format!(
                "tracks = {}, samples = {}, y_max = {:e}, det winding = {}\n",
                traj.tracks(),
                traj.samples(),
                ymax.y_max,
                result.det_winding
            ));
            Ok(Outcome::ok(
                text,
                json!({"flow": to_json(&result), "y_max": to_json(&ymax), "trajectory": trajectory}),
            ))
        }
        Command::Sindex {
            instance,
            lambda,
            y,
            center,
            radius,
        } => {
            let inst = load(&instance, tol)?;
            let center = format::parse_complex(&center)?;
            let w = contour::s_index(&inst, lambda, y, center, radius)?;
            Ok(Outcome::ok(format!("s_index = {}\n", w.winding), to_json(&w)))
        }
        Command::Sweep {
            seeds,
            seed,
            n,
            k,
            signatures,
            lambdas_per_instance,
            thetas,
            window,
            dump_dir,
        } => {
            let signatures = match signatures {
                Some(s) => s.split(',').map(parse_signature).collect::<Result<Vec<_>, _>>()?,
                None => Vec::new(),
            };
            if let (Some(n), Some(k)) = (n, k) {
                if k == 0 || k > n {
                    return Err(Error::InvalidArgument(format!(
                        "need 1 <= k <= n, got n = {n}, k = {k}"
                    )));
                }
            }
            let spec = SweepSpec {
                seeds,
                first_seed: seed,
                n,
                k,
                signatures,
                lambdas_per_instance,
                theta_count: thetas,
                window: format::parse_window(&window)?,
                tolerances: *tol,
                ..SweepSpec::default()
            };
            let report = verify::sweep(&spec)?;
            let dumped = match &dump_dir {
                Some(dir) => verify::dump_cases(&spec, &report, dir, |c| {
                    !c.passed() || c.record.as_ref().is_some_and(|r| !r.oracle_agrees())
                })?,
                None => Vec::new(),
            };
            let mut text = format!(
                "{} cases from {} seeds: {} passed, {} failed ({:.1}%), oracle discrepancies {}, {:.1} s\n",
                report.cases.len(),
                seeds,
                report.passed,
                report.failed,
                100.0 * report.pass_rate(),
                report.oracle_discrepancies,
                report.elapsed_ms / 1e3
            );
            for c in report.cases.iter().filter(|c| !c.passed()) {
                let why = match (&c.record, &c.error) {
                    (_, Some(e)) => format!("{}: {}", e.kind, e.message),
                    (Some(r), None) => format!("total {} but mu_s {}", r.total_index, r.mu_s),
                    (None, None) => String::new(),
                };
                text.push_str(&format!("  FAIL seed {} lambda {}: {why}\n", c.seed, c.lambda));
            }
            for p in &dumped {
                text.push_str(&format!("  dumped {}\n", p.display()));
            }
            let inequality = report
                .cases
                .iter()
                .any(|c| c.record.as_ref().is_some_and(|r| !r.equality_holds));
            let code = if report.all_passed() {
                0
            } else if inequality {
                EXIT_INEQUALITY
            } else {
                EXIT_NUMERICAL
            };
            let summary = json!({
                "cases": report.cases.len(),
                "passed": report.passed,
                "failed": report.failed,
                "pass_rate": report.pass_rate(),
                "oracle_discrepancies": report.oracle_discrepancies,
                "elapsed_ms": report.elapsed_ms,
                "dumped": dumped,
                "failures": to_json(&report.cases.iter().filter(|c| !c.passed()).collect::<Vec<_>>()),
            });
            Ok(Outcome {
                text,
                json: summary,
                code,
            })
        }
    }
}
