//! Acceptance run: one PASS/FAIL line per criterion. Criterion 9 is
//! reported but does not affect the exit status.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use resflow::contour;
use resflow::flow::{self, FlowOptions, FlowResult};
use resflow::numerics::{self, c, identity, real};
use resflow::resolvent::t_norm_decay;
use resflow::resonance;
use resflow::scattering::{scattering_matrix, Scattering};
use resflow::verify::{self, SweepSpec};
use resflow::{
    lambda_grid, random_instance, validate_instance, CMatrix, CouplingWindow, Instance, SpectralParameter,
    ToleranceConfig, ValidatedInstance,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn one(x: f64) -> CMatrix {
    CMatrix::from_element(1, 1, real(x))
}

fn scalar() -> ValidatedInstance {
    validate_instance(&Instance::new(one(-1.0), one(1.0), one(1.0)).unwrap(), &tol()).unwrap()
}

fn degenerate() -> ValidatedInstance {
    let h0 = CMatrix::from_diagonal_element(2, 2, real(-1.0));
    validate_instance(&Instance::new(h0, identity(2), identity(2)).unwrap(), &tol()).unwrap()
}

fn unit_window() -> CouplingWindow {
    CouplingWindow::new(0.0, 1.0).unwrap()
}

/// Seeded random instance with `n ∈ 2..=8`, `k ≤ min(4, n)`, mixed signs.
fn corpus_instance(seed: u64) -> ValidatedInstance {
    let n = 2 + (seed as usize * 7 + 3) % 7;
    let k = 1 + (seed as usize * 5 + 1) % n.min(4);
    let sig: Vec<i8> = (0..k).map(|i| if (seed >> i) & 1 == 0 { 1 } else { -1 }).collect();
    validate_instance(&random_instance(n, k, &sig, seed).unwrap(), &tol()).unwrap()
}

/// Collected across criteria for the self-consistency check.
#[derive(Default)]
struct Trajectories {
    checked: usize,
    inconsistent: Vec<String>,
}

impl Trajectories {
    fn record(&mut self, label: &str, r: &FlowResult) {
        self.checked += 1;
        if !r.windings_consistent() {
            self.inconsistent.push(format!(
                "{label}: det {} vs tracks {}",
                r.diagnostics.det_winding_raw, r.diagnostics.phase_winding_raw
            ));
        }
    }
}

fn replay_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-replay")
}

fn criterion_1(traj: &mut Trajectories) -> (Outcome, Outcome) {
    let spec = SweepSpec::default();
    let clock = Instant::now();
    let report = verify::sweep(&spec).expect("sweep runs");
    let secs = clock.elapsed().as_secs_f64();
    for case in &report.cases {
        match &case.record {
            Some(r) if !r.windings_consistent => traj
                .inconsistent
                .push(format!("sweep seed {} lambda {}", case.seed, case.lambda)),
            Some(_) => traj.checked += 2,
            None => {}
        }
    }
    let failures: Vec<String> = report
        .cases
        .iter()
        .filter(|c| !c.passed())
        .map(|c| match (&c.record, &c.error) {
            (_, Some(e)) => format!("seed {} lambda {}: {}", c.seed, c.lambda, e.message),
            (Some(r), None) => format!(
                "seed {} lambda {}: total {} mu_s {}",
                c.seed, c.lambda, r.total_index, r.mu_s
            ),
            _ => String::new(),
        })
        .collect();
    let pass = report.all_passed() && report.cases.len() == 300 && secs < 300.0;
    let c1 = outcome(
        pass,
        format!(
            "{}/{} cases, {:.1} s{}",
            report.passed,
            report.cases.len(),
            secs,
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join("; "))
            }
        ),
    );

    let disagree = |c: &verify::SweepCase| c.record.as_ref().is_some_and(|r| !r.oracle_agrees());
    let dumped = if report.oracle_discrepancies > 0 {
        verify::dump_cases(&spec, &report, &replay_dir(), disagree)
            .map(|p| format!(", replay files in {}", replay_dir().display()) + &format!(" ({} files)", p.len()))
            .unwrap_or_else(|e| format!(", dump failed: {e}"))
    } else {
        String::new()
    };
    let c9 = outcome(
        report.oracle_discrepancies == 0,
        format!(
            "{} oracle discrepancies over {} cases{dumped}",
            report.oracle_discrepancies,
            report.cases.len()
        ),
    );
    (c1, c9)
}

/// `S(−0.5 + iy, 1)` for the scalar instance.
fn scalar_s(y: f64) -> Complex64 {
    let y2 = y * y - 0.25;
    c(y2, -y) / c(y2, y)
}

fn criterion_2(traj: &mut Trajectories) -> Outcome {
    let inst = scalar();
    let lambda = -0.5;
    let mut problems = Vec::new();

    let points = resonance::resonance_points(&inst, lambda, 0.0, unit_window()).unwrap();
    if points.len() != 1 || (points[0].real() - 0.5).abs() > 1e-9 || points[0].multiplicity != 1 {
        problems.push(format!("points {points:?}"));
    }
    let point = &points[0];
    for y in [0.1, 0.05, 0.01, 1e-3, 1e-4] {
        // 1 + sT = 0 with T = 1/(−0.5 − iy)
        let t = c(1.0, 0.0) / c(-0.5, -y);
        let expected = -t.inv();
        match resonance::resonance_group(&inst, lambda, point, y) {
            Ok(g) if g.len() == 1 && (g[0] - expected).norm() <= 1e-9 => {}
            other => problems.push(format!("group at y = {y}: {other:?}")),
        }
    }
    let idx = resonance::resonance_index(&inst, lambda, point).unwrap();
    if (idx.n_plus, idx.n_minus, idx.index) != (1, 0, 1) {
        problems.push(format!("index ({}, {}, {})", idx.n_plus, idx.n_minus, idx.index));
    }
    for theta in [PI / 2.0, PI, 1.5 * PI] {
        let r = flow::mu_invariant(&inst, lambda, theta, FlowOptions::default()).unwrap();
        traj.record("scalar mu", &r);
        if r.mu != -1 {
            problems.push(format!("mu({theta}) = {}", r.mu));
        }
    }
    let a = flow::mu_a_invariant(&inst, lambda, PI, FlowOptions::default()).unwrap();
    traj.record("scalar mu_a", &a);
    if a.mu != 0 {
        problems.push(format!("mu_a = {}", a.mu));
    }
    let s = scattering_matrix(&inst, SpectralParameter::new(lambda, 0.5).unwrap(), real(1.0)).unwrap();
    let oracle = scalar_s(0.5);
    if (s.matrix[(0, 0)] - real(-1.0)).norm() > 1e-10 || (oracle - real(-1.0)).norm() > 1e-12 {
        problems.push(format!("S = {}", s.matrix[(0, 0)]));
    }
    for y in [1e-3, 0.1, 0.3, 2.0, 40.0] {
        let s = scattering_matrix(&inst, SpectralParameter::new(lambda, y).unwrap(), real(1.0)).unwrap();
        if (s.matrix[(0, 0)] - scalar_s(y)).norm() > 1e-10 {
            problems.push(format!("S at y = {y}"));
        }
    }
    outcome(problems.is_empty(), problems.join("; "))
}

fn criterion_3(traj: &mut Trajectories) -> Outcome {
    let inst = degenerate();
    let lambda = -0.5;
    let mut problems = Vec::new();
    let points = resonance::resonance_points(&inst, lambda, 0.0, unit_window()).unwrap();
    if points.len() != 1 || (points[0].real() - 0.5).abs() > 1e-9 || points[0].multiplicity != 2 {
        problems.push(format!("points {points:?}"));
    }
    let total = resonance::total_resonance_index(&inst, lambda, unit_window())
        .unwrap()
        .total;
    if total != 2 {
        problems.push(format!("index {total}"));
    }
    let sing = flow::mu_singular(&inst, lambda, &flow::theta_grid(5), FlowOptions::default()).unwrap();
    traj.record("degenerate mu", &sing.mu_flow);
    traj.record("degenerate mu_a", &sing.mu_a_flow);
    if sing.mu_s != -2 {
        problems.push(format!("mu_s {}", sing.mu_s));
    }
    let mult = contour::resonance_multiplicity_contour(&inst, lambda, 0.1, c(0.5, 0.1), 0.03).unwrap();
    if mult != 2 {
        problems.push(format!("contour multiplicity {mult}"));
    }
    outcome(problems.is_empty(), problems.join("; "))
}

/// Clusters of coincident points with their sizes.
fn clusters(points: &[Complex64]) -> Vec<(Complex64, usize)> {
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    for &p in points {
        match out
            .iter_mut()
            .find(|(q, _)| (p - *q).norm() <= 1e-6 * q.norm().max(1.0))
        {
            Some(entry) => entry.1 += 1,
            None => out.push((p, 1)),
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let mut problems = Vec::new();
    let mut checked = 0;
    for seed in 0..50u64 {
        let inst = corpus_instance(4000 + seed);
        let lambda = lambda_grid(&inst, 1)[0];
        let y = 0.1;
        let crit = contour::critical_points(&inst, lambda, y, 0.0).unwrap();
        let all: Vec<Complex64> = crit.poles.iter().chain(&crit.zeros).copied().collect();
        for (points, sign) in [(&crit.poles, -1i64), (&crit.zeros, 1i64)] {
            for (p, mult) in clusters(points) {
                if p.norm() > 100.0 {
                    continue;
                }
                let gap = all
                    .iter()
                    .map(|q| (q - p).norm())
                    .filter(|&d| d > 1e-6 * p.norm().max(1.0))
                    .fold(f64::INFINITY, f64::min);
                let radius = 0.25 * gap.min(4.0);
                let expected = sign * mult as i64;
                for r in [radius, 0.5 * radius] {
                    checked += 1;
                    match contour::s_index(&inst, lambda, y, p, r) {
                        Ok(w) if w.winding == expected => {}
                        other => problems.push(format!("seed {seed} point {p} radius {r}: {other:?}")),
                    }
                }
            }
        }
    }
    outcome(
        problems.is_empty() && checked > 0,
        format!("{checked} contours; {}", problems.join("; ")),
    )
}

fn criterion_5() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..200u64 {
        let inst = corpus_instance(5000 + seed);
        let lambda = ((seed as f64) * 0.917).sin() * 2.5;
        let y = 0.02 + ((seed as f64) * 0.41).cos().abs() * 3.0;
        let s = real(((seed as f64) * 1.7).sin() * 1.5);
        let sc = Scattering::new(&inst, SpectralParameter::new(lambda, y).unwrap()).unwrap();
        let sm = sc.s_matrix(s).unwrap();
        let m = sc.m_function(s).unwrap();
        let root = numerics::spectral_norm(sc.resolvent().sqrt_im_part().unwrap().as_matrix()).unwrap();
        let inter = sc.intertwining_residual(s).unwrap() / root.max(1.0);
        let unitary = sm.unitarity_defect();
        let es = numerics::general_eig(&sm.matrix).unwrap();
        let em = numerics::general_eig(&m.matrix).unwrap();
        let iso = numerics::multiset_distance(&es, &em);
        worst = (worst.0.max(inter), worst.1.max(unitary), worst.2.max(iso));
    }
    let pass = worst.0 <= 1e-8 && worst.1 <= 1e-8 && worst.2 <= 1e-8;
    outcome(
        pass,
        format!(
            "max intertwining/scale {:.1e}, unitarity {:.1e}, isospectrality {:.1e}",
            worst.0, worst.1, worst.2
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut problems = Vec::new();
    let mut worst_sup = 0.0f64;
    for seed in 0..20u64 {
        let inst = corpus_instance(6000 + seed);
        let f2 = inst.f_norm().powi(2);
        for lambda in lambda_grid(&inst, 2) {
            let ymax = flow::choose_y_max(&inst, lambda).unwrap();
            let mut prev = f64::INFINITY;
            for m in [1.0, 2.0, 4.0, 8.0] {
                let sc = Scattering::new(&inst, SpectralParameter::new(lambda, ymax.y_max * m).unwrap()).unwrap();
                let d = flow::sup_deviation(&sc).unwrap();
                if m == 1.0 {
                    worst_sup = worst_sup.max(d);
                    if d > 0.01 {
                        problems.push(format!("seed {seed}: sup {d} at Y_max"));
                    }
                }
                if d > prev * (1.0 + 1e-12) {
                    problems.push(format!("seed {seed}: sup increases at {m} Y_max"));
                }
                prev = d;
            }
            let ys: Vec<f64> = (-4..=4).map(|e| 10f64.powi(e)).chain([ymax.y_max]).collect();
            for (y, t) in ys.iter().zip(t_norm_decay(&inst, lambda, &ys).unwrap()) {
                if t > f2 / y * (1.0 + 1e-12) {
                    problems.push(format!("seed {seed}: |T| = {t} above |F|^2/y at y = {y}"));
                }
            }
        }
    }
    outcome(
        problems.is_empty(),
        format!("worst sup at Y_max {worst_sup:.2e}; {}", problems.join("; ")),
    )
}

fn criterion_7(traj: &mut Trajectories) -> Outcome {
    let mut problems = Vec::new();
    for seed in 0..20u64 {
        let inst = corpus_instance(7000 + seed);
        for lambda in lambda_grid(&inst, 3) {
            let mus: Vec<i64> = [33, 65, 129]
                .iter()
                .map(|&n| {
                    let r = flow::mu_invariant(&inst, lambda, PI, FlowOptions { initial_samples: n }).unwrap();
                    traj.record("sample-count run", &r);
                    r.mu
                })
                .collect();
            if mus.iter().any(|&m| m != mus[0]) {
                problems.push(format!("seed {seed} lambda {lambda}: {mus:?}"));
            }
        }
    }
    problems.extend(traj.inconsistent.iter().cloned());
    outcome(
        problems.is_empty(),
        format!("{} trajectories checked; {}", traj.checked, problems.join("; ")),
    )
}

fn criterion_8() -> Outcome {
    let mut problems = Vec::new();
    let mut checked = 0;
    for seed in 0..50u64 {
        let inst = corpus_instance(8000 + seed);
        let lambda = lambda_grid(&inst, 1)[0];
        let reals: Vec<f64> = resonance::all_real_points(&inst, lambda)
            .unwrap()
            .iter()
            .map(|p| p.0)
            .collect();
        let bases: Vec<f64> = [0.0, 0.37, -0.61, 1.43, 2.9]
            .into_iter()
            .filter(|b| reals.iter().all(|r| (r - b).abs() > 1e-3))
            .take(3)
            .collect();
        if bases.len() < 3 {
            problems.push(format!("seed {seed}: no three regular bases"));
            continue;
        }
        checked += 1;
        match resonance::base_independence_check(&inst, lambda, CouplingWindow::new(-5.0, 5.0).unwrap(), &bases) {
            Ok(true) => {}
            other => problems.push(format!("seed {seed}: {other:?}")),
        }
    }
    outcome(
        problems.is_empty(),
        format!("{checked} instances; {}", problems.join("; ")),
    )
}

fn main() {
    let clock = Instant::now();
    let mut traj = Trajectories::default();
    let (c1, c9) = criterion_1(&mut traj);
    let results = vec![
        ("1 identity on 100 random instances x 3 energies", c1, true),
        ("2 closed-form scalar suite", criterion_2(&mut traj), true),
        ("3 degenerate multiplicity suite", criterion_3(&mut traj), true),
        ("4 minimal-contour S-index equals -/+ multiplicity", criterion_4(), true),
        (
            "5 intertwining, unitarity, isospectrality residuals",
            criterion_5(),
            true,
        ),
        ("6 convergence at Y_max and resolvent decay", criterion_6(), true),
        ("7 flow self-consistency", criterion_7(&mut traj), true),
        ("8 base-point independence", criterion_8(), true),
        ("9 crossing oracle agreement (diagnostic)", c9, false),
    ];
    let mut failed = 0;
    for (name, o, gating) in &results {
        let tag = match (o.pass, gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        if !o.pass && *gating {
            failed += 1;
        }
        println!("[{tag}] criterion {name}: {}", o.detail.trim_end_matches("; "));
    }
    println!("acceptance finished in {:.1} s", clock.elapsed().as_secs_f64());
    if failed > 0 {
        println!("{failed} gating criteria failed");
        std::process::exit(1);
    }
}
