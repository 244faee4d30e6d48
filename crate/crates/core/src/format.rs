//! On-disk formats: instance JSON, tolerance TOML, trajectory CSV, and the
//! small textual arguments accepted on the command line.
//!
//! Instance JSON:
//!
//! ```json
//! {"n": 1, "k": 1, "H0": [[[-1.0, 0.0]]], "F": [[[1.0, 0.0]]], "J": [[[1.0, 0.0]]]}
//! ```
//!
//! Matrices are row-major lists of rows, each entry a `[re, im]` pair.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::model::{CouplingWindow, Instance, ToleranceConfig};
use crate::numerics::{c, CMatrix};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    k: usize,
    #[serde(rename = "H0")]
    h0: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "F")]
    f: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "J")]
    j: Vec<Vec<[f64; 2]>>,
}

fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn from_rows(name: &'static str, rows: &[Vec<[f64; 2]>], nrows: usize, ncols: usize) -> Result<CMatrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{name} must be {nrows}x{ncols}")));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(name));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

pub fn parse_instance_json(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.n == 0 || file.k == 0 {
        return Err(Error::DimensionMismatch("n and k must be positive".into()));
    }
    let h0 = from_rows("H0", &file.h0, file.n, file.n)?;
    let f = from_rows("F", &file.f, file.k, file.n)?;
    let j = from_rows("J", &file.j, file.k, file.k)?;
    Instance::new(h0, f, j)
}

/// Pretty-printed, deterministic JSON.
pub fn instance_to_json(inst: &Instance) -> String {
    let file = InstanceFile {
        n: inst.n(),
        k: inst.k(),
        h0: to_rows(&inst.h0),
        f: to_rows(&inst.f),
        j: to_rows(&inst.j),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("finite numbers serialize");
    s.push('\n');
    s
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_instance_json(&text)
}

pub fn save_instance(path: &Path, inst: &Instance) -> Result<()> {
    std::fs::write(path, instance_to_json(inst)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Tolerances from TOML; absent keys keep their defaults.
pub fn parse_tolerances(text: &str) -> Result<ToleranceConfig> {
    let tol: ToleranceConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    tol.validate()?;
    Ok(tol)
}

pub fn load_tolerances(path: &Path) -> Result<ToleranceConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_tolerances(&text)
}

pub fn tolerances_to_toml(tol: &ToleranceConfig) -> String {
    toml::to_string(tol).expect("tolerances serialize")
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let mut parts = text.split(',').map(str::trim);
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::Parse(format!(
            "{what}: expected two comma-separated numbers, got {text:?}"
        )));
    };
    let parse = |s: &str| -> Result<f64> {
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("{what}: not a number: {s:?}")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("{what}: non-finite value {s:?}")));
        }
        Ok(v)
    };
    Ok((parse(a)?, parse(b)?))
}

/// `"a,b"`.
pub fn parse_window(text: &str) -> Result<CouplingWindow> {
    let (a, b) = parse_pair(text, "window")?;
    CouplingWindow::new(a, b)
}

/// `"re,im"`.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let (re, im) = parse_pair(text, "complex number")?;
    Ok(c(re, im))
}

/// Header `t,param,track0_re,track0_im,track0_phase,track1_re,...`, one row
/// per sample.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["t".to_string(), "param".to_string()];
    for j in 0..traj.tracks() {
        header.push(format!("track{j}_re"));
        header.push(format!("track{j}_im"));
        header.push(format!("track{j}_phase"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..traj.samples() {
        let mut row = vec![traj.t[i].to_string(), traj.param[i].to_string()];
        for (e, p) in traj.eigenvalues[i].iter().zip(&traj.phases[i]) {
            row.push(e.re.to_string());
            row.push(e.im.to_string());
            row.push(p.to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_instance;

    const SCALAR: &str = r#"{"n": 1, "k": 1, "H0": [[[-1.0, 0.0]]], "F": [[[1.0, 0.0]]], "J": [[[1.0, 0.0]]]}"#;

    #[test]
    fn scalar_parses() {
        let inst = parse_instance_json(SCALAR).unwrap();
        assert_eq!(inst.h0[(0, 0)], c(-1.0, 0.0));
        assert_eq!((inst.n(), inst.k()), (1, 1));
    }

    #[test]
    fn round_trip_is_exact() {
        let inst = random_instance(4, 2, &[1, -1], 1).unwrap();
        let text = instance_to_json(&inst);
        let back = parse_instance_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(instance_to_json(&back), text);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_instance_json("{"), Err(Error::Parse(_))));
        let extra = SCALAR.replace("\"n\"", "\"x\": 1, \"n\"");
        assert!(matches!(parse_instance_json(&extra), Err(Error::Parse(_))));
        let wrong = SCALAR.replace("\"k\": 1", "\"k\": 2");
        assert!(matches!(parse_instance_json(&wrong), Err(Error::DimensionMismatch(_))));
        let zero = SCALAR.replace("\"n\": 1", "\"n\": 0");
        assert!(matches!(parse_instance_json(&zero), Err(Error::DimensionMismatch(_))));
        let huge = SCALAR.replace("-1.0, 0.0", "1e999, 0.0");
        assert!(parse_instance_json(&huge).is_err());
    }

    #[test]
    fn tolerance_overrides() {
        let tol = parse_tolerances("tol_unitary = 1e-9\nmax_adaptive_depth = 12\n").unwrap();
        assert_eq!(tol.tol_unitary, 1e-9);
        assert_eq!(tol.max_adaptive_depth, 12);
        assert_eq!(tol.tol_herm, ToleranceConfig::default().tol_herm);
        assert!(matches!(parse_tolerances("bogus = 1"), Err(Error::InvalidConfig(_))));
        assert!(matches!(
            parse_tolerances("cluster_factor = 0.7"),
            Err(Error::InvalidConfig(_))
        ));
        let text = tolerances_to_toml(&tol);
        assert_eq!(parse_tolerances(&text).unwrap(), tol);
    }

    #[test]
    fn pairs() {
        let w = parse_window("0, 1").unwrap();
        assert_eq!((w.a, w.b), (0.0, 1.0));
        assert!(parse_window("1,0").is_err());
        assert!(parse_window("0").is_err());
        assert!(parse_window("0,1,2").is_err());
        assert_eq!(parse_complex("0.5,-0.1").unwrap(), c(0.5, -0.1));
        assert!(parse_complex("a,b").is_err());
        assert!(parse_complex("nan,0").is_err());
    }
}
