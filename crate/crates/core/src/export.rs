//! Machine-readable outputs: the JSON run summary and the CSV tables.
//!
//! Floating-point values are written with `{:.17e}` so that every `f64` round-trips.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::analysis::{CriterionRow, ResidualRow};
use crate::error::Result;
use crate::meshmeans::{mp_profile, AnnularField};
use crate::modulus::ModulusOmega;
use crate::scalar::Real;
use crate::zsolver::SolutionBundle;

/// One named pass/fail check of a run.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckRecord {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), pass: value <= tolerance, value, tolerance }
    }

    /// Passes when `value >= tolerance`.
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), pass: value >= tolerance, value, tolerance }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Reproducibility {
    /// SHA-256 of the mesh description.
    pub grid_hash: String,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    pub version: String,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub command: String,
    pub config_echo: serde_json::Value,
    pub checks: Vec<CheckRecord>,
    /// Table name to file name (relative to the output directory).
    pub tables: BTreeMap<String, String>,
    /// Scalar results of the run.
    pub results: BTreeMap<String, serde_json::Value>,
    pub reproducibility: Reproducibility,
}

impl Summary {
    pub fn new(command: impl Into<String>, config_echo: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            config_echo,
            checks: Vec::new(),
            tables: BTreeMap::new(),
            results: BTreeMap::new(),
            reproducibility: Reproducibility { version: env!("CARGO_PKG_VERSION").into(), ..Default::default() },
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.results.insert(key.into(), v);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        Ok(fs::write(path, text + "\n")?)
    }
}

/// Formats a float for the CSV tables.
pub fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Writes a header and string rows to `path`.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.flush()?)
}

pub const Z_FIELD_COLUMNS: [&str; 4] = ["r", "theta_index", "re", "im"];
pub const PROFILE_COLUMNS: [&str; 15] = [
    "r", "alpha0_re", "alpha0_im", "alpha_re", "alpha_im", "q_re", "q_im", "e_re", "e_im", "l_re", "l_im", "y1_re", "y1_im", "mp_z",
    "mp_v",
];
pub const OMEGA_COLUMNS: [&str; 4] = ["r", "omega", "dini_from_zero", "log_integral"];
pub const ZETA_COLUMNS: [&str; 4] = ["r", "mp_zeta", "bound", "ratio"];
pub const CRITERION_COLUMNS: [&str; 6] = ["r", "criterion", "L", "Mp_Z", "lower_env", "upper_env"];
pub const RESIDUAL_COLUMNS: [&str; 5] = ["test_function", "residual", "hessian_sup", "z_sup", "normalized"];
pub const DECOMPOSE_COLUMNS: [&str; 2] = ["r", "mp_w"];

/// Every node value of `z`: one row per radius and sphere node.
pub fn write_z_field<T: Real>(path: &Path, z: &AnnularField<T>) -> Result<()> {
    let mesh = z.mesh();
    let nq = mesh.nq();
    let rows = (0..mesh.nr()).flat_map(|i| {
        let r = mesh.radial.r(i).to_f64_lossy();
        (0..nq).map(move |q| {
            let v = z.get(i, q);
            vec![fmt(r), q.to_string(), fmt(v.re.to_f64_lossy()), fmt(v.im.to_f64_lossy())]
        })
    });
    write_table(path, &Z_FIELD_COLUMNS, rows)
}

/// Radial profiles of a solution and the annular means of `Z` and `V`.
pub fn write_profiles<T: Real>(path: &Path, b: &SolutionBundle<T>, p: T) -> Result<()> {
    let mesh = b.z.mesh();
    let (mz, mv) = (mp_profile(&b.z, p), mp_profile(&b.v, p));
    let pr = &b.profiles;
    let c = |x: crate::scalar::Cx<T>| [fmt(x.re.to_f64_lossy()), fmt(x.im.to_f64_lossy())];
    let rows = (0..mesh.nr()).map(|i| {
        let mut row = vec![fmt(mesh.radial.r(i).to_f64_lossy())];
        for v in [pr.alpha0.at(i), pr.alpha.at(i), pr.q.at(i), pr.e.at(i), b.l.at(i), b.y1.at(i)] {
            row.extend(c(v));
        }
        row.push(opt(mz[i].map(|v| v.to_f64_lossy())));
        row.push(opt(mv[i].map(|v| v.to_f64_lossy())));
        row
    });
    write_table(path, &PROFILE_COLUMNS, rows)
}

/// The modulus on `grid` with its Dini and log integrals.
pub fn write_omega<T: Real>(path: &Path, modulus: &ModulusOmega<T>, grid: &[T]) -> Result<()> {
    let rows = grid.iter().map(|&r| {
        vec![
            fmt(r.to_f64_lossy()),
            fmt(modulus.at(r).to_f64_lossy()),
            fmt(modulus.dini_from_zero(r).to_f64_lossy()),
            fmt(modulus.log_integral(r).to_f64_lossy()),
        ]
    });
    write_table(path, &OMEGA_COLUMNS, rows)
}

/// Rows `(r, M_p ζ, bound)` with their ratio.
pub fn write_zeta_table(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let ratio = |m: f64, w: f64| if m == 0.0 { 0.0 } else { m / w };
    write_table(path, &ZETA_COLUMNS, rows.iter().map(|&(r, m, w)| vec![fmt(r), fmt(m), fmt(w), fmt(ratio(m, w))]))
}

pub fn write_criterion(path: &Path, rows: &[CriterionRow]) -> Result<()> {
    let data = rows.iter().map(|x| vec![fmt(x.r), fmt(x.criterion), opt(x.l), opt(x.mp_z), opt(x.lower_env), opt(x.upper_env)]);
    write_table(path, &CRITERION_COLUMNS, data)
}

pub fn write_residuals(path: &Path, rows: &[ResidualRow]) -> Result<()> {
    let data = rows
        .iter()
        .map(|x| vec![x.test_function.clone(), fmt(x.residual), fmt(x.hessian_sup), fmt(x.z_sup), fmt(x.normalized)]);
    write_table(path, &RESIDUAL_COLUMNS, data)
}

pub fn write_decompose(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    write_table(path, &DECOMPOSE_COLUMNS, rows.iter().map(|&(r, m)| vec![fmt(r), fmt(m)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn check_records() {
        assert!(CheckRecord::at_most("a", 1.0, 1.0).pass);
        assert!(!CheckRecord::at_most("a", 1.5, 1.0).pass);
        assert!(CheckRecord::at_least("b", 2.0, 1.0).pass);
        let mut s = Summary::new("run", serde_json::json!({"p": 2.0}));
        assert!(s.all_pass());
        s.checks.push(CheckRecord::at_most("c", f64::NAN, 1.0));
        assert!(!s.all_pass());
    }

    #[test]
    fn table_round_trip() {
        let dir = std::env::temp_dir().join(format!("ddform-export-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("decompose.csv");
        write_decompose(&path, &[(0.5, 1.25), (0.25, 1e-20)]).unwrap();
        let mut rd = csv::Reader::from_path(&path).unwrap();
        assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), DECOMPOSE_COLUMNS);
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1][1].parse::<f64>().unwrap(), 1e-20);
        fs::remove_dir_all(&dir).unwrap();
    }
}
