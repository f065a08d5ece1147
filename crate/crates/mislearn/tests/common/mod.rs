//! Synthetic inputs and CLI helpers shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mislearn_core::simulate::{simulate_true_process, TrueProcessConfig};
use mislearn_core::MonthIndex;

pub const START: (i32, u8) = (1990, 1);

pub fn month(i: usize) -> MonthIndex {
    MonthIndex::new(START.0, START.1).unwrap().add_months(i as i64)
}

/// Monthly returns from the AR(1)-plus-noise process, with occasional
/// jumps, one path per seed.
pub fn returns(seed: u64, t: usize, p: f64) -> Vec<f64> {
    let cfg = TrueProcessConfig {
        a: 0.9,
        sigma_eta: 0.004,
        sigma_u: 0.03 + 0.002 * (seed % 7) as f64,
        p,
        mu_j: 0.0,
        sigma_j: 0.04,
        t,
        seed,
        lambda0: 0.0,
        forced_jumps: BTreeMap::new(),
    };
    simulate_true_process(&cfg).unwrap().f
}

/// Wide percent-unit panel: `MKT`, `SMB`, `HML` plus `anomalies` series,
/// each loading on `MKT`.
pub fn write_panel(dir: &Path, t: usize, anomalies: usize) -> PathBuf {
    let mut names = vec!["MKT".to_owned(), "SMB".into(), "HML".into()];
    names.extend((1..=anomalies).map(|i| format!("A{i:02}")));
    let mkt = returns(1, t, 0.01);
    let cols: Vec<Vec<f64>> = names
        .iter()
        .enumerate()
        .map(|(k, _)| match k {
            0 => mkt.clone(),
            _ => returns(10 + k as u64, t, 0.01 + 0.002 * k as f64)
                .iter()
                .zip(&mkt)
                .map(|(v, m)| v + if k >= 3 { 0.4 * m } else { 0.0 })
                .collect(),
        })
        .collect();
    let mut s = format!("date,{}\n", names.join(","));
    for i in 0..t {
        let m = month(i);
        write!(s, "{}{:02}", m.year(), m.month()).unwrap();
        for c in &cols {
            write!(s, ",{:.6}", 100.0 * c[i]).unwrap();
        }
        s.push('\n');
    }
    let path = dir.join("panel.csv");
    std::fs::write(&path, s).unwrap();
    path
}

/// Trending passive share with a two-month hole.
pub fn write_passive(dir: &Path, t: usize) -> PathBuf {
    let mut s = String::from("date,value\n");
    for i in (0..t).filter(|i| !(60..62).contains(i)) {
        writeln!(s, "{},{:.6}", month(i), 0.05 + 0.001 * i as f64 + 0.01 * (i as f64 / 7.0).sin()).unwrap();
    }
    let path = dir.join("passive.csv");
    std::fs::write(&path, s).unwrap();
    path
}

/// Full-pipeline config over the synthetic panel, sized to run in seconds.
pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"seed = 11
output = "out"

[[samples]]
name = "demo"
path = "panel.csv"
unit = "percent"

[passive]
path = "passive.csv"

[regress]
suites = ["baseline", "controlled", "sweep", "passive"]

[simulate.prop1]
paths = 2000

[simulate.grids]
lemma1_points = 1000
prop2_points = 200

[simulate.corollary1]
replications = 200
{extra}"#
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// A directory holding the panel, passive file and config.
pub fn fixture(t: usize, anomalies: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_panel(dir.path(), t, anomalies);
    write_passive(dir.path(), t);
    write_config(dir.path(), "");
    dir
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mislearn"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Parsed CSV: header and rows.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

pub fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column `{name}`"))
}

/// Every file under `root`, relative path to bytes.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
