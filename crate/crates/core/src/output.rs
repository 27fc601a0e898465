//! Artifact writers and readers: diagnostics CSV, probe series, field snapshots
//! and key-value summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::KeyValues;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::eulerian::{FluidState, StepSample};
use crate::grid::Grid;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const PROBE_FILE: &str = "probe.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const SNAPSHOT_INDEX: &str = "index.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

pub const PROBE_HEADER: &str = "t,min_ux,max_abs_ux,max_abs_rhox,rho_center,neg_ux_center";
pub const SNAPSHOT_HEADER: &str = "x,rho,u,phi";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::from(DiagnosticsRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_csv_row());
        s.push('\n');
    }
    s
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    write(path, &diagnostics_csv(records))
}

pub fn probe_csv(samples: &[StepSample]) -> String {
    let mut s = String::from(PROBE_HEADER);
    s.push('\n');
    for p in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_num(p.time),
            fmt_num(p.min_ux),
            fmt_num(p.max_abs_ux),
            fmt_num(p.max_abs_rhox),
            fmt_num(p.rho_center),
            fmt_num(p.neg_ux_center)
        );
    }
    s
}

pub fn write_probe(path: &Path, samples: &[StepSample]) -> Result<()> {
    write(path, &probe_csv(samples))
}

pub fn snapshot_csv(grid: &Grid, state: &FluidState) -> String {
    let mut s = String::from(SNAPSHOT_HEADER);
    s.push('\n');
    for (j, x) in grid.nodes().iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_num(*x),
            fmt_num(state.rho[j]),
            fmt_num(state.u[j]),
            fmt_num(state.phi[j])
        );
    }
    s
}

/// Writes `snapshot_NNNNN.csv` files plus an `index.csv` of `index,t,file`.
pub fn write_snapshots(dir: &Path, grid: &Grid, snapshots: &[FluidState]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut index = String::from("index,t,file\n");
    for (i, s) in snapshots.iter().enumerate() {
        let name = format!("snapshot_{i:05}.csv");
        write(&dir.join(&name), &snapshot_csv(grid, s))?;
        let _ = writeln!(index, "{i},{},{name}", fmt_num(s.time));
    }
    write(&dir.join(SNAPSHOT_INDEX), &index)
}

/// Numeric CSV with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Precondition(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn parse_table(text: &str, origin: &Path) -> Result<Table> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::MissingArtifact(origin.to_path_buf()))?
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row: Vec<f64> = l
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Precondition(format!("{}: bad row {}", origin.display(), i + 2)))?;
        if row.len() != header.len() {
            return Err(Error::Precondition(format!(
                "{}: row {} has {} fields, header has {}",
                origin.display(),
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path) -> Result<Table> {
    parse_table(&read(path)?, path)
}

/// One entry of a snapshot index.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotEntry {
    pub index: usize,
    pub time: f64,
    pub path: PathBuf,
}

pub fn read_snapshot_index(dir: &Path) -> Result<Vec<SnapshotEntry>> {
    let path = dir.join(SNAPSHOT_INDEX);
    let text = read(&path)?;
    let mut out = Vec::new();
    for (i, l) in text.lines().skip(1).filter(|l| !l.trim().is_empty()).enumerate() {
        let parts: Vec<&str> = l.split(',').collect();
        let bad = || Error::Precondition(format!("{}: bad row {}", path.display(), i + 2));
        if parts.len() != 3 {
            return Err(bad());
        }
        out.push(SnapshotEntry {
            index: parts[0].trim().parse().map_err(|_| bad())?,
            time: parts[1].trim().parse().map_err(|_| bad())?,
            path: dir.join(parts[2].trim()),
        });
    }
    Ok(out)
}

pub fn write_summary(path: &Path, summary: &KeyValues) -> Result<()> {
    write(path, &summary.render())
}

pub fn read_summary(path: &Path) -> Result<KeyValues> {
    KeyValues::parse(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eulerian::initialize;
    use crate::scenario::Scenario;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn diagnostics_header_is_stable() {
        let text = diagnostics_csv(&[]);
        assert_eq!(
            text,
            "t,H,max_rho,min_rho,max_abs_u,max_abs_ux,max_abs_rhox,max_abs_phi,max_abs_phix,R,S,F_plus,G_plus,flags\n"
        );
    }

    #[test]
    fn snapshots_round_trip() {
        let mut sc = Scenario::preset("table1-a").unwrap();
        sc.n = 32;
        let g = sc.grid().unwrap();
        let s0 = initialize(&sc).unwrap();
        let mut s1 = s0.clone();
        s1.time = 0.5;
        let dir = tempfile::tempdir().unwrap();
        write_snapshots(dir.path(), &g, &[s0.clone(), s1]).unwrap();
        let idx = read_snapshot_index(dir.path()).unwrap();
        assert_eq!(idx.len(), 2);
        assert_eq!(idx[1].time, 0.5);
        let t = read_table(&idx[0].path).unwrap();
        assert_eq!(t.header, ["x", "rho", "u", "phi"]);
        assert_eq!(t.column("rho").unwrap(), s0.rho.to_vec());
        assert_eq!(t.column("x").unwrap(), g.nodes().to_vec());
    }

    #[test]
    fn missing_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_table(&dir.path().join("nope.csv")), Err(Error::MissingArtifact(_))));
        assert!(matches!(read_snapshot_index(dir.path()), Err(Error::MissingArtifact(_))));
    }
}
