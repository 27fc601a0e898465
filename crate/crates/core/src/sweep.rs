//! Parameter sweeps over scenario config keys.
//!
//! A sweep file is a scenario config whose keys may carry a `base.` prefix,
//! plus one or more axis lines:
//!
//! ```text
//! preset = table1-a
//! base.grid.n = 256
//! axis.init.a = 0.3, 0.7
//! axis.model.K = linspace(0, 0.5, 3)
//! ```
//!
//! Cells are the cartesian product of the axes with the first axis varying
//! slowest. Rows are written in cell order whatever the worker count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{KeyValues, ScenarioConfig, KEYS};
use crate::error::{Error, Result};
use crate::experiments::execute;
use crate::output::fmt_num;

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: KeyValues,
    pub axes: Vec<Axis>,
    pub base_dir: PathBuf,
}

/// One point of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub values: Vec<String>,
    pub termination: String,
    pub t_star: Option<f64>,
    pub final_time: Option<f64>,
    pub h0: Option<f64>,
    pub exp_v_minus_inv_h0: Option<f64>,
    pub pressureless: String,
    pub liu: String,
    pub isothermal: String,
    pub error: String,
}

const MAX_CELLS: usize = 100_000;

fn parse_axis(key: &str, text: &str) -> Result<Vec<String>> {
    let t = text.trim();
    if let Some(inner) = t.strip_prefix("linspace(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        let bad = || Error::config(key, format!("expected linspace(start, stop, count), got `{t}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let a: f64 = parts[0].parse().map_err(|_| bad())?;
        let b: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        if n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        return Ok((0..n)
            .map(|i| {
                let x = if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
                fmt_num(x)
            })
            .collect());
    }
    let values: Vec<String> = t.split(',').map(|v| v.trim().to_string()).collect();
    if values.iter().any(String::is_empty) {
        return Err(Error::config(key, "empty axis value"));
    }
    Ok(values)
}

impl SweepSpec {
    pub fn parse(text: &str, base_dir: &Path) -> Result<SweepSpec> {
        let kv = KeyValues::parse(text)?;
        let mut base = KeyValues::default();
        let mut axes = Vec::new();
        for (k, v) in kv.pairs() {
            if let Some(key) = k.strip_prefix("axis.") {
                if !KEYS.contains(&key) || key == "preset" {
                    return Err(Error::config(k, "unknown sweep axis"));
                }
                axes.push(Axis {
                    key: key.to_string(),
                    values: parse_axis(k, v)?,
                });
            } else {
                let key = k.strip_prefix("base.").unwrap_or(k);
                if !KEYS.contains(&key) {
                    return Err(Error::config(k, "unknown key"));
                }
                base.set(key, v);
            }
        }
        let cells = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()));
        if !cells.is_some_and(|c| c <= MAX_CELLS) {
            return Err(Error::config("axis", format!("more than {MAX_CELLS} cells")));
        }
        Ok(SweepSpec {
            base,
            axes,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<SweepSpec> {
        let text = std::fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn cells(&self) -> Vec<SweepCell> {
        let total: usize = self.axes.iter().map(|a| a.values.len()).product();
        (0..total)
            .map(|index| {
                let mut rem = index;
                let mut values = vec![String::new(); self.axes.len()];
                for (slot, axis) in values.iter_mut().zip(&self.axes).rev() {
                    let m = axis.values.len();
                    *slot = axis.values[rem % m].clone();
                    rem /= m;
                }
                SweepCell { index, values }
            })
            .collect()
    }

    pub fn config_for(&self, cell: &SweepCell) -> Result<ScenarioConfig> {
        let mut kv = self.base.clone();
        for (axis, v) in self.axes.iter().zip(&cell.values) {
            kv.set(&axis.key, v);
        }
        ScenarioConfig::from_key_values(&kv, &self.base_dir)
    }

    pub fn run_cell(&self, cell: &SweepCell) -> SweepRow {
        let mut row = SweepRow {
            index: cell.index,
            values: cell.values.clone(),
            termination: "error".into(),
            t_star: None,
            final_time: None,
            h0: None,
            exp_v_minus_inv_h0: None,
            pressureless: "na".into(),
            liu: "na".into(),
            isothermal: "na".into(),
            error: String::new(),
        };
        let outcome = self.config_for(cell).and_then(|c| execute(&c.scenario));
        match outcome {
            Ok(o) => {
                row.termination = o.result.termination.as_str().into();
                row.t_star = o.t_star();
                row.final_time = Some(o.result.final_state.time);
                row.h0 = Some(o.criteria.pressureless.h0);
                row.exp_v_minus_inv_h0 = Some(o.criteria.pressureless.lhs);
                let v = |b: bool| if b { "hold" } else { "not_hold" }.to_string();
                row.pressureless = v(o.criteria.pressureless.holds);
                row.liu = v(o.criteria.liu.holds);
                if let Some(i) = &o.criteria.isothermal {
                    row.isothermal = v(i.satisfied);
                }
            }
            Err(e) => row.error = e.to_string(),
        }
        row
    }

    /// Runs the given cells on up to `parallel` workers and returns rows sorted by cell index.
    pub fn run_cells(&self, cells: &[SweepCell], parallel: usize) -> Result<Vec<SweepRow>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel.max(1))
            .build()
            .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
        let mut rows: Vec<SweepRow> = pool.install(|| cells.par_iter().map(|c| self.run_cell(c)).collect());
        rows.sort_by_key(|r| r.index);
        Ok(rows)
    }

    pub fn run(&self, parallel: usize) -> Result<Vec<SweepRow>> {
        self.run_cells(&self.cells(), parallel)
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("cell");
        for a in &self.axes {
            h.push(',');
            h.push_str(&a.key);
        }
        h.push_str(",termination,T_star,final_time,H0,exp_v_minus_inv_H0,pressureless,liu,isothermal,error");
        h
    }

    pub fn to_csv(&self, rows: &[SweepRow]) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), fmt_num);
        let mut s = self.csv_header();
        s.push('\n');
        for r in rows {
            let _ = write!(s, "{}", r.index);
            for v in &r.values {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(
                s,
                ",{},{},{},{},{},{},{},{},{}",
                r.termination,
                opt(r.t_star),
                opt(r.final_time),
                opt(r.h0),
                opt(r.exp_v_minus_inv_h0),
                r.pressureless,
                r.liu,
                r.isothermal,
                r.error.replace([',', '\n'], ";")
            );
        }
        s
    }
}
