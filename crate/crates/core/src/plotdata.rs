//! Plot-ready series extracted from run directories, with optional bare SVG
//! line renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::output::{self, fmt_num, read_snapshot_index, read_summary, read_table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// `rho(0, t)` and `-u_x(0, t)`.
    Fig2,
    /// Gradient and field maxima against time.
    Gradients,
    /// Energy and its relative drift.
    Energy,
    /// Snapshot profiles of one or more runs.
    Waterfall,
}

impl PlotKind {
    pub fn parse(s: &str) -> Result<PlotKind> {
        match s {
            "fig2" | "center" => Ok(PlotKind::Fig2),
            "gradients" | "fig3" => Ok(PlotKind::Gradients),
            "energy" => Ok(PlotKind::Energy),
            "waterfall" | "fig4" | "fig5" | "fig6" => Ok(PlotKind::Waterfall),
            _ => Err(Error::config(
                "kind",
                format!("unknown plot kind `{s}`; known: fig2, gradients, energy, waterfall, fig4, fig5, fig6"),
            )),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PlotKind::Fig2 => "fig2",
            PlotKind::Gradients => "gradients",
            PlotKind::Energy => "energy",
            PlotKind::Waterfall => "waterfall",
        }
    }
}

/// A CSV table of plot data plus the curves to draw from it.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub curves: Vec<Curve>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotData {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn series(t: &[f64], y: &[f64], label: &str) -> Curve {
    Curve {
        label: label.to_string(),
        points: t.iter().copied().zip(y.iter().copied()).collect(),
    }
}

fn numeric_rows(cols: &[&[f64]]) -> Vec<Vec<String>> {
    (0..cols[0].len())
        .map(|i| cols.iter().map(|c| fmt_num(c[i])).collect())
        .collect()
}

fn one_run(kind: PlotKind, runs: &[PathBuf]) -> Result<&Path> {
    match runs {
        [r] => Ok(r),
        [] => Err(Error::Precondition(format!("{} needs a run directory", kind.as_str()))),
        _ => Err(Error::Precondition(format!("{} takes exactly one run directory", kind.as_str()))),
    }
}

pub fn extract(kind: PlotKind, runs: &[PathBuf]) -> Result<PlotData> {
    match kind {
        PlotKind::Fig2 => {
            let t = read_table(&one_run(kind, runs)?.join(output::PROBE_FILE))?;
            let (time, rho, neg) = (t.column("t")?, t.column("rho_center")?, t.column("neg_ux_center")?);
            Ok(PlotData {
                header: vec!["t".into(), "rho_0".into(), "neg_ux_0".into()],
                rows: numeric_rows(&[&time, &rho, &neg]),
                curves: vec![series(&time, &rho, "rho(0,t)"), series(&time, &neg, "-u_x(0,t)")],
            })
        }
        PlotKind::Gradients => {
            let t = read_table(&one_run(kind, runs)?.join(output::DIAGNOSTICS_FILE))?;
            let time = t.column("t")?;
            let cols = ["max_abs_ux", "max_abs_rhox", "max_abs_u", "max_rho", "min_rho"];
            let data: Vec<Vec<f64>> = cols.iter().map(|c| t.column(c)).collect::<Result<_>>()?;
            let mut refs: Vec<&[f64]> = vec![&time];
            refs.extend(data.iter().map(Vec::as_slice));
            let mut header = vec!["t".to_string()];
            header.extend(cols.iter().map(|c| c.to_string()));
            Ok(PlotData {
                header,
                rows: numeric_rows(&refs),
                curves: cols.iter().zip(&data).map(|(c, d)| series(&time, d, c)).collect(),
            })
        }
        PlotKind::Energy => {
            let t = read_table(&one_run(kind, runs)?.join(output::DIAGNOSTICS_FILE))?;
            let time = t.column("t")?;
            let h = t.column("H")?;
            let h0 = h.first().copied().unwrap_or(0.0);
            let drift: Vec<f64> = h.iter().map(|x| (x - h0) / h0.abs().max(f64::MIN_POSITIVE)).collect();
            Ok(PlotData {
                header: vec!["t".into(), "H".into(), "relative_drift".into()],
                rows: numeric_rows(&[&time, &h, &drift]),
                curves: vec![series(&time, &h, "H(t)")],
            })
        }
        PlotKind::Waterfall => waterfall(runs),
    }
}

fn waterfall(runs: &[PathBuf]) -> Result<PlotData> {
    if runs.is_empty() {
        return Err(Error::Precondition("waterfall needs at least one run directory".into()));
    }
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut offset = 0.0;
    for (i, dir) in runs.iter().enumerate() {
        let summary = read_summary(&dir.join(output::SUMMARY_FILE))?;
        let k = summary.get("scenario.model.K").unwrap_or("none").to_string();
        let snaps = read_snapshot_index(&dir.join(output::SNAPSHOT_DIR))?;
        if snaps.is_empty() {
            return Err(Error::MissingArtifact(dir.join(output::SNAPSHOT_DIR).join("snapshot_00000.csv")));
        }
        for s in &snaps {
            let t = read_table(&s.path)?;
            let (x, rho, u) = (t.column("x")?, t.column("rho")?, t.column("u")?);
            for j in 0..x.len() {
                rows.push(vec![
                    i.to_string(),
                    k.clone(),
                    fmt_num(s.time),
                    fmt_num(x[j]),
                    fmt_num(rho[j]),
                    fmt_num(u[j]),
                ]);
            }
            curves.push(Curve {
                label: format!("run {i} K={k} t={:.3}", s.time),
                points: x.iter().zip(&rho).map(|(a, b)| (*a, b + offset)).collect(),
            });
            offset += 0.5;
        }
        offset += 1.0;
    }
    Ok(PlotData {
        header: ["run", "K", "t", "x", "rho", "u"].map(String::from).to_vec(),
        rows,
        curves,
    })
}

/// Polyline rendering of the curves on shared axes.
pub fn render_svg(title: &str, curves: &[Curve]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const M: f64 = 50.0;
    let pts = curves.iter().flat_map(|c| c.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{M}" y="25" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(
        s,
        r#"<text x="{M}" y="{}" font-family="sans-serif" font-size="11">x: [{x0:.4}, {x1:.4}]  y: [{y0:.4}, {y1:.4}]</text>"#,
        H - 15.0
    );
    for (i, c) in curves.iter().enumerate() {
        let mut path = String::new();
        for &(x, y) in c.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = write!(path, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"><title>{}</title></polyline>"#,
            colors[i % colors.len()],
            path.trim_end(),
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<kind>.csv` (and `<kind>.svg`) into `out_dir`; returns the written paths.
pub fn write_plotdata(kind: PlotKind, runs: &[PathBuf], out_dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    let data = extract(kind, runs)?;
    fs::create_dir_all(out_dir)?;
    let csv = out_dir.join(format!("{}.csv", kind.as_str()));
    fs::write(&csv, data.to_csv())?;
    let mut written = vec![csv];
    if svg {
        let path = out_dir.join(format!("{}.svg", kind.as_str()));
        fs::write(&path, render_svg(kind.as_str(), &data.curves))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::execute;
    use crate::scenario::Scenario;

    fn small_run(dir: &Path, k: f64) {
        let mut sc = Scenario::preset("table1-c").unwrap();
        sc.n = 64;
        sc.k = k;
        sc.t_end = 0.2;
        sc.snapshot_interval = 0.1;
        execute(&sc).unwrap().write_artifacts(dir).unwrap();
    }

    #[test]
    fn fig2_series_follows_the_probe() {
        let dir = tempfile::tempdir().unwrap();
        small_run(dir.path(), 0.0);
        let d = extract(PlotKind::Fig2, &[dir.path().to_path_buf()]).unwrap();
        assert_eq!(d.header, ["t", "rho_0", "neg_ux_0"]);
        assert_eq!(d.rows.len(), 21);
        assert_eq!(d.rows[0][1].parse::<f64>().unwrap(), 0.7);
        let last: f64 = d.rows[20][0].parse().unwrap();
        assert!((last - 0.2).abs() < 1e-12);
    }

    #[test]
    fn waterfall_covers_both_runs() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        small_run(a.path(), 0.0);
        small_run(b.path(), 0.5);
        let runs = [a.path().to_path_buf(), b.path().to_path_buf()];
        let d = extract(PlotKind::parse("fig4").unwrap(), &runs).unwrap();
        assert_eq!(d.rows.len(), 2 * 3 * 64);
        assert_eq!(d.curves.len(), 6);
        assert!(d.rows.iter().any(|r| r[0] == "1" && r[1].parse::<f64>().unwrap() == 0.5));
        let out = tempfile::tempdir().unwrap();
        let files = write_plotdata(PlotKind::Waterfall, &runs, out.path(), true).unwrap();
        assert_eq!(files.len(), 2);
        let svg = fs::read_to_string(&files[1]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 6);
    }

    #[test]
    fn empty_directory_is_a_missing_artifact() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [PlotKind::Fig2, PlotKind::Gradients, PlotKind::Energy, PlotKind::Waterfall] {
            let err = extract(kind, &[dir.path().to_path_buf()]).unwrap_err();
            assert!(matches!(err, Error::MissingArtifact(_)), "{kind:?}: {err}");
        }
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(PlotKind::parse("fig9").is_err());
    }
}
