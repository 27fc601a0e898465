//! Flat `section.key = value` configuration files.
//!
//! A `preset = name` line (anywhere in the file) seeds the scenario; every other
//! key overrides one field. Environment variables named `EPLAB_` followed by the
//! upper-cased key with dots turned into underscores (`EPLAB_MODEL_K`,
//! `EPLAB_TIME_T_END`) override the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::output::fmt_num;
use crate::scenario::{Closure, DensityProfile, Reconstruction, Scenario, VelocityProfile};

/// Every key a scenario config understands, in canonical order.
pub const KEYS: &[&str] = &[
    "preset",
    "name",
    "model.K",
    "grid.n",
    "grid.length",
    "time.dt",
    "time.t_end",
    "time.output_stride",
    "time.snapshot_interval",
    "init.rho",
    "init.a",
    "init.b",
    "init.amplitude",
    "init.mode",
    "init.rho_table",
    "init.u",
    "init.u_a",
    "init.u_b",
    "init.u_table",
    "solver.poisson_tol",
    "solver.picard_tol",
    "solver.max_iterations",
    "solver.blowup_threshold",
    "solver.failure_gradient",
    "solver.dealias",
    "solver.closure",
    "lagrangian.enabled",
    "lagrangian.particles",
    "lagrangian.reconstruction",
    "criteria.T0",
    "criteria.eps",
    "criteria.delta0",
    "outputs.dir",
];

/// Environment variable that overrides `key`.
pub fn env_name(key: &str) -> String {
    format!("EPLAB_{}", key.replace('.', "_").to_uppercase())
}

/// Parsed `key = value` pairs. Later lines win.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    pub entries: BTreeMap<String, String>,
    /// Keys in order of first appearance.
    pub order: Vec<String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::default();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", i + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::config(format!("line {}", i + 1), "empty key"));
            }
            kv.set(k, v.trim());
        }
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        if !self.entries.contains_key(key) {
            self.order.push(key.to_string());
        }
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Pairs in first-appearance order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.order.iter().map(|k| (k.as_str(), self.entries[k].as_str()))
    }

    /// Renders the pairs in first-appearance order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for k in &self.order {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&self.entries[k]);
            out.push('\n');
        }
        out
    }
}

/// A scenario plus the settings that only concern the command line tool.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub out_dir: Option<PathBuf>,
}

fn num(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::config(key, format!("expected a number, got `{v}`")))
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::config(key, format!("expected a non-negative integer, got `{v}`")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{v}`"))),
    }
}

/// Reads a two-column `x,value` table. Lines starting with a letter are headers.
fn read_table(key: &str, path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(key, format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(|c: char| c.is_alphabetic()) {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let (Some(x), Some(y)) = (it.next(), it.next()) else {
            return Err(Error::config(key, format!("bad table row `{line}`")));
        };
        rows.push((num(key, x)?, num(key, y)?));
    }
    Ok(rows)
}

/// Numeric parameters of the density family, defaulting to the current profile.
fn density_params(p: &DensityProfile) -> (f64, f64, f64, u32) {
    match *p {
        DensityProfile::OneMinusSech { a, b } | DensityProfile::OnePlusSech { a, b } => (a, b, 1e-4, 1),
        DensityProfile::Cosine { amplitude, mode } => (0.0, 1.0, amplitude, mode),
        _ => (0.0, 1.0, 1e-4, 1),
    }
}

impl ScenarioConfig {
    /// Builds a config from parsed pairs. Relative table paths resolve against `base_dir`.
    pub fn from_key_values(kv: &KeyValues, base_dir: &Path) -> Result<Self> {
        for k in &kv.order {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::config(k.clone(), "unknown key"));
            }
        }
        let mut sc = match kv.get("preset") {
            Some(p) => Scenario::preset(p)?,
            None => Scenario::default(),
        };
        let mut out_dir = None;
        let (mut a, mut b, mut amplitude, mut mode) = density_params(&sc.rho0);
        let (mut ua, mut ub) = match sc.u0 {
            VelocityProfile::Sech { a, b } => (a, b),
            _ => (1.0, 1.0),
        };
        let mut rho_kind: Option<String> = None;
        let mut u_kind: Option<String> = None;
        let mut rho_table = None;
        let mut u_table = None;
        for key in &kv.order {
            let v = kv.entries[key].as_str();
            let k = key.as_str();
            match k {
                "preset" => {}
                "name" => sc.name = v.to_string(),
                "model.K" => sc.k = num(k, v)?,
                "grid.n" => sc.n = count(k, v)?,
                "grid.length" => sc.length = num(k, v)?,
                "time.dt" => sc.dt = num(k, v)?,
                "time.t_end" => sc.t_end = num(k, v)?,
                "time.output_stride" => sc.output_stride = count(k, v)?,
                "time.snapshot_interval" => sc.snapshot_interval = num(k, v)?,
                "init.rho" => rho_kind = Some(v.to_string()),
                "init.a" => a = num(k, v)?,
                "init.b" => b = num(k, v)?,
                "init.amplitude" => amplitude = num(k, v)?,
                "init.mode" => {
                    mode = v
                        .parse()
                        .map_err(|_| Error::config(k, format!("expected a mode number, got `{v}`")))?
                }
                "init.rho_table" => rho_table = Some(read_table(k, &base_dir.join(v))?),
                "init.u" => u_kind = Some(v.to_string()),
                "init.u_a" => ua = num(k, v)?,
                "init.u_b" => ub = num(k, v)?,
                "init.u_table" => u_table = Some(read_table(k, &base_dir.join(v))?),
                "solver.poisson_tol" => sc.solver.poisson_tol = num(k, v)?,
                "solver.picard_tol" => sc.solver.picard_tol = num(k, v)?,
                "solver.max_iterations" => sc.solver.max_iterations = count(k, v)?,
                "solver.blowup_threshold" => sc.solver.blowup_threshold = num(k, v)?,
                "solver.failure_gradient" => sc.solver.failure_gradient = num(k, v)?,
                "solver.dealias" => sc.solver.dealias = flag(k, v)?,
                "solver.closure" => {
                    sc.solver.closure = match v {
                        "newton" => Closure::NewtonKrylov,
                        "picard" => Closure::Picard,
                        _ => return Err(Error::config(k, format!("expected newton or picard, got `{v}`"))),
                    }
                }
                "lagrangian.enabled" => sc.lagrangian.enabled = flag(k, v)?,
                "lagrangian.particles" => sc.lagrangian.particles = count(k, v)?,
                "lagrangian.reconstruction" => {
                    sc.lagrangian.reconstruction = match v {
                        "log_spline" => Reconstruction::LogSpline,
                        "monotone_cubic" => Reconstruction::MonotoneCubic,
                        _ => {
                            return Err(Error::config(
                                k,
                                format!("expected log_spline or monotone_cubic, got `{v}`"),
                            ))
                        }
                    }
                }
                "criteria.T0" => sc.criteria.t0 = num(k, v)?,
                "criteria.eps" => sc.criteria.eps = num(k, v)?,
                "criteria.delta0" => sc.criteria.delta0 = num(k, v)?,
                "outputs.dir" => out_dir = Some(base_dir.join(v)),
                _ => unreachable!("checked against KEYS"),
            }
        }

        let rho_touched = ["init.a", "init.b", "init.amplitude", "init.mode"]
            .iter()
            .any(|k| kv.get(k).is_some());
        let kind = rho_kind.or_else(|| {
            rho_touched.then(|| match sc.rho0 {
                DensityProfile::OnePlusSech { .. } => "one_plus_sech".to_string(),
                DensityProfile::Cosine { .. } => "cosine".to_string(),
                _ => "one_minus_a_sech_bx".to_string(),
            })
        });
        if let Some(kind) = kind {
            sc.rho0 = match kind.as_str() {
                "one_minus_a_sech_bx" => DensityProfile::OneMinusSech { a, b },
                "one_plus_sech" => DensityProfile::OnePlusSech { a, b },
                "cosine" => DensityProfile::Cosine { amplitude, mode },
                "constant" => DensityProfile::Constant,
                "custom_table" => DensityProfile::Table(
                    rho_table.ok_or_else(|| Error::config("init.rho_table", "custom_table needs a table path"))?,
                ),
                _ => {
                    return Err(Error::config(
                        "init.rho",
                        format!(
                            "expected one_minus_a_sech_bx, one_plus_sech, cosine, constant or custom_table, got `{kind}`"
                        ),
                    ))
                }
            };
        }
        let u_touched = kv.get("init.u_a").is_some() || kv.get("init.u_b").is_some();
        let u_kind = u_kind.or_else(|| u_touched.then(|| "sech".to_string()));
        if let Some(kind) = u_kind {
            sc.u0 = match kind.as_str() {
                "zero" => VelocityProfile::Zero,
                "sech" => VelocityProfile::Sech { a: ua, b: ub },
                "custom_table" => VelocityProfile::Table(
                    u_table.ok_or_else(|| Error::config("init.u_table", "custom_table needs a table path"))?,
                ),
                _ => {
                    return Err(Error::config(
                        "init.u",
                        format!("expected zero, sech or custom_table, got `{kind}`"),
                    ))
                }
            };
        }
        sc.validate()?;
        Ok(ScenarioConfig { scenario: sc, out_dir })
    }

    /// Parses config text, then applies `EPLAB_*` overrides from `env`.
    pub fn parse_with_env(
        text: &str,
        base_dir: &Path,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        apply_env(&mut kv, env);
        Self::from_key_values(&kv, base_dir)
    }

    /// Reads a config file with process environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_with_env(&text, base, |k| std::env::var(k).ok())
    }
}

/// Folds `EPLAB_*` variables into `kv`.
pub fn apply_env(kv: &mut KeyValues, env: impl Fn(&str) -> Option<String>) {
    for key in KEYS {
        if let Some(v) = env(&env_name(key)) {
            kv.set(key, v.trim());
        }
    }
}

/// Canonical config text for a scenario. Tables are not representable and are
/// written as `custom_table` without a path.
pub fn scenario_to_config(sc: &Scenario) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.set("name", &sc.name);
    kv.set("model.K", &fmt_num(sc.k));
    kv.set("grid.n", &sc.n.to_string());
    kv.set("grid.length", &fmt_num(sc.length));
    kv.set("time.dt", &fmt_num(sc.dt));
    kv.set("time.t_end", &fmt_num(sc.t_end));
    kv.set("time.output_stride", &sc.output_stride.to_string());
    kv.set("time.snapshot_interval", &fmt_num(sc.snapshot_interval));
    match &sc.rho0 {
        DensityProfile::OneMinusSech { a, b } => {
            kv.set("init.rho", "one_minus_a_sech_bx");
            kv.set("init.a", &fmt_num(*a));
            kv.set("init.b", &fmt_num(*b));
        }
        DensityProfile::OnePlusSech { a, b } => {
            kv.set("init.rho", "one_plus_sech");
            kv.set("init.a", &fmt_num(*a));
            kv.set("init.b", &fmt_num(*b));
        }
        DensityProfile::Cosine { amplitude, mode } => {
            kv.set("init.rho", "cosine");
            kv.set("init.amplitude", &fmt_num(*amplitude));
            kv.set("init.mode", &mode.to_string());
        }
        DensityProfile::Constant => kv.set("init.rho", "constant"),
        DensityProfile::Table(_) => kv.set("init.rho", "custom_table"),
    }
    match &sc.u0 {
        VelocityProfile::Zero => kv.set("init.u", "zero"),
        VelocityProfile::Sech { a, b } => {
            kv.set("init.u", "sech");
            kv.set("init.u_a", &fmt_num(*a));
            kv.set("init.u_b", &fmt_num(*b));
        }
        VelocityProfile::Table(_) => kv.set("init.u", "custom_table"),
    }
    kv.set("solver.poisson_tol", &fmt_num(sc.solver.poisson_tol));
    kv.set("solver.picard_tol", &fmt_num(sc.solver.picard_tol));
    kv.set("solver.max_iterations", &sc.solver.max_iterations.to_string());
    kv.set("solver.blowup_threshold", &fmt_num(sc.solver.blowup_threshold));
    kv.set("solver.failure_gradient", &fmt_num(sc.solver.failure_gradient));
    kv.set("solver.dealias", &sc.solver.dealias.to_string());
    kv.set(
        "solver.closure",
        match sc.solver.closure {
            Closure::NewtonKrylov => "newton",
            Closure::Picard => "picard",
        },
    );
    kv.set("lagrangian.enabled", &sc.lagrangian.enabled.to_string());
    kv.set("lagrangian.particles", &sc.lagrangian.particles.to_string());
    kv.set(
        "lagrangian.reconstruction",
        match sc.lagrangian.reconstruction {
            Reconstruction::LogSpline => "log_spline",
            Reconstruction::MonotoneCubic => "monotone_cubic",
        },
    );
    kv.set("criteria.T0", &fmt_num(sc.criteria.t0));
    kv.set("criteria.eps", &fmt_num(sc.criteria.eps));
    kv.set("criteria.delta0", &fmt_num(sc.criteria.delta0));
    kv
}

/// Builds a scenario from an optional config file, an optional preset, the
/// environment and `key=value` overrides, in increasing precedence.
pub fn resolve(
    config: Option<&Path>,
    preset: Option<&str>,
    overrides: &[String],
    env: impl Fn(&str) -> Option<String>,
) -> Result<ScenarioConfig> {
    let (mut kv, base) = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            (KeyValues::parse(&text)?, base)
        }
        None => (KeyValues::default(), PathBuf::from(".")),
    };
    if let Some(p) = preset {
        kv.set("preset", p);
    }
    apply_env(&mut kv, env);
    for o in overrides {
        let Some((k, v)) = o.split_once('=') else {
            return Err(Error::config(o.clone(), "expected key=value"));
        };
        kv.set(k.trim(), v.trim());
    }
    ScenarioConfig::from_key_values(&kv, &base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "preset = table1-c\nmodel.K = 0.1\ntime.dt = 0.02\n").unwrap();
        let env = |k: &str| (k == "EPLAB_MODEL_K").then(|| "0.2".to_string());
        let c = resolve(Some(&path), None, &["time.dt=0.005".into()], env).unwrap();
        assert_eq!(c.scenario.k, 0.2);
        assert_eq!(c.scenario.dt, 0.005);
        assert_eq!(c.scenario.name, "table1-c");
        let c = resolve(Some(&path), Some("table1-b"), &[], |_| None).unwrap();
        assert_eq!(c.scenario.name, "table1-b");
        assert_eq!(c.scenario.k, 0.1);
        let err = resolve(None, Some("table1-a"), &["grid.n".into()], |_| None).unwrap_err();
        assert!(err.to_string().contains("grid.n"), "{err}");
        let err = resolve(Some(&dir.path().join("none.cfg")), None, &[], |_| None).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }
    use crate::scenario::PRESETS;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        ScenarioConfig::parse_with_env(text, Path::new("."), |_| None)
    }

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn preset_then_overrides() {
        let c = parse("preset = table1-a\n# comment\ntime.t_end = 1.5  # trailing\nmodel.K=0.5\n").unwrap();
        assert_eq!(c.scenario.k, 0.5);
        assert_eq!(c.scenario.t_end, 1.5);
        assert_eq!(c.scenario.rho0, DensityProfile::OneMinusSech { a: 0.7, b: 3.0 });
    }

    #[test]
    fn partial_profile_overrides_keep_family() {
        let c = parse("preset = table1-a\ninit.a = 0.3").unwrap();
        assert_eq!(c.scenario.rho0, DensityProfile::OneMinusSech { a: 0.3, b: 3.0 });
        let c = parse("preset = table2-comparison-3\ninit.u_a = 0.5").unwrap();
        assert_eq!(c.scenario.u0, VelocityProfile::Sech { a: 0.5, b: 1.0 });
        assert_eq!(c.scenario.rho0, DensityProfile::OnePlusSech { a: 1.0, b: 1.0 });
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(parse("model.K = abc").unwrap_err()), "model.K");
        assert_eq!(key_of(parse("grid.m = 3").unwrap_err()), "grid.m");
        assert_eq!(key_of(parse("this line is junk").unwrap_err()), "line 1");
        assert_eq!(key_of(parse("time.dt = -1").unwrap_err()), "time.dt");
        assert_eq!(key_of(parse("init.rho = one_minus_a_sech_bx\ninit.a = 1.5").unwrap_err()), "init.a");
        assert_eq!(key_of(parse("preset = nope").unwrap_err()), "preset");
        assert_eq!(key_of(parse("solver.dealias = maybe").unwrap_err()), "solver.dealias");
        assert_eq!(key_of(parse("init.rho = custom_table").unwrap_err()), "init.rho_table");
        assert_eq!(key_of(parse("grid.n = 1000").unwrap_err()), "grid.n");
    }

    #[test]
    fn env_overrides_file() {
        let c = ScenarioConfig::parse_with_env("preset = table1-a\nmodel.K = 0.1", Path::new("."), |k| match k {
            "EPLAB_MODEL_K" => Some("0.25".into()),
            "EPLAB_TIME_T_END" => Some("2".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.scenario.k, 0.25);
        assert_eq!(c.scenario.t_end, 2.0);
        assert_eq!(env_name("criteria.T0"), "EPLAB_CRITERIA_T0");
    }

    #[test]
    fn canonical_text_round_trips() {
        for p in PRESETS {
            let mut sc = Scenario::preset(p).unwrap();
            sc.t_end = 0.123_456_789_012_345_67;
            let text = scenario_to_config(&sc).render();
            let back = parse(&text).unwrap().scenario;
            assert_eq!(back, sc, "{p}");
        }
    }

    #[test]
    fn table_profiles_load() {
        let dir = tempfile::tempdir().unwrap();
        let rows: String = (0..64)
            .map(|i| {
                let x = -5.0 + 10.0 * i as f64 / 64.0;
                format!("{x},{}\n", 1.0 + 0.1 * (2.0 * std::f64::consts::PI * x / 10.0).cos())
            })
            .collect();
        fs::write(dir.path().join("rho.csv"), format!("x,rho\n{rows}")).unwrap();
        let text = "init.rho = custom_table\ninit.rho_table = rho.csv\ngrid.n = 64\n";
        let c = ScenarioConfig::parse_with_env(text, dir.path(), |_| None).unwrap();
        let g = c.scenario.grid().unwrap();
        let rho = c.scenario.rho0.sample(&g).unwrap();
        assert!((rho[0] - 0.9).abs() < 1e-12);
        let err = ScenarioConfig::parse_with_env("init.rho_table = missing.csv", dir.path(), |_| None).unwrap_err();
        assert_eq!(key_of(err), "init.rho_table");
    }
}
