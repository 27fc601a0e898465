use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use eplab::config::{resolve, ScenarioConfig};
use eplab::experiments::{criteria_report, execute};
use eplab::ode_lab::{
    check_lemma_hypotheses, counterexample_gates, counterexample_min_bound, has_zero_closed_form,
    integrate_inequality_trajectory, LinearOscillatorProblem,
};
use eplab::output::fmt_num;
use eplab::plotdata::{write_plotdata, PlotKind};
use eplab::sweep::SweepSpec;
use eplab::Error;

#[derive(Parser)]
#[command(name = "eplab", version, about = "Euler-Poisson numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario preset; replaces any `preset` line in the config.
    #[arg(long)]
    preset: Option<String>,
    /// Override one config key, e.g. `--set grid.n=2048`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ScenarioArgs {
    fn resolve(&self) -> eplab::Result<ScenarioConfig> {
        if self.config.is_none() && self.preset.is_none() {
            return Err(Error::config("preset", "give --config or --preset"));
        }
        resolve(self.config.as_deref(), self.preset.as_deref(), &self.overrides, |k| {
            std::env::var(k).ok()
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OdeMode {
    /// Lemma gates and the counterexample verdict.
    Counterexample,
    /// Closed-form and numerical zero of `w'' + a w = b`.
    Equation,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write diagnostics, snapshots and a summary.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Artifact directory; defaults to `outputs.dir` or `runs/<name>`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate the blow-up criteria on the initial data only.
    Criteria {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Also write `criteria.txt` here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run every cell of a sweep spec and write one CSV row per cell.
    Sweep {
        /// Sweep spec file.
        #[arg(long)]
        config: PathBuf,
        /// Worker count.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Write `sweep.csv` here instead of printing it.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Zeros of the comparison oscillator.
    Odelab {
        #[arg(long, value_enum, default_value_t = OdeMode::Counterexample)]
        mode: OdeMode,
        #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, default_value_t = 1.0 / 3.0, allow_negative_numbers = true)]
        b: f64,
        /// Integration horizon.
        #[arg(long, default_value_t = 200.0)]
        t_end: f64,
    },
    /// Extract plot-ready series from run directories.
    Plotdata {
        /// fig2, gradients, energy, waterfall, fig4, fig5 or fig6.
        #[arg(long)]
        kind: String,
        /// Run directory; repeat for multi-run waterfalls.
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Also write a simple SVG rendering.
        #[arg(long)]
        svg: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(cmd: Command) -> eplab::Result<()> {
    match cmd {
        Command::Run { scenario, out_dir } => {
            let cfg = scenario.resolve()?;
            let dir = out_dir
                .or(cfg.out_dir.clone())
                .unwrap_or_else(|| Path::new("runs").join(&cfg.scenario.name));
            let outcome = execute(&cfg.scenario)?;
            outcome.write_artifacts(&dir)?;
            print!("{}", outcome.summary().render());
            eprintln!("artifacts written to {}", dir.display());
            Ok(())
        }
        Command::Criteria { scenario, out_dir } => {
            let cfg = scenario.resolve()?;
            let mut kv = eplab::config::KeyValues::default();
            kv.set("scenario", &cfg.scenario.name);
            kv.set("model.K", &fmt_num(cfg.scenario.k));
            kv.set("grid.n", &cfg.scenario.n.to_string());
            criteria_report(&cfg.scenario)?.write_into(&mut kv);
            let text = kv.render();
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("criteria.txt"), &text)?;
            }
            print!("{text}");
            Ok(())
        }
        Command::Sweep { config, parallel, out_dir } => {
            let spec = SweepSpec::load(&config)?;
            let csv = spec.to_csv(&spec.run(parallel)?);
            match out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("sweep.csv"), csv)?;
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Odelab { mode, a, b, t_end } => odelab(mode, a, b, t_end),
        Command::Plotdata { kind, runs, out_dir, svg } => {
            for p in write_plotdata(PlotKind::parse(&kind)?, &runs, &out_dir, svg)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn odelab(mode: OdeMode, a: f64, b: f64, t_end: f64) -> eplab::Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::config("a", format!("a must be positive, got {a}")));
    }
    if !b.is_finite() {
        return Err(Error::config("b", "b must be finite"));
    }
    match mode {
        OdeMode::Equation => {
            let p = LinearOscillatorProblem::new(a, b, 1.0, 0.0);
            let z = has_zero_closed_form(&p)?;
            let tr = integrate_inequality_trajectory(&p, |t| p.rhs(t), t_end, p.default_dt())?;
            let h = check_lemma_hypotheses(&p);
            println!("a = {}", fmt_num(a));
            println!("b = {}", fmt_num(b));
            println!("condition_value = {}", fmt_num(z.condition_value));
            println!("has_zero = {}", z.has_zero);
            println!("first_zero = {}", z.first_zero.map_or("none".into(), fmt_num));
            println!("numeric_first_zero = {}", tr.first_zero.map_or("none".into(), fmt_num));
            println!("lemma_applicable = {}", h.applicable);
        }
        OdeMode::Counterexample => {
            let p = LinearOscillatorProblem::counterexample(a, b);
            let gates = counterexample_gates(a, b);
            let h = check_lemma_hypotheses(&p);
            let tr = integrate_inequality_trajectory(&p, |t| p.rhs(t), t_end, p.default_dt())?;
            let bound = counterexample_min_bound(&p);
            println!("a = {}", fmt_num(a));
            println!("b = {}", fmt_num(b));
            println!("lemma.a_half_gt_b = {}", h.a_half_gt_b);
            println!("lemma.condition_strict = {}", h.condition_strict);
            println!("lemma.applicable = {}", h.applicable);
            println!("gates.left = {}", fmt_num(gates.left));
            println!("gates.middle = {}", fmt_num(gates.middle));
            println!("gates.right = {}", fmt_num(gates.right));
            println!("gates.hold = {}", gates.hold);
            println!("min_w_bound = {}", fmt_num(bound));
            println!("min_w = {}", fmt_num(tr.min_w));
            println!("t_end = {}", fmt_num(t_end));
            let verdict = if tr.first_zero.is_none() && tr.min_w > 0.0 {
                "no_zero"
            } else {
                "zero_found"
            };
            println!("verdict = {verdict}");
        }
    }
    Ok(())
}
