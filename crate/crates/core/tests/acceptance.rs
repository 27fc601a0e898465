//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use eplab::experiments::criteria_report;
use eplab::lagrangian::{reconstruct_density, reconstruct_velocity, run_lagrangian, LagrangianRun};
use eplab::ode_lab::{
    check_lemma_hypotheses, counterexample_gates, has_zero_closed_form, integrate_inequality_trajectory,
    LinearOscillatorProblem,
};
use eplab::poisson::{check_elliptic_estimates, maximum_principle_holds, solve_poisson};
use eplab::scenario::DensityProfile;
use eplab::{run, run_with, FluidState, Grid, RunResult, Scenario, Termination};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: String) -> Line {
    Line { id, pass, detail }
}

struct Timed {
    result: RunResult,
    elapsed: Duration,
}

fn timed_run(sc: &Scenario) -> Timed {
    let start = Instant::now();
    let result = run(sc).expect("run");
    Timed {
        result,
        elapsed: start.elapsed(),
    }
}

macro_rules! cached_run {
    ($name:ident, $preset:expr) => {
        fn $name() -> &'static Timed {
            static CELL: OnceLock<Timed> = OnceLock::new();
            CELL.get_or_init(|| timed_run(&Scenario::preset($preset).unwrap()))
        }
    };
}

cached_run!(case_a, "table1-a");
cached_run!(case_b, "table1-b");
cached_run!(case_c, "table1-c");
cached_run!(case_a_warm, "table2-comparison-1-warm");
cached_run!(comparison3_cold, "table2-comparison-3");
cached_run!(comparison3_warm, "table2-comparison-3-warm");

/// What `eplab criteria` reports for a preset on the n = 1024, L = 10 grid.
fn initial_report(preset: &str) -> (eplab::criteria::PressurelessCriterionReport, Duration) {
    let start = Instant::now();
    let mut sc = Scenario::preset(preset).unwrap();
    sc.n = 1024;
    sc.length = 10.0;
    let rep = criteria_report(&sc).unwrap().pressureless;
    (rep, start.elapsed())
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn criterion_1() -> Vec<Line> {
    let mut out = Vec::new();
    for (id, preset, target) in [("1a", "table1-a", 0.0875), ("1b", "table1-b", 0.1671)] {
        let (rep, t) = initial_report(preset);
        let pass = within(rep.h0, target, 0.002) && t < Duration::from_secs(10);
        out.push(line(
            id,
            pass,
            format!("H(0) = {:.6} (target {target} +/- 0.002), {:.2?}", rep.h0, t),
        ));
    }
    out
}

fn criterion_2() -> Vec<Line> {
    let mut out = Vec::new();
    for (id, preset, target, verdict) in [
        ("2a", "table1-a", 0.6448, true),
        ("2b", "table1-b", 0.5390, false),
        ("2c", "table1-c", 0.7585, false),
    ] {
        let (rep, _) = initial_report(preset);
        let pass = within(rep.lhs, target, 0.005) && rep.holds == verdict;
        out.push(line(
            id,
            pass,
            format!(
                "exp(V-^-1(H(0))) = {:.5} from H(0) = {:.6} (target {target} +/- 0.005), verdict {} (expected {})",
                rep.lhs,
                rep.h0,
                if rep.holds { "Hold" } else { "Not hold" },
                if verdict { "Hold" } else { "Not hold" },
            ),
        ));
    }
    out
}

fn t_star(r: &RunResult) -> Option<f64> {
    r.blowup.as_ref().map(|b| b.t_star)
}

fn criterion_3() -> Vec<Line> {
    let limit = Duration::from_secs(120);
    let mut out = Vec::new();
    for (id, timed, lo, hi) in [("3a", case_a(), 2.0, 2.6), ("3b", case_b(), 2.4, 3.2)] {
        let r = &timed.result;
        let ts = t_star(r);
        let pass = r.termination == Termination::BlowupDetected
            && ts.is_some_and(|t| (lo..=hi).contains(&t))
            && timed.elapsed < limit;
        out.push(line(
            id,
            pass,
            format!(
                "{} with T* = {:?} (window [{lo}, {hi}]), {:.1?}",
                r.termination.as_str(),
                ts,
                timed.elapsed
            ),
        ));
    }
    let c = case_c();
    let r = &c.result;
    let pass = r.termination == Termination::Completed
        && (r.final_state.time - 20.0).abs() < 1e-9
        && r.energy_drift_smooth <= 1e-6
        && c.elapsed < limit;
    out.push(line(
        "3c",
        pass,
        format!(
            "{} at t = {} with relative energy drift {:.2e} (limit 1e-6), {:.1?}",
            r.termination.as_str(),
            r.final_state.time,
            r.energy_drift_smooth,
            c.elapsed
        ),
    ));
    out
}

fn criterion_4() -> Vec<Line> {
    let r = &case_a_warm().result;
    let sc = Scenario::preset("table2-comparison-1-warm").unwrap();
    let g = sc.grid().unwrap();
    let s = &r.final_state;
    let rhox = g.derivative(&s.rho, 1).unwrap();
    let grad = rhox.max_abs();
    let dev = s.rho.iter().fold(0.0_f64, |m, r| m.max((r - 1.0).abs()));
    let umax = s.u.max_abs();
    let peak = r.samples.iter().map(|p| p.max_abs_rhox).fold(0.0_f64, f64::max);
    let pass = grad > 1e3 && dev <= 1.0 && umax <= 3.0;
    vec![line(
        "4",
        pass,
        format!(
            "{} at t = {:.2}: max|rho_x| = {grad:.1} (needs > 1e3, run peak {peak:.1}), max|rho-1| = {dev:.3}, max|u| = {umax:.3}",
            r.termination.as_str(),
            s.time
        ),
    )]
}

fn criterion_5() -> Vec<Line> {
    let cold = &comparison3_cold().result;
    let warm = &comparison3_warm().result;
    let pass = cold.termination == Termination::Completed
        && (cold.final_state.time - 10.0).abs() < 1e-9
        && warm.termination == Termination::BlowupDetected
        && t_star(warm).is_some_and(|t| t < 10.0);
    vec![line(
        "5",
        pass,
        format!(
            "K=0: {} at t = {}; K=0.5: {} with T* = {:?}",
            cold.termination.as_str(),
            cold.final_state.time,
            warm.termination.as_str(),
            t_star(warm)
        ),
    )]
}

/// Angular frequency of the given density mode from its zero crossings.
fn measured_frequency(k: f64, mode: u32) -> (f64, f64) {
    let mut sc = Scenario::preset("linear-wave").unwrap();
    sc.k = k;
    sc.rho0 = DensityProfile::Cosine { amplitude: 1e-4, mode };
    let xi = 2.0 * PI * mode as f64 / sc.length;
    let omega = xi * (k + 1.0 / (1.0 + xi * xi)).sqrt();
    sc.t_end = 5.0 * 2.0 * PI / omega;
    let g = sc.grid().unwrap();
    let basis: Vec<f64> = g.nodes().iter().map(|x| (xi * x).cos()).collect();
    let mut series = Vec::new();
    run_with(&sc, |s: &FluidState| {
        let a: f64 = s.rho.iter().zip(&basis).map(|(r, c)| (r - 1.0) * c).sum::<f64>() * 2.0 / g.n() as f64;
        series.push((s.time, a));
    })
    .unwrap();
    let mut crossings = Vec::new();
    for w in series.windows(2) {
        let ((t0, a0), (t1, a1)) = (w[0], w[1]);
        if a0 != 0.0 && a0.signum() != a1.signum() {
            crossings.push(t0 + (t1 - t0) * a0 / (a0 - a1));
        }
    }
    let n = crossings.len();
    let spacing = (crossings[n - 1] - crossings[0]) / (n - 1) as f64;
    (PI / spacing, omega)
}

fn criterion_6() -> Vec<Line> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for k in [0.0, 0.5] {
        for mode in [2, 5] {
            let (measured, exact) = measured_frequency(k, mode);
            let rel = (measured - exact).abs() / exact;
            worst = worst.max(rel);
            parts.push(format!("K={k} m={mode}: {measured:.5}/{exact:.5}"));
        }
    }
    vec![line(
        "6",
        worst < 0.01,
        format!("worst relative frequency error {worst:.2e} (limit 1e-2); {}", parts.join(", ")),
    )]
}

fn lagrangian_case_a() -> &'static (LagrangianRun, f64) {
    static CELL: OnceLock<(LagrangianRun, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let sc = Scenario::preset("table1-a").unwrap();
        let mut short = sc.clone();
        short.t_end = 1.5;
        let mut eul = Vec::new();
        run_with(&short, |s| {
            if ((s.time / 0.1).round() * 0.1 - s.time).abs() < 1e-9 {
                eul.push(s.clone());
            }
        })
        .unwrap();
        let mut worst: f64 = 0.0;
        let lag = run_lagrangian(&sc, |ens, g| {
            if let Some(e) = eul.iter().find(|s| (s.time - ens.time).abs() < 1e-9) {
                let rho = reconstruct_density(ens, g).unwrap();
                let u = reconstruct_velocity(ens, g).unwrap();
                for j in 0..g.n() {
                    worst = worst.max((rho[j] - e.rho[j]).abs()).max((u[j] - e.u[j]).abs());
                }
            }
        })
        .unwrap();
        (lag, worst)
    })
}

fn criterion_7() -> Vec<Line> {
    let mut out = Vec::new();

    let runs: Vec<(&str, &RunResult)> = vec![
        ("a", &case_a().result),
        ("b", &case_b().result),
        ("c", &case_c().result),
        ("a-warm", &case_a_warm().result),
        ("cmp3", &comparison3_cold().result),
        ("cmp3-warm", &comparison3_warm().result),
    ];
    let failing: Vec<&str> = runs.iter().filter(|(_, r)| !r.lemma_checks_pass).map(|(n, _)| *n).collect();
    out.push(line(
        "7-phi",
        failing.is_empty(),
        format!("potential bounds and maximum principle on every recorded step; failing runs: {failing:?}"),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = Grid::new(512, 10.0).unwrap();
    let mut bad = 0;
    for _ in 0..20 {
        let bumps: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (rng.gen_range(-0.6..0.9), rng.gen_range(0.5..3.0), rng.gen_range(-2.0..2.0)))
            .collect();
        let rho = g.sample(|x| {
            let v: f64 = bumps.iter().map(|(a, b, c)| a / (b * (x - c)).cosh()).sum();
            (1.0 + v).max(0.05)
        });
        let sol = solve_poisson(&rho, &g, 1e-12, None).unwrap();
        let rep = check_elliptic_estimates(&rho, &sol.phi, &g).unwrap();
        let mp = maximum_principle_holds(&rho, &sol.phi, 1e-10);
        if !(rep.h1_pass && rep.energy_pass && mp) {
            bad += 1;
        }
    }
    out.push(line("7-elliptic", bad == 0, format!("{bad} of 20 random densities violate the elliptic estimates")));

    let (lag, worst) = lagrangian_case_a();
    let (rw, wd) = lag
        .checks
        .iter()
        .filter(|(t, _)| *t <= 1.5 + 1e-9)
        .fold((0.0_f64, 0.0_f64), |(a, b), (_, c)| (a.max(c.rho_w_defect), b.max(c.wdot_defect)));
    out.push(line(
        "7-characteristics",
        *worst <= 1e-3 && rw <= 1e-5 && wd <= 1e-4 && lag.phi_bounds_pass,
        format!(
            "Lagrangian/Eulerian gap {worst:.2e} (limit 1e-3), rho w defect {rw:.2e} (1e-5), wdot defect {wd:.2e} (1e-4) to t = 1.5"
        ),
    ));

    let pass = lag.rate.as_ref().is_some_and(|r| r.inside);
    let detail = match (&lag.vanishing, &lag.rate) {
        (Some(v), Some(r)) => format!(
            "T* = {:.4} ({:?} branch), {} products in [{:.4}, {:.4}], bracket ({}, {})",
            v.t_star, v.sign, r.samples, r.min_product, r.max_product, r.lower, r.upper
        ),
        _ => "no vanishing Jacobian detected".into(),
    };
    out.push(line("7-rate", pass, detail));
    out
}

fn criterion_8() -> Vec<Line> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    let mut cases = 0;
    while cases < 100 {
        let a = rng.gen_range(0.1..10.0);
        let p = LinearOscillatorProblem::new(a, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let z = has_zero_closed_form(&p).unwrap();
        if z.condition_value.abs() <= 1e-6 {
            continue;
        }
        cases += 1;
        let tr = integrate_inequality_trajectory(&p, |_| p.b, 4.0 * 2.0 * PI / a.sqrt(), p.default_dt()).unwrap();
        let agree = match (z.first_zero, tr.first_zero) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-6,
            (None, None) => true,
            _ => false,
        };
        if !agree {
            mismatches += 1;
        }
    }

    let gates = counterexample_gates(0.2, 1.0 / 3.0);
    let p = LinearOscillatorProblem::counterexample(0.2, 1.0 / 3.0);
    let tr = integrate_inequality_trajectory(&p, |t| p.rhs(t), 200.0, p.default_dt()).unwrap();
    let counter_ok = gates.hold && tr.min_w > 0.0 && tr.first_zero.is_none();

    let mut found = 0;
    let mut trials = 0;
    while trials < 50 {
        let a = rng.gen_range(0.2..6.0);
        let b = rng.gen_range(0.0..0.99) * a / 2.0;
        let p = LinearOscillatorProblem::new(a, b, rng.gen_range(1.0..3.0), rng.gen_range(-2.0..2.0));
        if !check_lemma_hypotheses(&p).applicable {
            continue;
        }
        trials += 1;
        let terms: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.05..3.0))).collect();
        let rhs = |t: f64| b - terms.iter().map(|(c, r)| c * (-r * t).exp()).sum::<f64>();
        let tr = integrate_inequality_trajectory(&p, rhs, 4.0 * 2.0 * PI / a.sqrt(), p.default_dt()).unwrap();
        if tr.first_zero.is_none() {
            found += 1;
        }
    }
    let elapsed = start.elapsed();
    vec![line(
        "8",
        mismatches == 0 && counter_ok && found == 0 && elapsed < Duration::from_secs(30),
        format!(
            "{mismatches} closed-form mismatches of 100; counterexample min w = {:.4} with gates {:.4} > {:.4} > {:.4}; {found} lemma counterexamples in 50; {:.2?}",
            tr.min_w, gates.left, gates.middle, gates.right, elapsed
        ),
    )]
}

fn criterion_9() -> Vec<Line> {
    let rho_at = |dt: f64| {
        let mut sc = Scenario::preset("table1-a").unwrap();
        sc.dt = dt;
        sc.t_end = 1.0;
        run(&sc).unwrap().final_state.rho
    };
    let r1 = rho_at(0.01);
    let r2 = rho_at(0.005);
    let r4 = rho_at(0.0025);
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let ratio = diff(&r1, &r4) / diff(&r2, &r4);
    vec![line(
        "9",
        (2.0..=8.0).contains(&ratio),
        format!("error ratio dt vs dt/2 against dt/4 = {ratio:.3} (band [2, 8], second order gives 5)"),
    )]
}

fn main() {
    let criteria: Vec<fn() -> Vec<Line>> = vec![
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
    ];
    let results: Vec<Vec<Line>> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.into_iter().map(|c| s.spawn(c)).collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut failed = 0;
    for l in results.iter().flatten() {
        println!("criterion {:<18} {}  {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.detail);
        if !l.pass {
            failed += 1;
        }
    }
    let total: usize = results.iter().map(Vec::len).sum();
    println!("acceptance: {} passed, {failed} failed", total - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
