//! Characteristic (Lagrangian) integrator for the pressureless model.
//!
//! Particles carry position `x`, velocity `u`, the Jacobian `w = dx/dalpha` and
//! its rate `v = dw/dt`. The density is recovered from `rho w = rho0` and fed to
//! the Poisson solver at every Runge-Kutta stage.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::poisson::solve_poisson;
use crate::scenario::{Reconstruction, Scenario};
use crate::spline::{MonotoneHermite, PeriodicSpline};

#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicEnsemble {
    pub alpha: Vec<f64>,
    /// Unwrapped positions; periodic images are taken when sampling.
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub wdot: Vec<f64>,
    pub rho0: Vec<f64>,
    pub time: f64,
    /// Domain period.
    pub period: f64,
}

impl CharacteristicEnsemble {
    /// Particles at `m` uniformly spaced labels over the period.
    pub fn from_scenario(scenario: &Scenario, m: usize) -> Result<Self> {
        let labels = Grid::new(m, scenario.length)
            .map_err(|_| Error::config("lagrangian.particles", format!("need a power of two >= 8, got {m}")))?;
        let rho0 = scenario.rho0.sample(&labels)?;
        let u0 = scenario.u0.sample(&labels)?;
        let ux0 = labels.derivative(&u0, 1)?;
        Ok(CharacteristicEnsemble {
            alpha: labels.nodes().to_vec(),
            x: labels.nodes().to_vec(),
            u: u0.into_inner(),
            w: vec![1.0; m],
            wdot: ux0.into_inner(),
            rho0: rho0.into_inner(),
            time: 0.0,
            period: scenario.length,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// First adjacent pair out of order, including the wrap-around pair.
    pub fn crossing(&self) -> Option<(usize, usize)> {
        check_order(&self.x, self.period)
    }

    pub fn min_w(&self) -> (usize, f64) {
        let mut best = 0;
        for (i, &w) in self.w.iter().enumerate() {
            if w < self.w[best] {
                best = i;
            }
        }
        (best, self.w[best])
    }
}

fn check_order(x: &[f64], period: f64) -> Option<(usize, usize)> {
    let m = x.len();
    for i in 0..m - 1 {
        if !(x[i + 1] > x[i]) {
            return Some((i, i + 1));
        }
    }
    if !(x[m - 1] < x[0] + period) {
        return Some((m - 1, 0));
    }
    None
}

/// Density on the grid from scattered `(x_i, rho0_i / w_i)` pairs.
fn reconstruct(
    x: &[f64],
    w: &[f64],
    rho0: &[f64],
    period: f64,
    grid: &Grid,
    method: Reconstruction,
) -> Result<Field> {
    if let Some((index, next)) = check_order(x, period) {
        return Err(Error::Crossing { index, next });
    }
    if let Some(i) = w.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Crossing {
            index: i,
            next: (i + 1) % w.len(),
        });
    }
    let values = match method {
        Reconstruction::LogSpline => {
            let logs: Vec<f64> = rho0.iter().zip(w).map(|(r, wi)| (r / wi).ln()).collect();
            let s = PeriodicSpline::scattered(x.to_vec(), logs, period)?;
            grid.nodes().iter().map(|&q| s.eval(q).exp()).collect()
        }
        Reconstruction::MonotoneCubic => {
            let vals: Vec<f64> = rho0.iter().zip(w).map(|(r, wi)| r / wi).collect();
            let s = MonotoneHermite::new(x.to_vec(), vals, period)?;
            grid.nodes().iter().map(|&q| s.eval(q)).collect()
        }
    };
    Ok(Field::new(values))
}

/// Eulerian density implied by the ensemble.
pub fn reconstruct_density(ens: &CharacteristicEnsemble, grid: &Grid) -> Result<Field> {
    reconstruct(&ens.x, &ens.w, &ens.rho0, ens.period, grid, Reconstruction::LogSpline)
}

pub fn reconstruct_density_with(
    ens: &CharacteristicEnsemble,
    grid: &Grid,
    method: Reconstruction,
) -> Result<Field> {
    reconstruct(&ens.x, &ens.w, &ens.rho0, ens.period, grid, method)
}

/// Eulerian velocity implied by the ensemble (cubic spline through `(x_i, u_i)`).
pub fn reconstruct_velocity(ens: &CharacteristicEnsemble, grid: &Grid) -> Result<Field> {
    let s = PeriodicSpline::scattered(ens.x.clone(), ens.u.clone(), ens.period)?;
    Ok(grid.sample(|q| s.eval(q)))
}

/// Stepper holding the grid and the last potential for warm starts.
pub struct LagrangianStepper {
    grid: Grid,
    poisson_tol: f64,
    method: Reconstruction,
    phi: Option<Vec<f64>>,
}

struct Derivs {
    x: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
    v: Vec<f64>,
}

impl LagrangianStepper {
    pub fn new(grid: &Grid, poisson_tol: f64, method: Reconstruction) -> Self {
        LagrangianStepper {
            grid: grid.clone(),
            poisson_tol,
            method,
            phi: None,
        }
    }

    /// Potential of the most recent stage.
    pub fn last_phi(&self) -> Option<&[f64]> {
        self.phi.as_deref()
    }

    fn rhs(&mut self, ens: &CharacteristicEnsemble, x: &[f64], u: &[f64], w: &[f64], v: &[f64]) -> Result<Derivs> {
        let rho = reconstruct(x, w, &ens.rho0, ens.period, &self.grid, self.method)?;
        let sol = solve_poisson(&rho, &self.grid, self.poisson_tol, self.phi.as_deref())?;
        let phi = sol.phi.into_inner();
        let phix = self.grid.d1(&phi);
        let sphi = self.grid.spline(&phi);
        let sphix = self.grid.spline(&phix);
        self.phi = Some(phi);
        let m = x.len();
        let mut d = Derivs {
            x: u.to_vec(),
            u: vec![0.0; m],
            w: v.to_vec(),
            v: vec![0.0; m],
        };
        for i in 0..m {
            d.u[i] = -sphix.eval(x[i]);
            d.v[i] = ens.rho0[i] - sphi.eval(x[i]).exp() * w[i];
        }
        Ok(d)
    }

    /// One classical RK4 step.
    pub fn step(&mut self, ens: &CharacteristicEnsemble, dt: f64) -> Result<CharacteristicEnsemble> {
        let m = ens.len();
        let axpy = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
            base.iter().zip(k).map(|(b, d)| b + h * d).collect()
        };
        let k1 = self.rhs(ens, &ens.x, &ens.u, &ens.w, &ens.wdot)?;
        let k2 = self.rhs(
            ens,
            &axpy(&ens.x, &k1.x, 0.5 * dt),
            &axpy(&ens.u, &k1.u, 0.5 * dt),
            &axpy(&ens.w, &k1.w, 0.5 * dt),
            &axpy(&ens.wdot, &k1.v, 0.5 * dt),
        )?;
        let k3 = self.rhs(
            ens,
            &axpy(&ens.x, &k2.x, 0.5 * dt),
            &axpy(&ens.u, &k2.u, 0.5 * dt),
            &axpy(&ens.w, &k2.w, 0.5 * dt),
            &axpy(&ens.wdot, &k2.v, 0.5 * dt),
        )?;
        let k4 = self.rhs(
            ens,
            &axpy(&ens.x, &k3.x, dt),
            &axpy(&ens.u, &k3.u, dt),
            &axpy(&ens.w, &k3.w, dt),
            &axpy(&ens.wdot, &k3.v, dt),
        )?;
        let combine = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..m)
                .map(|i| y[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
                .collect()
        };
        let next = CharacteristicEnsemble {
            alpha: ens.alpha.clone(),
            x: combine(&ens.x, &k1.x, &k2.x, &k3.x, &k4.x),
            u: combine(&ens.u, &k1.u, &k2.u, &k3.u, &k4.u),
            w: combine(&ens.w, &k1.w, &k2.w, &k3.w, &k4.w),
            wdot: combine(&ens.wdot, &k1.v, &k2.v, &k3.v, &k4.v),
            rho0: ens.rho0.clone(),
            time: ens.time + dt,
            period: ens.period,
        };
        if let Some((index, next_i)) = next.crossing() {
            return Err(Error::Crossing { index, next: next_i });
        }
        if let Some(i) = next.w.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Crossing {
                index: i,
                next: (i + 1) % m,
            });
        }
        Ok(next)
    }
}

/// One RK4 step of the characteristic system.
pub fn step_lagrangian(
    ens: &CharacteristicEnsemble,
    dt: f64,
    grid: &Grid,
    poisson_tol: f64,
) -> Result<CharacteristicEnsemble> {
    LagrangianStepper::new(grid, poisson_tol, Reconstruction::LogSpline).step(ens, dt)
}

/// Self-consistency measures of an ensemble against its own reconstruction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleChecks {
    /// `max |rho(x_i) w_i - rho0_i|`
    pub rho_w_defect: f64,
    /// `max |wdot_i - u_x(x_i) w_i|`
    pub wdot_defect: f64,
    /// Spectral tail fraction of the reconstructed density.
    pub tail_fraction: f64,
}

impl EnsembleChecks {
    pub fn resolved(&self) -> bool {
        self.tail_fraction <= crate::diagnostics::RESOLUTION_TAIL
    }
}

pub fn ensemble_checks(ens: &CharacteristicEnsemble, grid: &Grid) -> Result<EnsembleChecks> {
    let rho = reconstruct_density(ens, grid)?;
    let srho = grid.spline(&rho);
    let su = PeriodicSpline::scattered(ens.x.clone(), ens.u.clone(), ens.period)?;
    let mut checks = EnsembleChecks {
        rho_w_defect: 0.0,
        wdot_defect: 0.0,
        tail_fraction: grid.tail_energy_fraction(&rho),
    };
    for i in 0..ens.len() {
        let r = srho.eval(ens.x[i]);
        checks.rho_w_defect = checks.rho_w_defect.max((r * ens.w[i] - ens.rho0[i]).abs());
        let ux = su.eval_derivative(ens.x[i]);
        checks.wdot_defect = checks.wdot_defect.max((ens.wdot[i] - ux * ens.w[i]).abs());
    }
    Ok(checks)
}

/// Whether `wdot` at the vanishing time is negative or (numerically) zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WdotSign {
    Negative,
    Zero,
}

impl WdotSign {
    pub fn as_str(&self) -> &'static str {
        match self {
            WdotSign::Negative => "negative",
            WdotSign::Zero => "zero",
        }
    }
}

/// `|wdot|` below this at the last sample counts as the tangential branch.
pub const WDOT_ZERO_THRESHOLD: f64 = 1e-3;

/// One sample of `w` and `wdot` along a fixed characteristic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WSample {
    pub t: f64,
    pub w: f64,
    pub wdot: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WVanishing {
    pub t_star: f64,
    pub sign: WdotSign,
}

fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in pts {
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom == 0.0 {
        return None;
    }
    let slope = (n * sty - st * sy) / denom;
    Some((slope, (sy - slope * st) / n))
}

/// Extrapolates the first zero of `w` from the tail of its history.
///
/// Returns `None` when the tail shows no vanishing trend.
pub fn detect_w_vanishing(history: &[WSample]) -> Result<Option<WVanishing>> {
    if history.len() < 5 {
        return Err(Error::InsufficientSamples {
            needed: 5,
            have: history.len(),
        });
    }
    if history.iter().any(|s| !(s.w > 0.0)) {
        return Err(Error::Precondition("w history must be positive".into()));
    }
    let tail = &history[history.len() - 5..];
    let last = tail[4];
    let sign = if last.wdot.abs() < WDOT_ZERO_THRESHOLD {
        WdotSign::Zero
    } else {
        WdotSign::Negative
    };
    let pts: Vec<(f64, f64)> = match sign {
        WdotSign::Negative => tail.iter().map(|s| (s.t, s.w)).collect(),
        // w ~ c (T* - t)^2, so sqrt(w) is linear
        WdotSign::Zero => tail.iter().map(|s| (s.t, s.w.sqrt())).collect(),
    };
    let Some((slope, intercept)) = line_fit(&pts) else {
        return Ok(None);
    };
    if !(slope < 0.0) {
        return Ok(None);
    }
    Ok(Some(WVanishing {
        t_star: -intercept / slope,
        sign,
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
    pub min_product: f64,
    pub max_product: f64,
    /// Every product lies strictly inside the bracket.
    pub inside: bool,
    /// Some product sits on a bracket end to rounding.
    pub boundary: bool,
}

/// Checks `(t - T*) u_x` along the blow-up characteristic against the bracket
/// for the given branch, over samples with `T* - t` in `[2 dt, 0.1]`.
///
/// `history` holds `(t, u_x)` pairs.
pub fn check_blowup_rate(history: &[(f64, f64)], t_star: f64, sign: WdotSign, dt: f64) -> Result<RateReport> {
    let (lower, upper) = match sign {
        WdotSign::Negative => (0.5, 2.0),
        WdotSign::Zero => (1.0, 8.0),
    };
    let products: Vec<f64> = history
        .iter()
        .filter(|(t, _)| {
            let gap = t_star - t;
            gap >= 2.0 * dt - 1e-12 && gap <= 0.1 + 1e-12
        })
        .map(|(t, ux)| (t - t_star) * ux)
        .collect();
    if products.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            have: products.len(),
        });
    }
    let min_product = products.iter().copied().fold(f64::INFINITY, f64::min);
    let max_product = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-9;
    let boundary = products
        .iter()
        .any(|p| (p - lower).abs() <= eps || (p - upper).abs() <= eps);
    Ok(RateReport {
        lower,
        upper,
        samples: products.len(),
        min_product,
        max_product,
        inside: min_product > lower + eps && max_product < upper - eps,
        boundary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LagrangianTermination {
    Completed,
    /// `min w` fell below the stopping threshold.
    WVanishing,
    Crossing,
    Failure,
}

impl LagrangianTermination {
    pub fn as_str(&self) -> &'static str {
        match self {
            LagrangianTermination::Completed => "completed",
            LagrangianTermination::WVanishing => "w_vanishing",
            LagrangianTermination::Crossing => "crossing",
            LagrangianTermination::Failure => "failure",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LagrangianRun {
    pub termination: LagrangianTermination,
    pub final_ensemble: CharacteristicEnsemble,
    /// `(t, min w)` each step.
    pub min_w: Vec<(f64, f64)>,
    /// Index of the particle with the smallest `w` at the end.
    pub critical_index: usize,
    /// `w`, `wdot` along the critical particle.
    pub critical: Vec<WSample>,
    pub vanishing: Option<WVanishing>,
    pub rate: Option<RateReport>,
    /// `(t, checks)` for every accepted step.
    pub checks: Vec<(f64, EnsembleChecks)>,
    /// Potential bounds from the initial energy held at every step.
    pub phi_bounds_pass: bool,
    pub failure: Option<String>,
}

impl LagrangianRun {
    /// Largest `(rho w, wdot)` defects over steps whose density was resolved on the grid.
    pub fn resolved_defects(&self) -> (f64, f64) {
        self.checks
            .iter()
            .filter(|(_, c)| c.resolved())
            .fold((0.0, 0.0), |(a, b), (_, c)| (a.max(c.rho_w_defect), b.max(c.wdot_defect)))
    }

    /// Whether the run stopped on a vanishing Jacobian or a particle crossing.
    pub fn broke_down(&self) -> bool {
        matches!(
            self.termination,
            LagrangianTermination::WVanishing | LagrangianTermination::Crossing
        )
    }
}

/// Stop once `min w` falls below this.
pub const W_STOP: f64 = 1e-3;

/// Integrates the characteristic system for a pressureless scenario.
///
/// `observer` sees every accepted ensemble and the potential of its last stage.
pub fn run_lagrangian(
    scenario: &Scenario,
    mut observer: impl FnMut(&CharacteristicEnsemble, &Grid),
) -> Result<LagrangianRun> {
    if scenario.k != 0.0 {
        return Err(Error::Unsupported(
            "the characteristic solver covers the pressureless model only".into(),
        ));
    }
    scenario.validate()?;
    let grid = scenario.grid()?;
    let mut ens = CharacteristicEnsemble::from_scenario(scenario, scenario.lagrangian.particles)?;
    let mut stepper = LagrangianStepper::new(&grid, scenario.solver.poisson_tol, scenario.lagrangian.reconstruction);

    let init = crate::eulerian::initialize(scenario)?;
    let h0 = crate::diagnostics::energy(&init, 0.0, &grid);
    let (lo, hi) = crate::diagnostics::phi_bounds(h0)?;

    let mut hist_w: Vec<Vec<f64>> = vec![ens.w.clone()];
    let mut hist_v: Vec<Vec<f64>> = vec![ens.wdot.clone()];
    let mut times = vec![0.0];
    let mut min_w = vec![(0.0, ens.min_w().1)];
    let mut checks = Vec::new();
    let mut phi_bounds_pass = true;
    let mut termination = LagrangianTermination::Completed;
    let mut failure = None;
    observer(&ens, &grid);

    for i in 1..=scenario.steps() {
        match stepper.step(&ens, scenario.dt) {
            Ok(mut next) => {
                next.time = i as f64 * scenario.dt;
                ens = next;
            }
            Err(e @ Error::Crossing { .. }) => {
                termination = LagrangianTermination::Crossing;
                failure = Some(e.to_string());
                break;
            }
            Err(e) => {
                termination = LagrangianTermination::Failure;
                failure = Some(e.to_string());
                break;
            }
        }
        if let Some(phi) = stepper.last_phi() {
            phi_bounds_pass &= crate::diagnostics::phi_within(phi, lo, hi);
        }
        let (_, wmin) = ens.min_w();
        times.push(ens.time);
        min_w.push((ens.time, wmin));
        hist_w.push(ens.w.clone());
        hist_v.push(ens.wdot.clone());
        checks.push((ens.time, ensemble_checks(&ens, &grid)?));
        observer(&ens, &grid);
        if wmin < W_STOP {
            termination = LagrangianTermination::WVanishing;
            break;
        }
    }

    let critical_index = ens.min_w().0;
    let critical: Vec<WSample> = times
        .iter()
        .zip(hist_w.iter().zip(&hist_v))
        .map(|(&t, (w, v))| WSample {
            t,
            w: w[critical_index],
            wdot: v[critical_index],
        })
        .collect();
    let vanishing = match termination {
        LagrangianTermination::Completed => None,
        _ => detect_w_vanishing(&critical).ok().flatten(),
    };
    let rate = vanishing.and_then(|v| {
        let ux: Vec<(f64, f64)> = critical.iter().map(|s| (s.t, s.wdot / s.w)).collect();
        check_blowup_rate(&ux, v.t_star, v.sign, scenario.dt).ok()
    });
    Ok(LagrangianRun {
        termination,
        final_ensemble: ens,
        min_w,
        critical_index,
        critical,
        vanishing,
        rate,
        checks,
        phi_bounds_pass,
        failure,
    })
}
