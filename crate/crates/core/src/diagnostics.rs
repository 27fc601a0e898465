//! Scalar functionals of a state and lemma-derived checks.

use crate::criteria::{u_fn, v_minus_inverse, v_plus_inverse};
use crate::error::{Error, Result};
use crate::eulerian::FluidState;
use crate::grid::{max_abs, Field, Grid};

/// Slack used for the potential bounds.
pub const PHI_BOUND_SLACK: f64 = 1e-6;

/// The four integrals making up the energy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub pressure: f64,
    pub field: f64,
    pub well: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.pressure + self.field + self.well
    }
}

/// Relative pressure `K (rho ln rho - rho + 1)`.
pub fn relative_pressure(rho: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    // rho ln rho - rho + 1 = (rho - 1) - ... written to keep precision near 1
    let d = rho - 1.0;
    let core = if d.abs() < 1e-4 {
        d * d / 2.0 - d * d * d / 6.0 + d.powi(4) / 12.0
    } else {
        rho * rho.ln() - rho + 1.0
    };
    k * core
}

/// Energy split into its parts.
///
/// The field term is evaluated as `1/2 int phi (-phi_xx)`, which equals
/// `1/2 int phi_x^2` up to the Nyquist mode and matches the discrete
/// Poisson operator exactly.
pub(crate) fn energy_parts(grid: &Grid, rho: &[f64], u: &[f64], phi: &[f64], k: f64) -> EnergyParts {
    let d2 = grid.d2(phi);
    let h = grid.dx();
    let mut parts = EnergyParts::default();
    for j in 0..rho.len() {
        parts.kinetic += 0.5 * rho[j] * u[j] * u[j];
        parts.pressure += relative_pressure(rho[j], k);
        parts.field -= 0.5 * phi[j] * d2[j];
        parts.well += u_fn(phi[j]);
    }
    parts.kinetic *= h;
    parts.pressure *= h;
    parts.field *= h;
    parts.well *= h;
    parts
}

/// Total energy of a state.
pub fn energy(state: &FluidState, k: f64, grid: &Grid) -> f64 {
    energy_parts(grid, &state.rho, &state.u, &state.phi, k).total()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiemannFields {
    pub r: Field,
    pub s: Field,
    /// `r_x`
    pub w: Field,
    /// `s_x`
    pub z: Field,
    /// `-rho^{-1/2} r_x`
    pub f: Field,
    /// `-rho^{-1/2} s_x`
    pub g: Field,
}

/// Riemann fields without the `K > 0` guard; with `K = 0` both families reduce to `u`.
pub(crate) fn riemann_fields_raw(grid: &Grid, rho: &[f64], u: &[f64], k: f64) -> RiemannFields {
    let sk = k.sqrt();
    let r: Vec<f64> = u.iter().zip(rho).map(|(v, p)| v + sk * p.ln()).collect();
    let s: Vec<f64> = u.iter().zip(rho).map(|(v, p)| v - sk * p.ln()).collect();
    let (w, z) = grid.d1_pair(&r, &s);
    let f = w.iter().zip(rho).map(|(a, p)| -a / p.sqrt()).collect::<Vec<_>>();
    let g = z.iter().zip(rho).map(|(a, p)| -a / p.sqrt()).collect::<Vec<_>>();
    RiemannFields {
        r: r.into(),
        s: s.into(),
        w: w.into(),
        z: z.into(),
        f: f.into(),
        g: g.into(),
    }
}

pub fn riemann_fields(state: &FluidState, k: f64, grid: &Grid) -> Result<RiemannFields> {
    if !(k > 0.0) {
        return Err(Error::Unsupported(
            "Riemann functions are defined for K > 0 only".into(),
        ));
    }
    grid.check_len(&state.rho, "rho")?;
    grid.check_len(&state.u, "u")?;
    if state.rho.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Precondition("density must be positive".into()));
    }
    Ok(riemann_fields_raw(grid, &state.rho, &state.u, k))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiBounds {
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Bounds on the potential implied by the initial energy.
pub fn phi_bounds(h0: f64) -> Result<(f64, f64)> {
    Ok((v_minus_inverse(h0)?, v_plus_inverse(h0)?))
}

pub fn check_phi_bounds(state: &FluidState, h0: f64) -> Result<PhiBounds> {
    let (lower, upper) = phi_bounds(h0)?;
    Ok(PhiBounds {
        lower,
        upper,
        pass: phi_within(&state.phi, lower, upper),
    })
}

/// Spectral tail fraction above which a density counts as under-resolved.
pub const RESOLUTION_TAIL: f64 = 1e-8;

pub(crate) fn phi_within(phi: &[f64], lower: f64, upper: f64) -> bool {
    phi.iter()
        .all(|&p| p >= lower - PHI_BOUND_SLACK && p <= upper + PHI_BOUND_SLACK)
}

/// Fitted blow-up law `min u_x = c / (t - T*)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowupFit {
    pub t_star: f64,
    pub c: f64,
}

/// Least-squares fit of `1/min u_x` against `t` over samples with `min u_x < -10`.
pub fn fit_blowup_rate(series: &[(f64, f64)]) -> Result<BlowupFit> {
    let tail: Vec<(f64, f64)> = series.iter().copied().filter(|&(_, m)| m < -10.0).collect();
    if tail.len() < 5 {
        return Err(Error::InsufficientSamples {
            needed: 5,
            have: tail.len(),
        });
    }
    for w in tail.windows(2) {
        if !(w[1].0 > w[0].0) || w[1].1 > w[0].1 {
            return Err(Error::FitFailure(format!(
                "min u_x is not decreasing at t = {}",
                w[1].0
            )));
        }
    }
    // 1/m = (t - T*)/c is linear in t
    let n = tail.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, m) in &tail {
        let y = 1.0 / m;
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom == 0.0 {
        return Err(Error::FitFailure("degenerate time samples".into()));
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    if !(slope > 0.0) {
        return Err(Error::FitFailure("no blow-up trend".into()));
    }
    Ok(BlowupFit {
        t_star: -intercept / slope,
        c: 1.0 / slope,
    })
}

/// Chain bound `max phi_x^2/2 <= 1/2 int (rho-1)^2 + 1/2 int phi_x^2 + max(e^phi - phi - 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhixChain {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn check_phix_chain(grid: &Grid, rho: &[f64], phi: &[f64]) -> PhixChain {
    let phix = grid.d1(phi);
    phix_chain_from(grid, rho, phi, &phix)
}

fn phix_chain_from(grid: &Grid, rho: &[f64], phi: &[f64], phix: &[f64]) -> PhixChain {
    let lhs = 0.5 * max_abs(phix).powi(2);
    let dev: Vec<f64> = rho.iter().map(|r| r - 1.0).collect();
    let well = phi
        .iter()
        .fold(0.0_f64, |m, &p| m.max(p.exp_m1() - p));
    let rhs = 0.5 * grid.inner(&dev, &dev) + 0.5 * grid.inner(phix, phix) + well;
    PhixChain {
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-12) + 1e-15,
    }
}

/// Bits of [`DiagnosticsRecord::flags`].
pub mod flags {
    /// Potential left the `V±^{-1}(H(0))` window.
    pub const PHI_BOUNDS: u32 = 1;
    /// `inf rho <= e^phi <= sup rho` failed.
    pub const MAX_PRINCIPLE: u32 = 1 << 1;
    /// The `phi_x` chain bound failed.
    pub const PHIX_CHAIN: u32 = 1 << 2;
    /// Relative energy drift above `1e-6` while gradients are below 100.
    pub const ENERGY_DRIFT: u32 = 1 << 3;
    /// `R + S` exceeded its transport envelope.
    pub const RS_ENVELOPE: u32 = 1 << 4;
    /// More than `1e-8` of the spectral energy sits in the top third of the modes.
    pub const UNDER_RESOLVED: u32 = 1 << 5;
}

/// One row of the diagnostics series.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub h: f64,
    pub max_rho: f64,
    pub min_rho: f64,
    pub max_u: f64,
    pub min_u: f64,
    pub max_phi: f64,
    pub min_phi: f64,
    pub max_abs_u: f64,
    pub max_abs_ux: f64,
    pub min_ux: f64,
    pub max_abs_rhox: f64,
    pub max_abs_phi: f64,
    pub max_abs_phix: f64,
    pub r: f64,
    pub s: f64,
    pub f_plus: f64,
    pub g_plus: f64,
    pub flags: u32,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "t,H,max_rho,min_rho,max_abs_u,max_abs_ux,max_abs_rhox,max_abs_phi,max_abs_phix,R,S,F_plus,G_plus,flags";

    pub fn to_csv_row(&self) -> String {
        let v = [
            self.time,
            self.h,
            self.max_rho,
            self.min_rho,
            self.max_abs_u,
            self.max_abs_ux,
            self.max_abs_rhox,
            self.max_abs_phi,
            self.max_abs_phix,
            self.r,
            self.s,
            self.f_plus,
            self.g_plus,
        ];
        let mut row: Vec<String> = v.iter().map(|x| crate::output::fmt_num(*x)).collect();
        row.push(self.flags.to_string());
        row.join(",")
    }

    pub fn max_gradient(&self) -> f64 {
        self.max_abs_ux.max(self.max_abs_rhox)
    }

    pub fn has(&self, flag: u32) -> bool {
        self.flags & flag != 0
    }
}

/// Running bookkeeping for per-step checks that need history.
#[derive(Clone, Debug)]
pub struct Monitor {
    k: f64,
    h0: f64,
    phi_lower: f64,
    phi_upper: f64,
    rs0: f64,
    phix_integral: f64,
    last: Option<(f64, f64)>,
}

impl Monitor {
    pub fn new(grid: &Grid, initial: &FluidState, k: f64) -> Result<Monitor> {
        let h0 = energy(initial, k, grid);
        let (phi_lower, phi_upper) = phi_bounds(h0)?;
        let rf = riemann_fields_raw(grid, &initial.rho, &initial.u, k);
        Ok(Monitor {
            k,
            h0,
            phi_lower,
            phi_upper,
            rs0: rf.r.max_abs() + rf.s.max_abs(),
            phix_integral: 0.0,
            last: None,
        })
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn phi_window(&self) -> (f64, f64) {
        (self.phi_lower, self.phi_upper)
    }

    /// Computes the record for `state`; states must be fed in time order.
    pub fn record(&mut self, grid: &Grid, state: &FluidState) -> DiagnosticsRecord {
        let (ux, rhox) = grid.d1_pair(&state.u, &state.rho);
        let phix = grid.d1(&state.phi);
        let h = energy_parts(grid, &state.rho, &state.u, &state.phi, self.k).total();
        let rf = riemann_fields_raw(grid, &state.rho, &state.u, self.k);
        let max_abs_phix = max_abs(&phix);

        if let Some((t_prev, m_prev)) = self.last {
            self.phix_integral += 0.5 * (state.time - t_prev) * (m_prev + max_abs_phix);
        }
        self.last = Some((state.time, max_abs_phix));

        let rec_rho = Field::new(state.rho.to_vec());
        let r_max = rf.r.max_abs();
        let s_max = rf.s.max_abs();
        let max_abs_ux = max_abs(&ux);
        let max_abs_rhox = max_abs(&rhox);
        let mut bits = 0;
        if !phi_within(&state.phi, self.phi_lower, self.phi_upper) {
            bits |= flags::PHI_BOUNDS;
        }
        if !crate::poisson::maximum_principle_holds(&state.rho, &state.phi, 1e-10) {
            bits |= flags::MAX_PRINCIPLE;
        }
        if !phix_chain_from(grid, &state.rho, &state.phi, &phix).pass {
            bits |= flags::PHIX_CHAIN;
        }
        let drift = (h - self.h0).abs() / self.h0.max(1e-12);
        if drift > 1e-6 && max_abs_ux.max(max_abs_rhox) <= 100.0 {
            bits |= flags::ENERGY_DRIFT;
        }
        // each Riemann function moves by at most int max|phi_x| along its characteristic
        if r_max + s_max > self.rs0 + 2.0 * self.phix_integral + 1e-4 {
            bits |= flags::RS_ENVELOPE;
        }
        if grid.tail_energy_fraction(&state.rho) > RESOLUTION_TAIL {
            bits |= flags::UNDER_RESOLVED;
        }
        DiagnosticsRecord {
            time: state.time,
            h,
            max_rho: rec_rho.max(),
            min_rho: rec_rho.min(),
            max_u: state.u.max(),
            min_u: state.u.min(),
            max_phi: state.phi.max(),
            min_phi: state.phi.min(),
            max_abs_u: state.u.max_abs(),
            max_abs_ux,
            min_ux: ux.iter().copied().fold(f64::INFINITY, f64::min),
            max_abs_rhox,
            max_abs_phi: state.phi.max_abs(),
            max_abs_phix,
            r: r_max,
            s: s_max,
            f_plus: rf.f.max(),
            g_plus: rf.g.max(),
            flags: bits,
        }
    }
}

/// Follows one `lambda+` and one `lambda-` characteristic through successive
/// states and measures the transport defect `|dr/dt + phi_x|` (and the same
/// for `s`).
#[derive(Clone, Debug)]
pub struct CharacteristicTracker {
    k: f64,
    x_plus: f64,
    x_minus: f64,
    prev: Option<FluidState>,
    pub max_defect_r: f64,
    pub max_defect_s: f64,
}

struct Sampler {
    u: crate::spline::PeriodicSpline,
    lnrho: crate::spline::PeriodicSpline,
    phix: crate::spline::PeriodicSpline,
}

impl Sampler {
    fn new(grid: &Grid, s: &FluidState) -> Sampler {
        let lnrho: Vec<f64> = s.rho.iter().map(|r| r.ln()).collect();
        Sampler {
            u: grid.spline(&s.u),
            lnrho: grid.spline(&lnrho),
            phix: grid.spline(&grid.d1(&s.phi)),
        }
    }
}

impl CharacteristicTracker {
    pub fn new(k: f64, x_plus: f64, x_minus: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Unsupported(
                "characteristic transport check needs K > 0".into(),
            ));
        }
        Ok(CharacteristicTracker {
            k,
            x_plus,
            x_minus,
            prev: None,
            max_defect_r: 0.0,
            max_defect_s: 0.0,
        })
    }

    pub fn positions(&self) -> (f64, f64) {
        (self.x_plus, self.x_minus)
    }

    /// Advances both characteristics to `state.time` by RK4, with fields at
    /// intermediate times interpolated linearly between the two states.
    pub fn advance(&mut self, grid: &Grid, state: &FluidState) {
        let Some(prev) = self.prev.take() else {
            self.prev = Some(state.clone());
            return;
        };
        let dt = state.time - prev.time;
        let a = Sampler::new(grid, &prev);
        let b = Sampler::new(grid, state);
        let sk = self.k.sqrt();
        let lerp = |sa: &crate::spline::PeriodicSpline, sb: &crate::spline::PeriodicSpline, x: f64, th: f64| {
            (1.0 - th) * sa.eval(x) + th * sb.eval(x)
        };
        for (x, sign, defect) in [
            (&mut self.x_plus, 1.0, &mut self.max_defect_r),
            (&mut self.x_minus, -1.0, &mut self.max_defect_s),
        ] {
            let speed = |x: f64, th: f64| lerp(&a.u, &b.u, x, th) + sign * sk;
            let x0 = *x;
            let k1 = speed(x0, 0.0);
            let k2 = speed(x0 + 0.5 * dt * k1, 0.5);
            let k3 = speed(x0 + 0.5 * dt * k2, 0.5);
            let k4 = speed(x0 + dt * k3, 1.0);
            let x1 = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let riemann = |s: &Sampler, x: f64| s.u.eval(x) + sign * sk * s.lnrho.eval(x);
            let dr = (riemann(&b, x1) - riemann(&a, x0)) / dt;
            // Simpson along the path, with the midpoint from the RK4 stages
            let xm = x0 + 0.5 * dt * (k2 + k3) / 2.0;
            let fx = (a.phix.eval(x0) + 4.0 * lerp(&a.phix, &b.phix, xm, 0.5) + b.phix.eval(x1)) / 6.0;
            *defect = defect.max((dr + fx).abs());
            *x = grid.wrap(x1);
        }
        self.prev = Some(state.clone());
    }
}
