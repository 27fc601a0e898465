//! Blow-up criteria, the `V±` potential-bound functions and proof constants.

use std::sync::OnceLock;

use crate::diagnostics::{energy_parts, riemann_fields_raw};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::poisson::{kappa0, solve_poisson, DEFAULT_TOL};

/// Absolute tolerance of the adaptive quadrature behind `V±`.
pub const V_QUAD_TOL: f64 = 1e-10;
const V_INV_TOL: f64 = 1e-11;
const FAR_LEFT: f64 = -30.0;

/// `U(t) = (t - 1) e^t + 1`, with a Taylor series near zero to avoid cancellation.
pub fn u_fn(t: f64) -> f64 {
    if t.abs() < 0.1 {
        // sum_{k>=2} (k-1)/k! t^k
        let mut term = t * t / 2.0; // t^k / k! at k = 2
        let mut sum = term;
        for k in 3..20 {
            term *= t / k as f64;
            let add = (k - 1) as f64 * term;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (t - 1.0) * t.exp() + 1.0
    }
}

fn integrand(t: f64) -> f64 {
    (2.0 * u_fn(t)).max(0.0).sqrt()
}

fn simpson_step(a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = integrand(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive(a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let (lm, flm, left) = simpson_step(a, fa, m, fm);
    let (rm, frm, right) = simpson_step(m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + adaptive(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// `int_a^b sqrt(2 U)` by adaptive Simpson.
fn integrate(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = integrand(a);
    let fb = integrand(b);
    let (m, fm, whole) = simpson_step(a, fa, b, fb);
    adaptive(a, fa, b, fb, m, fm, whole, V_QUAD_TOL, 50)
}

fn v_minus_far_left() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| integrate(FAR_LEFT, 0.0))
}

/// `V_-(z) = int_z^0 sqrt(2 U)` for `z <= 0`.
pub fn v_minus(z: f64) -> Result<f64> {
    if !(z <= 0.0) {
        return Err(Error::Precondition(format!("V_- needs z <= 0, got {z}")));
    }
    if z < FAR_LEFT {
        // U(t) = 1 to double precision beyond this point
        return Ok(v_minus_far_left() + std::f64::consts::SQRT_2 * (FAR_LEFT - z));
    }
    Ok(integrate(z, 0.0))
}

/// `V_+(z) = int_0^z sqrt(2 U)` for `z >= 0`.
pub fn v_plus(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::Precondition(format!("V_+ needs z >= 0, got {z}")));
    }
    Ok(integrate(0.0, z))
}

/// Solves `V(z) = h` for `z` of sign `sign` by safeguarded Newton.
fn invert(h: f64, sign: f64) -> Result<f64> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::Precondition(format!("inverse needs finite h >= 0, got {h}")));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    let v = |z: f64| -> f64 {
        if sign < 0.0 {
            v_minus(z).unwrap_or(f64::NAN)
        } else {
            v_plus(z).unwrap_or(f64::NAN)
        }
    };
    // |z| grows with h; bracket in terms of s = |z|
    let mut hi = 1.0;
    while v(sign * hi) < h {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let mut s = (2.0 * h).sqrt().min(hi);
    for _ in 0..200 {
        let z = sign * s;
        let f = v(z) - h;
        if f.abs() <= V_INV_TOL {
            return Ok(z);
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        // dV/ds = sqrt(2 U(z)) on both branches
        let slope = integrand(z);
        let newton = s - f / slope;
        s = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi {
            return Ok(sign * s);
        }
    }
    Ok(sign * s)
}

pub fn v_minus_inverse(h: f64) -> Result<f64> {
    invert(h, -1.0)
}

pub fn v_plus_inverse(h: f64) -> Result<f64> {
    invert(h, 1.0)
}

/// Initial data as sampled on a grid, with its Poisson potential.
struct InitialData<'a> {
    rho: &'a [f64],
    u: &'a [f64],
    phi: Field,
}

fn prepare<'a>(rho0: &'a [f64], u0: &'a [f64], grid: &Grid) -> Result<InitialData<'a>> {
    grid.check_len(rho0, "rho0")?;
    grid.check_len(u0, "u0")?;
    Grid::check_finite(u0, "u0")?;
    let sol = solve_poisson(rho0, grid, DEFAULT_TOL, None)?;
    Ok(InitialData {
        rho: rho0,
        u: u0,
        phi: sol.phi,
    })
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct PressurelessCriterionReport {
    pub h0: f64,
    pub v_minus_inv_h0: f64,
    /// `exp(V_-^{-1}(H(0)))`
    pub lhs: f64,
    pub witness_index: usize,
    pub witness_x: f64,
    /// `2 rho0(witness)`
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Density blow-up criterion for the pressureless model, tested at the global
/// minimizer of the initial density.
pub fn check_pressureless(rho0: &[f64], u0: &[f64], grid: &Grid) -> Result<PressurelessCriterionReport> {
    let data = prepare(rho0, u0, grid)?;
    let h0 = energy_parts(grid, data.rho, data.u, &data.phi, 0.0).total();
    let z = v_minus_inverse(h0)?;
    let lhs = z.exp();
    let witness_index = argmin(rho0);
    let rhs = 2.0 * rho0[witness_index];
    let margin = lhs - rhs;
    Ok(PressurelessCriterionReport {
        h0,
        v_minus_inv_h0: z,
        lhs,
        witness_index,
        witness_x: grid.nodes()[witness_index],
        rhs,
        margin,
        holds: margin > 0.0,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiuReport {
    pub holds: bool,
    pub witness_index: usize,
    pub witness_x: f64,
    /// `min (u0_x + sqrt(2 rho0))`
    pub min_value: f64,
}

/// The classical velocity-gradient criterion `u0_x <= -sqrt(2 rho0)` somewhere.
pub fn check_liu(rho0: &[f64], u0: &[f64], grid: &Grid) -> Result<LiuReport> {
    grid.check_len(rho0, "rho0")?;
    grid.check_len(u0, "u0")?;
    if rho0.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Precondition("density must be positive".into()));
    }
    let ux = grid.derivative(u0, 1)?;
    let q: Vec<f64> = ux
        .iter()
        .zip(rho0)
        .map(|(d, r)| d + (2.0 * r).sqrt())
        .collect();
    let i = argmin(&q);
    Ok(LiuReport {
        holds: q[i] <= 0.0,
        witness_index: i,
        witness_x: grid.nodes()[i],
        min_value: q[i],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBoundReport {
    pub kappa0: f64,
    /// `(sup rho0)/2 int u0^2 + (1/kappa0) int (rho0 - 1)^2`
    pub bound: f64,
    /// Energy at the requested `K`.
    pub h0: f64,
    /// Energy with the pressure term dropped, which is what the bound controls.
    pub h0_pressureless: f64,
    pub pass: bool,
    /// The isothermal refinement carries an unquantified constant.
    pub isothermal_term_checkable: bool,
}

pub fn energy_upper_bound(rho0: &[f64], u0: &[f64], grid: &Grid, k: f64) -> Result<EnergyBoundReport> {
    if !(k >= 0.0) {
        return Err(Error::config("model.K", "K must be >= 0"));
    }
    let data = prepare(rho0, u0, grid)?;
    let inf = rho0.iter().copied().fold(f64::INFINITY, f64::min);
    let sup = rho0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k0 = kappa0(inf);
    let u2 = grid.inner(u0, u0);
    let dev: Vec<f64> = rho0.iter().map(|r| r - 1.0).collect();
    let bound = 0.5 * sup * u2 + grid.inner(&dev, &dev) / k0;
    let parts = energy_parts(grid, rho0, u0, &data.phi, k);
    let h0 = parts.total();
    let h0_pressureless = h0 - parts.pressure;
    Ok(EnergyBoundReport {
        kappa0: k0,
        bound,
        h0,
        h0_pressureless,
        pass: h0_pressureless <= bound + 1e-14,
        isothermal_term_checkable: k == 0.0,
    })
}

/// Explicit constants from the small-data blow-up argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsothermalConstants {
    pub alpha: f64,
    pub beta: f64,
    pub c2: f64,
    pub gamma: f64,
    pub m_required: f64,
}

pub fn isothermal_constants(t0: f64, eps: f64, delta0: f64) -> Result<IsothermalConstants> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::config("criteria.T0", format!("T0 must be positive, got {t0}")));
    }
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::config("criteria.eps", format!("eps must lie in (0, 1/4), got {eps}")));
    }
    if !(delta0 > 0.0 && delta0 < eps) {
        return Err(Error::config(
            "criteria.delta0",
            format!("delta0 must lie in (0, eps), got {delta0}"),
        ));
    }
    let alpha = (1.0 - eps).sqrt() / 2.0;
    let beta = (1.0 + eps).sqrt() / 2.0;
    let c2 = f64::max(
        v_plus_inverse(delta0)?.exp() - 1.0,
        1.0 - v_minus_inverse(delta0)?.exp(),
    );
    let gamma = (c2 + 2.0 * eps) / (2.0 * beta);
    let m_required = gamma * t0 + 1.0 / (alpha * t0);
    Ok(IsothermalConstants {
        alpha,
        beta,
        c2,
        gamma,
        m_required,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsothermalCriterionReport {
    pub h0: f64,
    /// `max(sup|rho0 - 1|, sup|u0|, H(0))`
    pub delta_eff: f64,
    /// `max_x max(f0, g0)`
    pub steepness: f64,
    pub steepness_x: f64,
    pub t0: f64,
    pub eps: f64,
    pub delta0: f64,
    pub constants: IsothermalConstants,
    pub small: bool,
    pub steep: bool,
    pub satisfied: bool,
    /// Lower bound on the existence time.
    pub tm_lower: f64,
}

pub fn isothermal_report(
    rho0: &[f64],
    u0: &[f64],
    grid: &Grid,
    k: f64,
    t0: f64,
    eps: f64,
    delta0: f64,
) -> Result<IsothermalCriterionReport> {
    if !(k > 0.0) {
        return Err(Error::Unsupported(
            "the isothermal criterion needs K > 0".into(),
        ));
    }
    let constants = isothermal_constants(t0, eps, delta0)?;
    let data = prepare(rho0, u0, grid)?;
    let h0 = energy_parts(grid, rho0, u0, &data.phi, k).total();
    let rf = riemann_fields_raw(grid, rho0, u0, k);
    let mut steepness = f64::NEG_INFINITY;
    let mut steepness_x = grid.nodes()[0];
    for (j, (f, g)) in rf.f.iter().zip(rf.g.iter()).enumerate() {
        let m = f.max(*g);
        if m > steepness {
            steepness = m;
            steepness_x = grid.nodes()[j];
        }
    }
    let sup_dev = rho0.iter().fold(0.0_f64, |m, r| m.max((r - 1.0).abs()));
    let sup_u = u0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let delta_eff = sup_dev.max(sup_u).max(h0);
    let small = delta_eff <= delta0;
    let steep = steepness >= constants.m_required;
    let root = (constants.gamma / constants.beta).sqrt();
    let tm = |m: f64| 1.0 / (constants.beta * (m + root));
    let tm_lower = tm(rf.f.max_abs()).min(tm(rf.g.max_abs()));
    Ok(IsothermalCriterionReport {
        h0,
        delta_eff,
        steepness,
        steepness_x,
        t0,
        eps,
        delta0,
        constants,
        small,
        steep,
        satisfied: small && steep,
        tm_lower,
    })
}
