//! Newton solver for the Poisson-Boltzmann equation `-phi_xx = rho - exp(phi)`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{max_abs, Field, Grid};
use crate::krylov::{pcg, KrylovOptions};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_NEWTON: usize = 50;

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub phi: Field,
    /// Max-norm of `-phi_xx - rho + exp(phi)`.
    pub residual_norm: f64,
    pub newton_iterations: usize,
}

/// `-phi_xx + exp(phi) - rho`.
pub(crate) fn residual(grid: &Grid, rho: &[f64], phi: &[f64]) -> Vec<f64> {
    let d2 = grid.d2(phi);
    d2.iter()
        .zip(phi)
        .zip(rho)
        .map(|((d, p), r)| -d + p.exp() - r)
        .collect()
}

/// Solves the Poisson-Boltzmann equation for a positive density.
///
/// Without an initial guess Newton starts from `ln(rho)` clamped to `[-5, 5]`.
pub fn solve_poisson(
    rho: &[f64],
    grid: &Grid,
    tol: f64,
    initial_guess: Option<&[f64]>,
) -> Result<PoissonSolution> {
    grid.check_len(rho, "rho")?;
    Grid::check_finite(rho, "rho")?;
    if !(tol > 0.0) {
        return Err(Error::config("solver.poisson_tol", "tolerance must be positive"));
    }
    if let Some(i) = rho.iter().position(|&r| r <= 0.0) {
        return Err(Error::Precondition(format!(
            "density must be positive, rho[{i}] = {}",
            rho[i]
        )));
    }
    let mut phi: Vec<f64> = match initial_guess {
        Some(g) => {
            grid.check_len(g, "initial guess")?;
            Grid::check_finite(g, "initial guess")?;
            g.to_vec()
        }
        None => rho.iter().map(|r| r.ln().clamp(-5.0, 5.0)).collect(),
    };
    let xi = grid.wavenumbers();
    let xi_max = grid.max_wavenumber();
    let mut res = residual(grid, rho, &phi);
    let mut norm = max_abs(&res);
    let mut iterations = 0;
    while norm > tol {
        if iterations == MAX_NEWTON || !norm.is_finite() {
            return Err(Error::PoissonDivergence {
                iterations,
                residual: norm,
            });
        }
        let e: Vec<f64> = phi.iter().map(|p| p.exp()).collect();
        let c = e.iter().sum::<f64>() / e.len() as f64;
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let mut delta = vec![0.0; phi.len()];
        pcg(
            |v| {
                let d2 = grid.d2(v);
                d2.iter().zip(v).zip(&e).map(|((d, vi), ei)| -d + ei * vi).collect()
            },
            |v| grid.apply(v, |k| Complex64::new(1.0 / (xi[k] * xi[k] + c), 0.0)),
            &rhs,
            &mut delta,
            KrylovOptions {
                restart: 0,
                max_iterations: 200,
                rtol: 1e-10,
                atol: 0.0,
            },
        );
        // damp only if the full step would overflow the exponential
        let big = max_abs(&delta);
        let scale = if big > 2.0 { 2.0 / big } else { 1.0 };
        for (p, d) in phi.iter_mut().zip(&delta) {
            *p += scale * d;
        }
        iterations += 1;
        res = residual(grid, rho, &phi);
        let new_norm = max_abs(&res);
        // a spectral second derivative cannot resolve residuals below this
        let floor = 8.0 * f64::EPSILON * (1.0 + xi_max * xi_max) * (1.0 + max_abs(&phi));
        if scale == 1.0 && big <= 1e-12 * (1.0 + max_abs(&phi)) && new_norm <= tol.max(floor) {
            norm = new_norm;
            break;
        }
        norm = new_norm;
    }
    Ok(PoissonSolution {
        phi: Field::new(phi),
        residual_norm: norm,
        newton_iterations: iterations,
    })
}

/// Whether `inf rho <= exp(phi) <= sup rho` holds within `slack`.
pub fn maximum_principle_holds(rho: &[f64], phi: &[f64], slack: f64) -> bool {
    let lo = rho.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    phi.iter().all(|p| {
        let e = p.exp();
        e >= lo - slack && e <= hi + slack
    })
}

/// `kappa_0` from the infimum of the density.
pub fn kappa0(inf_rho: f64) -> f64 {
    if inf_rho < 1.0 {
        (1.0 - inf_rho) / (-inf_rho.ln())
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticReport {
    pub kappa_minus: f64,
    pub kappa0: f64,
    /// `int |phi_x|^2 + kappa0/2 |phi|^2`
    pub lhs_h1: f64,
    /// `1/(2 kappa0) int |rho - 1|^2`
    pub rhs_h1: f64,
    /// `int |phi_x|^2 + (phi - 1) e^phi + 1`
    pub lhs_energy: f64,
    /// `1/kappa0 int |rho - 1|^2`
    pub rhs_energy: f64,
    pub h1_pass: bool,
    pub energy_pass: bool,
}

/// Evaluates the two a-priori estimates for a solved pair `(rho, phi)`.
pub fn check_elliptic_estimates(rho: &[f64], phi: &[f64], grid: &Grid) -> Result<EllipticReport> {
    grid.check_len(rho, "rho")?;
    grid.check_len(phi, "phi")?;
    Grid::check_finite(rho, "rho")?;
    Grid::check_finite(phi, "phi")?;
    let kappa_minus = rho.iter().copied().fold(f64::INFINITY, f64::min);
    if !(kappa_minus > 0.0) {
        return Err(Error::Precondition("density must be positive".into()));
    }
    let k0 = kappa0(kappa_minus);
    let phix = grid.d1(phi);
    let grad2 = grid.inner(&phix, &phix);
    let phi2 = grid.inner(phi, phi);
    let dev: Vec<f64> = rho.iter().map(|r| r - 1.0).collect();
    let dev2 = grid.inner(&dev, &dev);
    let well: Vec<f64> = phi.iter().map(|&p| crate::criteria::u_fn(p)).collect();
    let lhs_h1 = grad2 + 0.5 * k0 * phi2;
    let rhs_h1 = dev2 / (2.0 * k0);
    let lhs_energy = grad2 + grid.quadrature(&well);
    let rhs_energy = dev2 / k0;
    // rounding allowance for states where both sides vanish
    let slack = 1e-13;
    Ok(EllipticReport {
        kappa_minus,
        kappa0: k0,
        lhs_h1,
        rhs_h1,
        lhs_energy,
        rhs_energy,
        h1_pass: lhs_h1 <= rhs_h1 + slack,
        energy_pass: lhs_energy <= rhs_energy + slack,
    })
}
