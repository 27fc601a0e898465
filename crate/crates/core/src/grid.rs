//! Periodic grid, Fourier differentiation, interpolation and quadrature.
//!
//! The domain is `[-L/2, L/2)` sampled at `n` uniformly spaced nodes. All
//! transforms are planned once per [`Grid`]; working buffers are allocated per
//! call so a grid can be shared freely between threads.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spline::PeriodicSpline;

/// Samples of a real function on the nodes of a [`Grid`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Field(values)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Field(vec![value; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    /// Index of the smallest entry (first one on ties).
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v < self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(values: Vec<f64>) -> Self {
        Field(values)
    }
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Uniform periodic mesh with its Fourier wavenumbers.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    length: f64,
    dx: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("dx", &self.dx)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl Grid {
    /// Builds the grid `x_j = -L/2 + j L / n`.
    ///
    /// `n` must be a power of two no smaller than 8, and `length` positive.
    pub fn new(n: usize, length: f64) -> Result<Grid> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::config(
                "grid.n",
                format!("node count must be a power of two >= 8, got {n}"),
            ));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::config(
                "grid.length",
                format!("domain length must be positive, got {length}"),
            ));
        }
        let dx = length / n as f64;
        let nodes = (0..n).map(|j| -0.5 * length + j as f64 * dx).collect();
        let half = n / 2;
        let wavenumbers = (0..n)
            .map(|k| {
                let signed = if k < half { k as f64 } else { k as f64 - n as f64 };
                2.0 * PI * signed / length
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Grid {
            n,
            length,
            dx,
            nodes,
            wavenumbers,
            fft,
            ifft,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Wavenumbers in transform order; index `n/2` is the Nyquist mode.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Largest resolved wavenumber `pi n / L`.
    pub fn max_wavenumber(&self) -> f64 {
        PI * self.n as f64 / self.length
    }

    /// Samples `f` at the grid nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.nodes.iter().map(|&x| f(x)).collect())
    }

    /// Maps `x` into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let shifted = (x + 0.5 * self.length).rem_euclid(self.length);
        // rem_euclid can round up to exactly `length`
        let shifted = if shifted >= self.length { 0.0 } else { shifted };
        shifted - 0.5 * self.length
    }

    pub(crate) fn check_len(&self, f: &[f64], what: &str) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::Precondition(format!(
                "{what} has {} samples, grid has {}",
                f.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub(crate) fn check_finite(f: &[f64], what: &str) -> Result<()> {
        match f.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Numeric(format!("{what}[{i}] = {}", f[i]))),
            None => Ok(()),
        }
    }

    /// Forward transform of real samples (unnormalized).
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        buf
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.ifft.process(&mut spec);
        let scale = 1.0 / self.n as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    /// Fourier multiplier for `d^order/dx^order`. Odd orders drop the Nyquist mode.
    fn symbol(&self, k: usize, order: u32) -> Complex64 {
        let xi = self.wavenumbers[k];
        if order % 2 == 1 && k == self.n / 2 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, xi).powu(order)
    }

    /// Applies a real-to-real Fourier multiplier to two real fields at once by
    /// packing them as the real and imaginary parts of one complex signal.
    pub(crate) fn apply_pair(
        &self,
        f: &[f64],
        g: &[f64],
        multiplier: impl Fn(usize) -> Complex64,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = f
            .iter()
            .zip(g)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        self.fft.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            *c *= multiplier(k);
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        let re = buf.iter().map(|c| c.re * scale).collect();
        let im = buf.iter().map(|c| c.im * scale).collect();
        (re, im)
    }

    /// Spectra of two real fields from a single complex transform.
    pub(crate) fn forward_pair(&self, f: &[f64], g: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut buf: Vec<Complex64> = f
            .iter()
            .zip(g)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        self.fft.process(&mut buf);
        let n = self.n;
        let mut fs = vec![Complex64::new(0.0, 0.0); n];
        let mut gs = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let z = buf[k];
            let zc = buf[(n - k) % n].conj();
            fs[k] = (z + zc) * 0.5;
            gs[k] = (z - zc) * Complex64::new(0.0, -0.5);
        }
        (fs, gs)
    }

    /// Inverse of two Hermitian spectra through a single complex transform.
    pub(crate) fn inverse_pair(&self, fs: &[Complex64], gs: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = fs
            .iter()
            .zip(gs)
            .map(|(a, b)| a + Complex64::new(0.0, 1.0) * b)
            .collect();
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        (
            buf.iter().map(|c| c.re * scale).collect(),
            buf.iter().map(|c| c.im * scale).collect(),
        )
    }

    pub(crate) fn apply(&self, f: &[f64], multiplier: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let mut spec = self.forward(f);
        for (k, c) in spec.iter_mut().enumerate() {
            *c *= multiplier(k);
        }
        self.inverse_real(spec)
    }

    pub(crate) fn d1(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f, |k| self.symbol(k, 1))
    }

    pub(crate) fn d2(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f, |k| self.symbol(k, 2))
    }

    pub(crate) fn d1_pair(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.apply_pair(f, g, |k| self.symbol(k, 1))
    }

    /// Derivative of the trigonometric interpolant of `f`.
    pub fn derivative(&self, f: &[f64], order: u32) -> Result<Field> {
        self.check_len(f, "field")?;
        Self::check_finite(f, "field")?;
        match order {
            1 => Ok(Field(self.d1(f))),
            2 => Ok(Field(self.d2(f))),
            _ => Err(Error::Precondition(format!(
                "derivative order must be 1 or 2, got {order}"
            ))),
        }
    }

    /// Periodic trapezoid rule `L/n * sum f_j`.
    pub fn quadrature(&self, f: &[f64]) -> f64 {
        self.dx * f.iter().sum::<f64>()
    }

    /// `integral f*g dx` on the periodic domain.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.dx * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Evaluates the periodic cubic spline through `f` at arbitrary points.
    pub fn interpolate(&self, f: &[f64], points: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f, "field")?;
        Self::check_finite(f, "field")?;
        Self::check_finite(points, "points")?;
        let spline = self.spline(f);
        Ok(points.iter().map(|&x| spline.eval(x)).collect())
    }

    pub(crate) fn spline(&self, f: &[f64]) -> PeriodicSpline {
        PeriodicSpline::uniform(self.nodes[0], self.dx, f.to_vec())
    }

    /// Zeroes every mode with `|k| > n/3` (the two-thirds rule).
    pub fn dealias(&self, f: &mut [f64]) {
        let cutoff = self.n / 3;
        let half = self.n / 2;
        let mut spec = self.forward(f);
        for (k, c) in spec.iter_mut().enumerate() {
            let index = if k <= half { k } else { self.n - k };
            if index > cutoff {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        f.copy_from_slice(&self.inverse_real(spec));
    }

    /// Fraction of spectral energy held by the top third of the modes.
    pub fn tail_energy_fraction(&self, f: &[f64]) -> f64 {
        let mean = f.iter().sum::<f64>() / self.n as f64;
        let centered: Vec<f64> = f.iter().map(|v| v - mean).collect();
        let spec = self.forward(&centered);
        let half = self.n / 2;
        let cutoff = self.n / 3;
        let (mut total, mut tail) = (0.0, 0.0);
        for (k, c) in spec.iter().enumerate() {
            let index = if k <= half { k } else { self.n - k };
            let e = c.norm_sqr();
            total += e;
            if index > cutoff {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}
