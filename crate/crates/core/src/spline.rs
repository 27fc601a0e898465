//! Periodic cubic interpolants on uniform or scattered knots.

use crate::error::{Error, Result};

/// Solves a cyclic tridiagonal system in place.
///
/// Row `i` reads `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]` with
/// indices taken modulo `n`. Uses the Sherman-Morrison correction on top of
/// the Thomas algorithm.
pub(crate) fn solve_cyclic_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 3, "cyclic system needs at least three rows");
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];

    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;

    let x = thomas(sub, &d, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(sub, &d, sup, &u);

    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = sup[0] / denom;
    x[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

#[derive(Clone, Debug)]
enum Knots {
    Uniform { x0: f64, h: f64 },
    Scattered(Vec<f64>),
}

/// C² periodic cubic spline.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    knots: Knots,
    period: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    /// Spline through `values` at `x0 + j h`, with period `n h`.
    pub fn uniform(x0: f64, h: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let prev = values[(i + n - 1) % n];
            let next = values[(i + 1) % n];
            rhs[i] = 6.0 * (next - 2.0 * values[i] + prev) / (h * h);
        }
        let second = solve_cyclic_tridiagonal(&vec![1.0; n], &vec![4.0; n], &vec![1.0; n], &rhs);
        PeriodicSpline {
            knots: Knots::Uniform { x0, h },
            period: n as f64 * h,
            values,
            second,
        }
    }

    /// Spline through scattered knots.
    ///
    /// Knots must be strictly increasing with `knots[last] < knots[0] + period`.
    /// They need not lie inside any particular window.
    pub fn scattered(knots: Vec<f64>, values: Vec<f64>, period: f64) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::Precondition(format!(
                "spline needs >= 3 knots with matching values, got {} knots and {} values",
                n,
                values.len()
            )));
        }
        let h: Vec<f64> = (0..n)
            .map(|i| {
                if i + 1 < n {
                    knots[i + 1] - knots[i]
                } else {
                    knots[0] + period - knots[n - 1]
                }
            })
            .collect();
        if let Some(i) = h.iter().position(|&hi| !(hi > 0.0)) {
            return Err(Error::Crossing {
                index: i,
                next: (i + 1) % n,
            });
        }
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let hp = h[(i + n - 1) % n];
            let hi = h[i];
            sub[i] = hp;
            diag[i] = 2.0 * (hp + hi);
            sup[i] = hi;
            let next = values[(i + 1) % n];
            let prev = values[(i + n - 1) % n];
            rhs[i] = 6.0 * ((next - values[i]) / hi - (values[i] - prev) / hp);
        }
        let second = solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs);
        Ok(PeriodicSpline {
            knots: Knots::Scattered(knots),
            period,
            values,
            second,
        })
    }

    /// Interval index, left knot and width for a query point.
    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.values.len();
        match &self.knots {
            Knots::Uniform { x0, h } => {
                let s = (x - x0).rem_euclid(self.period);
                let i = ((s / h).floor() as usize).min(n - 1);
                (i, s - i as f64 * h, *h)
            }
            Knots::Scattered(k) => {
                let s = k[0] + (x - k[0]).rem_euclid(self.period);
                let i = k.partition_point(|&kj| kj <= s).saturating_sub(1);
                let right = if i + 1 < n { k[i + 1] } else { k[0] + self.period };
                (i, s - k[i], right - k[i])
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let (i, offset, h) = self.locate(x);
        let j = (i + 1) % n;
        let b = offset / h;
        let a = 1.0 - b;
        a * self.values[i]
            + b * self.values[j]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[j]) * h * h / 6.0
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        let n = self.values.len();
        let (i, offset, h) = self.locate(x);
        let j = (i + 1) % n;
        let b = offset / h;
        let a = 1.0 - b;
        (self.values[j] - self.values[i]) / h
            + h / 6.0 * ((1.0 - 3.0 * a * a) * self.second[i] + (3.0 * b * b - 1.0) * self.second[j])
    }
}

/// Shape-preserving periodic cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Clone, Debug)]
pub struct MonotoneHermite {
    knots: Vec<f64>,
    period: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneHermite {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, period: f64) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::Precondition(format!(
                "interpolant needs >= 3 knots with matching values, got {} knots and {} values",
                n,
                values.len()
            )));
        }
        let mut h = vec![0.0; n];
        let mut delta = vec![0.0; n];
        for i in 0..n {
            let (x1, y1) = if i + 1 < n {
                (knots[i + 1], values[i + 1])
            } else {
                (knots[0] + period, values[0])
            };
            h[i] = x1 - knots[i];
            if !(h[i] > 0.0) {
                return Err(Error::Crossing {
                    index: i,
                    next: (i + 1) % n,
                });
            }
            delta[i] = (y1 - values[i]) / h[i];
        }
        let slopes = (0..n)
            .map(|i| {
                let p = (i + n - 1) % n;
                let (dl, dr) = (delta[p], delta[i]);
                if dl * dr <= 0.0 {
                    0.0
                } else {
                    // weighted harmonic mean keeps the slope inside the monotone region
                    let w1 = 2.0 * h[i] + h[p];
                    let w2 = h[i] + 2.0 * h[p];
                    (w1 + w2) / (w1 / dl + w2 / dr)
                }
            })
            .collect();
        Ok(MonotoneHermite {
            knots,
            period,
            values,
            slopes,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        let k = &self.knots;
        let s = k[0] + (x - k[0]).rem_euclid(self.period);
        let i = k.partition_point(|&kj| kj <= s).saturating_sub(1);
        let j = (i + 1) % n;
        let right = if i + 1 < n { k[i + 1] } else { k[0] + self.period };
        let h = right - k[i];
        let t = (s - k[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[i]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * self.values[j]
            + (t3 - t2) * h * self.slopes[j]
    }
}
