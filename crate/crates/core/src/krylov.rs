//! Matrix-free Krylov solvers used by the implicit steps.

#[derive(Clone, Copy, Debug)]
pub(crate) struct KrylovOptions {
    pub restart: usize,
    pub max_iterations: usize,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Clone, Copy, Debug)]
#[allow(dead_code)]
pub(crate) struct KrylovOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES with right preconditioning, solving `A x = b` from the
/// initial guess in `x`.
pub(crate) fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut precond: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    opts: KrylovOptions,
) -> KrylovOutcome {
    let n = b.len();
    let target = opts.atol.max(opts.rtol * norm(b));
    let mut total = 0;
    let mut residual;
    loop {
        let ax = apply(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        residual = beta;
        if beta <= target || total >= opts.max_iterations {
            break;
        }
        let m = opts.restart;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < opts.max_iterations {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            // modified Gram-Schmidt, with one reorthogonalization pass
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(&w, vi);
                    h[i][k] += hij;
                    for (wj, vj) in w.iter_mut().zip(vi) {
                        *wj -= hij * vj;
                    }
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            residual = g[k].abs();
            if residual <= target || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution on the k x k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            for j in 0..n {
                x[j] += yi * zi[j];
            }
        }
        // the outer loop recomputes the true residual before deciding to stop
    }
    KrylovOutcome {
        iterations: total,
        residual,
        converged: residual <= target,
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite `A`.
pub(crate) fn pcg(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut precond: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    opts: KrylovOptions,
) -> KrylovOutcome {
    let ax = apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let target = opts.atol.max(opts.rtol * norm(b));
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = norm(&r);
    let mut it = 0;
    while residual > target && it < opts.max_iterations {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        residual = norm(&r);
        it += 1;
        if residual <= target {
            break;
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    KrylovOutcome {
        iterations: it,
        residual,
        converged: residual <= target,
    }
}
