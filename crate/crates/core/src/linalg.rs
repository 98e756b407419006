//! Thin wrappers over LAPACK plus the spectral resolvent used by all cw solvers.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Solve};

use crate::error::{Error, Result};
use crate::C64;

pub fn solve(a: &Array2<C64>, b: &Array1<C64>) -> Result<Array1<C64>> {
    let x = a.solve(b).map_err(|e| Error::Numerical(format!("linear solve failed: {e}")))?;
    if x.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numerical("linear solve produced non-finite values".into()));
    }
    Ok(x)
}

pub fn eig(a: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>)> {
    a.eig().map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e}")))
}

pub fn vdot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn to_complex(m: &Array2<f64>) -> Array2<C64> {
    m.mapv(|x| C64::new(x, 0.0))
}

/// x ↦ left†(A + z)⁻¹right for a fixed matrix A, evaluated in O(N) per shift.
#[derive(Clone, Debug)]
pub struct Resolvent {
    pub vals: Array1<C64>,
    pub weights: Array1<C64>,
    scale: f64,
}

impl Resolvent {
    pub fn new(a: &Array2<C64>, left: &Array1<C64>, right: &Array1<C64>) -> Result<Self> {
        let (vals, vecs) = eig(a)?;
        let p = solve(&vecs, right)?;
        let q = vecs.t().dot(&left.mapv(|z| z.conj()));
        let weights = &q * &p;
        let scale = vals.iter().map(|z| z.norm()).fold(1.0, f64::max);
        Ok(Self { vals, weights, scale })
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let mut s = C64::new(0.0, 0.0);
        for (l, w) in self.vals.iter().zip(self.weights.iter()) {
            let d = l + z;
            if d.norm() < 1e-14 * self.scale {
                return Err(Error::Numerical(format!("singular system at shift {z}")));
            }
            s += w / d;
        }
        Ok(s)
    }
}

/// Restarted GMRES with right preconditioning. Stops when ‖b − Ax‖ ≤ tol·‖b‖.
pub fn gmres<A, P>(apply: A, precond: P, b: &Array1<C64>, tol: f64, restart: usize, max_iter: usize) -> Result<Array1<C64>>
where
    A: Fn(&Array1<C64>) -> Array1<C64>,
    P: Fn(&Array1<C64>) -> Array1<C64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = Array1::<C64>::zeros(n);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut total = 0;
    loop {
        let r = b - &apply(&x);
        let beta = norm(&r);
        if beta <= tol * bnorm {
            return Ok(x);
        }
        let mut v: Vec<Array1<C64>> = vec![r / C64::new(beta, 0.0)];
        let mut z: Vec<Array1<C64>> = Vec::new();
        let mut h = vec![vec![C64::new(0.0, 0.0); restart]; restart + 1];
        let (mut cs, mut sn) = (vec![C64::new(0.0, 0.0); restart], vec![C64::new(0.0, 0.0); restart]);
        let mut g = vec![C64::new(0.0, 0.0); restart + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..restart {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            for i in 0..=k {
                h[i][k] = vdot(&v[i], &w);
                w = w - &v[i] * h[i][k];
            }
            let hn = norm(&w);
            h[k + 1][k] = C64::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * h[i][k] + sn[i].conj() * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = (h[k][k].norm_sqr() + h[k + 1][k].norm_sqr()).sqrt();
            if den == 0.0 {
                return Err(Error::Numerical("GMRES breakdown".into()));
            }
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = C64::new(den, 0.0);
            h[k + 1][k] = C64::new(0.0, 0.0);
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].norm() <= tol * bnorm || hn == 0.0 {
                break;
            }
            v.push(w / C64::new(hn, 0.0));
        }
        let mut y = vec![C64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (zi, yi) in z.iter().zip(y.iter()) {
            x = x + zi * *yi;
        }
        if total >= max_iter {
            let res = norm(&(b - &apply(&x))) / bnorm;
            if res <= tol {
                return Ok(x);
            }
            return Err(Error::Numerical(format!("GMRES did not converge: relative residual {res:.3e}")));
        }
    }
}

pub fn norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|c| (0..n).map(|r| a[[r, c]].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / C64::new(2f64.powi(s), 0.0);
    let mut term = Array2::<C64>::eye(n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = term.dot(&b) / C64::new(k as f64, 0.0);
        sum = sum + &term;
        if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.dot(&sum);
    }
    sum
}
