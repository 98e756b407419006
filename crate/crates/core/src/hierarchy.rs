//! Weak-drive amplitude hierarchy: singles y and pairs C driven by a coherent input f(t).
//!
//! ```text
//! ẏ = G y + b f(t)
//! Ċ = G C + C Gᵀ + L∘C + (b yᵀ + y bᵀ) f(t)      (pairs masked to allowed entries)
//! ψ(t) = f(t) + oᵀy
//! ```
//!
//! The stiff diagonal L (interaction shifts) is integrated exactly with ETDRK4;
//! on the singles it reduces to classical RK4. Two-time correlations are
//! built from the conditional state after one detection, propagated in
//! closed form between output samples.

use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, Zip};

use crate::error::{invalid, Error, Result};
use crate::linalg::expm;
use crate::C64;

/// Uniform output grid with `substeps` integration steps per sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    pub substeps: usize,
}

impl TimeGrid {
    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|i| self.t(i)).collect()
    }
}

/// One- and two-photon output amplitudes on a common uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPhotonGrid {
    pub t0: f64,
    pub dt: f64,
    /// Input envelope samples.
    pub input: Array1<C64>,
    pub psi: Array1<C64>,
    /// Full symmetric nt × nt matrix.
    pub psi2: Array2<C64>,
}

const GRID_MAGIC: u32 = 0x3259_5350;

impl TwoPhotonGrid {
    pub fn nt(&self) -> usize {
        self.psi.len()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt()).map(|i| self.t0 + i as f64 * self.dt).collect()
    }

    pub fn p1(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn p2(&self) -> f64 {
        kink_integral(&self.psi2.mapv(|z| C64::new(z.norm_sqr(), 0.0)), self.dt).re
    }

    pub fn input_norm(&self) -> f64 {
        self.input.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt
    }

    /// ψ_b = ψ₂ − ψ⊗ψ.
    pub fn bound_state(&self) -> Array2<C64> {
        let n = self.nt();
        let mut b = self.psi2.clone();
        for i in 0..n {
            for j in 0..n {
                b[[i, j]] -= self.psi[i] * self.psi[j];
            }
        }
        b
    }

    /// Header {magic u32, nt u32, dt f64, t0 f64}, then ψ₂ row-major as (re, im) doubles, little endian.
    pub fn write_psi2<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&GRID_MAGIC.to_le_bytes())?;
        w.write_all(&(self.nt() as u32).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.t0.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.psi2.len() * 16);
        for z in self.psi2.iter() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads a grid written by [`write_psi2`](Self::write_psi2); returns (t0, dt, ψ₂).
    pub fn read_psi2<R: Read>(mut r: R) -> Result<(f64, f64, Array2<C64>)> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != GRID_MAGIC {
            return Err(Error::Data("not a two-photon grid file".into()));
        }
        r.read_exact(&mut b4)?;
        let nt = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let dt = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let t0 = f64::from_le_bytes(b8);
        let mut raw = vec![0u8; nt * nt * 16];
        r.read_exact(&mut raw)?;
        let vals: Vec<C64> = raw
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        let m = Array2::from_shape_vec((nt, nt), vals).map_err(|e| Error::Data(e.to_string()))?;
        Ok((t0, dt, m))
    }
}

/// Linear generator, source and readout of a weakly driven system.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub gen: Array2<C64>,
    pub drive: Array1<C64>,
    pub out: Array1<C64>,
    /// Stiff diagonal rate on pair entries.
    pub pair_rate: Array2<C64>,
    /// Pair entries that may be populated.
    pub allowed: Array2<bool>,
    /// No pair nonlinearity: ψ₂ = ψ⊗ψ exactly and the pair sector is skipped.
    pub linear: bool,
}

fn phis(z: C64) -> (C64, C64, C64) {
    if z.norm() < 1.0 {
        let (mut p1, mut p2, mut p3) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let mut zm = C64::new(1.0, 0.0);
        // factorials (m+1)!, (m+2)!, (m+3)!
        let (mut f1, mut f2, mut f3) = (1.0, 2.0, 6.0);
        for m in 0..30 {
            p1 += zm / f1;
            p2 += zm / f2;
            p3 += zm / f3;
            zm *= z;
            let k = m as f64;
            f1 *= k + 2.0;
            f2 *= k + 3.0;
            f3 *= k + 4.0;
        }
        (p1, p2, p3)
    } else {
        let e = z.exp();
        let p1 = (e - 1.0) / z;
        let p2 = (e - 1.0 - z) / (z * z);
        let p3 = (e - 1.0 - z - z * z / 2.0) / (z * z * z);
        (p1, p2, p3)
    }
}

struct EtdCoeffs {
    e: Array2<C64>,
    e2: Array2<C64>,
    q: Array2<C64>,
    f1: Array2<C64>,
    f2: Array2<C64>,
    f3: Array2<C64>,
}

impl EtdCoeffs {
    fn new(rate: &Array2<C64>, h: f64) -> Self {
        let shape = rate.raw_dim();
        let mut c = EtdCoeffs {
            e: Array2::zeros(shape),
            e2: Array2::zeros(shape),
            q: Array2::zeros(shape),
            f1: Array2::zeros(shape),
            f2: Array2::zeros(shape),
            f3: Array2::zeros(shape),
        };
        for ((i, j), l) in rate.indexed_iter() {
            let z = l * h;
            let (p1, p2, p3) = phis(z);
            let (h1, _, _) = phis(z / 2.0);
            c.e[[i, j]] = z.exp();
            c.e2[[i, j]] = (z / 2.0).exp();
            c.q[[i, j]] = h1 * (h / 2.0);
            c.f1[[i, j]] = (p1 - p2 * 3.0 + p3 * 4.0) * h;
            c.f2[[i, j]] = (p2 - p3 * 2.0) * h;
            c.f3[[i, j]] = (p3 * 4.0 - p2) * h;
        }
        c
    }
}

struct State {
    y: Array1<C64>,
    c: Array2<C64>,
}

impl Hierarchy {
    fn validate(&self) -> Result<()> {
        let n = self.gen.nrows();
        if self.gen.ncols() != n || self.drive.len() != n || self.out.len() != n {
            return invalid("hierarchy dimensions disagree");
        }
        if !self.linear && (self.pair_rate.dim() != (n, n) || self.allowed.dim() != (n, n)) {
            return invalid("pair arrays must be n × n");
        }
        Ok(())
    }

    fn rhs(&self, s: &State, f: C64, pairs: bool) -> State {
        let dy = self.gen.dot(&s.y) + &self.drive * f;
        let dc = if pairs {
            let x = self.gen.dot(&s.c);
            let mut dc = &x + &x.t();
            Zip::indexed(&mut dc).for_each(|(i, j), v| {
                if self.allowed[[i, j]] {
                    *v += (self.drive[i] * s.y[j] + s.y[i] * self.drive[j]) * f;
                } else {
                    *v = C64::new(0.0, 0.0);
                }
            });
            dc
        } else {
            Array2::zeros((0, 0))
        };
        State { y: dy, c: dc }
    }

    /// Integrates from rest at `grid.t0` and returns ψ and ψ₂ normalised to the input amplitude.
    pub fn run<F: Fn(f64) -> C64>(&self, f: F, grid: &TimeGrid) -> Result<TwoPhotonGrid> {
        self.validate()?;
        if grid.nt < 2 || grid.substeps == 0 || !(grid.dt > 0.0) {
            return invalid("time grid needs nt ≥ 2, dt > 0 and at least one substep");
        }
        let n = self.gen.nrows();
        let h = grid.dt / grid.substeps as f64;
        let pairs = !self.linear;
        let etd = pairs.then(|| EtdCoeffs::new(&self.pair_rate, h));
        let mut st = State {
            y: Array1::zeros(n),
            c: if pairs { Array2::zeros((n, n)) } else { Array2::zeros((0, 0)) },
        };

        let nt = grid.nt;
        let input: Array1<C64> = (0..nt).map(|i| f(grid.t(i))).collect();
        let mut psi = Array1::<C64>::zeros(nt);
        let mut psi2 = Array2::<C64>::zeros((nt, nt));
        // conditional states, one column per detection time
        let mut cols = Array2::<C64>::zeros((n, if pairs { nt } else { 0 }));
        let prop = expm(&(&self.gen * C64::new(grid.dt, 0.0)));

        let norm0: f64 = input.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dt;
        for i in 0..nt {
            let t = grid.t(i);
            let fi = input[i];
            let oy = self.out.dot(&st.y);
            psi[i] = fi + oy;
            if !psi[i].is_finite() {
                return Err(Error::Numerical(format!("output diverged at t = {t}")));
            }
            if pairs && i > 0 {
                let active = cols.slice(s![.., ..i]).to_owned();
                let moved = prop.dot(&active);
                cols.slice_mut(s![.., ..i]).assign(&moved);
                let row = self.out.dot(&moved);
                for (j, v) in row.iter().enumerate() {
                    psi2[[i, j]] = *v;
                }
            }
            if pairs {
                let co = st.c.dot(&self.out);
                let w = &st.y * (fi - psi[i]) + &co;
                psi2[[i, i]] = self.out.dot(&w);
                cols.column_mut(i).assign(&w);
            }
            if i + 1 < nt {
                for k in 0..grid.substeps {
                    let ts = t + k as f64 * h;
                    st = self.step(&st, &f, ts, h, etd.as_ref());
                }
            }
        }

        // symmetrise and add the factorised part
        for i in 0..nt {
            for j in 0..=i {
                let v = if pairs { psi2[[i, j]] } else { C64::new(0.0, 0.0) } + psi[i] * psi[j];
                psi2[[i, j]] = v;
                psi2[[j, i]] = v;
            }
        }
        let out = TwoPhotonGrid { t0: grid.t0, dt: grid.dt, input, psi, psi2 };
        let tol = 1e-6 * norm0.max(1.0);
        if out.p1() > norm0 + tol || out.p2() > norm0 * norm0 + tol {
            return Err(Error::Numerical(format!(
                "output norm exceeds input (P1 = {}, P2 = {}); step too large",
                out.p1(),
                out.p2()
            )));
        }
        Ok(out)
    }

    fn step<F: Fn(f64) -> C64>(&self, u: &State, f: &F, t: f64, h: f64, etd: Option<&EtdCoeffs>) -> State {
        let pairs = etd.is_some();
        let (f0, fh, f1) = (f(t), f(t + h / 2.0), f(t + h));
        let nu = self.rhs(u, f0, pairs);
        let hh = C64::new(h / 2.0, 0.0);
        // singles: RK4; pairs: ETDRK4 with the diagonal rate
        let ya = &u.y + &(&nu.y * hh);
        let ca = etd.map(|e| &e.e2 * &u.c + &e.q * &nu.c);
        let sa = State { y: ya, c: ca.unwrap_or_else(|| Array2::zeros((0, 0))) };
        let na = self.rhs(&sa, fh, pairs);
        let yb = &u.y + &(&na.y * hh);
        let cb = etd.map(|e| &e.e2 * &u.c + &e.q * &na.c);
        let sb = State { y: yb, c: cb.unwrap_or_else(|| Array2::zeros((0, 0))) };
        let nb = self.rhs(&sb, fh, pairs);
        let yc = &u.y + &(&nb.y * C64::new(h, 0.0));
        let cc = etd.map(|e| &e.e2 * &sa.c + &e.q * &(&nb.c * 2.0 - &nu.c));
        let sc = State { y: yc, c: cc.unwrap_or_else(|| Array2::zeros((0, 0))) };
        let nc = self.rhs(&sc, f1, pairs);
        let y = &u.y + &((&nu.y + &(&na.y + &nb.y) * 2.0 + &nc.y) * C64::new(h / 6.0, 0.0));
        let c = match etd {
            Some(e) => &e.e * &u.c + &e.f1 * &nu.c + &(&e.f2 * &(&na.c + &nb.c)) * 2.0 + &e.f3 * &nc.c,
            None => Array2::zeros((0, 0)),
        };
        State { y, c }
    }
}

/// ∬ m over the grid, with an Euler–Maclaurin correction for the derivative jump across t = t′.
pub fn kink_integral(m: &Array2<C64>, dt: f64) -> C64 {
    let n = m.nrows();
    let mut total = C64::new(0.0, 0.0);
    for i in 0..n {
        let row = m.row(i);
        let mut r: C64 = row.sum() * dt;
        if i >= 2 && i + 2 < n {
            let dm = (row[i] * 3.0 - row[i - 1] * 4.0 + row[i - 2]) / (2.0 * dt);
            let dp = (row[i] * -3.0 + row[i + 1] * 4.0 - row[i + 2]) / (2.0 * dt);
            r -= (dm - dp) * (dt * dt / 12.0);
        }
        total += r * dt;
    }
    total
}

/// Catmull–Rom interpolation of uniformly sampled complex data; zero outside the samples.
pub fn interpolate_samples(samples: &Array1<C64>, t0: f64, dt: f64, t: f64) -> C64 {
    let n = samples.len();
    let last = n.saturating_sub(1) as f64;
    // sample times rebuilt as t0 + i·dt may overshoot the end by an ulp
    let slack = 1e-9 * last.max(1.0);
    let x = (t - t0) / dt;
    if n == 0 || x < -slack || x > last + slack {
        return C64::new(0.0, 0.0);
    }
    let x = x.clamp(0.0, last);
    let i = (x.floor() as usize).min(n.saturating_sub(2));
    let u = x - i as f64;
    let get = |k: isize| -> C64 {
        if k < 0 || k as usize >= n {
            C64::new(0.0, 0.0)
        } else {
            samples[k as usize]
        }
    };
    let (p0, p1, p2, p3) = (get(i as isize - 1), get(i as isize), get(i as isize + 1), get(i as isize + 2));
    let u2 = u * u;
    let u3 = u2 * u;
    (p1 * 2.0 + (p2 - p0) * u + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * u2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * u3) * 0.5
}
