//! Two-excitation steady state under weak cw drive and equal-time photon correlations.
//!
//! Pair amplitudes obey
//! B·C + C·Bᵀ − U∘C = −(d·sᵀ + s·dᵀ)
//! on every pair of single-excitation states that sit on different atoms, where B is the
//! single-excitation generator, s = −B⁻¹d the singles and U the pair shift.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Inverse, Solve};
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMatrix;
use crate::error::{invalid, Error, Result};
use crate::lattice::{ArrayGeometry, ModeVector};
use crate::linalg::{eig, gmres, solve};
use crate::steady_state::{DriveParams, EffectiveParams};
use crate::units::G2_OVER_C;
use crate::C64;

/// Largest pair-unknown count solved by dense LU.
const DENSE_PAIRS: usize = 8000;
/// Basis-size guard of the three-level oracle.
pub const MAX_ATOMS_3LEVEL: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InteractionModel {
    /// U = C6/r⁶ on doubly excited Rydberg pairs; negative C6 is attractive.
    Vdw { c6: f64 },
    /// Pairs closer than r_b are removed from the basis.
    HardBlockade { r_b: f64 },
    /// Linear optics: harmonic emitters without saturation or interaction, pairs factorize exactly.
    None,
}

enum PairShift {
    Finite(f64),
    Blocked,
}

impl InteractionModel {
    fn shift(&self, r: f64) -> PairShift {
        match *self {
            InteractionModel::Vdw { c6 } => PairShift::Finite(c6 / r.powi(6)),
            InteractionModel::HardBlockade { r_b } if r < r_b => PairShift::Blocked,
            _ => PairShift::Finite(0.0),
        }
    }
}

/// Singles and pairs of the truncated amplitude hierarchy together with the output projection.
#[derive(Clone, Debug)]
pub struct PairAmplitudes {
    /// Single-excitation amplitudes over the single-state basis (N for two-level, 2N for three-level).
    pub singles: Array1<C64>,
    /// Symmetric pair amplitudes ⟨σ_p σ_q⟩; entries of forbidden pairs are zero. The diagonal
    /// is populated only by the linear model, where emitters are harmonic.
    pub pairs: Array2<C64>,
    /// w with â = a_in + iκ·w·σ: u*_j on emitting states, zero elsewhere.
    pub projection: Array1<C64>,
    pub kappa: f64,
    /// Coherent input amplitude in the driven port.
    pub a_in: f64,
}

impl PairAmplitudes {
    /// Σ w_p s_p.
    pub fn single_projection(&self) -> C64 {
        self.projection.iter().zip(self.singles.iter()).map(|(w, s)| w * s).sum()
    }

    /// Σ_pq w_p w_q C_pq.
    pub fn pair_projection(&self) -> C64 {
        let wc = self.pairs.dot(&self.projection);
        self.projection.iter().zip(wc.iter()).map(|(w, x)| w * x).sum()
    }
}

/// Output port of a forward-driven array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    /// Transmitted light (→).
    Forward,
    /// Reflected light (←).
    Backward,
}

/// Single-state structure shared by the two- and three-level pair problems.
struct PairProblem {
    gen: Array2<C64>,
    drive: Array1<C64>,
    /// Pair shift per state pair; `None` marks a forbidden pair.
    shift: Array2<Option<f64>>,
}

impl PairProblem {
    fn solve(&self) -> Result<(Array1<C64>, Array2<C64>)> {
        let ns = self.gen.nrows();
        let singles = -solve(&self.gen, &self.drive)?;
        let mut index = vec![usize::MAX; ns * ns];
        let mut list = Vec::new();
        for p in 0..ns {
            for q in p + 1..ns {
                if self.shift[[p, q]].is_some() {
                    index[p * ns + q] = list.len();
                    index[q * ns + p] = list.len();
                    list.push((p, q));
                }
            }
        }
        let rhs: Array1<C64> = list
            .iter()
            .map(|&(p, q)| -(self.drive[p] * singles[q] + singles[p] * self.drive[q]))
            .collect();
        let x = if list.len() <= DENSE_PAIRS {
            self.dense(&index, &list, &rhs)?
        } else {
            self.iterative(&list, &rhs)?
        };
        let mut pairs = Array2::zeros((ns, ns));
        for (k, &(p, q)) in list.iter().enumerate() {
            pairs[[p, q]] = x[k];
            pairs[[q, p]] = x[k];
        }
        Ok((singles, pairs))
    }

    fn dense(&self, index: &[usize], list: &[(usize, usize)], rhs: &Array1<C64>) -> Result<Array1<C64>> {
        let ns = self.gen.nrows();
        let np = list.len();
        let mut m = Array2::<C64>::zeros((np, np));
        for (row, &(p, q)) in list.iter().enumerate() {
            for l in 0..ns {
                let bp = self.gen[[p, l]];
                if bp != C64::new(0.0, 0.0) {
                    let c = index[l * ns + q];
                    if c != usize::MAX {
                        m[[row, c]] += bp;
                    }
                }
                let bq = self.gen[[q, l]];
                if bq != C64::new(0.0, 0.0) {
                    let c = index[p * ns + l];
                    if c != usize::MAX {
                        m[[row, c]] += bq;
                    }
                }
            }
            m[[row, row]] -= self.shift[[p, q]].unwrap_or(0.0);
        }
        let x = m
            .solve_into(rhs.clone())
            .map_err(|e| Error::Numerical(format!("pair system is singular: {e}")))?;
        if x.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical("pair system is singular".into()));
        }
        Ok(x)
    }

    /// Matrix-free GMRES; preconditioned by the interaction-free Sylvester inverse on weakly
    /// shifted pairs and by the diagonal on strongly shifted ones.
    fn iterative(&self, list: &[(usize, usize)], rhs: &Array1<C64>) -> Result<Array1<C64>> {
        let ns = self.gen.nrows();
        let scatter = |x: &Array1<C64>| {
            let mut c = Array2::<C64>::zeros((ns, ns));
            for (k, &(p, q)) in list.iter().enumerate() {
                c[[p, q]] = x[k];
                c[[q, p]] = x[k];
            }
            c
        };
        let apply = |x: &Array1<C64>| -> Array1<C64> {
            let c = scatter(x);
            let bc = self.gen.dot(&c);
            list.iter()
                .enumerate()
                .map(|(k, &(p, q))| bc[[p, q]] + bc[[q, p]] - self.shift[[p, q]].unwrap_or(0.0) * x[k])
                .collect()
        };
        let (lam, v) = eig(&self.gen)?;
        let vinv = v
            .inv()
            .map_err(|e| Error::Numerical(format!("eigenvector inversion failed: {e}")))?;
        let scale = lam.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let stiff = |p: usize, q: usize| self.shift[[p, q]].unwrap_or(0.0).abs() > 10.0 * scale;
        let precond = |r: &Array1<C64>| -> Array1<C64> {
            let mut soft = Array2::<C64>::zeros((ns, ns));
            for (k, &(p, q)) in list.iter().enumerate() {
                if !stiff(p, q) {
                    soft[[p, q]] = r[k];
                    soft[[q, p]] = r[k];
                }
            }
            let mut t = vinv.dot(&soft).dot(&vinv.t());
            for m in 0..ns {
                for n in 0..ns {
                    t[[m, n]] /= lam[m] + lam[n];
                }
            }
            let c = v.dot(&t).dot(&v.t());
            list.iter()
                .enumerate()
                .map(|(k, &(p, q))| {
                    if stiff(p, q) {
                        r[k] / (self.gen[[p, p]] + self.gen[[q, q]] - self.shift[[p, q]].unwrap_or(0.0))
                    } else {
                        c[[p, q]]
                    }
                })
                .collect()
        };
        gmres(apply, precond, rhs, 1e-11, 60, 3000)
    }
}

pub(crate) fn pair_shifts(geom: &ArrayGeometry, interaction: &InteractionModel) -> Array2<Option<f64>> {
    let n = geom.len();
    let mut s = Array2::from_elem((n, n), None);
    for j in 0..n {
        for k in 0..n {
            if j != k {
                s[[j, k]] = match interaction.shift(geom.distance(j, k)) {
                    PairShift::Finite(u) => Some(u),
                    PairShift::Blocked => None,
                };
            }
        }
    }
    s
}

fn check_weak(omega_p: f64) -> Result<()> {
    if !(omega_p > 0.0 && omega_p <= 0.01) {
        return invalid(format!("Ωp = {omega_p} is outside the weak-drive range (0, 0.01]"));
    }
    Ok(())
}

fn check_pair_size(n: usize) -> Result<()> {
    if n * n / 2 > 20_000_000 {
        return Err(Error::ResourceCap(format!("{n} atoms exceed the pair-solve memory guard; reduce problem size")));
    }
    Ok(())
}

/// Coherent-state pair amplitudes s_p·s_q, diagonal included.
fn outer(s: &Array1<C64>) -> Array2<C64> {
    Array2::from_shape_fn((s.len(), s.len()), |(p, q)| s[p] * s[q])
}

fn umax(mode: &ModeVector) -> f64 {
    mode.u.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Effective two-level pair steady state; the probe amplitude is a_in = Ωp/(g·max|u|).
pub fn pair_steady_state(
    geom: &ArrayGeometry,
    effective: &EffectiveParams,
    mode: &ModeVector,
    interaction: &InteractionModel,
    omega_p: f64,
) -> Result<PairAmplitudes> {
    check_weak(omega_p)?;
    let n = geom.len();
    if effective.len() != n || mode.len() != n {
        return invalid("geometry, effective parameters and mode sizes differ");
    }
    check_pair_size(n)?;
    let ob = mode.obliquity().sqrt();
    let a_in = omega_p / (G2_OVER_C.sqrt() * ob * umax(mode));
    let kappa = effective.g_bar() * ob;
    let gen = effective.generator();
    let drive = mode.u.mapv(|x| x * (kappa * a_in));
    let projection = mode.u.mapv(|x| x.conj());
    if let InteractionModel::None = interaction {
        let singles = -solve(&gen, &drive)?;
        let pairs = outer(&singles);
        return Ok(PairAmplitudes { singles, pairs, projection, kappa, a_in });
    }
    let problem = PairProblem { gen, drive, shift: pair_shifts(geom, interaction) };
    let (singles, pairs) = problem.solve()?;
    Ok(PairAmplitudes { singles, pairs, projection, kappa, a_in })
}

/// Full three-level pair steady state over states (j,e) = j and (j,r) = N + j.
pub fn pair_steady_state_3level(
    geom: &ArrayGeometry,
    coupling: &CouplingMatrix,
    drive: &DriveParams,
    mode: &ModeVector,
    interaction: &InteractionModel,
    omega_p: f64,
) -> Result<PairAmplitudes> {
    check_weak(omega_p)?;
    drive.validate()?;
    let n = geom.len();
    if n > MAX_ATOMS_3LEVEL {
        return Err(Error::ResourceCap(format!(
            "three-level pair oracle supports at most {MAX_ATOMS_3LEVEL} atoms, got {n}; reduce problem size"
        )));
    }
    if coupling.len() != n || mode.len() != n {
        return invalid("geometry, coupling and mode sizes differ");
    }
    let ns = 2 * n;
    let mut gen = Array2::<C64>::zeros((ns, ns));
    let k = coupling.complex();
    let two = C64::new(drive.delta_e + drive.delta_r, 0.5 * drive.gamma);
    for j in 0..n {
        for l in 0..n {
            gen[[j, l]] = k[[j, l]];
        }
        gen[[j, j]] += drive.delta_e;
        gen[[j, n + j]] = C64::new(drive.omega, 0.0);
        gen[[n + j, j]] = C64::new(drive.omega, 0.0);
        gen[[n + j, n + j]] = two;
    }
    let g = (G2_OVER_C * mode.obliquity()).sqrt();
    let a_in = omega_p / (g * umax(mode));
    let mut d = Array1::<C64>::zeros(ns);
    let mut projection = Array1::<C64>::zeros(ns);
    for j in 0..n {
        d[j] = mode.u[j] * (g * a_in);
        projection[j] = mode.u[j].conj();
    }
    if let InteractionModel::None = interaction {
        let singles = -solve(&gen, &d)?;
        let pairs = outer(&singles);
        return Ok(PairAmplitudes { singles, pairs, projection, kappa: g, a_in });
    }
    let atom: Vec<usize> = (0..ns).map(|p| p % n).collect();
    let base = pair_shifts(geom, interaction);
    let mut shift = Array2::from_elem((ns, ns), None);
    for p in 0..ns {
        for q in 0..ns {
            let (j, l) = (atom[p], atom[q]);
            if j == l {
                continue;
            }
            let both_r = p >= n && q >= n;
            shift[[p, q]] = match (both_r, base[[j, l]]) {
                (true, s) => s,
                (false, _) => Some(0.0),
            };
        }
    }
    let problem = PairProblem { gen, drive: d, shift };
    let (singles, pairs) = problem.solve()?;
    Ok(PairAmplitudes { singles, pairs, projection, kappa: g, a_in })
}

/// Equal-time g²_{αβ} = |⟨â_α â_β⟩|²/(⟨â†_α â_α⟩⟨â†_β â_β⟩) to leading order in the drive.
pub fn g2_equal_time(pair: &PairAmplitudes, ports: (Port, Port)) -> Result<f64> {
    let i = C64::i();
    let ik = i * pair.kappa;
    let s1 = ik * pair.single_projection();
    let s2 = ik * ik * pair.pair_projection();
    let input = |p: Port| match p {
        Port::Forward => C64::new(pair.a_in, 0.0),
        Port::Backward => C64::new(0.0, 0.0),
    };
    let (ia, ib) = (input(ports.0), input(ports.1));
    let a1 = |x: C64| x + s1;
    let (na, nb) = (a1(ia).norm_sqr(), a1(ib).norm_sqr());
    let scale = pair.a_in.powi(4);
    if na * nb < 1e-20 * scale {
        return Err(Error::Numerical(format!("port intensity underflow for {:?}", ports)));
    }
    let a2 = ia * ib + (ia + ib) * s1 + s2;
    Ok(a2.norm_sqr() / (na * nb))
}

/// (g²_←←, g²_→→, g²_←→).
pub fn g2_all(pair: &PairAmplitudes) -> Result<(f64, f64, f64)> {
    Ok((
        g2_equal_time(pair, (Port::Backward, Port::Backward))?,
        g2_equal_time(pair, (Port::Forward, Port::Forward))?,
        g2_equal_time(pair, (Port::Backward, Port::Forward))?,
    ))
}
