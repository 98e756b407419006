//! Photon-mediated dipole-dipole couplings from the free-space Green's tensor.

use std::f64::consts::PI;
use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{ArrayGeometry, ModeVector};
use crate::C64;

pub type Tensor3 = [[C64; 3]; 3];

/// G(r) = e^{ikr}/(4πr)·[(1 + i/kr − 1/(kr)²)·I − (1 + 3i/kr − 3/(kr)²)·r̂⊗r̂].
pub fn greens_tensor(r: [f64; 3], k: f64) -> Result<Tensor3> {
    let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if !(d > 0.0) {
        return invalid("Green's tensor at zero separation");
    }
    let (a, b) = radial_parts(d, k);
    let rh = [r[0] / d, r[1] / d, r[2] / d];
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            g[i][j] = a * id - b * (rh[i] * rh[j]);
        }
    }
    Ok(g)
}

/// Coefficients (A, B) with G = A·I − B·r̂⊗r̂.
fn radial_parts(d: f64, k: f64) -> (C64, C64) {
    let x = k * d;
    let pre = C64::from_polar(1.0, x) / (4.0 * PI * d);
    let i = C64::i();
    let a = pre * (1.0 + i / x - 1.0 / (x * x));
    let b = pre * (1.0 + 3.0 * i / x - 3.0 / (x * x));
    (a, b)
}

/// Dipole orientation presets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// (x̂ + iŷ)/√2, isotropic in the array plane.
    Circular,
    /// ŷ, perpendicular to the plane of incidence (x–z).
    LinearY,
    /// x̂, inside the plane of incidence.
    LinearX,
}

impl Polarization {
    pub fn vector(self) -> [C64; 3] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        match self {
            Polarization::Circular => [C64::new(s, 0.0), C64::new(0.0, s), z],
            Polarization::LinearY => [z, C64::new(1.0, 0.0), z],
            Polarization::LinearX => [C64::new(1.0, 0.0), z, z],
        }
    }
}

/// Real coupling matrices J and Γ (units of Γ) with Γ_jj = 1 and J_jj = 0.
#[derive(Clone, Debug)]
pub struct CouplingMatrix {
    pub j: Array2<f64>,
    pub gam: Array2<f64>,
    pub orientation: [C64; 3],
    pub k: f64,
}

impl CouplingMatrix {
    pub fn len(&self) -> usize {
        self.j.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.j.nrows() == 0
    }

    /// K = J + iΓ/2, including the single-atom diagonal i/2.
    pub fn complex(&self) -> Array2<C64> {
        let mut k = Array2::zeros(self.j.raw_dim());
        ndarray::Zip::from(&mut k)
            .and(&self.j)
            .and(&self.gam)
            .for_each(|k, &j, &g| *k = C64::new(j, 0.5 * g));
        k
    }

    const MAGIC: u32 = 0x4d4c_5043;

    /// Header {magic u32, N u32, k f64}, then J and Γ row-major, then the orientation (re, im).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.len();
        w.write_all(&Self::MAGIC.to_le_bytes())?;
        w.write_all(&(n as u32).to_le_bytes())?;
        w.write_all(&self.k.to_le_bytes())?;
        for x in self.j.iter().chain(self.gam.iter()) {
            w.write_all(&x.to_le_bytes())?;
        }
        for z in &self.orientation {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != Self::MAGIC {
            return Err(Error::Data("bad coupling-matrix magic".into()));
        }
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let k = f64::from_le_bytes(b8);
        let mut next = || -> Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let read_mat = |next: &mut dyn FnMut() -> Result<f64>| -> Result<Array2<f64>> {
            let v = (0..n * n).map(|_| next()).collect::<Result<Vec<_>>>()?;
            Ok(Array2::from_shape_vec((n, n), v).expect("shape"))
        };
        let j = read_mat(&mut next)?;
        let gam = read_mat(&mut next)?;
        let mut orientation = [C64::new(0.0, 0.0); 3];
        for o in &mut orientation {
            let re = next()?;
            *o = C64::new(re, next()?);
        }
        Ok(Self { j, gam, orientation, k })
    }
}

fn contract(d: &[C64; 3], g: &Tensor3) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for a in 0..3 {
        for b in 0..3 {
            s += d[a].conj() * g[a][b] * d[b];
        }
    }
    s
}

/// Pair coupling J + iΓ/2 = (3π/k)·d̂*·G(r)·d̂ for an in-plane separation.
pub fn pair_coupling(dx: f64, dy: f64, orientation: &[C64; 3], k: f64) -> Result<C64> {
    let g = greens_tensor([dx, dy, 0.0], k)?;
    Ok(3.0 * PI / k * contract(orientation, &g))
}

pub fn coupling_matrix(geom: &ArrayGeometry, orientation: [C64; 3]) -> Result<CouplingMatrix> {
    let norm: f64 = orientation.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return invalid(format!("orientation must be a unit vector (|d|² = {norm})"));
    }
    if geom.is_empty() {
        return invalid("geometry has no atoms");
    }
    let n = geom.len();
    let k = crate::units::K;
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let p = geom.positions[r];
            (0..n)
                .map(|c| {
                    if c == r {
                        return C64::new(0.0, 0.5);
                    }
                    let q = geom.positions[c];
                    pair_coupling(p[0] - q[0], p[1] - q[1], &orientation, k).expect("distinct sites")
                })
                .collect()
        })
        .collect();
    let mut j = Array2::zeros((n, n));
    let mut gam = Array2::zeros((n, n));
    for (r, row) in rows.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            j[[r, c]] = z.re;
            gam[[r, c]] = 2.0 * z.im;
        }
    }
    // exact symmetry regardless of rounding in the two evaluation orders
    for r in 0..n {
        for c in 0..r {
            let (js, gs) = (0.5 * (j[[r, c]] + j[[c, r]]), 0.5 * (gam[[r, c]] + gam[[c, r]]));
            j[[r, c]] = js;
            j[[c, r]] = js;
            gam[[r, c]] = gs;
            gam[[c, r]] = gs;
        }
    }
    Ok(CouplingMatrix { j, gam, orientation, k })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollectiveTag {
    LatticeSum,
    ModeWeighted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectiveParams {
    pub delta_c: f64,
    pub gamma_c: f64,
    pub tag: CollectiveTag,
}

/// Both collective-parameter variants.
#[derive(Clone, Copy, Debug)]
pub struct Collective {
    pub lattice_sum: CollectiveParams,
    pub mode_weighted: CollectiveParams,
}

/// Σ_{j} M_{i0 j} over the central row: Δc from J (j ≠ i0), Γc from Γ (all j).
pub fn lattice_sum(j: &Array2<f64>, gam: &Array2<f64>, center: usize) -> CollectiveParams {
    let n = j.nrows();
    let delta_c = (0..n).filter(|&c| c != center).map(|c| j[[center, c]]).sum();
    let gamma_c = (0..n).map(|c| gam[[center, c]]).sum();
    CollectiveParams { delta_c, gamma_c, tag: CollectiveTag::LatticeSum }
}

/// u†Xu/u†u for the real symmetric matrices J and Γ.
pub fn mode_weighted(j: &Array2<f64>, gam: &Array2<f64>, u: &Array1<C64>) -> CollectiveParams {
    let quad = |m: &Array2<f64>| -> f64 {
        let mu: Array1<C64> = m.mapv(|x| C64::new(x, 0.0)).dot(u);
        u.iter().zip(mu.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re
    };
    let nrm: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    CollectiveParams { delta_c: quad(j) / nrm, gamma_c: quad(gam) / nrm, tag: CollectiveTag::ModeWeighted }
}

pub fn collective_parameters(
    geom: &ArrayGeometry,
    coupling: &CouplingMatrix,
    mode: &ModeVector,
) -> Result<Collective> {
    if coupling.len() != mode.len() || coupling.len() != geom.len() {
        return invalid("coupling, mode and geometry sizes differ");
    }
    Ok(Collective {
        lattice_sum: lattice_sum(&coupling.j, &coupling.gam, geom.central_site()),
        mode_weighted: mode_weighted(&coupling.j, &coupling.gam, &mode.u),
    })
}
