//! Array geometries and sampled transverse modes.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::C64;

/// How the square patch is trimmed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Keep sites with |(i,j)| ≤ (nside−1)/2.
    Disc,
    /// Keep the full nside × nside square.
    Square,
    /// Square for nside ≤ 9, disc above.
    Auto,
}

impl Shape {
    fn resolve(self, nside: usize) -> Shape {
        match self {
            Shape::Auto if nside <= 9 => Shape::Square,
            Shape::Auto => Shape::Disc,
            s => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArrayGeometry {
    pub nside: usize,
    pub a: f64,
    pub positions: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct RawGeometry {
    nside: usize,
    a: f64,
    positions: Vec<[f64; 2]>,
}

impl<'de> Deserialize<'de> for ArrayGeometry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawGeometry::deserialize(d)?;
        ArrayGeometry::from_positions(raw.nside, raw.a, raw.positions)
            .map_err(serde::de::Error::custom)
    }
}

impl ArrayGeometry {
    /// Validates an explicit position list: sites on the lattice, unique, inside the nominal square.
    pub fn from_positions(nside: usize, a: f64, positions: Vec<[f64; 2]>) -> Result<Self> {
        if !(a > 0.0) {
            return invalid("lattice constant must be positive");
        }
        if positions.is_empty() {
            return invalid("geometry has no atoms");
        }
        let half = (nside as f64 - 1.0) / 2.0;
        let mut seen = std::collections::BTreeSet::new();
        for (idx, p) in positions.iter().enumerate() {
            let (fi, fj) = (p[0] / a, p[1] / a);
            let (i, j) = (fi.round(), fj.round());
            if (fi - i).abs() > 1e-9 || (fj - j).abs() > 1e-9 {
                return invalid(format!("position {idx} is off the lattice"));
            }
            if i.abs() > half + 1e-9 || j.abs() > half + 1e-9 {
                return invalid(format!("position {idx} lies outside the nside={nside} patch"));
            }
            if !seen.insert((i as i64, j as i64)) {
                return invalid(format!("position {idx} is duplicated"));
            }
        }
        Ok(Self { nside, a, positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("geometry serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| crate::Error::InvalidInput(e.to_string()))
    }

    /// Index of the site closest to the origin.
    pub fn central_site(&self) -> usize {
        let r2 = |p: &[f64; 2]| p[0] * p[0] + p[1] * p[1];
        (0..self.len())
            .min_by(|&x, &y| r2(&self.positions[x]).total_cmp(&r2(&self.positions[y])))
            .unwrap_or(0)
    }

    pub fn distance(&self, j: usize, k: usize) -> f64 {
        let (p, q) = (self.positions[j], self.positions[k]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }
}

pub fn build_disc_array(nside: usize, a: f64) -> Result<ArrayGeometry> {
    build_array(nside, a, Shape::Disc)
}

pub fn build_array(nside: usize, a: f64, shape: Shape) -> Result<ArrayGeometry> {
    if nside == 0 || nside % 2 == 0 {
        return invalid(format!("nside must be odd and positive, got {nside}"));
    }
    if !(a > 0.0) {
        return invalid("lattice constant must be positive");
    }
    let h = ((nside - 1) / 2) as i64;
    let disc = shape.resolve(nside) == Shape::Disc;
    let mut positions = Vec::new();
    for i in -h..=h {
        for j in -h..=h {
            if disc && i * i + j * j > h * h {
                continue;
            }
            positions.push([a * i as f64, a * j as f64]);
        }
    }
    Ok(ArrayGeometry { nside, a, positions })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug)]
pub struct ModeVector {
    pub u: Array1<C64>,
    pub w0: f64,
    pub theta: f64,
    pub direction: Direction,
    /// a²·Σ|u_j|², the lattice Riemann sum of ∫|u|².
    pub norm_area: f64,
}

impl ModeVector {
    pub fn norm_sqr(&self) -> f64 {
        self.u.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// 1/cosθ: the mode's photon flux through the array plane is reduced by cosθ, so its
    /// coupling to the sheet of dipoles is enhanced by the inverse.
    pub fn obliquity(&self) -> f64 {
        1.0 / self.theta.cos()
    }

    /// Same profile with a global phase applied.
    pub fn with_phase(&self, phi: f64) -> Self {
        let mut m = self.clone();
        let z = C64::from_polar(1.0, phi);
        m.u.mapv_inplace(|x| x * z);
        m
    }
}

/// Gaussian beam sampled at the atom sites, with tilt entering as an in-plane phase.
pub fn gaussian_mode(geom: &ArrayGeometry, w0: f64, theta: f64, direction: Direction) -> Result<ModeVector> {
    if !(w0 > 0.0) {
        return invalid("waist must be positive");
    }
    if !(theta.abs() < std::f64::consts::FRAC_PI_2) {
        return invalid("|theta| must be below pi/2");
    }
    let amp = (2.0 / (std::f64::consts::PI * w0 * w0)).sqrt();
    let kx = crate::units::K * theta.sin();
    let u: Array1<C64> = geom
        .positions
        .iter()
        .map(|p| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            C64::from_polar(amp * (-r2 / (w0 * w0)).exp(), kx * p[0])
        })
        .collect();
    let norm_area = geom.a * geom.a * u.iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok(ModeVector { u, w0, theta, direction, norm_area })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BraggCheck {
    pub ok: bool,
    pub margin: f64,
}

/// Sub-diffraction condition a ≤ 1/(1+sinθ).
pub fn validate_bragg(a: f64, theta: f64) -> BraggCheck {
    let bound = 1.0 / (1.0 + theta.sin());
    BraggCheck { ok: a <= bound, margin: bound - a }
}

/// Angle above which a lattice of constant `a` admits a diffracted order.
pub fn bragg_threshold_angle(a: f64) -> Option<f64> {
    let s = 1.0 / a - 1.0;
    (0.0..1.0).contains(&s).then(|| s.asin())
}
