//! Two-beam-splitter unidirectional configuration and effective waveguide parameters.
//!
//! Splitting the input between both faces and recombining maps the array onto a
//! chiral emitter seen through the â port:
//! T(δ) = |(2δ + i(γ̃−Γ̃)) / (2δ + i(γ̃+Γ̃))|².

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, DVector, Dyn, Matrix, OMatrix, Vector3, U3};
use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMatrix;
use crate::error::{invalid, Error, Result};
use crate::lattice::ModeVector;
use crate::steady_state::{ArrayResponse, EffectiveParams};
use crate::C64;

/// (â, b̂) = ((a→ + a←)/√2, (a→ − a←)/√2).
pub fn symmetric_port_transform(a_fwd: C64, a_bwd: C64) -> (C64, C64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ((a_fwd + a_bwd) * s, (a_fwd - a_bwd) * s)
}

/// b-port to â-port intensity ratio for an array displaced by dz (units of λ):
/// the arms acquire opposite phases ±k·dz.
pub fn displacement_ratio_exact(dz: f64) -> f64 {
    (2.0 * std::f64::consts::PI * dz).tan().powi(2)
}

/// Small-displacement law 4π²(Δz/λ)².
pub fn displacement_ratio_quadratic(dz: f64) -> f64 {
    4.0 * std::f64::consts::PI.powi(2) * dz * dz
}

/// Ideal emitter transmission at detuning δ from the line centre.
pub fn emitter_transmission(delta: f64, gamma_tilde: f64, big_gamma_tilde: f64) -> f64 {
    let x = 4.0 * delta * delta;
    (x + (gamma_tilde - big_gamma_tilde).powi(2)) / (x + (gamma_tilde + big_gamma_tilde).powi(2))
}

/// â-port amplitude transmission t = 1 − iḡ²·v†(K̄ + Δ̄ + iγ/2)⁻¹v with v = (u→ + u←)/√2.
pub struct TwoSidedResponse {
    response: ArrayResponse,
    scale: f64,
    gamma: f64,
    /// Mode-weighted Δ̄c, the origin of δ.
    pub delta_bar_c: f64,
}

impl TwoSidedResponse {
    pub fn new(coupling: &CouplingMatrix, effective: &EffectiveParams, fwd: &ModeVector, bwd: &ModeVector) -> Result<Self> {
        if fwd.len() != bwd.len() || fwd.len() != coupling.len() {
            return invalid("mode and coupling sizes differ");
        }
        let asym = fwd.u.iter().zip(bwd.u.iter()).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(0.0, f64::max);
        let umax = fwd.u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > 1e-12 * umax {
            return invalid(format!("arms illuminate the atoms asymmetrically (max ||u→|−|u←|| = {asym:.3e})"));
        }
        let v: Array1<C64> = fwd.u.iter().zip(bwd.u.iter()).map(|(a, b)| (a + b) * std::f64::consts::FRAC_1_SQRT_2).collect();
        Ok(TwoSidedResponse {
            response: ArrayResponse::with_vector(coupling, &v, fwd.obliquity())?,
            scale: effective.scale,
            gamma: effective.gamma(),
            delta_bar_c: effective.collective_mode(fwd).delta_c,
        })
    }

    /// Amplitude at δ = Δ̄ + Δ̄c.
    pub fn amplitude(&self, delta: f64) -> Result<C64> {
        let r = self.response.reflection_2level(self.scale, delta - self.delta_bar_c, self.gamma)?;
        Ok(C64::new(1.0, 0.0) + r)
    }
}

/// Steady-state â-port amplitude t(δ) on a detuning grid.
pub fn two_sided_amplitudes(
    coupling: &CouplingMatrix,
    effective: &EffectiveParams,
    mode_fwd: &ModeVector,
    mode_bwd: &ModeVector,
    deltas: &[f64],
) -> Result<Vec<(f64, C64)>> {
    let resp = TwoSidedResponse::new(coupling, effective, mode_fwd, mode_bwd)?;
    deltas.par_iter().map(|&d| Ok((d, resp.amplitude(d)?))).collect()
}

/// Steady-state â-port transmission T(δ) on a detuning grid.
pub fn two_sided_spectrum(
    coupling: &CouplingMatrix,
    effective: &EffectiveParams,
    mode_fwd: &ModeVector,
    mode_bwd: &ModeVector,
    deltas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let resp = TwoSidedResponse::new(coupling, effective, mode_fwd, mode_bwd)?;
    deltas.par_iter().map(|&d| Ok((d, resp.amplitude(d)?.norm_sqr()))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveguideFit {
    pub gamma_tilde: f64,
    #[serde(rename = "Gamma_tilde")]
    pub big_gamma_tilde: f64,
    pub beta: f64,
    pub center: f64,
    pub residual: f64,
}

struct LineFit<'a> {
    x: &'a [f64],
    y: &'a [f64],
    p: Vector3<f64>,
}

impl LeastSquaresProblem<f64, Dyn, U3> for LineFit<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3>;

    fn set_params(&mut self, p: &Vector3<f64>) {
        self.p = *p;
    }

    fn params(&self) -> Vector3<f64> {
        self.p
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let (g, big, c) = (self.p[0], self.p[1], self.p[2]);
        Some(DVector::from_iterator(
            self.x.len(),
            self.x.iter().zip(self.y).map(|(&x, &y)| emitter_transmission(x - c, g, big) - y),
        ))
    }

    fn jacobian(&self) -> Option<Matrix<f64, Dyn, U3, Self::JacobianStorage>> {
        let (g, big, c) = (self.p[0], self.p[1], self.p[2]);
        let (d, s) = (g - big, g + big);
        let mut jac = OMatrix::<f64, Dyn, U3>::zeros(self.x.len());
        for (i, &x) in self.x.iter().enumerate() {
            let dx = x - c;
            let n = 4.0 * dx * dx + d * d;
            let q = 4.0 * dx * dx + s * s;
            let q2 = q * q;
            jac[(i, 0)] = (2.0 * d * q - 2.0 * s * n) / q2;
            jac[(i, 1)] = (-2.0 * d * q - 2.0 * s * n) / q2;
            jac[(i, 2)] = 8.0 * dx * (n - q) / q2;
        }
        Some(jac)
    }
}

/// Initial (centre, FWHM, T_min) from the dip of the samples.
fn dip_estimate(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let (imin, &tmin) = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .ok_or_else(|| Error::InvalidInput("no samples".into()))?;
    let half = 1.0 - 0.5 * (1.0 - tmin);
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imin;
        for i in range {
            if y[i] >= half {
                let t = (half - y[prev]) / (y[i] - y[prev]);
                return Some(x[prev] + t * (x[i] - x[prev]));
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..imin).rev());
    let right = cross(&mut (imin + 1..x.len()));
    match (left, right) {
        (Some(l), Some(r)) if r > l => Ok((x[imin], r - l, tmin)),
        _ => invalid("samples do not resolve both half-depth points of the dip"),
    }
}

/// Least-squares fit of the ideal emitter lineshape; Γ̃ ≥ γ̃ is chosen for the degenerate pair.
pub fn effective_emitter_fit(samples: &[(f64, f64)]) -> Result<WaveguideFit> {
    if samples.len() < 8 {
        return invalid(format!("{} samples given, at least 8 needed", samples.len()));
    }
    let mut s: Vec<(f64, f64)> = samples.to_vec();
    s.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let x: Vec<f64> = s.iter().map(|p| p.0).collect();
    let y: Vec<f64> = s.iter().map(|p| p.1).collect();
    let (c0, w0, tmin) = dip_estimate(&x, &y)?;
    if x[0] > c0 - 2.0 * w0 || x[x.len() - 1] < c0 + 2.0 * w0 {
        return invalid("samples must span at least ±2 linewidths around the dip");
    }
    let keep: Vec<usize> = (0..x.len()).filter(|&i| (x[i] - c0).abs() <= 10.0 * w0).collect();
    let xw: Vec<f64> = keep.iter().map(|&i| x[i]).collect();
    let yw: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
    if xw.len() < 8 {
        return invalid("fewer than 8 samples inside the fit window");
    }
    let r = tmin.max(0.0).sqrt();
    let p0 = Vector3::new(0.5 * w0 * (1.0 - r), 0.5 * w0 * (1.0 + r), c0);
    let problem = LineFit { x: &xw, y: &yw, p: p0 };
    let (fitted, report) = LevenbergMarquardt::new()
        .with_ftol(1e-15)
        .with_xtol(1e-15)
        .with_gtol(1e-15)
        .with_patience(200)
        .minimize(problem);
    if !report.termination.was_successful() {
        return Err(Error::Numerical(format!(
            "lineshape fit failed: {:?} after {} evaluations, objective {:.3e}",
            report.termination, report.number_of_evaluations, report.objective_function
        )));
    }
    let (a, b) = (fitted.p[0].abs(), fitted.p[1].abs());
    let (gamma_tilde, big_gamma_tilde) = if a <= b { (a, b) } else { (b, a) };
    let residual = (fitted.residuals().unwrap().norm_squared() / xw.len() as f64).sqrt();
    Ok(WaveguideFit {
        gamma_tilde,
        big_gamma_tilde,
        beta: big_gamma_tilde / (big_gamma_tilde + gamma_tilde),
        center: fitted.p[2],
        residual,
    })
}

/// Ideal emitter amplitude (2δ + i(γ̃−Γ̃))/(2δ + i(γ̃+Γ̃)).
pub fn emitter_amplitude(delta: f64, gamma_tilde: f64, big_gamma_tilde: f64) -> C64 {
    C64::new(2.0 * delta, gamma_tilde - big_gamma_tilde) / C64::new(2.0 * delta, gamma_tilde + big_gamma_tilde)
}

struct AmplitudeFit<'a> {
    x: &'a [f64],
    y: &'a [C64],
    p: Vector3<f64>,
}

impl LeastSquaresProblem<f64, Dyn, U3> for AmplitudeFit<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3>;

    fn set_params(&mut self, p: &Vector3<f64>) {
        self.p = *p;
    }

    fn params(&self) -> Vector3<f64> {
        self.p
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let (g, big, c) = (self.p[0], self.p[1], self.p[2]);
        let mut r = DVector::zeros(2 * self.x.len());
        for (i, (&x, y)) in self.x.iter().zip(self.y).enumerate() {
            let d = emitter_amplitude(x - c, g, big) - y;
            r[2 * i] = d.re;
            r[2 * i + 1] = d.im;
        }
        Some(r)
    }

    fn jacobian(&self) -> Option<Matrix<f64, Dyn, U3, Self::JacobianStorage>> {
        let (g, big, c) = (self.p[0], self.p[1], self.p[2]);
        let i = C64::new(0.0, 1.0);
        let mut jac = OMatrix::<f64, Dyn, U3>::zeros(2 * self.x.len());
        for (k, &x) in self.x.iter().enumerate() {
            let n = C64::new(2.0 * (x - c), g - big);
            let q = C64::new(2.0 * (x - c), g + big);
            let q2 = q * q;
            let cols = [-2.0 * big / q2, -i * (q + n) / q2, -4.0 * i * big / q2];
            for (j, d) in cols.iter().enumerate() {
                jac[(2 * k, j)] = d.re;
                jac[(2 * k + 1, j)] = d.im;
            }
        }
        Some(jac)
    }
}

/// Fit of the complex â-port amplitude. Phase and intensity together fix Γ̃ from the
/// dispersive response rather than from the loss dip alone.
pub fn effective_emitter_fit_amplitude(samples: &[(f64, C64)]) -> Result<WaveguideFit> {
    if samples.len() < 8 {
        return invalid(format!("{} samples given, at least 8 needed", samples.len()));
    }
    let mut s: Vec<(f64, C64)> = samples.to_vec();
    s.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let x: Vec<f64> = s.iter().map(|p| p.0).collect();
    // the scattered part |t − 1|² is a Lorentzian of full width γ̃ + Γ̃ and height (2Γ̃/(γ̃+Γ̃))²
    let dip: Vec<f64> = s.iter().map(|p| 1.0 - 0.25 * (p.1 - 1.0).norm_sqr()).collect();
    let (c0, w0, dmin) = dip_estimate(&x, &dip)?;
    if x[0] > c0 - 2.0 * w0 || x[x.len() - 1] < c0 + 2.0 * w0 {
        return invalid("samples must span at least ±2 linewidths around the resonance");
    }
    let keep: Vec<usize> = (0..x.len()).filter(|&i| (x[i] - c0).abs() <= 10.0 * w0).collect();
    let xw: Vec<f64> = keep.iter().map(|&i| x[i]).collect();
    let yw: Vec<C64> = keep.iter().map(|&i| s[i].1).collect();
    let big0 = w0 * (1.0 - dmin).max(0.0).sqrt();
    let p0 = Vector3::new((w0 - big0).max(1e-6 * w0), big0, c0);
    let problem = AmplitudeFit { x: &xw, y: &yw, p: p0 };
    let (fitted, report) = LevenbergMarquardt::new()
        .with_ftol(1e-15)
        .with_xtol(1e-15)
        .with_gtol(1e-15)
        .with_patience(200)
        .minimize(problem);
    if !report.termination.was_successful() {
        return Err(Error::Numerical(format!(
            "amplitude fit failed: {:?} after {} evaluations, objective {:.3e}",
            report.termination, report.number_of_evaluations, report.objective_function
        )));
    }
    let (gamma_tilde, big_gamma_tilde) = (fitted.p[0], fitted.p[1]);
    if gamma_tilde < 0.0 || big_gamma_tilde <= 0.0 {
        return Err(Error::Numerical(format!("amplitude fit left the physical region (γ̃ = {gamma_tilde:.3e}, Γ̃ = {big_gamma_tilde:.3e})")));
    }
    let residual = (fitted.residuals().unwrap().norm_squared() / xw.len() as f64).sqrt();
    Ok(WaveguideFit {
        gamma_tilde,
        big_gamma_tilde,
        beta: big_gamma_tilde / (big_gamma_tilde + gamma_tilde),
        center: fitted.p[2],
        residual,
    })
}

/// β_opt = Γ̄c/(Γ̄c + γ); NaN outside Γ̄c > 0, γ ≥ 0.
pub fn beta_opt(gamma_bar_c: f64, gamma: f64) -> f64 {
    if !(gamma_bar_c > 0.0 && gamma >= 0.0) {
        return f64::NAN;
    }
    gamma_bar_c / (gamma_bar_c + gamma)
}
