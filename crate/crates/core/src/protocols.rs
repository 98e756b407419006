//! Single-photon source: blockaded π-pulse storage and EIT retrieval.

use ndarray::Array1;
use ndarray_linalg::Inverse;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMatrix;
use crate::error::{invalid, Error, Result};
use crate::lattice::ModeVector;
use crate::linalg::eig;
use crate::pulse::{PulseShape, PulseSpec};
use crate::steady_state::EffectiveParams;
use crate::units::G2_OVER_C;
use crate::C64;

#[derive(Clone, Debug)]
pub struct StorageState {
    pub c0: C64,
    pub c: Array1<C64>,
    /// Fraction of the stored Rydberg excitation in mode u: |u†c|²/(‖u‖²Σ|c|²).
    pub p_u: f64,
    /// Absolute mode population |u†c|²/‖u‖².
    pub p_u_abs: f64,
    pub warnings: Vec<String>,
}

impl StorageState {
    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Rydberg amplitudes renormalised to one excitation.
    pub fn normalized(&self) -> Result<Array1<C64>> {
        let n: f64 = self.c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return invalid("no stored excitation");
        }
        Ok(self.c.mapv(|z| z / n))
    }
}

fn mode_populations(c: &Array1<C64>, u: &Array1<C64>) -> (f64, f64) {
    let uu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let proj: C64 = u.iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum();
    let cc: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let abs = proj.norm_sqr() / uu;
    (if cc > 0.0 { abs / cc } else { 0.0 }, abs)
}

/// Time trace and final state of a storage run.
#[derive(Clone, Debug)]
pub struct StorageRun {
    pub state: StorageState,
    pub times: Vec<f64>,
    /// Absolute mode population along the pulse.
    pub p_u_trace: Vec<f64>,
}

const STEPS_PER_TAU: usize = 400;

/// Integrates the single-excitation storage equations over the pulse window.
pub fn pi_pulse_storage(effective: &EffectiveParams, mode: &ModeVector, pulse: &PulseSpec) -> Result<StorageRun> {
    let n = effective.len();
    if mode.len() != n {
        return invalid("mode and effective parameter sizes differ");
    }
    if !(pulse.tau > 0.0) || !(pulse.t1 > pulse.t0) {
        return invalid("storage pulse needs τ > 0 and t1 > t0");
    }
    let mut warnings = Vec::new();
    if pulse.shape != PulseShape::Square {
        warnings.push("π-area calibration assumes a square pulse".to_string());
    }
    let i = C64::new(0.0, 1.0);
    let a = effective.generator().mapv(|z| i * z);
    let omega = mode.u.mapv(|x| x * (effective.g_bar() * mode.obliquity().sqrt() * pulse.a_in));
    let fmax = (0..=64).map(|k| pulse.envelope(pulse.t0 + (pulse.t1 - pulse.t0) * k as f64 / 64.0)).fold(0.0, f64::max);
    let rho = a.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
        + fmax * omega.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let span = pulse.t1 - pulse.t0;
    let steps = (span / (0.05 / rho)).max(span / pulse.tau * STEPS_PER_TAU as f64).ceil() as usize;
    let h = (pulse.t1 - pulse.t0) / steps as f64;
    let rhs = |c0: C64, c: &Array1<C64>, t: f64| -> (C64, Array1<C64>) {
        let f = pulse.envelope(t);
        let d0 = i * f * omega.iter().zip(c.iter()).map(|(o, x)| o.conj() * x).sum::<C64>();
        let dc = a.dot(c) + omega.mapv(|o| i * o * f * c0);
        (d0, dc)
    };
    let mut c0 = C64::new(1.0, 0.0);
    let mut c = Array1::<C64>::zeros(n);
    let record = (steps / 400).max(1);
    let mut times = vec![pulse.t0];
    let mut trace = vec![0.0];
    let mut norm = 1.0;
    for k in 0..steps {
        let t = pulse.t0 + k as f64 * h;
        let (k1a, k1b) = rhs(c0, &c, t);
        let (k2a, k2b) = rhs(c0 + k1a * (h / 2.0), &(&c + &(&k1b * (h / 2.0))), t + h / 2.0);
        let (k3a, k3b) = rhs(c0 + k2a * (h / 2.0), &(&c + &(&k2b * (h / 2.0))), t + h / 2.0);
        // left limit at the step end, so a square pulse ending on the grid is not cut one stage early
        let (k4a, k4b) = rhs(c0 + k3a * h, &(&c + &(&k3b * h)), t + h * (1.0 - 1e-9));
        c0 += (k1a + (k2a + k3a) * 2.0 + k4a) * (h / 6.0);
        c = &c + &((&k1b + &((&k2b + &k3b) * 2.0) + &k4b) * (h / 6.0));
        let nn = c0.norm_sqr() + c.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if nn > norm * (1.0 + 1e-10) {
            return Err(Error::Numerical(format!("storage norm grew at t = {t:.4}")));
        }
        norm = nn;
        if (k + 1) % record == 0 || k + 1 == steps {
            times.push(t + h);
            trace.push(mode_populations(&c, &mode.u).1);
        }
    }
    let (p_u, p_u_abs) = mode_populations(&c, &mode.u);
    Ok(StorageRun { state: StorageState { c0, c, p_u, p_u_abs, warnings }, times, p_u_trace: trace })
}

/// Square-pulse amplitude for collective area π/2 (full transfer |0⟩ → |u⟩) and the verification run.
pub fn calibrate_pi_area(effective: &EffectiveParams, mode: &ModeVector, tau: f64) -> Result<(f64, StorageRun)> {
    let g = effective.g_bar().abs() * mode.obliquity().sqrt();
    if !(tau > 0.0) || !(g > 0.0) {
        return invalid("calibration needs τ > 0 and a nonzero coupling");
    }
    let a_in = std::f64::consts::FRAC_PI_2 / (g * mode.norm_sqr().sqrt() * tau.sqrt());
    let mut pulse = PulseSpec::square(tau, tau / 1000.0);
    pulse.a_in = a_in;
    let run = pi_pulse_storage(effective, mode, &pulse)?;
    Ok((a_in, run))
}

/// Ω(t) = Ω_max·(1 − e^{−t/t_r}) with retrieval detunings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlRamp {
    pub omega_max: f64,
    pub t_r: f64,
    pub delta_e: f64,
    pub delta_r: f64,
    /// Time compression: Ω(t) → Ω(s·t).
    #[serde(default = "one")]
    pub speed: f64,
}

fn one() -> f64 {
    1.0
}

impl ControlRamp {
    /// Ω_max = 4, t_r = 2/Γc, Δe = −Δc and two-photon resonance Δe + Δr = 0.
    pub fn standard(delta_c: f64, gamma_c: f64) -> Self {
        ControlRamp { omega_max: 4.0, t_r: 2.0 / gamma_c, delta_e: -delta_c, delta_r: delta_c, speed: 1.0 }
    }

    pub fn omega(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if self.t_r <= 0.0 {
            return self.omega_max;
        }
        self.omega_max * (1.0 - (-(self.speed * t) / self.t_r).exp())
    }
}

#[derive(Clone, Debug)]
pub struct Retrieval {
    pub times: Vec<f64>,
    /// 2(g²/c)|u†e|², normalised so that its integral is η.
    pub emitted: Vec<f64>,
    pub eta: f64,
    pub residual: f64,
    pub warnings: Vec<String>,
}

/// Retrieval of a stored excitation through the full three-level single-excitation equations.
pub fn eit_retrieval(
    stored: &Array1<C64>,
    coupling: &CouplingMatrix,
    ramp: &ControlRamp,
    mode: &ModeVector,
    gamma: f64,
    t_max: f64,
) -> Result<Retrieval> {
    let n = coupling.len();
    if stored.len() != n || mode.len() != n {
        return invalid("stored state, coupling and mode sizes differ");
    }
    let norm0: f64 = stored.iter().map(|z| z.norm_sqr()).sum();
    if (norm0 - 1.0).abs() > 1e-9 {
        return invalid(format!("stored amplitudes have norm² {norm0}, expected 1"));
    }
    if ramp.omega_max < 0.0 {
        return invalid("control Rabi frequency must be non-negative");
    }
    let mut warnings = Vec::new();
    let gc = crate::coupling::mode_weighted(&coupling.j, &coupling.gam, &mode.u).gamma_c;
    if ramp.t_r / ramp.speed < 0.1 / gc {
        warnings.push("control ramp is fast compared with 1/Γc".to_string());
    }
    let i = C64::new(0.0, 1.0);
    let mut ke = coupling.complex();
    for j in 0..n {
        ke[[j, j]] += ramp.delta_e;
    }
    let ke = ke.mapv(|z| i * z);
    let zr = i * C64::new(ramp.delta_e + ramp.delta_r, 0.5 * gamma);
    let w = mode.u.mapv(|z| z.conj());
    let scale = 2.0 * G2_OVER_C * mode.obliquity();

    // K + Δe = V Λ V⁻¹ and the c equation is scalar, so every eigenmode is an independent 2×2 problem
    let (lam, v) = eig(&ke)?;
    let vinv = v.inv().map_err(|e| Error::Numerical(e.to_string()))?;
    let gram = v.t().mapv(|z| z.conj()).dot(&v);
    let wv = w.dot(&v);
    let norm_of = |x: &Array1<C64>| gram.dot(x).iter().zip(x.iter()).map(|(g, y)| (y.conj() * g).re).sum::<f64>();
    let rate = ramp.omega_max + lam.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let h = (0.05 / rate).min(0.02 / gc);
    let rhs = |e: &Array1<C64>, c: &Array1<C64>, t: f64| -> (Array1<C64>, Array1<C64>) {
        let om = i * ramp.omega(t);
        (&lam * e + c.mapv(|x| om * x), c.mapv(|x| zr * x) + e.mapv(|x| om * x))
    };
    let mut e = Array1::<C64>::zeros(n);
    let mut c = vinv.dot(stored);
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut emitted = vec![0.0];
    let mut eta = 0.0;
    let mut prev = 0.0;
    let mut norm = norm0;
    let mut step = 0usize;
    while t < t_max {
        let (k1e, k1c) = rhs(&e, &c, t);
        let (k2e, k2c) = rhs(&(&e + &(&k1e * (h / 2.0))), &(&c + &(&k1c * (h / 2.0))), t + h / 2.0);
        let (k3e, k3c) = rhs(&(&e + &(&k2e * (h / 2.0))), &(&c + &(&k2c * (h / 2.0))), t + h / 2.0);
        let (k4e, k4c) = rhs(&(&e + &(&k3e * h)), &(&c + &(&k3c * h)), t + h);
        e = &e + &((&k1e + &((&k2e + &k3e) * 2.0) + &k4e) * (h / 6.0));
        c = &c + &((&k1c + &((&k2c + &k3c) * 2.0) + &k4c) * (h / 6.0));
        t += h;
        step += 1;
        let cur = scale * wv.dot(&e).norm_sqr();
        eta += 0.5 * (prev + cur) * h;
        prev = cur;
        times.push(t);
        emitted.push(cur);
        if step % 10 == 0 || t >= t_max {
            let nn = norm_of(&e) + norm_of(&c);
            if nn > norm * (1.0 + 1e-9) {
                return Err(Error::Numerical(format!("retrieval norm grew at t = {t:.4}")));
            }
            norm = nn;
            if nn < 1e-6 {
                break;
            }
        }
    }
    Ok(Retrieval { times, emitted, eta, residual: norm, warnings })
}

/// Stored excitation in the mode itself, u/‖u‖.
pub fn ideal_stored(mode: &ModeVector) -> Array1<C64> {
    let n = mode.norm_sqr().sqrt();
    mode.u.mapv(|z| z / n)
}
