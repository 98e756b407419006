//! Weak coherent pulses scattered off the array in the unidirectional configuration.
//!
//! Outputs are normalised by the input amplitude, ψ = ⟨â⟩/a_in and ψ₂ = ⟨ââ⟩/a_in²,
//! in the frame rotating at the carrier.

use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hierarchy::{kink_integral, Hierarchy, TimeGrid};
use crate::lattice::{ArrayGeometry, ModeVector};
use crate::steady_state::EffectiveParams;
use crate::two_photon::{pair_shifts, InteractionModel};
use crate::C64;

pub use crate::hierarchy::TwoPhotonGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    /// exp(−t²/2τ²)/(πτ²)^¼, peak at t = 0.
    Gaussian,
    /// 1/√τ on [0, τ].
    Square,
}

fn default_substeps() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub tau: f64,
    /// Carrier detuning added to the emitter detuning.
    #[serde(default)]
    pub delta0: f64,
    pub a_in: f64,
    pub dt: f64,
    pub t0: f64,
    pub t1: f64,
    /// Minimum integration steps per output sample.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

impl PulseSpec {
    /// Gaussian on [−6τ, t1].
    pub fn gaussian(tau: f64, dt: f64, t1: f64) -> Self {
        PulseSpec { shape: PulseShape::Gaussian, tau, delta0: 0.0, a_in: 1e-3, dt, t0: -6.0 * tau, t1, substeps: 1 }
    }

    pub fn square(tau: f64, dt: f64) -> Self {
        PulseSpec { shape: PulseShape::Square, tau, delta0: 0.0, a_in: 1e-3, dt, t0: 0.0, t1: tau, substeps: 1 }
    }

    pub fn with_delta0(mut self, delta0: f64) -> Self {
        self.delta0 = delta0;
        self
    }

    pub fn envelope(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Gaussian => {
                let tau = self.tau;
                (-t * t / (2.0 * tau * tau)).exp() / (std::f64::consts::PI * tau * tau).powf(0.25)
            }
            PulseShape::Square => {
                if (0.0..self.tau).contains(&t) {
                    1.0 / self.tau.sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    /// Checks amplitude, window and dt ≤ min(τ, 1/rate)/50.
    pub fn validate(&self, rate: f64) -> Result<()> {
        if !(self.tau > 0.0) || !(self.dt > 0.0) || !(self.t1 > self.t0) {
            return invalid("pulse needs τ > 0, dt > 0 and t1 > t0");
        }
        if !(self.a_in > 0.0 && self.a_in <= 0.01) {
            return invalid(format!("a_in = {} is outside the weak-drive range (0, 0.01]", self.a_in));
        }
        let limit = self.tau.min(1.0 / rate) / 50.0;
        if self.dt > limit * (1.0 + 1e-12) {
            return invalid(format!("dt = {} exceeds the resolution limit {limit:.4e}", self.dt));
        }
        Ok(())
    }

    pub(crate) fn grid(&self, gen: &Array2<C64>) -> TimeGrid {
        let nt = ((self.t1 - self.t0) / self.dt).round() as usize + 1;
        let rho = gen.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        let need = (self.dt * rho / 0.1).ceil() as usize;
        TimeGrid { t0: self.t0, dt: self.dt, nt, substeps: need.max(self.substeps).max(1) }
    }
}

/// Two-photon output of the array for a weak coherent pulse in mode u.
pub fn propagate_weak_pulse(
    geom: &ArrayGeometry,
    effective: &EffectiveParams,
    mode: &ModeVector,
    interaction: &InteractionModel,
    pulse: &PulseSpec,
) -> Result<TwoPhotonGrid> {
    let n = geom.len();
    if effective.len() != n || mode.len() != n {
        return invalid("geometry, effective parameters and mode sizes differ");
    }
    let gc = effective.collective_mode(mode).gamma_c;
    pulse.validate(gc.abs().max(1e-300))?;
    let i = C64::new(0.0, 1.0);
    let gen = effective.with_delta_bar(effective.delta_bar + pulse.delta0).generator().mapv(|z| i * z);
    let kappa = i * (2.0 * mode.obliquity()).sqrt() * effective.g_bar();
    let drive = mode.u.mapv(|x| kappa * x);
    let out = mode.u.mapv(|x| kappa * x.conj());
    let (pair_rate, allowed, linear) = match interaction {
        InteractionModel::None => (Array2::zeros((0, 0)), Array2::from_elem((0, 0), false), true),
        _ => {
            let shifts = pair_shifts(geom, interaction);
            (shifts.mapv(|s| -i * s.unwrap_or(0.0)), shifts.mapv(|s| s.is_some()), false)
        }
    };
    let h = Hierarchy { gen, drive, out, pair_rate, allowed, linear };
    let grid = pulse.grid(&h.gen);
    h.run(|t| C64::new(pulse.envelope(t), 0.0), &grid)
}

/// ψ_b(t, t′) = ψ₂ − ψ⊗ψ.
pub fn extract_bound_state(grid: &TwoPhotonGrid) -> Array2<C64> {
    grid.bound_state()
}

/// Exponential rate of |ψ_b(t_ref + Δ, t_ref)| fitted by least squares on ln|ψ_b| over Δ ∈ window.
pub fn bound_state_decay_rate(grid: &TwoPhotonGrid, t_ref: f64, window: (f64, f64)) -> Result<f64> {
    let b = grid.bound_state();
    let nt = grid.nt();
    let j = ((t_ref - grid.t0) / grid.dt).round();
    if j < 0.0 || j as usize >= nt {
        return invalid("reference time outside the grid");
    }
    let j = j as usize;
    let pts: Vec<(f64, f64)> = (j..nt)
        .filter_map(|i| {
            let d = (i - j) as f64 * grid.dt;
            let v = b[[i, j]].norm();
            (d >= window.0 && d <= window.1 && v > 0.0).then(|| (d, v.ln()))
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::Numerical("too few nonzero bound-state samples in the fit window".into()));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    Ok(-sxy / sxx)
}

fn same_grid(a: &TwoPhotonGrid, b: &TwoPhotonGrid) -> Result<()> {
    if a.nt() != b.nt() || (a.dt - b.dt).abs() > 1e-12 * a.dt || (a.t0 - b.t0).abs() > 1e-9 * a.dt.max(1.0) {
        return invalid("grids differ in size, step or origin");
    }
    Ok(())
}

/// (I₁, I₂) = 1 − normalised squared overlaps of the one- and two-photon outputs.
pub fn overlap_infidelity(a: &TwoPhotonGrid, b: &TwoPhotonGrid) -> Result<(f64, f64)> {
    same_grid(a, b)?;
    let (pa, pb, qa, qb) = (a.p1(), b.p1(), a.p2(), b.p2());
    if !(pa > 0.0 && pb > 0.0 && qa > 0.0 && qb > 0.0) {
        return invalid("zero-norm output in overlap");
    }
    let o1: C64 = a.psi.iter().zip(b.psi.iter()).map(|(x, y)| x.conj() * y).sum::<C64>() * a.dt;
    let prod = Zip::from(&a.psi2).and(&b.psi2).map_collect(|x, y| x.conj() * y);
    let o2 = kink_integral(&prod, a.dt);
    Ok(((1.0 - o1.norm_sqr() / (pa * pb)).max(0.0), (1.0 - o2.norm_sqr() / (qa * qb)).max(0.0)))
}

/// Samples of the input envelope on the pulse grid.
pub fn input_samples(pulse: &PulseSpec) -> Array1<f64> {
    let nt = ((pulse.t1 - pulse.t0) / pulse.dt).round() as usize + 1;
    (0..nt).map(|i| pulse.envelope(pulse.t0 + i as f64 * pulse.dt)).collect()
}
