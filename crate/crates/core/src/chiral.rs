//! Ideal chiral waveguide reference: one or two cascaded two-level emitters.
//!
//! Emitter m obeys ċ_m = i(δ + iΓt/2)c_m − i√Γ̃·(field arriving at m), Γt = Γ̃ + γ̃,
//! and the field after the last emitter is ψ = f − i√Γ̃ Σ_m c_m. The cw transmission
//! amplitude of one emitter is (2δ + i(γ̃−Γ̃))/(2δ + i(γ̃+Γ̃)).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hierarchy::{interpolate_samples, Hierarchy, TimeGrid, TwoPhotonGrid};
use crate::pulse::PulseSpec;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterChain {
    pub m: usize,
    /// Γ̃: emission into the guided mode.
    pub big_gamma_tilde: f64,
    /// γ̃: loss.
    pub gamma_tilde: f64,
    /// Carrier detuning from the emitter resonance.
    #[serde(default)]
    pub detuning: f64,
}

impl EmitterChain {
    pub fn new(m: usize, big_gamma_tilde: f64, gamma_tilde: f64) -> Self {
        EmitterChain { m, big_gamma_tilde, gamma_tilde, detuning: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.m) {
            return invalid(format!("chains of {} emitters are not supported (M ∈ {{1, 2}})", self.m));
        }
        if !(self.big_gamma_tilde >= 0.0 && self.gamma_tilde >= 0.0) || self.big_gamma_tilde + self.gamma_tilde <= 0.0 {
            return invalid("emitter rates must be non-negative with a positive total");
        }
        Ok(())
    }

    pub fn total_rate(&self) -> f64 {
        self.big_gamma_tilde + self.gamma_tilde
    }

    pub fn beta(&self) -> f64 {
        self.big_gamma_tilde / self.total_rate()
    }

    /// cw amplitude transmission of the whole chain at carrier detuning δ₀.
    pub fn transmission(&self, delta0: f64) -> C64 {
        let d = 2.0 * (self.detuning + delta0);
        let one = C64::new(d, self.gamma_tilde - self.big_gamma_tilde) / C64::new(d, self.total_rate());
        one.powu(self.m as u32)
    }

    fn hierarchy(&self, delta0: f64) -> Hierarchy {
        let m = self.m;
        let i = C64::new(0.0, 1.0);
        let sg = self.big_gamma_tilde.sqrt();
        let mut gen = Array2::zeros((m, m));
        for a in 0..m {
            gen[[a, a]] = i * C64::new(self.detuning + delta0, 0.5 * self.total_rate());
            for b in 0..a {
                gen[[a, b]] = C64::new(-self.big_gamma_tilde, 0.0);
            }
        }
        let drive = Array1::from_elem(m, -i * sg);
        let mut allowed = Array2::from_elem((m, m), true);
        for a in 0..m {
            allowed[[a, a]] = false;
        }
        Hierarchy { gen, drive: drive.clone(), out: drive, pair_rate: Array2::zeros((m, m)), allowed, linear: false }
    }
}

/// Chain response to a weak coherent pulse.
pub fn chain_scatter(chain: &EmitterChain, pulse: &PulseSpec) -> Result<TwoPhotonGrid> {
    chain.validate()?;
    pulse.validate(chain.total_rate())?;
    let h = chain.hierarchy(pulse.delta0);
    let grid = pulse.grid(&h.gen);
    h.run(|t| C64::new(pulse.envelope(t), 0.0), &grid)
}

/// Chain response to an arbitrary sampled input envelope on `grid`.
pub fn chain_scatter_samples(chain: &EmitterChain, input: &Array1<C64>, grid: &TimeGrid) -> Result<TwoPhotonGrid> {
    chain.validate()?;
    if input.len() != grid.nt {
        return invalid("input samples do not match the grid");
    }
    let h = chain.hierarchy(0.0);
    let rho = chain.m as f64 * chain.total_rate() + chain.detuning.abs();
    let g = TimeGrid { substeps: grid.substeps.max((grid.dt * rho / 0.1).ceil() as usize), ..*grid };
    h.run(|t| interpolate_samples(input, grid.t0, grid.dt, t), &g)
}

#[derive(Clone, Debug)]
pub struct SortingResult {
    /// Dominant Schmidt weight of the normalised two-photon output.
    pub f: f64,
    /// Two-photon survival ∬|ψ₂|².
    pub p: f64,
    /// Normalised one-photon output.
    pub psi_out: Array1<C64>,
    /// Dominant two-photon mode, phased so that ⟨θθ|ψ₂⟩ > 0.
    pub theta_out: Array1<C64>,
    /// |⟨ψ_out|θ_out⟩|.
    pub orthogonality: f64,
    /// ⟨θθ|ψ₂⟩.
    pub theta_amplitude: f64,
    /// max_T |⟨θ_out(t)|φ(T−t)⟩| and the maximising T.
    pub time_reversal_overlap: f64,
    pub delay: f64,
    /// Largest Schmidt coefficient of ψ₂/√P.
    pub lambda1: f64,
}

/// Schmidt analysis of a chain output; the singular values of ψ₂·dt are the Schmidt coefficients.
pub fn sorting_metrics(grid: &TwoPhotonGrid, input: &PulseSpec) -> Result<SortingResult> {
    let dt = grid.dt;
    let p = grid.p2();
    if p < 1e-12 {
        return Err(Error::Numerical(format!("two-photon survival {p:.3e} is too small to define F")));
    }
    let a = grid.psi2.mapv(|z| z * dt);
    let (sigma, mut theta) = top_singular(&a)?;
    let frob: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let f = sigma * sigma / frob;
    let lambda1 = sigma / p.sqrt();

    let amp = theta.mapv(|z| z.conj()).dot(&a.dot(&theta.mapv(|z| z.conj())));
    let phase = C64::from_polar(1.0, amp.arg() / 2.0);
    theta.mapv_inplace(|z| z * phase / dt.sqrt());
    let theta_amplitude = amp.norm();

    let p1 = grid.p1();
    if p1 <= 0.0 {
        return invalid("zero one-photon output");
    }
    let psi_out = grid.psi.mapv(|z| z / p1.sqrt());
    let orthogonality = psi_out.iter().zip(theta.iter()).map(|(x, y)| x.conj() * y).sum::<C64>().norm() * dt;

    let times = grid.times();
    let overlap = |tt: f64| -> f64 {
        theta
            .iter()
            .zip(times.iter())
            .map(|(th, &t)| th.conj() * input.envelope(tt - t))
            .sum::<C64>()
            .norm()
            * dt
    };
    let w: f64 = theta.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let centroid = theta.iter().zip(times.iter()).map(|(z, t)| z.norm_sqr() * t).sum::<f64>() / w;
    let (delay, trq) = golden_max(overlap, centroid - 2.0 * input.tau, centroid + 2.0 * input.tau, 1e-9 * input.tau);
    Ok(SortingResult {
        f,
        p,
        psi_out,
        theta_out: theta,
        orthogonality,
        theta_amplitude,
        time_reversal_overlap: trq,
        delay,
        lambda1,
    })
}

/// Largest singular value and its left vector by power iteration on A·A†.
fn top_singular(a: &Array2<C64>) -> Result<(f64, Array1<C64>)> {
    let n = a.nrows();
    let ah = a.t().mapv(|z| z.conj());
    let mut v: Array1<C64> = (0..n).map(|i| C64::new(1.0 + (i as f64 * 0.37).sin() * 0.1, 0.0)).collect();
    let mut sigma2 = 0.0;
    for _ in 0..500 {
        let w = a.dot(&ah.dot(&v));
        let nw = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nw == 0.0 {
            return Err(Error::Numerical("two-photon output vanishes".into()));
        }
        v = w / C64::new(nw, 0.0);
        if (nw - sigma2).abs() <= 1e-14 * nw {
            return Ok((nw.sqrt(), v));
        }
        sigma2 = nw;
    }
    Err(Error::Numerical("dominant Schmidt mode did not converge".into()))
}

/// Golden-section maximisation of a unimodal function; returns (argmax, max).
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Pulse used by the sorting search: Gaussian of width τ on a window scaled to τ and the emitter rate.
pub fn sorting_pulse(chain: &EmitterChain, tau: f64, samples_per_tau: f64) -> PulseSpec {
    let rate = chain.total_rate();
    let dt = tau.min(1.0 / rate) / samples_per_tau.max(50.0);
    let t1 = 6.0 * tau + 2.0 * chain.m as f64 * (4.0 / rate) + 2.0 * tau;
    PulseSpec::gaussian(tau, dt, t1)
}

/// Golden-section search of Γ̃τ ∈ [lo, hi] maximising F·(1 − |⟨ψ_out|θ_out⟩|²).
///
/// F alone tends to one in the linear limit τ → ∞ where nothing is sorted, so the
/// objective also asks for orthogonal one- and two-photon modes.
pub fn optimize_sorting(chain: &EmitterChain, lo: f64, hi: f64, samples_per_tau: f64) -> Result<(f64, SortingResult)> {
    chain.validate()?;
    let g = chain.big_gamma_tilde;
    if !(g > 0.0) {
        return invalid("sorting needs Γ̃ > 0");
    }
    let eval = |x: f64| -> Result<SortingResult> {
        let pulse = sorting_pulse(chain, x / g, samples_per_tau);
        sorting_metrics(&chain_scatter(chain, &pulse)?, &pulse)
    };
    let mut err = None;
    // search in ln(Γ̃τ)
    let (x, _) = golden_max(
        |lx| match eval(lx.exp()) {
            Ok(r) => sorting_objective(&r),
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo.ln(),
        hi.ln(),
        1e-4,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let x = x.exp();
    Ok((x, eval(x)?))
}

pub fn sorting_objective(r: &SortingResult) -> f64 {
    r.f * (1.0 - r.orthogonality.powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NsGateResult {
    pub c0: C64,
    pub c1: C64,
    pub c2: C64,
    pub fidelity: f64,
}

fn reversed_conj(v: &Array1<C64>) -> Array1<C64> {
    v.iter().rev().map(|z| z.conj()).collect()
}

/// Sorter pass, sign flip of the two-photon path, ideal time reversal and second pass.
pub fn ns_gate_circuit(c: [C64; 3], chain: &EmitterChain, pulse: &PulseSpec) -> Result<NsGateResult> {
    let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return invalid(format!("input coefficients have norm² {norm}, expected 1"));
    }
    let first = chain_scatter(chain, pulse)?;
    let sort = sorting_metrics(&first, pulse)?;
    let dt = first.dt;
    let alpha1 = first.p1().sqrt();
    let alpha2 = sort.theta_amplitude;
    let h = chain.hierarchy(pulse.delta0);
    let grid = pulse.grid(&h.gen);

    let target = reversed_conj(&first.input);
    let in1 = reversed_conj(&sort.psi_out);
    let in2 = reversed_conj(&sort.theta_out);
    let run = |input: &Array1<C64>| -> Result<TwoPhotonGrid> {
        h.run(|t| interpolate_samples(input, grid.t0, grid.dt, t), &grid)
    };
    let second1 = run(&in1)?;
    let second2 = run(&in2)?;
    let o1: C64 = target.iter().zip(second1.psi.iter()).map(|(a, b)| a.conj() * b).sum::<C64>() * dt;
    let tv = second2.psi2.dot(&target.mapv(|z| z.conj()));
    let o2: C64 = target.iter().zip(tv.iter()).map(|(a, b)| a.conj() * b).sum::<C64>() * dt * dt;

    let c1 = c[1] * alpha1 * o1;
    let c2 = -c[2] * alpha2 * o2;
    let ov = c[0].conj() * c[0] + c[1].conj() * c1 - c[2].conj() * c2;
    Ok(NsGateResult { c0: c[0], c1, c2, fidelity: ov.norm_sqr() })
}
