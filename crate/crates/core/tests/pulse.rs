use chiral_array::chiral::*;
use chiral_array::coupling::*;
use chiral_array::hierarchy::{interpolate_samples, kink_integral, TimeGrid};
use chiral_array::lattice::*;
use chiral_array::pulse::*;
use chiral_array::steady_state::*;
use chiral_array::two_photon::InteractionModel;
use chiral_array::C64;
use ndarray::{Array1, Array2};

/// ψ(t) = f(t) − Γ̃∫_{−∞}^t e^{(iδ − Γt/2)(t−s)} f(s) ds by composite Simpson on a fine sub-grid.
fn single_emitter_oracle(chain: &EmitterChain, pulse: &PulseSpec, times: &[f64]) -> Vec<C64> {
    let z = C64::new(-0.5 * chain.total_rate(), chain.detuning + pulse.delta0);
    let sub = 16;
    let mut acc = C64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(times.len());
    let mut t = times[0];
    for &tn in times {
        let h = (tn - t) / sub as f64;
        for k in 0..sub {
            let (a, m, b) = (t + k as f64 * h, t + (k as f64 + 0.5) * h, t + (k + 1) as f64 * h);
            // ∫_a^b e^{z(b−s)} f(s) ds
            let piece = (C64::from(pulse.envelope(a)) * (z * h).exp()
                + C64::from(pulse.envelope(m)) * (z * h * 0.5).exp() * 4.0
                + C64::from(pulse.envelope(b)))
                * (h / 6.0);
            acc = acc * (z * h).exp() + piece;
        }
        t = tn;
        out.push(C64::from(pulse.envelope(tn)) - acc * chain.big_gamma_tilde);
    }
    out
}

#[test]
fn single_emitter_matches_convolution() {
    for (det, d0) in [(0.0, 0.0), (0.3, -0.5)] {
        let mut chain = EmitterChain::new(1, 1.0, 0.2);
        chain.detuning = det;
        let pulse = PulseSpec::gaussian(2.0, 1.0 / (1.2 * 50.0), 14.0).with_delta0(d0);
        let out = chain_scatter(&chain, &pulse).unwrap();
        let want = single_emitter_oracle(&chain, &pulse, &out.times());
        let err = out.psi.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }
}

#[test]
fn lossless_chain_conserves_photons() {
    for m in [1, 2] {
        let chain = EmitterChain::new(m, 1.0, 0.0);
        let pulse = sorting_pulse(&chain, 1.5, 50.0);
        let out = chain_scatter(&chain, &pulse).unwrap();
        let n0 = out.input_norm();
        assert!((out.p1() - n0).abs() < 1e-5, "P1 = {} vs {n0}", out.p1());
        assert!((out.p2() - n0 * n0).abs() < 1e-4, "P2 = {} vs {}", out.p2(), n0 * n0);
    }
}

#[test]
fn far_detuned_pulse_passes_unchanged() {
    let chain = EmitterChain::new(1, 1.0, 0.2);
    let pulse = PulseSpec::gaussian(2.0, 1.0 / 60.0, 12.0).with_delta0(200.0);
    let out = chain_scatter(&chain, &pulse).unwrap();
    let tt = chain.transmission(200.0).norm_sqr();
    assert!((out.p1() - tt * out.input_norm()).abs() < 1e-5);
    assert!((out.p1() - 1.0).abs() < 1e-4);
}

#[test]
fn long_pulse_follows_the_cw_transmission() {
    let chain = EmitterChain::new(1, 1.0, 0.2);
    let mut pulse = PulseSpec::gaussian(5.0, 1.0 / 60.0, 20.0).with_delta0(5.0);
    pulse.t0 = -20.0;
    let out = chain_scatter(&chain, &pulse).unwrap();
    let i0 = ((0.0 - pulse.t0) / pulse.dt).round() as usize;
    let ratio = out.psi[i0] / out.input[i0];
    assert!((ratio - chain.transmission(5.0)).norm() < 2e-3, "{ratio}");
}

#[test]
fn cascaded_pair_equals_two_single_passes() {
    let one = EmitterChain::new(1, 1.0, 0.1);
    let two = EmitterChain::new(2, 1.0, 0.1);
    let pulse = sorting_pulse(&two, 2.0, 50.0);
    let mono = chain_scatter(&two, &pulse).unwrap();
    let first = chain_scatter(&one, &pulse).unwrap();
    let grid = TimeGrid { t0: first.t0, dt: first.dt, nt: first.nt(), substeps: 1 };
    let second = chain_scatter_samples(&one, &first.psi, &grid).unwrap();
    let err = mono.psi.iter().zip(second.psi.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let peak = mono.psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(err < 1e-5 * peak, "{err}");
}

fn array_setup(nside: usize) -> (ArrayGeometry, EffectiveParams, ModeVector, f64) {
    let g = build_array(nside, 0.75, Shape::Auto).unwrap();
    let c = coupling_matrix(&g, Polarization::Circular.vector()).unwrap();
    let m = gaussian_mode(&g, 0.4 * nside as f64 * 0.75, 0.0, Direction::Forward).unwrap();
    let eff = reduce_two_level(&DriveParams::new(-20.0, 19.8, 4.0, 1e-4), &c).unwrap();
    let col = eff.collective_mode(&m);
    let eff = eff.with_delta_bar(-col.delta_c);
    (g, eff, m, col.gamma_c)
}

#[test]
fn linear_array_output_factorises() {
    let (g, eff, m, gc) = array_setup(3);
    let tau = 2.0 / gc;
    let pulse = PulseSpec::gaussian(tau, tau.min(1.0 / gc) / 50.0, 3.0 * tau);
    let out = propagate_weak_pulse(&g, &eff, &m, &InteractionModel::None, &pulse).unwrap();
    let n = out.nt();
    for i in (0..n).step_by(7) {
        for j in (0..n).step_by(5) {
            assert_eq!(out.psi2[[i, j]], out.psi[i] * out.psi[j]);
        }
    }
    assert!(out.p1() <= out.input_norm() + 1e-9);
    assert!(extract_bound_state(&out).iter().all(|z| z.norm() == 0.0));
}

#[test]
fn halving_the_step_changes_little() {
    let (g, eff, m, gc) = array_setup(3);
    let tau = 2.0 / gc;
    let dt = tau.min(1.0 / gc) / 50.0;
    let im = InteractionModel::Vdw { c6: 5.0 };
    let coarse = propagate_weak_pulse(&g, &eff, &m, &im, &PulseSpec::gaussian(tau, dt, 3.0 * tau)).unwrap();
    let fine = propagate_weak_pulse(&g, &eff, &m, &im, &PulseSpec::gaussian(tau, dt / 2.0, 3.0 * tau)).unwrap();
    let mut e1: f64 = 0.0;
    let mut e2: f64 = 0.0;
    for i in 0..coarse.nt() {
        e1 = e1.max((coarse.psi[i] - fine.psi[2 * i]).norm());
        for j in (0..coarse.nt()).step_by(3) {
            e2 = e2.max((coarse.psi2[[i, j]] - fine.psi2[[2 * i, 2 * j]]).norm());
        }
    }
    let s1 = coarse.psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let s2 = coarse.psi2.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(e1 < 1e-6 * s1 && e2 < 1e-6 * s2, "{e1} {e2}");
    assert!(extract_bound_state(&coarse).iter().any(|z| z.norm() > 1e-6 * s2));
}

#[test]
fn grid_file_round_trip() {
    let chain = EmitterChain::new(1, 1.0, 0.1);
    let out = chain_scatter(&chain, &sorting_pulse(&chain, 1.0, 50.0)).unwrap();
    let mut buf = Vec::new();
    out.write_psi2(&mut buf).unwrap();
    assert_eq!(buf.len(), 24 + 16 * out.nt() * out.nt());
    let (t0, dt, m) = TwoPhotonGrid::read_psi2(buf.as_slice()).unwrap();
    assert_eq!((t0, dt), (out.t0, out.dt));
    assert_eq!(m, out.psi2);
    buf[1] ^= 1;
    assert!(TwoPhotonGrid::read_psi2(buf.as_slice()).is_err());
    assert!(TwoPhotonGrid::read_psi2(&buf[..20]).is_err());
}

#[test]
fn kink_quadrature_converges_faster_than_trapezoid() {
    // windowed e^{−|t−t′|}: smooth except across the diagonal, vanishing at the edges
    let l = 12.0;
    let quad = |n: usize| {
        let dt = l / (n - 1) as f64;
        let w = |i: usize| (-(i as f64 * dt - 0.5 * l).powi(2) / 2.0).exp();
        let m = Array2::from_shape_fn((n, n), |(i, j)| C64::from(w(i) * w(j) * (-((i as f64 - j as f64).abs() * dt)).exp()));
        (kink_integral(&m, dt).re, m.sum().re * dt * dt)
    };
    let (a, ta) = quad(121);
    let (b, tb) = quad(241);
    let (c, tc) = quad(481);
    let order = ((a - b) / (b - c)).abs().log2();
    let plain = ((ta - tb) / (tb - tc)).abs().log2();
    assert!((plain - 2.0).abs() < 0.2, "plain sum order {plain}");
    assert!(order > 3.0, "corrected order {order}");
}

fn synthetic(kappa: f64) -> TwoPhotonGrid {
    let n = 400;
    let dt = 0.05;
    let psi: Array1<C64> = (0..n).map(|i| C64::from((-(i as f64 * dt - 10.0).powi(2) / 8.0).exp())).collect();
    let psi2 = Array2::from_shape_fn((n, n), |(i, j)| {
        psi[i] * psi[j] + C64::new(0.0, 0.3) * (-kappa * (i as f64 - j as f64).abs() * dt).exp()
    });
    TwoPhotonGrid { t0: 0.0, dt, input: psi.clone(), psi, psi2 }
}

#[test]
fn bound_state_rate_of_a_pure_exponential() {
    let g = synthetic(0.7);
    let r = bound_state_decay_rate(&g, 5.0, (0.5, 6.0)).unwrap();
    assert!((r - 0.7).abs() < 1e-10, "{r}");
    assert!(bound_state_decay_rate(&g, -1.0, (0.5, 6.0)).is_err());
    assert!(bound_state_decay_rate(&g, 5.0, (100.0, 200.0)).is_err());
}

#[test]
fn overlap_of_identical_outputs() {
    let g = synthetic(0.7);
    let (i1, i2) = overlap_infidelity(&g, &g).unwrap();
    assert!(i1 < 1e-14 && i2 < 1e-14);
    let mut h = g.clone();
    h.psi = h.psi.mapv(|z| z * C64::from_polar(2.0, 0.4));
    assert!(overlap_infidelity(&g, &h).unwrap().0 < 1e-14);
    let other = synthetic(0.7);
    let shorter = TwoPhotonGrid { dt: 0.1, ..other };
    assert!(overlap_infidelity(&g, &shorter).is_err());
}

#[test]
fn interpolation_is_exact_on_nodes_and_lines() {
    let s: Array1<C64> = (0..20).map(|i| C64::new(3.0 - 0.5 * i as f64, 0.25 * i as f64)).collect();
    for i in 0..20 {
        assert!((interpolate_samples(&s, 1.0, 0.1, 1.0 + 0.1 * i as f64) - s[i]).norm() < 1e-14);
    }
    for x in [1.23, 1.5, 2.61] {
        let k = (x - 1.0) / 0.1;
        let want = C64::new(3.0 - 0.5 * k, 0.25 * k);
        assert!((interpolate_samples(&s, 1.0, 0.1, x) - want).norm() < 1e-12);
    }
    assert_eq!(interpolate_samples(&s, 1.0, 0.1, 0.5), C64::new(0.0, 0.0));
}

#[test]
fn pulse_validation() {
    let p = PulseSpec::gaussian(1.0, 0.02, 6.0);
    assert!(p.validate(1.0).is_ok());
    assert!(p.validate(2.0).is_err());
    let mut q = p;
    q.a_in = 0.1;
    assert!(q.validate(1.0).is_err());
    let mut r = p;
    r.t1 = r.t0;
    assert!(r.validate(1.0).is_err());
    // envelopes are normalised
    let sq = PulseSpec::square(2.0, 0.01);
    let n = input_samples(&sq).iter().map(|x| x * x).sum::<f64>() * sq.dt;
    assert!((n - 1.0).abs() < 1e-2);
    let g = PulseSpec::gaussian(2.0, 0.01, 12.0);
    let n = input_samples(&g).iter().map(|x| x * x).sum::<f64>() * g.dt;
    assert!((n - 1.0).abs() < 1e-9);
}
