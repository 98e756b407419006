use chiral_array::chiral::*;
use chiral_array::hierarchy::TwoPhotonGrid;
use chiral_array::pulse::PulseSpec;
use chiral_array::C64;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn gaussian_samples(n: usize, dt: f64, centre: f64, width: f64) -> Array1<C64> {
    let v: Array1<f64> = (0..n).map(|i| (-(i as f64 * dt - centre).powi(2) / (2.0 * width * width)).exp()).collect();
    let norm = (v.iter().map(|x| x * x).sum::<f64>() * dt).sqrt();
    v.mapv(|x| C64::from(x / norm))
}

fn grid_of(psi: Array1<C64>, psi2: Array2<C64>, dt: f64) -> TwoPhotonGrid {
    TwoPhotonGrid { t0: 0.0, dt, input: psi.clone(), psi, psi2 }
}

#[test]
fn product_state_has_unit_purity() {
    let (n, dt) = (300, 0.05);
    let th = gaussian_samples(n, dt, 7.5, 1.0);
    let psi2 = Array2::from_shape_fn((n, n), |(i, j)| th[i] * th[j]);
    let pulse = PulseSpec::gaussian(1.0, dt, 10.0);
    let r = sorting_metrics(&grid_of(th.clone(), psi2, dt), &pulse).unwrap();
    assert!((r.f - 1.0).abs() < 1e-10, "{}", r.f);
    assert!((r.p - 1.0).abs() < 1e-6);
    assert!((r.lambda1 - 1.0).abs() < 1e-6);
    assert!((r.orthogonality - 1.0).abs() < 1e-10);
    assert!((r.theta_amplitude - 1.0).abs() < 1e-6);
}

#[test]
fn equal_weight_two_mode_state_has_half_purity() {
    let (n, dt) = (400, 0.05);
    let a = gaussian_samples(n, dt, 6.0, 0.8);
    let b = gaussian_samples(n, dt, 14.0, 0.8);
    let psi2 = Array2::from_shape_fn((n, n), |(i, j)| (a[i] * a[j] + b[i] * b[j]) * std::f64::consts::FRAC_1_SQRT_2);
    let pulse = PulseSpec::gaussian(1.0, dt, 20.0);
    let r = sorting_metrics(&grid_of(a, psi2, dt), &pulse).unwrap();
    assert!((r.f - 0.5).abs() < 1e-6, "{}", r.f);
}

#[test]
fn vanishing_output_is_rejected() {
    let (n, dt) = (50, 0.1);
    let g = grid_of(Array1::zeros(n), Array2::zeros((n, n)), dt);
    assert!(sorting_metrics(&g, &PulseSpec::gaussian(1.0, dt, 3.0)).is_err());
}

#[test]
fn chain_validation() {
    assert!(EmitterChain::new(3, 1.0, 0.0).validate().is_err());
    assert!(EmitterChain::new(0, 1.0, 0.0).validate().is_err());
    assert!(EmitterChain::new(1, -1.0, 0.0).validate().is_err());
    assert!(EmitterChain::new(1, 0.0, 0.0).validate().is_err());
    assert!(EmitterChain::new(2, 1.0, 0.1).validate().is_ok());
    assert!((EmitterChain::new(1, 0.9, 0.1).beta() - 0.9).abs() < 1e-15);
}

#[test]
fn ns_gate_needs_a_normalised_input() {
    let chain = EmitterChain::new(2, 1.0, 0.0);
    let pulse = sorting_pulse(&chain, 2.0, 50.0);
    let c = [C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0)];
    assert!(ns_gate_circuit(c, &chain, &pulse).is_err());
}

#[test]
fn ns_gate_leaves_vacuum_untouched() {
    let chain = EmitterChain::new(2, 1.0, 0.0);
    let pulse = sorting_pulse(&chain, 2.0, 50.0);
    let r = ns_gate_circuit([C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)], &chain, &pulse).unwrap();
    assert!((r.fidelity - 1.0).abs() < 1e-12);
}

#[test]
fn golden_section_finds_a_parabola_maximum() {
    let (x, f) = golden_max(|x| 3.0 - (x - 1.234).powi(2), -5.0, 5.0, 1e-9);
    // function values resolve the argmax only to about √ε
    assert!((x - 1.234).abs() < 1e-7 && (f - 3.0).abs() < 1e-14);
}

#[test]
fn sorting_pulse_respects_resolution() {
    let chain = EmitterChain::new(2, 1.0, 0.05);
    for tau in [0.3, 2.0, 8.0] {
        let p = sorting_pulse(&chain, tau, 50.0);
        assert!(p.validate(chain.total_rate()).is_ok());
        assert!(p.t1 > 6.0 * tau);
    }
}

proptest! {
    #[test]
    fn cascade_multiplies_single_transmissions(d in -5.0f64..5.0, big in 0.01f64..2.0, loss in 0.0f64..1.0) {
        let one = EmitterChain::new(1, big, loss).transmission(d);
        let two = EmitterChain::new(2, big, loss).transmission(d);
        prop_assert!((two - one * one).norm() < 1e-14);
        prop_assert!(one.norm() <= 1.0 + 1e-15);
        let lossless = EmitterChain::new(2, big, 0.0).transmission(d);
        prop_assert!((lossless.norm() - 1.0).abs() < 1e-14);
    }
}
