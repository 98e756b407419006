use chiral_array::coupling::*;
use chiral_array::lattice::*;
use chiral_array::linalg::eig;
use chiral_array::units::gamma_c_infinite;
use chiral_array::C64;
use proptest::prelude::*;
use std::f64::consts::PI;

/// G = e^{ikr}/(4πk²r³)·[(k²r² + ikr − 1)·I + (3 − 3ikr − k²r²)·r̂r̂].
fn greens_oracle(r: [f64; 3], k: f64) -> [[C64; 3]; 3] {
    let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let i = C64::i();
    let kr = k * d;
    let pre = (i * kr).exp() / (4.0 * PI * k * k * d * d * d);
    let a = pre * (kr * kr + i * kr - 1.0);
    let b = pre * (3.0 - 3.0 * i * kr - kr * kr);
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            g[p][q] = b * (r[p] * r[q] / (d * d));
            if p == q {
                g[p][q] += a;
            }
        }
    }
    g
}

#[test]
fn greens_tensor_matches_expanded_form() {
    let k = 2.0 * PI;
    for r in [[0.3, 0.0, 0.0], [0.2, -0.7, 0.1], [1.3, 2.2, -0.4], [0.05, 0.01, 0.0]] {
        let g = greens_tensor(r, k).unwrap();
        let o = greens_oracle(r, k);
        for p in 0..3 {
            for q in 0..3 {
                let scale = o[p][q].norm().max(1.0);
                assert!((g[p][q] - o[p][q]).norm() < 1e-12 * scale, "{r:?} {p}{q}");
            }
        }
    }
    assert!(greens_tensor([0.0, 0.0, 0.0], k).is_err());
}

#[test]
fn perpendicular_dipoles_follow_the_textbook_rates() {
    // ŷ dipoles separated along x̂: Γ = (3/2)(sin x/x + cos x/x² − sin x/x³), J = (3/4)(cos x/x − sin x/x² − cos x/x³)
    let d = Polarization::LinearY.vector();
    for r in [0.1, 0.37, 0.75, 1.5, 4.2] {
        let x = 2.0 * PI * r;
        let z = pair_coupling(r, 0.0, &d, 2.0 * PI).unwrap();
        let gam = 1.5 * (x.sin() / x + x.cos() / (x * x) - x.sin() / x.powi(3));
        let j = 0.75 * (x.cos() / x - x.sin() / (x * x) - x.cos() / x.powi(3));
        assert!((2.0 * z.im - gam).abs() < 1e-12, "Γ at r = {r}");
        assert!((z.re - j).abs() < 1e-12 * j.abs().max(1.0), "J at r = {r}");
    }
    // Γ_ij → Γ as the separation vanishes
    let z = pair_coupling(1e-4, 0.0, &d, 2.0 * PI).unwrap();
    assert!((2.0 * z.im - 1.0).abs() < 1e-6);
}

#[test]
fn single_atom() {
    let g = build_array(1, 0.75, Shape::Square).unwrap();
    let c = coupling_matrix(&g, Polarization::Circular.vector()).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c.gam[[0, 0]], 1.0);
    assert_eq!(c.j[[0, 0]], 0.0);
}

#[test]
fn rejects_non_unit_orientation() {
    let g = build_array(3, 0.75, Shape::Square).unwrap();
    let o = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    assert!(coupling_matrix(&g, o).is_err());
}

#[test]
fn binary_round_trip() {
    let g = build_array(5, 0.6, Shape::Disc).unwrap();
    let c = coupling_matrix(&g, Polarization::LinearX.vector()).unwrap();
    let mut buf = Vec::new();
    c.write_binary(&mut buf).unwrap();
    let back = CouplingMatrix::read_binary(buf.as_slice()).unwrap();
    assert_eq!(back.j, c.j);
    assert_eq!(back.gam, c.gam);
    assert_eq!(back.orientation, c.orientation);
    buf[0] ^= 0xff;
    assert!(CouplingMatrix::read_binary(buf.as_slice()).is_err());
    assert!(CouplingMatrix::read_binary(&buf[..10]).is_err());
}

#[test]
fn collective_rate_approaches_infinite_array() {
    let a = 0.75;
    let g = build_array(31, a, Shape::Square).unwrap();
    let c = coupling_matrix(&g, Polarization::Circular.vector()).unwrap();
    let m = gaussian_mode(&g, 5.0, 0.0, Direction::Forward).unwrap();
    let col = collective_parameters(&g, &c, &m).unwrap();
    let want = gamma_c_infinite(a);
    assert!((col.mode_weighted.gamma_c - want).abs() < 0.01 * want, "{} vs {want}", col.mode_weighted.gamma_c);
    assert_eq!(col.mode_weighted.tag, CollectiveTag::ModeWeighted);
    assert_eq!(col.lattice_sum.tag, CollectiveTag::LatticeSum);
    // the central-row sum converges slowly, so only the sign and magnitude are checked
    assert!(col.lattice_sum.gamma_c > 0.0 && col.lattice_sum.gamma_c < 3.0);
}

#[test]
fn lattice_sum_excludes_self_term_in_shift() {
    let g = build_array(3, 0.75, Shape::Square).unwrap();
    let c = coupling_matrix(&g, Polarization::Circular.vector()).unwrap();
    let p = lattice_sum(&c.j, &c.gam, 4);
    let dc: f64 = (0..9).filter(|&k| k != 4).map(|k| c.j[[4, k]]).sum();
    let gc: f64 = (0..9).map(|k| c.gam[[4, k]]).sum();
    assert!((p.delta_c - dc).abs() < 1e-15 && (p.gamma_c - gc).abs() < 1e-15);
}

fn pols() -> impl Strategy<Value = Polarization> {
    prop_oneof![Just(Polarization::Circular), Just(Polarization::LinearX), Just(Polarization::LinearY)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coupling_matrix_is_symmetric_and_dissipative(nside in (1usize..4).prop_map(|k| 2 * k + 1), a in 0.2f64..1.2, pol in pols()) {
        let g = build_array(nside, a, Shape::Auto).unwrap();
        let c = coupling_matrix(&g, pol.vector()).unwrap();
        let n = c.len();
        for i in 0..n {
            prop_assert_eq!(c.gam[[i, i]], 1.0);
            prop_assert_eq!(c.j[[i, i]], 0.0);
            for k in 0..n {
                prop_assert_eq!(c.j[[i, k]], c.j[[k, i]]);
                prop_assert_eq!(c.gam[[i, k]], c.gam[[k, i]]);
            }
        }
        // Γ is a Gram matrix of radiated fields, hence positive semidefinite
        let (lam, _) = eig(&c.gam.mapv(|x| C64::new(x, 0.0))).unwrap();
        let lmin = lam.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        prop_assert!(lmin > -1e-10, "min eigenvalue {}", lmin);
    }

    #[test]
    fn mode_weighted_rate_is_bounded_by_gamma_spectrum(w0 in 0.5f64..4.0) {
        let g = build_array(7, 0.5, Shape::Square).unwrap();
        let c = coupling_matrix(&g, Polarization::Circular.vector()).unwrap();
        let m = gaussian_mode(&g, w0, 0.0, Direction::Forward).unwrap();
        let p = mode_weighted(&c.j, &c.gam, &m.u);
        let (lam, _) = eig(&c.gam.mapv(|x| C64::new(x, 0.0))).unwrap();
        let hi = lam.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p.gamma_c >= -1e-12 && p.gamma_c <= hi + 1e-12);
    }
}
