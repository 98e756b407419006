use chiral_array::lattice::*;
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn site_counts() {
    assert_eq!(build_array(7, 0.75, Shape::Square).unwrap().len(), 49);
    assert_eq!(build_array(21, 0.75, Shape::Disc).unwrap().len(), 317);
    assert_eq!(build_disc_array(15, 0.75).unwrap().len(), 149);
    assert_eq!(build_array(1, 0.75, Shape::Disc).unwrap().len(), 1);
    // auto: square up to 9, disc above
    assert_eq!(build_array(9, 0.5, Shape::Auto).unwrap().len(), 81);
    assert_eq!(build_array(21, 0.5, Shape::Auto).unwrap().len(), 317);
}

#[test]
fn disc_sites_lie_inside_radius() {
    let g = build_disc_array(31, 0.65).unwrap();
    let r = 15.0 * 0.65 + 1e-12;
    assert!(g.positions.iter().all(|p| p[0].hypot(p[1]) <= r));
    assert_eq!(g.positions[g.central_site()], [0.0, 0.0]);
}

#[test]
fn rejects_bad_geometry() {
    assert!(build_array(4, 0.75, Shape::Square).is_err());
    assert!(build_array(0, 0.75, Shape::Square).is_err());
    assert!(build_array(5, 0.0, Shape::Square).is_err());
    assert!(build_array(5, f64::NAN, Shape::Square).is_err());
    assert!(ArrayGeometry::from_positions(3, 0.5, vec![[0.0, 0.0], [0.0, 0.0]]).is_err());
    assert!(ArrayGeometry::from_positions(3, 0.5, vec![[0.25, 0.0]]).is_err());
    assert!(ArrayGeometry::from_positions(3, 0.5, vec![[1.0, 0.0]]).is_err());
    assert!(ArrayGeometry::from_positions(3, 0.5, vec![]).is_err());
}

#[test]
fn json_round_trip_validates() {
    let g = build_array(5, 0.75, Shape::Disc).unwrap();
    let back = ArrayGeometry::from_json(&g.to_json()).unwrap();
    assert_eq!(g, back);
    let bad = r#"{"nside":3,"a":0.5,"positions":[[0.3,0.0]]}"#;
    assert!(ArrayGeometry::from_json(bad).is_err());
}

#[test]
fn mode_is_normalised_on_a_fine_lattice() {
    // Riemann sum of ∫|u|² over a lattice much finer than the waist
    let g = build_array(81, 0.125, Shape::Square).unwrap();
    let m = gaussian_mode(&g, 1.5, 0.0, Direction::Forward).unwrap();
    assert!((m.norm_area - 1.0).abs() < 1e-9, "{}", m.norm_area);
    let peak = m.u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!((peak - (2.0 / (PI * 1.5 * 1.5)).sqrt()).abs() < 1e-14);
}

#[test]
fn mode_rejects_bad_parameters() {
    let g = build_array(3, 0.75, Shape::Square).unwrap();
    assert!(gaussian_mode(&g, 0.0, 0.0, Direction::Forward).is_err());
    assert!(gaussian_mode(&g, 1.0, PI / 2.0, Direction::Forward).is_err());
}

#[test]
fn bragg_condition() {
    assert!(validate_bragg(0.75, 0.0).ok);
    assert!(!validate_bragg(0.75, 25f64.to_radians()).ok);
    assert!(validate_bragg(0.5, 60f64.to_radians()).ok);
    let th = bragg_threshold_angle(0.75).unwrap();
    assert!((th.to_degrees() - 19.471220634490695).abs() < 1e-9);
    assert!((validate_bragg(0.75, th).margin).abs() < 1e-12);
    assert!(bragg_threshold_angle(0.5).is_none());
    assert!(bragg_threshold_angle(1.2).is_none());
}

#[test]
fn obliquity_is_secant() {
    let g = build_array(3, 0.75, Shape::Square).unwrap();
    let m = gaussian_mode(&g, 2.0, 0.3, Direction::Forward).unwrap();
    assert!((m.obliquity() - 1.0 / 0.3f64.cos()).abs() < 1e-15);
    assert_eq!(gaussian_mode(&g, 2.0, 0.0, Direction::Forward).unwrap().obliquity(), 1.0);
}

proptest! {
    #[test]
    fn tilt_only_changes_phase(nside in (1usize..6).prop_map(|k| 2 * k + 1), a in 0.3f64..1.0, w0 in 0.5f64..5.0, deg in -40.0f64..40.0) {
        let g = build_array(nside, a, Shape::Auto).unwrap();
        let flat = gaussian_mode(&g, w0, 0.0, Direction::Forward).unwrap();
        let theta = deg.to_radians();
        let tilt = gaussian_mode(&g, w0, theta, Direction::Forward).unwrap();
        for (j, p) in g.positions.iter().enumerate() {
            prop_assert!((tilt.u[j].norm() - flat.u[j].norm()).abs() <= 1e-14 * flat.u[j].norm().max(1e-300));
            let want = 2.0 * PI * theta.sin() * p[0];
            let got = (tilt.u[j] / flat.u[j]).arg();
            let d = (got - want).rem_euclid(2.0 * PI);
            prop_assert!(d.min(2.0 * PI - d) < 1e-9);
        }
        prop_assert!((tilt.norm_area - flat.norm_area).abs() < 1e-12);
    }

    #[test]
    fn global_phase_preserves_norm(phi in -10.0f64..10.0) {
        let g = build_array(5, 0.75, Shape::Square).unwrap();
        let m = gaussian_mode(&g, 2.0, 0.1, Direction::Backward).unwrap();
        prop_assert!((m.with_phase(phi).norm_sqr() - m.norm_sqr()).abs() < 1e-13);
    }
}
