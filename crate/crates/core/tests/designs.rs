mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use setid_core::designs::{design_2d, design_nd, running_example_subsystem, DESIGN_BOX};
use setid_core::model::{empirical_model, eta, unit};
use setid_core::regsf::{estimate, support_lp, theta_star, TuningRule};

#[test]
fn square_at_zero_angle() {
    let des = design_2d(0.0).unwrap();
    assert_eq!(des.truth().unwrap(), (-1.0, 1.0));
    assert_eq!(des.noise_sd(), 0.1);
    assert_eq!(des.population().k(), 8);
}

#[test]
fn parallelogram_truth_matches_vertex_enumeration() {
    for omega in [0.9, 4.5, 18.0, 36.0] {
        let des = design_2d(omega).unwrap();
        let (lo, hi) = des.truth().unwrap();
        let cs = des.population().cs();
        assert!((lo - common::lp_by_vertices(&unit(2, 0), cs)).abs() < 1e-12);
        assert!((hi + common::lp_by_vertices(&-unit(2, 0), cs)).abs() < 1e-12);
        // The lower vertex sits on θ₂ = 1 with θ₁ = -1 - 2 tan ω.
        let t = omega.to_radians().tan();
        assert!((lo + 1.0 + 2.0 * t).abs() < 1e-12, "ω = {omega}");
        assert!(eta(des.population(), 1_000_000).unwrap() > 0.0);
    }
}

#[test]
fn cube_noise_and_geometry() {
    assert!((design_nd(2).unwrap().noise_sd().powi(2) - 0.01).abs() < 1e-15);
    let des = design_nd(10).unwrap();
    assert_eq!(des.truth().unwrap(), (-1.0, 1.0));
    let e1 = unit(10, 0);
    let lp = support_lp(des.population(), &e1).unwrap();
    let ts = theta_star(des.population(), &e1, 1e-3, &lp).unwrap();
    assert!((ts.norm_squared() - 10.0).abs() < 1e-10);
}

#[test]
fn hundred_dimensional_cube_estimates() {
    let des = design_nd(100).unwrap();
    assert_eq!(des.population().k(), 400);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let s = des.sample(1000, &mut rng).unwrap();
    let m = empirical_model(&s).unwrap();
    let e = estimate(&s, &m, &unit(100, 0), &TuningRule::outer()).unwrap();
    assert!(e.v_out < e.v_in && (e.v_in + 1.0).abs() < 0.1);
}

#[test]
fn samples_have_the_design_shape() {
    let des = design_2d(9.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = des.sample(7, &mut rng).unwrap();
    assert_eq!((s.n(), s.k(), s.d(), s.p()), (7, 8, 2, 0));
    assert_eq!(s.stochastic_rows(), &[0, 1, 2, 3]);
    let b = s.bounds().unwrap();
    assert_eq!((b.lo.clone(), b.hi.clone()), (vec![-DESIGN_BOX; 2], vec![DESIGN_BOX; 2]));
    let mut again = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(des.sample(7, &mut again).unwrap(), s);
}

#[test]
fn running_example_projection_closed_form() {
    for delta0 in [0.2, 0.5, 1.0] {
        for delta1 in [0.2, 0.5, 1.0] {
            for rho in [-0.4, 0.0, 0.4] {
                let m = running_example_subsystem(delta0, delta1, rho).unwrap();
                let half = delta1 + 2.0 * f64::abs(rho) * delta0;
                let lo = support_lp(&m, &unit(2, 0)).unwrap().value;
                let hi = -support_lp(&m, &-unit(2, 0)).unwrap().value;
                assert!((lo + half).abs() < 1e-8 && (hi - half).abs() < 1e-8);
            }
        }
    }
}
