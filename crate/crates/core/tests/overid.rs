mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use setid_core::designs::{design_2d, design_nd, running_example_dataset};
use setid_core::interval_iv::build_moments;
use setid_core::model::{empirical_model, unit, BoxBounds, MomentSample};
use setid_core::overid::{
    basic_superset, decompose, max_lower_bound, omega_hat, overid_estimate, second_stage, select_basic, spec_test,
    Strategy,
};
use setid_core::qp::enumerate_basic_solutions;
use setid_core::regsf::{estimate, support_lp, TuningRule};
use setid_core::Error;

const CAP: u128 = 1_000_000;

fn running_sample(delta0: f64, delta1: f64, r: f64) -> MomentSample {
    let ds = running_example_dataset(delta0, delta1, r).unwrap();
    build_moments(&ds, &[], BoxBounds::cube(2, -10.0, 10.0).unwrap()).unwrap()
}

/// A population-exact sample of the parallelogram design: every
/// observation equals `E W`.
fn exact_2d(omega: f64, n: usize) -> MomentSample {
    let pop = design_2d(omega).unwrap().population().clone();
    let mut w = DMatrix::zeros(pop.k(), 3);
    w.columns_mut(0, 2).copy_from(pop.cs().a());
    w.column_mut(2).copy_from(pop.cs().b());
    let mask: Vec<bool> = (0..pop.k()).map(|j| j >= 4).collect();
    MomentSample::from_observations(&vec![w; n], mask, &[]).unwrap()
}

#[test]
fn running_example_decomposes_into_pairs() {
    let s = running_sample(0.4, 0.6, 0.25);
    let m = empirical_model(&s).unwrap();
    assert_eq!(m.k(), 12);
    assert_eq!(m.moment_ineq_rows(), (0..8).collect::<Vec<_>>());
    let subs = decompose(&m, &Strategy::default_for(&m), CAP).unwrap();
    assert_eq!(subs.len(), 28);
    for sp in &subs {
        assert_eq!(sp.chosen.len(), 2);
        assert_eq!(sp.rows.len(), 6);
        assert!(sp.rows.ends_with(&[8, 9, 10, 11]));
        assert_eq!(sp.model.box_rows().len(), 4);
    }
    assert!(matches!(
        decompose(&m, &Strategy::default_for(&m), 10),
        Err(Error::CapExceeded { count: 28, cap: 10 })
    ));
}

#[test]
fn single_subset_reproduces_the_model() {
    let pop = design_nd(2).unwrap().population().clone();
    let subs = decompose(&pop, &Strategy::AllSubsetsOfSize(4), CAP).unwrap();
    assert_eq!(subs.len(), 1);
    assert_eq!(subs[0].model.cs(), pop.cs());
    let overlapping = Strategy::UserProvided(vec![vec![0, 1], vec![1, 2], vec![0, 1]]);
    let subs = decompose(&pop, &overlapping, CAP).unwrap();
    assert_eq!(subs.len(), 3);
    assert_eq!(subs[2].chosen, vec![0, 1]);
}

#[test]
fn max_lower_bound_conventions() {
    assert_eq!(max_lower_bound(&[Some(-0.3)]), -0.3);
    assert_eq!(max_lower_bound(&[Some(-1.0), None, Some(-0.5)]), -0.5);
    assert_eq!(max_lower_bound(&[None, None]), f64::INFINITY);
}

/// The maximum over two-row subsystems of the population lower bound
/// equals the lower bound of the full system.
#[test]
fn pairwise_bounds_are_sharp_on_the_running_example() {
    let e1 = unit(2, 0);
    for delta0 in [0.2, 0.5, 1.0] {
        for delta1 in [0.2, 0.5, 1.0] {
            for r in [-0.4, 0.0, 0.4] {
                let m = empirical_model(&running_sample(delta0, delta1, r)).unwrap();
                let full = support_lp(&m, &e1).unwrap().value;
                assert!((full - common::lp_by_vertices(&e1, m.cs())).abs() < 1e-10);
                let values: Vec<Option<f64>> = decompose(&m, &Strategy::default_for(&m), CAP)
                    .unwrap()
                    .iter()
                    .map(|sp| sp.feasible.then(|| support_lp(&sp.model, &e1).unwrap().value))
                    .collect();
                let best = max_lower_bound(&values);
                assert!((best - full).abs() < 1e-8, "Δ0={delta0} Δ1={delta1} r={r}: {best} vs {full}");
            }
        }
    }
}

#[test]
fn omega_hat_structure() {
    let des = design_nd(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let n = 4000;
    let s = des.sample(n, &mut rng).unwrap();
    let m = empirical_model(&s).unwrap();
    let rule = TuningRule::inner();
    // Row 0 (θ₁ ≥ -1) binds in direction e₁, row 1 (θ₂ ≥ -1) in e₂; their
    // noise is independent.
    let e_1 = estimate(&s, &m, &unit(2, 0), &rule).unwrap();
    let e_2 = estimate(&s, &m, &unit(2, 1), &rule).unwrap();
    let omega = omega_hat(&[&e_1, &e_1, &e_2]).unwrap();
    assert_eq!(omega[(0, 0)], omega[(0, 1)]);
    assert_eq!(omega[(0, 0)], omega[(1, 1)]);
    assert!((omega[(0, 0)] - e_1.sigma_hat.powi(2)).abs() < 1e-14);
    assert!((omega[(2, 2)] - e_2.sigma_hat.powi(2)).abs() < 1e-14);
    assert_eq!(omega, omega.transpose());
    let corr = omega[(0, 2)] / (omega[(0, 0)] * omega[(2, 2)]).sqrt();
    assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "{corr}");
    assert!(omega.symmetric_eigenvalues().min() > -1e-10);
}

#[test]
fn second_stage_examples() {
    let (g, v) = second_stage(&[0.5, 0.2, 0.1], 1e-4).unwrap();
    assert!((&g - DVector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-9);
    assert!((v - 0.5).abs() < 1e-9);

    let (g, v) = second_stage(&[0.3; 4], 0.01).unwrap();
    assert!((g - DVector::from_element(4, 0.25)).amax() < 1e-12);
    assert!((v - 0.3).abs() < 1e-12);

    let (g, _) = second_stage(&[0.4, 0.4, 0.1, -0.2], 1e-3).unwrap();
    assert!((g - DVector::from_vec(vec![0.5, 0.5, 0.0, 0.0])).amax() < 1e-9);

    assert!(matches!(second_stage(&[0.1], 0.0), Err(Error::InvalidInput(_))));
}

#[test]
fn spec_test_accepts_the_square() {
    let des = design_nd(2).unwrap();
    let e1 = unit(2, 0);
    let alpha = 0.05;
    let reps = 500;
    let mut accept = 0;
    for r in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        rng.set_stream(r);
        let s = des.sample(500, &mut rng).unwrap();
        let t = spec_test(&s, &e1, alpha, &Strategy::AllSubsetsOfSize(2), &TuningRule::outer(), 0.01, CAP).unwrap();
        accept += (!t.reject) as usize;
    }
    let freq = accept as f64 / reps as f64;
    assert!(freq >= 1.0 - alpha - 2.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt(), "{freq}");
}

#[test]
fn spec_test_rejects_disjoint_bounds() {
    // θ ≥ 0.25 and θ ≤ -0.25 with small noise.
    let e1 = unit(1, 0);
    let mut rejected = 0;
    for r in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        rng.set_stream(r);
        let obs: Vec<DMatrix<f64>> = (0..200)
            .map(|_| {
                let z: [f64; 2] = std::array::from_fn(|_| {
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
                });
                DMatrix::from_row_slice(2, 2, &[-1.0, -0.25 + 0.01 * z[0], 1.0, -0.25 + 0.01 * z[1]])
            })
            .collect();
        let s = MomentSample::from_observations(&obs, vec![false, false], &[])
            .unwrap()
            .with_box(BoxBounds::cube(1, -10.0, 10.0).unwrap())
            .unwrap();
        let t = spec_test(&s, &e1, 0.05, &Strategy::AllSubsetsOfSize(1), &TuningRule::outer(), 0.01, CAP).unwrap();
        rejected += t.reject as usize;
        if r == 0 {
            assert_eq!((t.lower_subproblem.clone(), t.upper_subproblem.clone()), (vec![0], vec![1]));
        }
    }
    assert_eq!(rejected, 100);
}

#[test]
fn spec_test_with_identical_subproblems_never_rejects() {
    let des = design_2d(9.0).unwrap();
    let strategy = Strategy::UserProvided(vec![vec![0, 1, 2, 3]]);
    for r in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        rng.set_stream(r);
        let s = des.sample(200, &mut rng).unwrap();
        let t = spec_test(&s, &unit(2, 0), 0.05, &strategy, &TuningRule::outer(), 0.01, CAP).unwrap();
        assert!(t.t_stat >= 0.0 && !t.reject);
    }
}

#[test]
fn spec_test_needs_a_feasible_pair() {
    let obs = vec![DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, -1.0]); 5];
    let s = MomentSample::from_observations(&obs, vec![false, false], &[])
        .unwrap()
        .with_box(BoxBounds::cube(1, -3.0, 3.0).unwrap())
        .unwrap();
    let both = Strategy::UserProvided(vec![vec![0, 1]]);
    assert_eq!(
        spec_test(&s, &unit(1, 0), 0.05, &both, &TuningRule::outer(), 0.01, CAP),
        Err(Error::NoFeasibleSubproblem)
    );
}

#[test]
fn overid_combination_on_the_running_example() {
    let s = running_sample(0.5, 0.5, 0.4);
    let e1 = unit(2, 0);
    let dec = overid_estimate(&s, &e1, &Strategy::AllSubsetsOfSize(2), &TuningRule::outer(), CAP).unwrap();
    assert_eq!(dec.subproblems.len(), 28);
    let l = dec.feasible.len();
    assert_eq!(dec.omega_hat.shape(), (l, l));
    assert!((dec.gamma_hat.sum() - 1.0).abs() < 1e-9);
    assert!(dec.gamma_hat.iter().all(|&g| g >= 0.0));
    assert!(dec.combined_value <= dec.max_lower_bound + 1e-12);
    assert!(dec.max_lower_bound <= dec.combined_value + dec.mu_n + 1e-12);
    let full = support_lp(&empirical_model(&s).unwrap(), &e1).unwrap().value;
    assert!(dec.max_lower_bound <= full + 1e-10);
    assert!(dec.lower_confidence_bound(0.05, 0.01) < dec.combined_value);
}

#[test]
fn superset_on_exact_data_is_the_argmin_pair() {
    let e1 = unit(2, 0);
    let s = exact_2d(18.0, 50);
    let m = empirical_model(&s).unwrap();
    let sel = select_basic(&m, &e1, 1e-4, CAP).unwrap();
    assert_eq!(sel.b_hat, vec![vec![0, 3]]);
    let v = support_lp(&m, &e1).unwrap();
    assert!((&sel.solutions[0] - &v.argmin).amax() < 1e-12);

    let sq = empirical_model(&exact_2d(0.0, 50)).unwrap();
    let sel = select_basic(&sq, &e1, 1e-4, CAP).unwrap();
    assert!(sel.b_hat.contains(&vec![0, 2]) && sel.b_hat.contains(&vec![0, 3]));
    assert_eq!(sel.b_hat.len(), 2);

    let all: Vec<Vec<usize>> = enumerate_basic_solutions(m.cs(), CAP)
        .unwrap()
        .into_iter()
        .filter(|b| b.feasible)
        .map(|b| b.rows)
        .collect();
    let sel = select_basic(&m, &e1, 100.0, CAP).unwrap();
    for rows in &all {
        assert!(sel.b_hat.contains(rows));
    }
}

#[test]
fn superset_from_a_sample_contains_the_true_pair() {
    let des = design_2d(18.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let s = des.sample(1000, &mut rng).unwrap();
    let sel = basic_superset(&s, &unit(2, 0), &TuningRule::inner(), CAP).unwrap();
    assert!(sel.b_hat.contains(&vec![0, 3]));
    assert!(sel.mu_n > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn second_stage_gap_bound(values in prop::collection::vec(-2.0f64..2.0, 1..8), mu in 1e-4f64..1.0) {
        let (g, v) = second_stage(&values, mu).unwrap();
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((g.sum() - 1.0).abs() < 1e-9);
        prop_assert!(g.iter().all(|&x| x >= 0.0));
        prop_assert!(v <= max + 1e-9 && max <= v + mu + 1e-9);
    }
}
