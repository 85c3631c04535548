use nalgebra::DVector;
use proptest::prelude::*;
use setid_core::designs::running_example_dataset;
use setid_core::interval_iv::{build_moments, IntervalIVDataset};
use setid_core::model::{empirical_model, unit, BoxBounds};
use setid_core::qp::enumerate_basic_solutions;
use setid_core::regsf::support_lp;
use setid_core::Error;

fn labels(z: &[&str]) -> Vec<String> {
    z.iter().map(|s| s.to_string()).collect()
}

#[test]
fn support_in_first_appearance_order() {
    let ds = IntervalIVDataset::new(
        vec![0.0, 1.0, 2.0],
        vec![1.0, 1.0, 3.0],
        vec![vec![1.0], vec![1.0], vec![1.0]],
        labels(&["b", "a", "b"]),
    )
    .unwrap();
    assert_eq!(ds.support(), &["b".to_string(), "a".to_string()]);
    assert_eq!(ds.n(), 3);
}

#[test]
fn dataset_validation() {
    let err = IntervalIVDataset::new(vec![2.0, 0.0], vec![1.0, 1.0], vec![vec![1.0]; 2], labels(&["a", "a"]));
    assert_eq!(err, Err(Error::IntervalViolation { row: 0 }));
    let ds = IntervalIVDataset::new(vec![1.0], vec![1.0], vec![vec![1.0, 2.0]], labels(&["a"])).unwrap();
    assert_eq!(ds.warnings().len(), 1);
    let bounds = BoxBounds::cube(2, -1.0, 1.0).unwrap();
    assert_eq!(build_moments(&ds, &labels(&["zz"]), bounds), Err(Error::UnknownLabel("zz".into())));
}

#[test]
fn one_regressor_interval_regression() {
    let n = 20;
    let ds = IntervalIVDataset::new(vec![-1.0; n], vec![1.0; n], vec![vec![1.0]; n], vec!["z".into(); n]).unwrap();
    let s = build_moments(&ds, &[], BoxBounds::cube(1, -5.0, 5.0).unwrap()).unwrap();
    assert_eq!((s.k(), s.p()), (4, 0));
    let m = empirical_model(&s).unwrap();
    assert_eq!(support_lp(&m, &unit(1, 0)).unwrap().value, -1.0);
    assert_eq!(support_lp(&m, &-unit(1, 0)).unwrap().value, -1.0);
}

#[test]
fn running_example_has_eight_inequalities() {
    let ds = running_example_dataset(0.4, 0.6, 0.2).unwrap();
    assert_eq!(ds.n(), 100);
    assert_eq!(ds.support().len(), 4);
    let s = build_moments(&ds, &[], BoxBounds::cube(2, -10.0, 10.0).unwrap()).unwrap();
    assert_eq!((s.k(), s.p()), (12, 0));
    assert_eq!(s.box_rows(), &[8, 9, 10, 11]);
}

#[test]
fn collapsing_every_label_gives_equalities() {
    let ds = running_example_dataset(0.4, 0.6, 0.2).unwrap();
    let all = ds.support().to_vec();
    let s = build_moments(&ds, &all, BoxBounds::cube(2, -10.0, 10.0).unwrap()).unwrap();
    assert_eq!((s.k(), s.p()), (8, 4));
    assert_eq!(s.eq_idx(), &[0, 1, 2, 3]);
}

fn vertices(ds: &IntervalIVDataset, collapse: &[String]) -> Vec<DVector<f64>> {
    let s = build_moments(ds, collapse, BoxBounds::cube(2, -10.0, 10.0).unwrap()).unwrap();
    let m = empirical_model(&s).unwrap();
    let mut v: Vec<DVector<f64>> = enumerate_basic_solutions(m.cs(), 1_000_000)
        .unwrap()
        .into_iter()
        .filter(|b| b.feasible)
        .map(|b| b.theta)
        .collect();
    v.sort_by(|a, b| a.as_slice().partial_cmp(b.as_slice()).unwrap());
    v.dedup_by(|a, b| (&*a - &*b).amax() < 1e-9);
    v
}

#[test]
fn collapsing_a_degenerate_pair_keeps_the_set() {
    // Label "p" has point outcomes, so its two inequalities already force
    // equality.
    let y_lo = vec![-1.0, 0.5, 0.5, -0.5, 0.5, 0.5];
    let y_hi = vec![1.0, 0.5, 0.5, 0.5, 1.5, 1.5];
    let x = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![1.0, 2.0], vec![1.0, 2.0]];
    let z = labels(&["a", "p", "p", "a", "q", "q"]);
    let ds = IntervalIVDataset::new(y_lo, y_hi, x, z).unwrap();
    let open = vertices(&ds, &[]);
    let closed = vertices(&ds, &labels(&["p"]));
    // The segment from (0.5, 0) to (-0.5, 1).
    assert_eq!(open.len(), 2);
    assert_eq!(open.len(), closed.len());
    for (a, b) in open.iter().zip(&closed) {
        assert!((a - b).amax() < 1e-9);
    }
}

#[derive(Debug, Clone)]
struct Raw {
    y_lo: Vec<f64>,
    y_hi: Vec<f64>,
    x: Vec<Vec<f64>>,
    z: Vec<String>,
}

fn raw_data() -> impl Strategy<Value = (Raw, DVector<f64>)> {
    (2usize..40, 1usize..4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec((-3.0f64..3.0, 0.0f64..2.0, 0usize..4), n),
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), n),
            prop::collection::vec(-2.0f64..2.0, d),
        )
            .prop_map(|(rows, x, theta)| {
                let raw = Raw {
                    y_lo: rows.iter().map(|r| r.0).collect(),
                    y_hi: rows.iter().map(|r| r.0 + r.1).collect(),
                    x,
                    z: rows.iter().map(|r| format!("z{}", r.2)).collect(),
                };
                (raw, DVector::from_vec(theta))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Sample moments from the encoded matrices equal the direct averages
    /// of `1{Z=z}(y_lo - xᵀθ)` and `1{Z=z}(xᵀθ - y_hi)`.
    #[test]
    fn encoding_round_trip((raw, theta) in raw_data()) {
        let ds = IntervalIVDataset::new(raw.y_lo.clone(), raw.y_hi.clone(), raw.x.clone(), raw.z.clone()).unwrap();
        let d = ds.d();
        let s = build_moments(&ds, &[], BoxBounds::cube(d, -10.0, 10.0).unwrap()).unwrap();
        let enc = empirical_model(&s).unwrap().cs().residuals(&theta);
        let k = ds.support().len();
        let n = raw.y_lo.len() as f64;
        for (c, label) in ds.support().iter().enumerate() {
            let (mut lower, mut upper) = (0.0, 0.0);
            for i in 0..raw.y_lo.len() {
                if &raw.z[i] == label {
                    let xt: f64 = raw.x[i].iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
                    lower += raw.y_lo[i] - xt;
                    upper += xt - raw.y_hi[i];
                }
            }
            prop_assert!((enc[c] - lower / n).abs() < 1e-12);
            prop_assert!((enc[k + c] - upper / n).abs() < 1e-12);
        }
    }
}
