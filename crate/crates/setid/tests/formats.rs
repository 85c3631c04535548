use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use setid::formats::{read_model, read_sample, sidecar_path, write_model, write_sample, ModelFile};
use setid::Error;
use setid_core::designs::{design_2d, design_nd, running_example_dataset};
use setid_core::interval_iv::build_moments;
use setid_core::model::{BoxBounds, MomentSample};

fn bits(s: &MomentSample) -> Vec<u64> {
    (0..s.n()).flat_map(|i| s.flat_observation(i)).map(f64::to_bits).collect()
}

fn assert_same(a: &MomentSample, b: &MomentSample) {
    assert_eq!((a.n(), a.k(), a.d(), a.p()), (b.n(), b.k(), b.d(), b.p()));
    assert_eq!(a.det_mask(), b.det_mask());
    assert_eq!(a.eq_idx(), b.eq_idx());
    assert_eq!(a.bounds(), b.bounds());
    assert_eq!(a.box_rows(), b.box_rows());
    assert_eq!(bits(a), bits(b));
}

#[test]
fn model_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    for omega in [0.0, 9.0, 18.0, 36.0] {
        let model = design_2d(omega).unwrap().population().clone();
        write_model(&path, &model).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(ModelFile::from_model(&back).unwrap(), ModelFile::from_model(&model).unwrap());
    }
}

#[test]
fn model_json_has_the_documented_keys() {
    let model = design_nd(2).unwrap().population().clone();
    let v = serde_json::to_value(ModelFile::from_model(&model).unwrap()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    for key in ["k", "d", "p", "eq_idx", "box_lo", "box_hi", "A", "b"] {
        assert!(keys.contains(&key), "missing {key}");
    }
    assert_eq!(v["k"], 8);
    assert_eq!(v["A"].as_array().unwrap().len(), 16);
}

#[test]
fn design_sample_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sample = design_2d(18.0).unwrap().sample(50, &mut rng).unwrap();
    write_sample(&path, &sample).unwrap();
    assert!(sidecar_path(&path).exists());
    let back = read_sample(&path).unwrap();
    assert_same(&sample, &back);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 50);
    assert!(text.lines().all(|l| l.split(',').count() == sample.k() * 3));
}

#[test]
fn interval_sample_with_equalities_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("iv.csv");
    let ds = running_example_dataset(0.4, 0.6, 0.2).unwrap();
    let collapse = vec![ds.support()[1].clone()];
    let sample = build_moments(&ds, &collapse, BoxBounds::cube(2, -10.0, 10.0).unwrap()).unwrap();
    assert_eq!(sample.p(), 1);
    write_sample(&path, &sample).unwrap();
    assert_same(&sample, &read_sample(&path).unwrap());
}

#[test]
fn malformed_sample_files_report_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let sample = MomentSample::from_observations(
        &[DMatrix::from_row_slice(1, 2, &[1.0, 2.0]), DMatrix::from_row_slice(1, 2, &[3.0, 4.0])],
        vec![false],
        &[],
    )
    .unwrap();
    write_sample(&path, &sample).unwrap();

    std::fs::write(&path, "1,2\n3,x\n").unwrap();
    match read_sample(&path) {
        Err(Error::Parse { row: Some(2), column, .. }) => assert_eq!(column, "2"),
        other => panic!("unexpected {other:?}"),
    }
    std::fs::write(&path, "1,2\n3\n").unwrap();
    assert!(matches!(read_sample(&path), Err(Error::Parse { row: Some(2), .. })));
    std::fs::write(&path, "1,2\n").unwrap();
    assert!(matches!(read_sample(&path), Err(Error::Parse { row: None, .. })));
    std::fs::write(sidecar_path(&path), "{\"n\": 1}").unwrap();
    assert!(read_sample(&path).unwrap_err().is_parse());
}

#[test]
fn deterministic_rows_must_agree_on_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let sample = MomentSample::from_observations(
        &[DMatrix::from_row_slice(1, 2, &[1.0, 2.0]), DMatrix::from_row_slice(1, 2, &[1.0, 2.0])],
        vec![true],
        &[],
    )
    .unwrap();
    write_sample(&path, &sample).unwrap();
    std::fs::write(&path, "1,2\n1,3\n").unwrap();
    assert!(matches!(read_sample(&path), Err(Error::Core(setid_core::Error::InvalidInput(_)))));
}

fn raw_sample() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>)> {
    (1usize..6, 1usize..4, 1usize..4).prop_flat_map(|(n, k, d)| {
        let len = n * k * (d + 1);
        (Just(n), Just(k), Just(d), prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, len))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Arbitrary finite values, including subnormals and signed zeros,
    /// reload with identical bits.
    #[test]
    fn sample_csv_round_trip((n, k, d, values) in raw_sample()) {
        let obs: Vec<DMatrix<f64>> = values.chunks(k * (d + 1)).map(|c| DMatrix::from_row_slice(k, d + 1, c)).collect();
        let sample = MomentSample::from_observations(&obs, vec![false; k], &[]).unwrap();
        prop_assert_eq!(sample.n(), n);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_sample(&path, &sample).unwrap();
        let back = read_sample(&path).unwrap();
        prop_assert_eq!(bits(&sample), bits(&back));
        prop_assert_eq!(sample.bounds(), back.bounds());
    }
}
