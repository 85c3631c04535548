use setid::interval_csv::{box_bounds, parse_csv, Schema, DEFAULT_BOX};
use setid::Error;
use setid_core::interval_iv::build_moments;

fn load(text: &str) -> Result<setid::interval_csv::Loaded, Error> {
    parse_csv(text, &Schema::default())
}

#[test]
fn three_rows_two_labels() {
    let l = load("y_lo,y_hi,x1,z\n0,1,1,a\n0.5,2,1,b\n-1,0,1,a\n").unwrap();
    assert_eq!(l.dataset.n(), 3);
    assert_eq!(l.dataset.support(), &["a".to_string(), "b".to_string()]);
    assert_eq!(l.dataset.d(), 1);
}

#[test]
fn degenerate_intervals_are_valid() {
    let l = load("y_lo,y_hi,x1,z\n1,1,1,a\n2,2,1,b\n").unwrap();
    assert_eq!(l.dataset.n(), 2);
}

#[test]
fn missing_column_is_named() {
    match load("y_lo,x1,z\n0,1,a\n") {
        Err(Error::Parse { column, row: None, .. }) => assert_eq!(column, "y_hi"),
        other => panic!("unexpected {other:?}"),
    }
    match load("y_lo,y_hi,z\n0,1,a\n") {
        Err(Error::Parse { column, .. }) => assert_eq!(column, "x1"),
        other => panic!("unexpected {other:?}"),
    }
    match load("y_lo,y_hi,x1\n0,1,1\n") {
        Err(Error::Parse { column, .. }) => assert_eq!(column, "z"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bad_values_report_the_row() {
    match load("y_lo,y_hi,x1,z\n0,1,1,a\n0,one,1,a\n") {
        Err(Error::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (Some(2), "y_hi")),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(load("y_lo,y_hi,x1,z\n0,inf,1,a\n"), Err(Error::Parse { row: Some(1), .. })));
    assert!(matches!(load("y_lo,y_hi,x1,z\n0,1,1,\n"), Err(Error::Parse { row: Some(1), .. })));
}

#[test]
fn reversed_interval_is_a_violation() {
    let err = load("y_lo,y_hi,x1,z\n0,1,1,a\n2,1,1,a\n").unwrap_err();
    assert!(matches!(err, Error::Core(setid_core::Error::IntervalViolation { row: 2 })));
    assert!(err.is_parse());
}

#[test]
fn tuple_instruments_and_regressor_columns() {
    let text = "z2,x2,y_hi,x1,z1,y_lo\nu,0.5,1,1,a,0\nv,1.5,2,1,a,1\nu,2.5,3,1,a,2\nu,0,1,1,b,0\n";
    let l = load(text).unwrap();
    assert_eq!(l.dataset.d(), 2);
    assert_eq!(l.dataset.support(), &["a|u".to_string(), "a|v".to_string(), "b|u".to_string()]);
    let bounds = box_bounds(2, Some(&[-5.0]), Some(&[5.0, 6.0])).unwrap();
    assert!(bounds.1.is_none());
    let s = build_moments(&l.dataset, &[], bounds.0).unwrap();
    assert_eq!(s.k(), 2 * 3 + 4);
}

#[test]
fn explicit_schema() {
    let schema = Schema {
        y_lo: "lo".into(),
        y_hi: "hi".into(),
        x: Some(vec!["const".into()]),
        z: Some(vec!["g".into()]),
        declared: None,
    };
    let l = parse_csv("lo,hi,const,g\n0,1,1,q\n", &schema).unwrap();
    assert_eq!(l.dataset.support(), &["q".to_string()]);
}

#[test]
fn declared_but_unobserved_labels_are_dropped() {
    let schema = Schema { declared: Some(vec!["a".into(), "b".into(), "c".into()]), ..Schema::default() };
    let l = parse_csv("y_lo,y_hi,x1,z\n0,1,1,a\n0,1,1,c\n", &schema).unwrap();
    assert_eq!(l.dataset.support(), &["a".to_string(), "c".to_string()]);
    assert_eq!(l.warnings.len(), 1);
    assert!(l.warnings[0].contains("`b`"));
    let err = parse_csv("y_lo,y_hi,x1,z\n0,1,1,d\n", &schema).unwrap_err();
    assert!(matches!(err, Error::Parse { row: Some(1), .. }));
}

#[test]
fn few_instrument_values_warn() {
    let l = load("y_lo,y_hi,x1,x2,z\n0,1,1,0,a\n0,1,1,1,a\n").unwrap();
    assert_eq!(l.warnings.len(), 1);
}

#[test]
fn default_box_is_wide_and_loud() {
    let (b, w) = box_bounds(3, None, None).unwrap();
    assert_eq!(b.lo, vec![-DEFAULT_BOX; 3]);
    assert_eq!(b.hi, vec![DEFAULT_BOX; 3]);
    assert!(w.unwrap().starts_with("WARNING"));
    assert!(box_bounds(3, Some(&[0.0, 1.0]), None).is_err());
}

#[test]
fn file_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "y_lo,y_hi,x1,z\n0,1,1,a\n").unwrap();
    let l = setid::interval_csv::load_csv(&path, &Schema::default()).unwrap();
    assert_eq!(l.dataset.n(), 1);
    let missing = setid::interval_csv::load_csv(&dir.path().join("nope.csv"), &Schema::default());
    assert!(matches!(missing, Err(Error::Io { .. })));
}
