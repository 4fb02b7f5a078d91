use std::fs;

use agufs::{load_csv, standardize, write_csv, CsvOptions, DataError, Dataset, LabelColumn, Standardize};
use agufs_core::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
    let f = tempfile::NamedTempFile::new().unwrap();
    fs::write(f.path(), contents).unwrap();
    f
}

fn labeled() -> CsvOptions {
    CsvOptions {
        label_column: LabelColumn::Last,
        ..Default::default()
    }
}

#[test]
fn three_line_file_with_labels() {
    let f = write_tmp("1,2,a\n3,4,a\n5,6,b\n");
    let ds = load_csv(f.path(), &labeled()).unwrap();
    assert_eq!((ds.features(), ds.samples()), (2, 3));
    assert_eq!(ds.x.row(0), &[1.0, 3.0, 5.0]);
    assert_eq!(ds.x.row(1), &[2.0, 4.0, 6.0]);
    assert_eq!(ds.labels, Some(vec![0, 0, 1]));
    assert_eq!(ds.classes(), Some(2));
}

#[test]
fn empty_file_is_an_error() {
    let f = write_tmp("");
    assert!(matches!(load_csv(f.path(), &CsvOptions::default()), Err(DataError::Empty)));
}

#[test]
fn header_gives_feature_names() {
    let f = write_tmp("x,y,class\n1,2,a\n3,4,b\n");
    let opts = CsvOptions {
        has_header: true,
        ..labeled()
    };
    let ds = load_csv(f.path(), &opts).unwrap();
    assert_eq!(ds.samples(), 2);
    assert_eq!(ds.feature_names, Some(vec!["x".to_string(), "y".to_string()]));
}

#[test]
fn label_column_by_index() {
    let f = write_tmp("7,1.5,2.5\n9,3.5,4.5\n7,0,0\n");
    let opts = CsvOptions {
        label_column: LabelColumn::Index(0),
        ..Default::default()
    };
    let ds = load_csv(f.path(), &opts).unwrap();
    assert_eq!(ds.labels, Some(vec![0, 1, 0]));
    assert_eq!(ds.x.row(0), &[1.5, 3.5, 0.0]);
    let bad = CsvOptions {
        label_column: LabelColumn::Index(3),
        ..Default::default()
    };
    assert!(matches!(load_csv(f.path(), &bad), Err(DataError::LabelColumn { index: 3, columns: 3 })));
}

#[test]
fn ragged_rows_report_the_line() {
    let f = write_tmp("1,2,3\n4,5,6\n7,8\n");
    match load_csv(f.path(), &CsvOptions::default()) {
        Err(DataError::Ragged { line, expected, found }) => assert_eq!((line, expected, found), (3, 3, 2)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn non_numeric_cells_report_the_line() {
    let f = write_tmp("1,2\n3,oops\n");
    match load_csv(f.path(), &CsvOptions::default()) {
        Err(DataError::NotNumeric { line, column, value }) => {
            assert_eq!((line, column, value.as_str()), (2, 2, "oops"))
        }
        other => panic!("unexpected {other:?}"),
    }
    let f = write_tmp("1,NaN\n");
    assert!(matches!(load_csv(f.path(), &CsvOptions::default()), Err(DataError::NotNumeric { .. })));
}

#[test]
fn other_delimiters() {
    let f = write_tmp("1;2\n3;4\n");
    let opts = CsvOptions {
        delimiter: b';',
        ..Default::default()
    };
    assert_eq!(load_csv(f.path(), &opts).unwrap().x.row(1), &[2.0, 4.0]);
}

fn dataset(x: DenseMatrix) -> Dataset {
    Dataset {
        x,
        feature_names: None,
        labels: None,
        label_names: None,
        source_path: String::new(),
    }
}

#[test]
fn zscore_examples() {
    let (ds, constant) = standardize(dataset(DenseMatrix::from_rows(&[&[1.0, 3.0], &[2.0, 2.0]]).unwrap()), Standardize::Zscore);
    assert_eq!(ds.x.row(0), &[-1.0, 1.0]);
    assert_eq!(ds.x.row(1), &[0.0, 0.0]);
    assert_eq!(constant, vec![1]);

    let raw = DenseMatrix::from_rows(&[&[5.0, 7.0]]).unwrap();
    let (same, _) = standardize(dataset(raw.clone()), Standardize::None);
    assert_eq!(same.x, raw);
}

#[test]
fn zscore_moments_on_random_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DenseMatrix::from_fn(8, 40, |i, _| 10.0 * i as f64 + rng.random_range(-3.0..3.0) * (i + 1) as f64);
    let (ds, constant) = standardize(dataset(x), Standardize::Zscore);
    assert!(constant.is_empty());
    for i in 0..8 {
        let row = ds.x.row(i);
        let mean = row.iter().sum::<f64>() / 40.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 40.0;
        assert!(mean.abs() <= 1e-12, "mean {mean}");
        assert!((var - 1.0).abs() <= 1e-10, "var {var}");
    }
}

#[test]
fn export_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = DenseMatrix::from_fn(5, 30, |_, _| rng.random::<f64>() * 1e3 - 500.0 + rng.random::<f64>() * 1e-9);
    let labels: Vec<usize> = (0..30).map(|j| j % 4).collect();
    let ds = Dataset {
        x,
        feature_names: Some((0..5).map(|i| format!("f{i}")).collect()),
        labels: Some(labels),
        label_names: None,
        source_path: String::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_csv(&ds, &path, b',').unwrap();
    let opts = CsvOptions {
        has_header: true,
        label_column: LabelColumn::Last,
        delimiter: b',',
    };
    let back = load_csv(&path, &opts).unwrap();
    let bits = |m: &DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.x), bits(&ds.x));
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.feature_names, ds.feature_names);
}
