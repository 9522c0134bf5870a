use std::fs;
use std::path::PathBuf;

use remix::data::{load_csv, load_csv_with_classes, LabelColumn};
use remix::{Dataset64, Error};

fn write(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("d.csv");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn labels_map_in_order_of_first_appearance() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "a,label,b\n1,yes,2\n3,no,4\n5,yes,6\n");
    let ds: Dataset64 = load_csv(&p, &LabelColumn::Name("label".into()), true).unwrap();
    assert_eq!(ds.labels(), &[0, 1, 0]);
    assert_eq!(ds.class_labels(), vec!["yes".to_string(), "no".to_string()]);
    assert_eq!(ds.features().row(1), &[3.0, 4.0]);
}

#[test]
fn index_column_without_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "0,1.5\n1,2.5\n");
    let ds: Dataset64 = load_csv(&p, &"0".parse().unwrap(), false).unwrap();
    assert_eq!(ds.labels(), &[0, 1]);
    assert_eq!(ds.features().as_slice(), &[1.5, 2.5]);
}

#[test]
fn malformed_cell_reports_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "x0,x1,label\n1,2,a\n3,oops,b\n");
    match load_csv::<f64>(&p, &LabelColumn::Name("label".into()), true) {
        Err(Error::Parse { row, column, value }) => {
            assert_eq!((row, column, value.as_str()), (3, 2, "oops"));
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn missing_label_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "x0,x1\n1,2\n");
    let err = load_csv::<f64>(&p, &LabelColumn::Name("label".into()), true).unwrap_err();
    assert!(matches!(err, Error::MissingLabelColumn(_)));
}

#[test]
fn single_class_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "x,label\n1,a\n2,a\n");
    let err = load_csv::<f64>(&p, &LabelColumn::Name("label".into()), true).unwrap_err();
    assert!(matches!(err, Error::SingleClass(_)));
}

#[test]
fn known_inventory_rejects_unseen_labels() {
    let dir = tempfile::tempdir().unwrap();
    let classes = vec!["a".to_string(), "b".to_string()];
    let p = write(&dir, "x,label\n1,b\n");
    let ds: Dataset64 = load_csv_with_classes(&p, &LabelColumn::Name("label".into()), true, &classes).unwrap();
    assert_eq!(ds.labels(), &[1]);
    assert_eq!(ds.n_classes(), 2);
    let p = write(&dir, "x,label\n1,c\n");
    let err = load_csv_with_classes::<f64>(&p, &LabelColumn::Name("label".into()), true, &classes).unwrap_err();
    assert!(matches!(err, Error::UnknownClass(_)));
}

#[test]
fn write_and_reload_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let ds: Dataset64 = remix::data::make_ring(30, 10, 0.2, 4).unwrap();
    let p = dir.path().join("ring.csv");
    ds.write_csv(&p).unwrap();
    let back: Dataset64 = load_csv(&p, &LabelColumn::Name("label".into()), true).unwrap();
    assert_eq!(back.features(), ds.features());
    let remap: Vec<String> = back.class_labels();
    for (a, b) in back.labels().iter().zip(ds.labels()) {
        assert_eq!(remap[*a], ds.class_labels()[*b]);
    }
}
