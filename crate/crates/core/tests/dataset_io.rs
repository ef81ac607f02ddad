use std::fs;

use boundary_seg::data::{generate_dataset, load_dataset, DatasetConfig};
use boundary_seg::imaging::pnm::{read_label_map, write_label_map};
use boundary_seg::imaging::LabelMap;
use boundary_seg::Error;

fn small() -> DatasetConfig {
    DatasetConfig {
        train: 4,
        val: 2,
        test: 2,
        ..DatasetConfig::default()
    }
}

#[test]
fn written_dataset_loads_back_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_dataset(&small(), tmp.path()).unwrap();
    let loaded = load_dataset(&manifest, 4).unwrap();
    let generated = small().generate().unwrap();
    assert_eq!(loaded.train.len(), 4);
    for (a, b) in loaded
        .train
        .iter()
        .chain(&loaded.test)
        .zip(generated.train.iter().chain(&generated.test))
    {
        assert_eq!(a.image, b.image);
        assert_eq!(a.labels, b.labels);
    }
}

#[test]
fn out_of_range_label_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_dataset(&small(), tmp.path()).unwrap();
    let path = tmp.path().join("val/0001_label.pgm");
    let mut labels = read_label_map(&path).unwrap();
    labels.set(3, 5, 9);
    write_label_map(&path, &labels).unwrap();
    match load_dataset(&manifest, 4) {
        Err(Error::LabelOutOfRange { path: p, value, .. }) => {
            assert_eq!(p, path);
            assert_eq!(value, 9);
        }
        other => panic!("expected LabelOutOfRange, got {other:?}"),
    }
}

#[test]
fn mismatched_dims_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_dataset(&small(), tmp.path()).unwrap();
    write_label_map(tmp.path().join("train/0000_label.pgm"), &LabelMap::filled(8, 8, 0)).unwrap();
    assert!(matches!(load_dataset(&manifest, 4), Err(Error::DimMismatch { .. })));
}

#[test]
fn truncated_image_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = generate_dataset(&small(), tmp.path()).unwrap();
    let path = tmp.path().join("test/0000.ppm");
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let err = load_dataset(&manifest, 4).unwrap_err();
    assert!(err.to_string().contains("0000.ppm"), "{err}");
}

#[test]
fn missing_manifest_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_dataset(tmp.path().join("manifest.tsv"), 4),
        Err(Error::MissingFile(_))
    ));
}
