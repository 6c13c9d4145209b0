use std::fs;
use std::path::Path;

use imvfs::datamodel::{load_dataset, simulate_missing, write_dataset, MANIFEST_FILE};
use imvfs::{Error, MultiViewDataset};
use ndarray::array;

fn three_views() -> MultiViewDataset {
    MultiViewDataset::complete(
        vec![
            array![[1.0, 2.0, 3.0, 4.0], [0.5, 0.0, 0.25, 1.0]],
            array![[0.0, 1.0, 0.0, 1.0], [2.0, 2.0, 2.0, 2.0], [3.0, 1.0, 4.0, 1.0]],
            array![[9.0, 8.0, 7.0, 6.0]],
        ],
        Some(vec![0, 1, 0, 1]),
    )
    .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn round_trip_preserves_views_labels_and_mask() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_missing(&three_views(), 0.25, 4).unwrap();
    write_dataset(dir.path(), &ds).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back.presence(), ds.presence());
    assert_eq!(back.labels(), ds.labels());
    for v in 0..3 {
        assert_eq!(back.view(v), ds.view(v));
    }
}

#[test]
fn only_listed_views_are_read() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.txt", "1 2 3\n4 5 6\n");
    write(dir.path(), "b.txt", "1,0,1\n");
    write(dir.path(), "c.txt", "this file is not a matrix\n");
    write(
        dir.path(),
        MANIFEST_FILE,
        r#"
num_views = 2
[[views]]
path = "a.txt"
rows = 2
cols = 3
[[views]]
path = "b.txt"
rows = 1
cols = 3
"#,
    );
    let ds = load_dataset(dir.path()).unwrap();
    assert_eq!(ds.num_views(), 2);
    assert_eq!(ds.view_dims(), vec![2, 1]);
    assert!(ds.is_complete());
    assert!(ds.labels().is_none());
}

#[test]
fn negative_entry_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.txt", "1 2 3\n4 -5 6\n");
    write(dir.path(), "b.txt", "1 0 1\n");
    write(
        dir.path(),
        MANIFEST_FILE,
        "num_views = 2\n[[views]]\npath = \"a.txt\"\nrows = 2\ncols = 3\n[[views]]\npath = \"b.txt\"\nrows = 1\ncols = 3\n",
    );
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(matches!(err, Error::NegativeEntry { view: 0, .. }), "{err}");
    assert!(err.to_string().contains("negative entry"));
}

#[test]
fn declared_shape_must_match() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.txt", "1 2 3\n");
    write(dir.path(), "b.txt", "1 0 1\n");
    write(
        dir.path(),
        MANIFEST_FILE,
        "num_views = 2\n[[views]]\npath = \"a.txt\"\nrows = 2\ncols = 3\n[[views]]\npath = \"b.txt\"\nrows = 1\ncols = 3\n",
    );
    assert!(matches!(load_dataset(dir.path()), Err(Error::Manifest { .. })));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Io { .. })));
}
