use std::io::Write;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use sr1tr::dataset::{load_dataset, parse_idx, read_idx_file, subset, write_idx, IdxTensor};

fn desk(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-desk").join(name)
}

/// Seed whose 1000-image subset of the desk pool is pinned below.
const SUBSET_SEED: u64 = 1;

#[test]
fn desk_fixtures_load() {
    let train = load_dataset(&desk("train-images-idx3-ubyte.gz"), &desk("train-labels-idx1-ubyte.gz"), 10).unwrap();
    assert_eq!((train.n, train.d, train.k), (4000, 784, 10));
    assert!(train.images.iter().all(|&p| (0.0..=1.0).contains(&p)));
    for i in 0..train.n {
        let l = train.label(i);
        assert_eq!(l.iter().sum::<f64>(), 1.0);
        assert_eq!(l.iter().filter(|&&v| v == 1.0).count(), 1);
    }
    let test = load_dataset(&desk("t10k-images-idx3-ubyte.gz"), &desk("t10k-labels-idx1-ubyte.gz"), 10).unwrap();
    assert_eq!((test.n, test.d), (1000, 784));
}

#[test]
fn desk_subset_covers_classes() {
    let train = load_dataset(&desk("train-images-idx3-ubyte.gz"), &desk("train-labels-idx1-ubyte.gz"), 10).unwrap();
    let sub = subset(&train, 1000, SUBSET_SEED).unwrap();
    assert_eq!(sub.n, 1000);
    let hist = sub.class_histogram();
    assert!(hist.iter().filter(|&&c| c > 0).count() >= 8, "{hist:?}");
    assert_eq!(sub, subset(&train, 1000, SUBSET_SEED).unwrap());
}

#[test]
fn gzip_and_plain_files_agree() {
    let gz = desk("t10k-labels-idx1-ubyte.gz");
    let mut raw = Vec::new();
    std::io::Read::read_to_end(&mut GzDecoder::new(std::fs::File::open(&gz).unwrap()), &mut raw).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("labels-idx1-ubyte");
    std::fs::File::create(&plain).unwrap().write_all(&raw).unwrap();
    assert_eq!(read_idx_file(&plain).unwrap(), read_idx_file(&gz).unwrap());
    assert_eq!(parse_idx(&raw).unwrap().dims, vec![1000]);
}

#[test]
fn count_mismatch_and_bad_labels_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, t: &IdxTensor| -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, write_idx(t).unwrap()).unwrap();
        p
    };
    let images = write("img", &IdxTensor { dims: vec![2, 1, 2], data: vec![0, 255, 10, 20] });
    let labels = write("lab", &IdxTensor { dims: vec![3], data: vec![0, 1, 2] });
    assert!(load_dataset(&images, &labels, 10).is_err());
    let labels = write("lab2", &IdxTensor { dims: vec![2], data: vec![0, 10] });
    assert!(load_dataset(&images, &labels, 10).is_err());
    let labels = write("lab3", &IdxTensor { dims: vec![2], data: vec![3, 9] });
    let ds = load_dataset(&images, &labels, 10).unwrap();
    assert_eq!(ds.image(0), &[0.0, 1.0]);
    assert_eq!(ds.class(0), 3);
}

fn mnist_file(dir: &Path, stem: &str) -> PathBuf {
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        gz
    } else {
        dir.join(stem)
    }
}

/// Runs only when `MNIST_DIR` points at the full MNIST distribution.
#[test]
fn full_mnist_when_available() {
    let Some(dir) = std::env::var_os("MNIST_DIR").map(PathBuf::from) else {
        eprintln!("MNIST_DIR not set; skipping");
        return;
    };
    let images = read_idx_file(&mnist_file(&dir, "train-images-idx3-ubyte")).unwrap();
    assert_eq!(images.dims, vec![60000, 28, 28]);
    let test = load_dataset(
        &mnist_file(&dir, "t10k-images-idx3-ubyte"),
        &mnist_file(&dir, "t10k-labels-idx1-ubyte"),
        10,
    )
    .unwrap();
    assert_eq!((test.n, test.k), (10000, 10));
}
