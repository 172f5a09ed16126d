//! End-to-end library flows over on-disk fixtures.

use std::fs;
use std::path::Path;

use btnn::data::{load_checkpoint, load_mnist, read_checkpoint_header, save_checkpoint, Split};
use btnn::nn::{TrainState, GATE_ORDER};
use btnn::train::{mnist_architecture, train_mnist, MnistOptions};
use btnn::{Error, Precision};

fn write_idx(path: &Path, magic: u32, dims: &[u32], payload: &[u8]) {
    let mut bytes = magic.to_be_bytes().to_vec();
    for d in dims {
        bytes.extend(d.to_be_bytes());
    }
    bytes.extend(payload);
    fs::write(path, bytes).unwrap();
}

/// Digits drawn as a bright horizontal band whose row encodes the label.
fn write_split(dir: &Path, prefix: &str, count: usize) {
    let mut pixels = Vec::with_capacity(count * 784);
    let mut labels = Vec::with_capacity(count);
    for s in 0..count {
        let label = (s * 7) % 10;
        labels.push(label as u8);
        for p in 0..784 {
            let row = p / 28;
            pixels.push(if row / 3 == label { 230 } else { ((p * 31 + s * 17) % 40) as u8 });
        }
    }
    write_idx(&dir.join(format!("{prefix}-images-idx3-ubyte")), 0x803, &[count as u32, 28, 28], &pixels);
    write_idx(&dir.join(format!("{prefix}-labels-idx1-ubyte")), 0x801, &[count as u32], &labels);
}

#[test]
fn idx_fixture_trains_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    write_split(dir.path(), "train", 200);
    write_split(dir.path(), "t10k", 50);
    let train = load_mnist::<f32>(dir.path(), Split::Train).unwrap();
    let test = load_mnist::<f32>(dir.path(), Split::Test).unwrap();
    assert_eq!((train.len(), train.width()), (200, 784));
    assert_eq!(train.inputs.data()[0], 230.0 / 255.0);

    let mut state = TrainState::<f32>::new(&mnist_architecture(1, 2).unwrap(), 4).unwrap();
    let opts = MnistOptions {
        epochs: 3,
        batch_size: 20,
        lr: 0.05,
    };
    let logs = train_mnist(&mut state, &train, &test, &opts, |_| {}).unwrap();
    assert!(logs.last().unwrap().test_accuracy > 0.9, "{logs:?}");

    let ckpt = dir.path().join("model.ckpt");
    save_checkpoint(&ckpt, &state).unwrap();
    let header = read_checkpoint_header(&ckpt).unwrap();
    assert_eq!(header.step, 30);
    assert_eq!(header.precision, Precision::F32);
    let text = String::from_utf8_lossy(&fs::read(&ckpt).unwrap()).into_owned();
    assert!(text.contains(&format!("gate_order: {GATE_ORDER}")));
    assert_eq!(load_checkpoint::<f32>(&ckpt).unwrap(), state);
    assert!(matches!(load_checkpoint::<f64>(&ckpt), Err(Error::Argument(_))));
}

#[test]
fn bad_magic_names_the_expected_value() {
    let dir = tempfile::tempdir().unwrap();
    write_split(dir.path(), "train", 3);
    write_idx(&dir.path().join("train-labels-idx1-ubyte"), 0x803, &[3], &[0, 1, 2]);
    let err = load_mnist::<f64>(dir.path(), Split::Train).unwrap_err();
    assert!(err.to_string().contains("0x00000801"), "{err}");
}
