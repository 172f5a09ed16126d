use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn btnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btnn"))
        .args(args)
        .env_remove("BTNN_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn untimed(o: &Output) -> String {
    stdout(o).lines().filter(|l| !l.starts_with("[time]")).collect::<Vec<_>>().join("\n")
}

#[test]
fn params_reproduce_table_counts() {
    let o = btnn(&["params", "--in-modes", "5,5,8,4", "--out-modes", "5,5,5,4", "--tucker-rank", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["BT", "228", "100000/57", "1754"]), "{s}");

    let o = btnn(&[
        "--format", "csv", "params", "--in-modes", "6,6,8,8", "--out-modes", "6,4,4,4", "--cp-rank", "4",
        "--tt-ranks", "1,2,2,2,1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "layer,params,ratio,ratio_floor\r\nFC,884736,1/1,1\r\nBT,1056,9216/11,837\r\nTT,360,12288/5,2457\r\n");

    let o = btnn(&["params", "--in-modes", "1", "--out-modes", "1", "--tucker-rank", "1"]);
    assert!(stdout(&o).lines().any(|l| l.starts_with("BT") && l.split_whitespace().nth(1) == Some("2")));
}

#[test]
fn invalid_input_exits_two() {
    for args in [
        &["params", "--in-modes", "5,0", "--out-modes", "2,2"][..],
        &["params", "--in-modes", "5,5", "--out-modes", "2"],
        &["params", "--in-modes", "4", "--out-modes", "4", "--tt-ranks", "2,1"],
        &["params", "--in-modes", "x"],
        &["gradcheck", "--precision", "f32"],
        &["nonsense"],
    ] {
        let o = btnn(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stdout(&o).is_empty());
    }
}

#[test]
fn gradcheck_passes_and_catches_corruption() {
    let o = btnn(&["gradcheck", "--seeds", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(s.lines().filter(|l| l.ends_with("pass")).count(), 12, "{s}");
    assert!(s.lines().any(|l| l.starts_with("bt_layer_zero_upstream") && l.contains("0.000e0")));

    let o = btnn(&["gradcheck", "--seeds", "2", "--op", "dense", "--corrupt-op", "dense"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
    assert!(stderr(&o).contains("dense") && stderr(&o).contains("weight[0]"), "{}", stderr(&o));
}

#[test]
fn oracle_modes() {
    let o = btnn(&["oracle", "--trials", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = btnn(&["oracle", "--trials", "3", "--in-modes", "7", "--out-modes", "5", "--tucker-rank", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let o = btnn(&["oracle", "--trials", "2", "--in-modes", "3,4", "--out-modes", "2,2", "--zero-input"]);
    assert!(stdout(&o).contains(" 0.000e0 "), "{}", stdout(&o));
    let o = btnn(&["oracle", "--in-modes", "64,64", "--out-modes", "64,64", "--cap", "1000"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_reports_matching_flops() {
    let o = btnn(&["bench", "--in-modes", "4,4", "--out-modes", "2,4", "--batch", "1", "--iters", "2", "--warmup", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(s.lines().filter(|l| l.ends_with("yes")).count(), 2, "{s}");
    assert!(s.contains("[time] bt_forward_median"));
}

#[test]
fn imagenet_shaped_bt_needs_fewer_flops() {
    let o = btnn(&[
        "--format", "csv", "cost", "--in-modes", "10,10,8,8", "--out-modes", "8,8,8,8", "--cp-rank", "1",
    ]);
    let s = stdout(&o);
    let flops = |layer: &str| -> u64 {
        let row = s.lines().find(|l| l.starts_with(layer)).unwrap();
        row.split(',').nth(4).unwrap().parse().unwrap()
    };
    assert!(flops("BT") < flops("FC"), "{s}");
}

#[test]
fn curve_csv_quotes_mode_lists() {
    let o = btnn(&["--format", "csv", "curve", "--max-order", "3", "--max-rank", "2"]);
    let s = stdout(&o);
    assert!(s.starts_with("d,R,in_modes,out_modes,params,flag\r\n1,1,4096,256,1048577,\r\n"), "{s}");
    assert!(s.contains("\"64,64\""));
}

#[test]
fn mnist_without_data_exits_two() {
    let o = btnn(&["train", "mnist"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("BTNN_DATA_DIR"));
}

fn write_idx(path: &Path, magic: u32, dims: &[u32], payload: &[u8]) {
    let mut bytes = magic.to_be_bytes().to_vec();
    for d in dims {
        bytes.extend(d.to_be_bytes());
    }
    bytes.extend(payload);
    fs::write(path, bytes).unwrap();
}

#[test]
fn mnist_evaluation_only_pass() {
    let dir = tempfile::tempdir().unwrap();
    for (prefix, n) in [("train", 40u32), ("t10k", 20)] {
        let pixels: Vec<u8> = (0..n as usize * 784).map(|i| (i * 7 % 256) as u8).collect();
        let labels: Vec<u8> = (0..n as u8).map(|i| i % 10).collect();
        write_idx(&dir.path().join(format!("{prefix}-images-idx3-ubyte")), 0x803, &[n, 28, 28], &pixels);
        write_idx(&dir.path().join(format!("{prefix}-labels-idx1-ubyte")), 0x801, &[n], &labels);
    }
    let o = Command::new(env!("CARGO_BIN_EXE_btnn"))
        .args(["--format", "csv", "train", "mnist", "--epochs", "0"])
        .env("BTNN_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("epoch,step,train_loss,test_accuracy\r\n0,0,-,"), "{s}");
}

#[test]
fn copy_runs_are_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let base = ["train", "lstm-copy", "--hidden", "8", "--gate-modes", "4,8", "--log-every", "2", "--seed", "3"];
    let run = |extra: &[&str]| {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        let o = btnn(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        o
    };
    let a = run(&["--steps", "4", "--checkpoint", &path("straight.ckpt")]);
    let b = run(&["--steps", "4"]);
    assert_eq!(untimed(&a), untimed(&b));

    run(&["--steps", "2", "--checkpoint", &path("half.ckpt")]);
    run(&["--steps", "4", "--resume", &path("half.ckpt"), "--checkpoint", &path("resumed.ckpt")]);
    assert_eq!(fs::read(path("straight.ckpt")).unwrap(), fs::read(path("resumed.ckpt")).unwrap());

    let o = btnn(&["train", "lstm-copy", "--precision", "f64", "--resume", &path("half.ckpt")]);
    assert_eq!(o.status.code(), Some(2));
}
