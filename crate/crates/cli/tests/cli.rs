use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use monge_mmd::{EvalReport, SampleSet};

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monge-mmd"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

const CONFIG: &str = r#"
output_dir = "run"

[source]
family = "two_moons"
n = 60
seed = 1

[target]
family = "two_circles"
n = 60
seed = 2

[train]
epochs = 5
batch_size = 20

[evaluation]
test_size = 100

[compare]
sizes = [40]
mmd_epochs = 3
"#;

#[test]
fn generate_writes_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "--family", "two-moons", "--n", "500", "--seed", "3", "--out"];
    let a = cli(&[&args[..], &["a.csv"]].concat(), dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(String::from_utf8_lossy(&a.stdout).starts_with("500 rows"));
    cli(&[&args[..], &["b.csv"]].concat(), dir.path());
    let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(text.lines().count(), 501);
    assert_eq!(text.lines().next(), Some("x0,x1"));
    assert_eq!(text, fs::read_to_string(dir.path().join("b.csv")).unwrap());
}

#[test]
fn invalid_family_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["generate", "--family", "spirals", "--n", "5", "--out", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["train", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    let out = cli(&["train", "c.toml", "--set", "train.batch_size=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch_size"));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    let out = cli(&["train", "c.toml"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    let loss = fs::read_to_string(run.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 6);
    assert!(run.join("eval.json").exists());
    assert!(run.join("config.toml").exists());

    cli(&["generate", "--family", "two-moons", "--n", "50", "--seed", "9", "--out", "s.csv"], dir.path());
    cli(&["generate", "--family", "two-circles", "--n", "50", "--seed", "10", "--out", "t.csv"], dir.path());
    let first = cli(&["eval", "run/model.ckpt", "s.csv", "t.csv"], dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = cli(&["eval", "run/model.ckpt", "s.csv", "t.csv", "--out", "e.json"], dir.path());
    assert!(second.status.success());
    assert_eq!(
        String::from_utf8_lossy(&first.stdout).trim_end(),
        fs::read_to_string(dir.path().join("e.json")).unwrap().trim_end()
    );
}

#[test]
fn zero_epochs_gives_header_only_loss_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    let out = cli(&["train", "c.toml", "--set", "train.epochs=0", "--output-dir", "z"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read_to_string(dir.path().join("z/loss.csv")).unwrap(),
        "epoch,objective,mmd2,cost\n"
    );
    assert!(dir.path().join("z/model.ckpt").exists());
}

#[test]
fn identity_checkpoint_eval_reproduces_source_statistics() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("id.ckpt"),
        "monge-mmd checkpoint 1\nepoch 0\nlayers 1\n2 2 identity\nparams 6\n1e0\n0e0\n0e0\n1e0\n0e0\n0e0\noptimizer none\nend\n",
    )
    .unwrap();
    fs::write(dir.path().join("s.csv"), "x0,x1\n0,0\n2,0\n0,4\n").unwrap();
    fs::write(dir.path().join("t.csv"), "x0,x1\n1,1\n2,2\n").unwrap();
    let out = cli(&["eval", "id.ckpt", "s.csv", "t.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = EvalReport::from_json(&String::from_utf8_lossy(&out.stdout)).unwrap();
    let source = SampleSet::from_points(&[[0.0, 0.0], [2.0, 0.0], [0.0, 4.0]]).unwrap();
    assert_eq!(report.mean, source.mean().unwrap());
    assert_eq!(report.sd, source.std_dev().unwrap());
    assert_eq!(report.transport_cost, 0.0);
}

#[test]
fn corrupted_checkpoint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.ckpt"), "monge-mmd checkpoint 1\nepoch zero\n").unwrap();
    fs::write(dir.path().join("s.csv"), "x0,x1\n0,0\n1,1\n").unwrap();
    let out = cli(&["eval", "bad.ckpt", "s.csv", "s.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.ckpt"));
}

#[test]
fn diverging_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    let out = cli(
        &["train", "c.toml", "--set", "train.adam.lr=1e300", "--set", "train.epochs=50"],
        dir.path(),
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(3), "{stderr}");
    assert!(stderr.contains("epoch"), "{stderr}");
}

#[test]
fn compare_writes_csv_and_rejects_oversized_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    let out = cli(&["compare", "c.toml"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("run/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("method,data_size,epsilon,mean0,mean1,sd0,sd1,runtime_seconds\n"));

    let big = cli(
        &["compare", "c.toml", "--set", "compare.sizes=[100]", "--set", "compare.max_points=50"],
        dir.path(),
    );
    assert_eq!(big.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&big.stderr).contains("MiB"));
}

#[test]
fn help_lists_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [&["--help"][..], &["generate", "--help"], &["train", "--help"], &["eval", "--help"], &["compare", "--help"]] {
        let out = cli(sub, dir.path());
        assert!(out.status.success());
        let text = String::from_utf8_lossy(&out.stdout);
        for key in ["inv_lambda", "batch_size", "epsilon_scale", "test_size", "kernel.alpha"] {
            assert!(text.contains(key), "{sub:?} help lacks {key}");
        }
    }
}
