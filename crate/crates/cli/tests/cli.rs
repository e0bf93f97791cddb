use std::path::Path;
use std::process::{Command, Output};

fn mvrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvrecon")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mvrecon(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sphere_data(root: &Path) -> std::path::PathBuf {
    let data = root.join("data");
    ok(&["gen-data", "--out", p(&data), "--family", "sphere", "--count", "1", "--eval", "0", "--seed", "3"]);
    data
}

fn cd_of(table: &str) -> f64 {
    let row = table.lines().find(|l| l.starts_with("train_0000") || l.starts_with("mesh")).expect("score row");
    row.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn zero_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvrecon(&["gen-data", "--out", p(&dir.path().join("d")), "--count", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--count"));
}

#[test]
fn unknown_mode_lists_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let data = sphere_data(dir.path());
    let out = mvrecon(&["train", "--data", p(&data), "--out", p(&dir.path().join("run")), "--mode", "A9"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("A1") && err.contains("A5"), "{err}");
}

#[test]
fn missing_arguments_exit_2() {
    assert_eq!(mvrecon(&["train"]).status.code(), Some(2));
    assert_eq!(mvrecon(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn stats_at_zero_severity_hit_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["gen-data", "--out", p(&dir.path().join("d")), "--count", "2", "--eval", "0", "--severity", "0", "--stats"]);
    assert!(out.contains("severity = 0"), "{out}");
    assert!(out.contains("99.000"), "{out}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.cfg");
    std::fs::write(&cfg, "train = 2\neval = 0\nviews = 4\nfamily = sphere\n").unwrap();
    let out = ok(&["gen-data", "--out", p(&dir.path().join("d")), "--config", p(&cfg), "--views", "6"]);
    assert!(out.contains("views = 6") && out.contains("train = 2"), "{out}");
}

#[test]
fn a_mesh_scores_zero_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let data = sphere_data(dir.path());
    let run = dir.path().join("run");
    ok(&["train", "--data", p(&data), "--out", p(&run), "--steps", "0"]);
    let mesh = dir.path().join("m.obj");
    ok(&["reconstruct", "--checkpoint", p(&run.join("ckpt")), "--data", p(&data), "--shape", "train_0000", "--out", p(&mesh)]);
    let table = ok(&["eval", "--mesh", p(&mesh), "--gt", p(&mesh), "--views", "4", "--resolution", "32", "--points", "256"]);
    assert_eq!(cd_of(&table), 0.0, "{table}");
}

#[test]
fn short_pipeline_is_reproducible_single_threaded() {
    let run_once = |root: &Path| -> (String, Vec<u8>, Vec<u8>, String) {
        let data = sphere_data(root);
        let run = root.join("run");
        ok(&["--threads", "1", "train", "--data", p(&data), "--out", p(&run), "--steps", "10"]);
        let mesh = root.join("m.obj");
        ok(&["--threads", "1", "reconstruct", "--checkpoint", p(&run.join("ckpt")), "--data", p(&data), "--shape", "train_0000", "--out", p(&mesh)]);
        let tex = root.join("t.obj");
        ok(&["--threads", "1", "texture", "--mesh", p(&mesh), "--data", p(&data), "--shape", "train_0000", "--out", p(&tex), "--size", "256"]);
        let table = ok(&[
            "--threads", "1", "eval", "--mesh", p(&mesh), "--data", p(&data), "--shape", "train_0000", "--views", "4", "--resolution", "32",
            "--points", "256",
        ]);
        (
            std::fs::read_to_string(run.join("loss.csv")).unwrap(),
            std::fs::read(&mesh).unwrap(),
            std::fs::read(root.join("t.png")).unwrap(),
            table,
        )
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_once(a.path());
    let rb = run_once(b.path());
    assert_eq!(ra.0, rb.0);
    assert!(ra.1 == rb.1, "meshes differ");
    assert!(ra.2 == rb.2, "textures differ");
    assert_eq!(cd_of(&ra.3), cd_of(&rb.3));
}

#[test]
fn resume_continues_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let data = sphere_data(dir.path());
    let run = dir.path().join("run");
    ok(&["train", "--data", p(&data), "--out", p(&run), "--steps", "6", "--checkpoint-every", "3"]);
    let full = std::fs::read_to_string(run.join("loss.csv")).unwrap();
    let again = dir.path().join("again");
    std::fs::create_dir_all(&again).unwrap();
    let mut head: Vec<&str> = full.lines().take(4).collect();
    head.push("");
    std::fs::write(again.join("loss.csv"), head.join("\n")).unwrap();
    ok(&["train", "--resume", p(&run.join("ckpt-000003")), "--out", p(&again)]);
    assert_eq!(std::fs::read_to_string(again.join("loss.csv")).unwrap(), full);
}
