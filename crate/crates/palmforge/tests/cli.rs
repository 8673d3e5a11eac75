mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{copy_dir, fixtures};

fn palmforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_palmforge")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn last_line(o: &Output) -> String {
    stdout(o).lines().last().unwrap_or_default().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let pools = fixtures().join("pools");
    let text = format!(
        "seed = 5\noutput_size = [640, 360]\ntrain_count = 3\nval_count = 1\n\
         sprite_pool = {:?}\nbg_pool_train = {:?}\nbg_pool_val = {:?}\n{extra}\n\
         [counts.palm]\nrange = [2, 4]\n",
        pools.join("sprites"),
        pools.join("backgrounds/green"),
        pools.join("backgrounds/red"),
    );
    let path = dir.join("gen.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(palmforge(&["--help"]).status.code(), Some(0));
    assert_eq!(palmforge(&["--version"]).status.code(), Some(0));
    assert_eq!(palmforge(&["generate", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(palmforge(&[]).status.code(), Some(1));
    assert_eq!(palmforge(&["generate", "--bogus"]).status.code(), Some(1));
    assert_eq!(palmforge(&["evaluate", "--gt", "x"]).status.code(), Some(1));
    assert_eq!(palmforge(&["generate", "--output-size", "12by3"]).status.code(), Some(1));
}

#[test]
fn generate_prints_summary_and_honours_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("ds");
    let o = palmforge(&["generate", "--config", p(&cfg), "--out", p(&out), "--seed", "7", "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let last = last_line(&o);
    assert!(last.starts_with("train=3 val=1 palm≈"), "{last}");
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 7"), "flag seed must win over the file");

    let o = palmforge(&["generate", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--overwrite"), "{}", stderr(&o));

    let o = palmforge(&[
        "generate", "--config", p(&cfg), "--out", p(&out), "--overwrite", "--train-count", "2", "--val-count", "0",
        "--count", "palm=1-1", "--no-rotation",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(last_line(&o), "train=2 val=0 palm≈2/0");
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 5"));
}

#[test]
fn bad_config_names_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "colour = \"green\"");
    let o = palmforge(&["generate", "--config", p(&cfg), "--out", p(&dir.path().join("ds"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("colour") && err.contains("line 8"), "{err}");
}

#[test]
fn missing_sprite_dir_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let missing = dir.path().join("no-sprites-here");
    let o = palmforge(&["generate", "--config", p(&cfg), "--sprite-pool", p(&missing), "--out", p(&dir.path().join("ds"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(p(&missing)), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let o = palmforge(&["generate", "--config", "/definitely/not/here.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_perfect_detector() {
    let dir = tempfile::tempdir().unwrap();
    let gt = fixtures().join("counting/gt");
    let det = dir.path().join("det");
    fs::create_dir_all(&det).unwrap();
    for entry in fs::read_dir(&gt).unwrap() {
        let path = entry.unwrap().path();
        let text: String = fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(|l| format!("{l} 1.0\n"))
            .collect();
        fs::write(det.join(path.file_name().unwrap()), text).unwrap();
    }
    let out = dir.path().join("report");
    let o = palmforge(&["evaluate", "--gt", p(&gt), "--det", p(&det), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(last_line(&o), "mAP@0.5 = 1.0000");
    assert!(out.join("report.json").is_file());
    assert!(fs::read_to_string(out.join("report.txt")).unwrap().ends_with("mAP@0.5 = 1.0000\n"));
    let csv = fs::read_to_string(out.join("pr/palm.csv")).unwrap();
    assert_eq!(csv.lines().count(), 188);
}

#[test]
fn evaluate_groups_by_altitude() {
    let alt = fixtures().join("altitude");
    let o = palmforge(&[
        "evaluate", "--gt", p(&alt.join("gt")), "--det", p(&alt.join("det")), "--tags", p(&alt.join("tags.json")),
        "--group-by", "altitude",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("grouped by altitude"));
    for (alt, imgs, palms) in [("25m", 38, 187), ("45m", 12, 126), ("70m", 3, 66)] {
        let row = text.lines().find(|l| l.starts_with(alt)).unwrap();
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols[1..3], [imgs.to_string(), palms.to_string()], "{row}");
    }
    assert!(last_line(&o).starts_with("mAP@0.5 = "));
}

#[test]
fn evaluate_without_overlap_fails() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("other.txt"), "0 0.5 0.5 0.1 0.1 0.9\n").unwrap();
    let gt = fixtures().join("counting/gt");
    let o = palmforge(&["evaluate", "--gt", p(&gt), "--det", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no image id"), "{}", stderr(&o));

    let o = palmforge(&["evaluate", "--gt", "/no/such/dir", "--det", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn count_fixture_report() {
    let c = fixtures().join("counting");
    let o = palmforge(&["count", "--det", p(&c.join("det")), "--gt", p(&c.join("gt"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "palm: predicted 199, labeled 187, delta +12"), "{}", stdout(&o));

    let o = palmforge(&["count", "--det", p(&c.join("det")), "--conf", "1.0"]);
    assert_eq!(last_line(&o), "total: predicted 0");
}

#[test]
fn count_empty_dir_and_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = palmforge(&["count", "--det", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(last_line(&o), "total: predicted 0");

    fs::write(dir.path().join("img_7.txt"), "0 0.5 0.5 0.1 0.1 0.9\n0 0.5 0.5 0.1 0.1 high\n").unwrap();
    let o = palmforge(&["count", "--det", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("img_7.txt") && err.contains("line 2"), "{err}");
}

#[test]
fn experiment_and_charts_commands() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures().join("pools"), &dir.path().join("pools"));
    copy_dir(&fixtures().join("experiment"), &dir.path().join("experiment"));
    let spec = dir.path().join("experiment/exp.toml");

    let o = palmforge(&["experiment", "--spec", p(&spec), "--phase", "evaluate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let baseline = stdout(&o).lines().find(|l| l.starts_with("baseline")).unwrap().to_string();
    assert!(baseline.contains("0.6500"), "{baseline}");
    assert!(!dir.path().join("experiment/runs/baseline/dataset").exists(), "evaluation must not generate");

    let charts = dir.path().join("charts");
    let summary = dir.path().join("experiment/runs/summary.json");
    let o = palmforge(&["charts", "--summary", p(&summary), "--out", p(&charts)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        fs::read(charts.join("map_by_variant.svg")).unwrap(),
        fs::read(dir.path().join("experiment/runs/charts/map_by_variant.svg")).unwrap()
    );
    assert!(charts.join("map_by_altitude.svg").is_file());
}
