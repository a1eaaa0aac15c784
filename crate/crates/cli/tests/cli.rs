use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn coexmap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coexmap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(coexmap(&["simulate", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(coexmap(&["frobnicate"], dir.path()).status.code(), Some(1));
    let no_scenario = coexmap(&["simulate", "--seed", "1"], dir.path());
    assert_eq!(no_scenario.status.code(), Some(1), "{}", stderr(&no_scenario));
    let bad_window = coexmap(
        &["map", "--config", &config("decoupling/run.json"), "--window", "9,3"],
        dir.path(),
    );
    assert_eq!(bad_window.status.code(), Some(1), "{}", stderr(&bad_window));
    assert_eq!(coexmap(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn empty_scenario_simulates_to_an_empty_dataset() {
    let dir = TempDir::new().unwrap();
    let o = coexmap(&["simulate", "--config", &config("empty/run.json")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("dataset.csv"));
    assert_eq!(rows.len(), 1, "header only");
    assert_eq!(rows[0].join(","), "f1,f2,f3,f4,f5,f6,f7,f8,label");
    assert!(dir.path().join("reports.bin").exists());

    let map = coexmap(&["map", "--config", &config("empty/run.json")], dir.path());
    assert_eq!(map.status.code(), Some(2), "{}", stderr(&map));
}

#[test]
fn single_class_dataset_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("one_class.csv");
    let mut text = String::from("f1,f2,f3,f4,f5,f6,f7,f8,label\n");
    for i in 0..50 {
        text += &format!("{},-60,-58,1,2,3,20,4,Wlan11g\n", 400 + 50 * i);
    }
    fs::write(&path, text).unwrap();
    let o = coexmap(
        &[
            "train-eval",
            "--config",
            &config("train.json"),
            "--dataset",
            path.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("need >= 2 classes"), "{}", stderr(&o));
}

#[test]
fn train_eval_writes_the_frontier() {
    let dir = TempDir::new().unwrap();
    let o = coexmap(&["train-eval", "--config", &config("train.json")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let frontier = csv_rows(&dir.path().join("frontier.csv"));
    assert_eq!(frontier[0].join(","), "model,complexity,accuracy,mean_operations");
    let models: Vec<(String, String)> = frontier[1..].iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    let expected = [
        ("tree", "5"),
        ("tree", "20"),
        ("tree", "50"),
        ("tree", "200"),
        ("forest", "30"),
        ("knn", "5"),
    ];
    assert_eq!(models, expected.map(|(m, c)| (m.to_owned(), c.to_owned())));
    for r in &frontier[1..] {
        let acc: f64 = r[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    let ablation = csv_rows(&dir.path().join("ablation.csv"));
    assert_eq!(ablation.len(), 2);
    assert_eq!(ablation[1][0], "20");
    for name in ["recall.csv", "timing.csv", "metrics.json", "model.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn long_horizon_spectrogram_has_one_row_per_hour() {
    let dir = TempDir::new().unwrap();
    let o = coexmap(
        &["spectrogram", "--config", &config("longrun/run.json"), "--node", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for kind in ["power", "busy"] {
        let rows = csv_rows(&dir.path().join(format!("spectrogram_node1_wlan_{kind}.csv")));
        assert_eq!(rows.len(), 42 + 1, "{kind}");
        assert!(rows[1..].iter().all(|r| r.len() == rows[0].len()));
    }
}

#[test]
fn missing_technology_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let o = coexmap(
        &["map", "--config", &config("decoupling/run.json"), "--tech", "ble"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn report_codec_round_trips() {
    let dir = TempDir::new().unwrap();
    let sim = coexmap(
        &["simulate", "--config", &config("decoupling/run.json"), "--seed", "3"],
        dir.path(),
    );
    assert!(sim.status.success(), "{}", stderr(&sim));
    let bin = dir.path().join("reports.bin");
    let original = fs::read(&bin).unwrap();
    assert!(!original.is_empty());

    let decoded = coexmap(&["report-codec", "decode", bin.to_str().unwrap()], dir.path());
    assert!(decoded.status.success(), "{}", stderr(&decoded));
    let lines: Vec<&str> = std::str::from_utf8(&decoded.stdout).unwrap().lines().collect();
    assert!(!lines.is_empty());
    let json = dir.path().join("reports.json");
    fs::write(&json, format!("[{}]", lines.join(","))).unwrap();

    let again = dir.path().join("again.bin");
    let encoded = coexmap(
        &[
            "report-codec",
            "encode",
            json.to_str().unwrap(),
            "--output",
            again.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(encoded.status.success(), "{}", stderr(&encoded));
    assert_eq!(fs::read(&again).unwrap(), original);

    let garbage = dir.path().join("garbage.bin");
    fs::write(&garbage, [0xFFu8; 7]).unwrap();
    let bad = coexmap(&["report-codec", "decode", garbage.to_str().unwrap()], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}
