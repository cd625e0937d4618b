//! End-to-end runs of the installed binary: each test drives a real
//! subcommand through a temp directory and checks files, stdout, and exit
//! codes. Determinism claims are tested as byte equality of reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use xwtecg::xwavelet::export::{
    read_wcoh_binary, read_wcoh_csv, read_wcs_binary, read_wcs_csv,
};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_xwtecg")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("XWT_ECG_THREADS")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_fail(args: &[&str], expected_code: i32) -> Output {
    let out = run(args);
    assert_eq!(
        out.status.code(),
        Some(expected_code),
        "command {:?}: stderr {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Writes the synthetic template into `dir` and returns its path.
fn make_template(dir: &Path) -> PathBuf {
    let path = dir.join("template.csv");
    run_ok(&["synth", "template", "--out", path_str(&path)]);
    path
}

#[test]
fn synth_template_writes_provenance_and_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let path = make_template(dir.path());
    let first = fs::read(&path).unwrap();
    assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 1000);
    let prov = fs::read_to_string(dir.path().join("template.csv.prov")).unwrap();
    assert!(prov.contains("seed 0"), "{prov}");

    run_ok(&["synth", "template", "--out", path_str(&path)]);
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn extract_emits_one_row_per_beat_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let template = make_template(dir.path());
    let record = dir.path().join("rec.csv");
    run_ok(&[
        "synth",
        "record",
        "--out",
        path_str(&record),
        "--beats",
        "6",
        "--noise",
        "0.02",
        "--seed",
        "11",
    ]);
    let peaks = fs::read_to_string(dir.path().join("rec.csv.rpeaks")).unwrap();
    assert_eq!(peaks.lines().count(), 6);

    let features = dir.path().join("features.csv");
    let args = [
        "extract",
        path_str(&record),
        "--template",
        path_str(&template),
        "--out",
        path_str(&features),
    ];
    run_ok(&args);
    let first = fs::read_to_string(&features).unwrap();
    assert_eq!(first.lines().next(), Some("beat_id,record_id,lead,pa,pb,label"));
    assert_eq!(first.lines().count(), 1 + 6, "header plus one row per beat");

    run_ok(&args);
    assert_eq!(fs::read_to_string(&features).unwrap(), first);
}

#[test]
fn extract_without_records_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let template = make_template(dir.path());
    let out = dir.path().join("features.csv");
    run_fail(
        &[
            "extract",
            "--template",
            path_str(&template),
            "--out",
            path_str(&out),
        ],
        2,
    );
}

#[test]
fn template_from_missing_record_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.csv");
    run_fail(
        &[
            "template",
            "--record",
            "/nonexistent/record.csv",
            "--out",
            path_str(&out),
        ],
        2,
    );
}

#[test]
fn template_from_synthetic_record_has_1000_lines_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let record = dir.path().join("rec.csv");
    run_ok(&[
        "synth",
        "record",
        "--out",
        path_str(&record),
        "--beats",
        "5",
        "--noise",
        "0.01",
    ]);
    let out = dir.path().join("beat1.csv");
    let args = [
        "template",
        "--record",
        path_str(&record),
        "--beat-ordinal",
        "1",
        "--out",
        path_str(&out),
    ];
    run_ok(&args);
    let first = fs::read_to_string(&out).unwrap();
    assert_eq!(first.lines().count(), 1000);
    let prov = fs::read_to_string(dir.path().join("beat1.csv.prov")).unwrap();
    assert!(prov.contains("beat 1"), "{prov}");

    run_ok(&args);
    assert_eq!(fs::read_to_string(&out).unwrap(), first);
}

const TRAIN_FIXTURE: &str = "beat_id,record_id,lead,pa,pb,label\n\
    n1,r,iii,10,20,Normal\n\
    n2,r,iii,12,24,Normal\n\
    n3,r,iii,11,22,Normal\n\
    n4,r,iii,13,26,Normal\n\
    a1,r,iii,2,4,IMI_Type1\n\
    a2,r,iii,3,6,IMI_Type1\n\
    b1,r,iii,2.5,5,IMI_Type2\n\
    b2,r,iii,3.5,7,IMI_Type2\n";

#[test]
fn train_writes_midpoint_thresholds_for_a_separable_table() {
    let dir = TempDir::new().unwrap();
    let features = dir.path().join("train.csv");
    fs::write(&features, TRAIN_FIXTURE).unwrap();
    let model = dir.path().join("model.txt");
    run_ok(&[
        "train",
        "--features",
        path_str(&features),
        "--out",
        path_str(&model),
    ]);
    let text = fs::read_to_string(&model).unwrap();
    assert_eq!(text.lines().next(), Some("xwtecg-model-v1"));
    assert!(text.contains("th_pa = 6.75"), "{text}");
    assert!(text.contains("th_pb = 13.5"), "{text}");
    assert!(text.contains("k=3"), "{text}");
}

#[test]
fn train_on_a_single_class_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let features = dir.path().join("train.csv");
    fs::write(
        &features,
        "beat_id,record_id,lead,pa,pb,label\nn1,r,iii,10,20,Normal\nn2,r,iii,12,24,Normal\n",
    )
    .unwrap();
    let model = dir.path().join("model.txt");
    let out = run_fail(
        &[
            "train",
            "--features",
            path_str(&features),
            "--out",
            path_str(&model),
        ],
        2,
    );
    assert!(!model.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("class"));
}

#[test]
fn classify_appends_a_predicted_column_and_respects_the_thresholds() {
    let dir = TempDir::new().unwrap();
    let features = dir.path().join("train.csv");
    fs::write(&features, TRAIN_FIXTURE).unwrap();
    let model = dir.path().join("model.txt");
    run_ok(&[
        "train",
        "--features",
        path_str(&features),
        "--out",
        path_str(&model),
    ]);
    let labeled = dir.path().join("labeled.csv");
    run_ok(&[
        "classify",
        "--features",
        path_str(&features),
        "--model",
        path_str(&model),
        "--out",
        path_str(&labeled),
    ]);
    let text = fs::read_to_string(&labeled).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("beat_id,record_id,lead,pa,pb,label,predicted")
    );
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let truth = fields[5];
        let predicted = fields[6];
        if truth == "Normal" {
            assert_eq!(predicted, "Normal", "{line}");
        } else {
            assert_ne!(predicted, "Normal", "{line}");
        }
    }
}

#[test]
fn evaluate_scores_a_perfect_table_at_100_percent() {
    let dir = TempDir::new().unwrap();
    let labeled = dir.path().join("labeled.csv");
    let mut text = String::from("beat_id,record_id,lead,pa,pb,label,predicted\n");
    for (i, label) in ["Normal", "Normal", "IMI_Type1", "IMI_Type2"].iter().enumerate() {
        text.push_str(&format!("b{i},r,iii,{i},{i},{label},{label}\n"));
    }
    fs::write(&labeled, text).unwrap();
    let metrics = dir.path().join("metrics.csv");
    let out = run_ok(&[
        "evaluate",
        "--features",
        path_str(&labeled),
        "--out",
        path_str(&metrics),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("accuracy     100.00"), "{stdout}");
    let csv = fs::read_to_string(&metrics).unwrap();
    assert!(csv.contains("coarse,2,2,0,0,100.00,100.00,100.00"), "{csv}");
    assert!(csv.contains("type,1,1,0,0,100.00,100.00,100.00"), "{csv}");
}

#[test]
fn evaluate_replays_the_reference_per_type_accuracies() {
    // 926 Type 1 beats with 106 errors and 1880 Type 2 beats with 244, all
    // called abnormal by both sides: the type report's sensitivity is the
    // Type 1 accuracy (88.55) and its specificity the Type 2 accuracy
    // (87.02).
    let dir = TempDir::new().unwrap();
    let labeled = dir.path().join("labeled.csv");
    let mut text = String::from("beat_id,record_id,lead,pa,pb,label,predicted\n");
    let mut beat = 0;
    let mut push = |truth: &str, predicted: &str, count: usize, text: &mut String| {
        for _ in 0..count {
            text.push_str(&format!("b{beat},r,iii,1,1,{truth},{predicted}\n"));
            beat += 1;
        }
    };
    push("IMI_Type1", "IMI_Type1", 820, &mut text);
    push("IMI_Type1", "IMI_Type2", 106, &mut text);
    push("IMI_Type2", "IMI_Type2", 1636, &mut text);
    push("IMI_Type2", "IMI_Type1", 244, &mut text);
    fs::write(&labeled, text).unwrap();

    let out = run_ok(&["evaluate", "--features", path_str(&labeled)]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("sensitivity  88.55"), "{stdout}");
    assert!(stdout.contains("specificity  87.02"), "{stdout}");
}

#[test]
fn evaluate_of_an_empty_table_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let labeled = dir.path().join("labeled.csv");
    fs::write(&labeled, "beat_id,record_id,lead,pa,pb,label\n").unwrap();
    run_fail(&["evaluate", "--features", path_str(&labeled)], 2);
}

#[test]
fn spectrogram_of_the_self_pair_exports_consistent_formats() {
    let dir = TempDir::new().unwrap();
    let template = make_template(dir.path());
    let prefix = dir.path().join("spec");
    run_ok(&[
        "spectrogram",
        "--beat",
        path_str(&template),
        "--template",
        path_str(&template),
        "--out-prefix",
        path_str(&prefix),
    ]);

    let wcs_csv_path = dir.path().join("spec.wcs.csv");
    let wcoh_csv_path = dir.path().join("spec.wcoh.csv");
    let csv_text = fs::read_to_string(&wcs_csv_path).unwrap();
    assert_eq!(csv_text.lines().count(), 513, "header plus 512 scale rows");
    assert_eq!(
        fs::read_to_string(&wcoh_csv_path).unwrap().lines().count(),
        513
    );

    let wcoh = read_wcoh_csv(&wcoh_csv_path).unwrap();
    for &v in wcoh.values() {
        assert!((v - 1.0).abs() <= 1e-6, "self-coherence cell {v}");
    }

    let wcs = read_wcs_csv(&wcs_csv_path).unwrap();
    let (rows, cols, wcs_bin) = read_wcs_binary(&dir.path().join("spec.wcs.bin")).unwrap();
    assert_eq!((rows, cols), (wcs.n_scales(), wcs.n_times()));
    for (a, b) in wcs.values().iter().zip(&wcs_bin) {
        assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0), "{a} vs {b}");
    }
    let (rows, cols, wcoh_bin) = read_wcoh_binary(&dir.path().join("spec.wcoh.bin")).unwrap();
    assert_eq!((rows, cols), (wcoh.n_scales(), wcoh.n_times()));
    for (a, b) in wcoh.values().iter().zip(&wcoh_bin) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn dumped_config_reproduces_the_run_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let template = make_template(dir.path());
    let record = dir.path().join("rec.csv");
    run_ok(&[
        "synth",
        "record",
        "--out",
        path_str(&record),
        "--beats",
        "4",
        "--seed",
        "7",
    ]);
    let features = dir.path().join("features.csv");
    let flags = [
        "--template",
        path_str(&template),
        "--out",
        path_str(&features),
        "--qt-left",
        "60",
        "--band-max",
        "250",
    ];

    let mut args: Vec<&str> = vec!["extract", path_str(&record)];
    args.extend_from_slice(&flags);
    run_ok(&args);
    let flag_run = fs::read(&features).unwrap();

    let mut dump_args: Vec<&str> = vec!["--dump-config"];
    dump_args.extend_from_slice(&flags);
    let dump = run_ok(&dump_args);
    let config = dir.path().join("run.cfg");
    fs::write(&config, &dump.stdout).unwrap();

    fs::remove_file(&features).unwrap();
    run_ok(&[
        "--config",
        path_str(&config),
        "extract",
        path_str(&record),
    ]);
    assert_eq!(fs::read(&features).unwrap(), flag_run);
}

#[test]
fn thread_cap_env_var_is_validated() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.csv");
    let run_with = |threads: &str| {
        Command::new(bin())
            .args(["synth", "template", "--out", path_str(&out)])
            .env("XWT_ECG_THREADS", threads)
            .output()
            .expect("binary runs")
    };
    assert_eq!(run_with("nope").status.code(), Some(2));
    assert_eq!(run_with("0").status.code(), Some(2));
    assert!(run_with("2").status.success());
}
