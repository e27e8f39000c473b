//! End-to-end checks of the `lmul` binary: exit codes, output shapes and
//! the files each subcommand writes.

use std::process::{Command, Output};

fn lmul(args: &[&str], out_dir: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmul"))
        .args(args)
        .env("LMUL_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mul_trace_ends_with_exact_and_lmul() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmul(&["mul", "40", "44", "--format", "E4M3"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("carry=2'b00"), "{text}");
    assert!(text.contains("bias*(-7)"), "{text}");
    assert!(text.trim_end().ends_with("exact=6.0 lmul=6.5"), "{text}");
}

#[test]
fn mul_zero_product() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmul(&["mul", "00", "7F", "--format", "E4M3"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("zero=1"), "{text}");
    assert!(text.contains("lmul=0.0"), "{text}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_format = lmul(&["mul", "40", "44", "--format", "E9M9"], dir.path());
    assert_eq!(bad_format.status.code(), Some(2));
    let bad_hex = lmul(&["mul", "zz", "44", "--format", "E4M3"], dir.path());
    assert_eq!(bad_hex.status.code(), Some(2));
    let no_args = lmul(&["mul"], dir.path());
    assert_eq!(no_args.status.code(), Some(2));
}

#[test]
fn verify_single_format_counts_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmul(&["verify", "--format", "E4M3"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("PASS E4M3: 65536 cases"), "{text}");
    assert!(text.contains("PASS 1/1, 65536 cases"), "{text}");
}

#[test]
fn verify_all_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmul(&["verify"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("PASS 6/6, 393216 cases"));
}

#[test]
fn errors_writes_metrics_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmul(&["errors"], dir.path());
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("# lmul cmd=errors"), "{metrics}");
    // Header comment + CSV header + one row per format.
    assert_eq!(metrics.lines().count(), 2 + 6);
    for format in ["E6M1", "E5M2", "E4M3", "E3M4", "E2M5", "E1M6"] {
        assert!(dir.path().join(format!("histogram_{format}.csv")).exists());
    }
    let hist = std::fs::read_to_string(dir.path().join("histogram_E4M3.csv")).unwrap();
    assert!(hist
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("error_magnitude,count,normalized_count"));
}

#[test]
fn errors_exact_backend_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmul(
        &["errors", "--format", "E4M3", "--backend", "exact"],
        dir.path(),
    );
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let row = metrics.lines().last().unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    // ep, mae, mre, mse, ned all zero.
    for col in &cols[9..14] {
        assert_eq!(col.parse::<f64>().unwrap(), 0.0, "{row}");
    }
}

#[test]
fn errors_policy_matrix_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmul(
        &["errors", "--format", "E4M3", "--policy-matrix"],
        dir.path(),
    );
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2 + 24);
}

#[test]
fn netlist_dump_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e4m3.net");
    let out = lmul(
        &[
            "netlist",
            "--format",
            "E4M3",
            "--out",
            path.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let dump = std::fs::read_to_string(&path).unwrap();
    assert!(dump.starts_with("NETLIST format=E4M3"));
    assert!(dump.contains("INIT=6666666666666666"));
    assert!(stdout(&out).contains("29 LUT, 4 CARRY8"));
}

#[test]
fn nn_small_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.lmnet");
    let out = lmul(
        &[
            "nn",
            "--synth",
            "--synth-train",
            "300",
            "--synth-test",
            "100",
            "--epochs",
            "1",
            "--hidden",
            "8",
            "--model-out",
            model.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(model.exists());
    assert!(dir.path().join("nn_accuracy.csv").exists());
    assert!(dir.path().join("nn_accuracy.json").exists());
    assert!(dir.path().join("synth-train-images.idx3-ubyte").exists());
    let text = stdout(&out);
    assert!(text.contains("fp32"), "{text}");
    assert!(text.contains("lmul-E4M3"), "{text}");

    // Re-running from the checkpoint reproduces the same accuracy rows.
    let first_csv = std::fs::read_to_string(dir.path().join("nn_accuracy.csv")).unwrap();
    let rerun = lmul(
        &[
            "nn",
            "--synth",
            "--synth-train",
            "300",
            "--synth-test",
            "100",
            "--model-in",
            model.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(rerun.status.success());
    let second_csv = std::fs::read_to_string(dir.path().join("nn_accuracy.csv")).unwrap();
    assert_eq!(first_csv, second_csv);
}

#[test]
fn unwritable_output_path_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // A file where the output directory should go.
    let blocker = dir.path().join("blocked");
    std::fs::write(&blocker, b"x").unwrap();
    let out = lmul(&["errors", "--format", "E4M3"], &blocker);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn threads_flag_does_not_change_outputs() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let a = lmul(
        &["--threads", "1", "errors", "--format", "E3M4"],
        dir1.path(),
    );
    let b = lmul(
        &["--threads", "4", "errors", "--format", "E3M4"],
        dir2.path(),
    );
    assert!(a.status.success() && b.status.success());
    let ma = std::fs::read_to_string(dir1.path().join("metrics.csv")).unwrap();
    let mb = std::fs::read_to_string(dir2.path().join("metrics.csv")).unwrap();
    assert_eq!(ma, mb);
    let ha = std::fs::read_to_string(dir1.path().join("histogram_E3M4.csv")).unwrap();
    let hb = std::fs::read_to_string(dir2.path().join("histogram_E3M4.csv")).unwrap();
    assert_eq!(ha, hb);
}
