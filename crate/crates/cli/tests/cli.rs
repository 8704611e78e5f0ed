//! End-to-end checks of the `hetdim` binary: exit codes, file schemas,
//! report contents, and byte-level determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn hetdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetdim"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn hetdim_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetdim"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary spawns")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Path to a file in the workspace-level `configs/` directory.
fn config_path(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    p.display().to_string()
}

fn read_json(dir: &Path, name: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join(name)).expect("file exists");
    serde_json::from_str(&text).expect("valid JSON")
}

fn read_csv(dir: &Path, name: &str) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join(name)).expect("file exists");
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn check_passes_on_the_canonical_system() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&["check", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("admissible switch region"),
        "regions printed: {stdout}"
    );

    let detail = read_json(dir.path(), "check.json");
    assert_eq!(detail["cu"]["holds"], true);
    assert_eq!(detail["cs"]["holds"], true);
    assert_eq!(detail["chain"]["holds"], true);
}

#[test]
fn check_reports_the_uncovered_interval_on_the_gap_config() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "check",
        "--config",
        &config_path("gap.json"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr(&out).contains("uncovered"),
        "stderr: {}",
        stderr(&out)
    );

    let detail = read_json(dir.path(), "check.json");
    assert_eq!(detail["cu"]["holds"], false);
    let gap = detail["cu"]["witness_gap"]
        .as_array()
        .expect("witness recorded");
    assert!(gap[0].as_f64().unwrap() <= 0.56 + 1e-12);
    assert!(gap[1].as_f64().unwrap() >= 0.64 - 1e-12);

    // The failed run still leaves a full report behind.
    let report = read_json(dir.path(), "report.json");
    assert_eq!(report["status"], "violation");
    assert_eq!(report["exit_code"], 2);
}

#[test]
fn malformed_json_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let out = hetdim(&[
        "check",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(
        stderr(&out).contains("malformed JSON"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn missing_required_flags_are_usage_errors() {
    let out = hetdim(&["acim"]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn acim_rejects_switch_points_outside_the_region() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "acim",
        "--side",
        "plus",
        "--t-switch",
        "0.9",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn acim_nonconvergence_exits_three_with_the_residual() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "acim",
        "--side",
        "plus",
        "--t-switch",
        "0.4",
        "--max-iter",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3);
    assert!(
        stderr(&out).contains("residual"),
        "stderr: {}",
        stderr(&out)
    );
    let report = read_json(dir.path(), "report.json");
    assert_eq!(report["status"], "no-convergence");
}

#[test]
fn coarse_acim_run_keeps_unit_mass() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "acim",
        "--side",
        "plus",
        "--t-switch",
        "0.4",
        "--bins",
        "16",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let rows = read_csv(dir.path(), "density.csv");
    assert_eq!(rows[0], ["bin", "left", "right", "mass", "density"]);
    assert_eq!(rows.len(), 17); // header + 16 bins
    let total: f64 = rows[1..].iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() <= 1e-12, "total mass {total}");
}

#[test]
fn segment_grid_records_failures_and_continues() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "segment",
        "--s-list",
        "0.25,0.5",
        "--n-list",
        "200",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let rows = read_csv(dir.path(), "segment.csv");
    assert_eq!(rows.len(), 3); // header + 2 cells
    let header = &rows[0];
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .expect("column exists")
    };

    let ok_row = &rows[1];
    assert_eq!(ok_row[col("status")], "ok");
    assert_eq!(ok_row[col("neutral")], "false");
    assert_eq!(ok_row[col("certified")], "true");

    let neutral_row = &rows[2];
    assert_eq!(neutral_row[col("status")], "invalid-input");
    assert_eq!(neutral_row[col("neutral")], "true");
    assert!(neutral_row[col("distance")].is_empty());

    let report = read_json(dir.path(), "report.json");
    assert_eq!(report["summary"]["failed"], 1);
    assert!(!report["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn hull_of_two_terms_reduces_to_segment_style_rows() {
    let dir = TempDir::new().unwrap();
    let terms = dir.path().join("terms.json");
    fs::write(
        &terms,
        r#"{"terms": [
            {"weight": 0.75, "side": "minus", "t_switch": 0.3},
            {"weight": 0.25, "side": "plus", "t_switch": 0.4}
        ]}"#,
    )
    .unwrap();
    let out = hetdim(&[
        "hull",
        "--terms",
        terms.to_str().unwrap(),
        "--n-list",
        "400",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let rows = read_csv(dir.path(), "hull.csv");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1], "ok");

    let tables = read_json(dir.path(), "decompositions.json");
    assert_eq!(tables[0]["n_total"], 400);
    // A two-term mixed target decomposes into a single anchored pair.
    assert_eq!(tables[0]["blocks"].as_array().unwrap().len(), 1);
}

#[test]
fn hull_rejects_weights_off_the_simplex() {
    let dir = TempDir::new().unwrap();
    let terms = dir.path().join("terms.json");
    fs::write(
        &terms,
        r#"{"terms": [{"weight": 0.5, "side": "minus", "t_switch": 0.3}]}"#,
    )
    .unwrap();
    let out = hetdim(&[
        "hull",
        "--terms",
        terms.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr(&out).contains("sum to 1"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn convex_decomposes_the_shipped_instances() {
    for name in [
        "convex_1x1.json",
        "convex_2x2.json",
        "convex_zero_plus.json",
    ] {
        let dir = TempDir::new().unwrap();
        let out = hetdim(&[
            "convex",
            "--instance",
            &config_path(name),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "{name} stderr: {}", stderr(&out));
        let detail = read_json(dir.path(), "decomposition.json");
        assert_eq!(detail["verify"]["passed"], true, "{name}");
    }
}

#[test]
fn convex_rejects_nonnegative_minus_exponents() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("bad.json");
    fs::write(
        &inst,
        r#"{"lambdas_minus": [0.5], "lambdas_plus": [1.0],
            "weights_minus": [0.5], "weights_plus": [0.5]}"#,
    )
    .unwrap();
    let out = hetdim(&[
        "convex",
        "--instance",
        inst.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn convex_fuzz_mode_emits_one_summary_row() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "convex",
        "--fuzz",
        "64",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let rows = read_csv(dir.path(), "fuzz.csv");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "64");
    assert_eq!(rows[1][1], "64"); // all passed
    assert_eq!(rows[1][2], "0");
}

#[test]
fn local_rejects_invalid_twist_values() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "local",
        "--twist",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn local_twisted_emits_rows_and_orbit_tables() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "local",
        "--twist",
        "-1",
        "--k-list",
        "5,6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let rows = read_csv(dir.path(), "twisted.csv");
    assert_eq!(
        rows[0],
        [
            "k",
            "status",
            "period",
            "residual",
            "midpoint_distance",
            "exponent"
        ]
    );
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][2], "12"); // period 2k+2 at k=5

    let orbits = read_json(dir.path(), "orbits.json");
    assert_eq!(orbits[0]["k"], 5);
    assert_eq!(orbits[0]["orbit"]["points"].as_array().unwrap().len(), 12);
}

#[test]
fn local_sweep_lists_one_verdict_per_sample() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "local",
        "--twist",
        "1",
        "--samples",
        "200",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let rows = read_csv(dir.path(), "sweep.csv");
    assert_eq!(rows.len(), 201);
    assert_eq!(
        rows[0],
        ["sample", "chart", "x", "y", "z", "verdict", "exit_time"]
    );
    for row in &rows[1..] {
        assert!(row[5].starts_with("escapes-"), "verdict {row:?}");
    }
}

#[test]
fn reports_list_every_emitted_file_with_matching_hashes() {
    let dir = TempDir::new().unwrap();
    let out = hetdim(&[
        "acim",
        "--side",
        "plus",
        "--t-switch",
        "0.4",
        "--bins",
        "64",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let report = read_json(dir.path(), "report.json");
    let files = report["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert!(
        names.contains(&"density.csv") && names.contains(&"acim.json"),
        "{names:?}"
    );
    for f in files {
        let bytes = fs::read(dir.path().join(f["name"].as_str().unwrap())).unwrap();
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), hex, "hash of {}", f["name"]);
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
}

#[test]
fn identical_seeds_give_identical_bytes_across_thread_counts() {
    let run = |threads: &str| {
        let dir = TempDir::new().unwrap();
        let out = hetdim_env(
            &[
                "segment",
                "--s-list",
                "0.25,0.75",
                "--n-list",
                "200,400",
                "--seed",
                "11",
                "--out",
                dir.path().to_str().unwrap(),
            ],
            "HETDIM_THREADS",
            threads,
        );
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
        fs::read(dir.path().join("segment.csv")).unwrap()
    };
    let a = run("1");
    let b = run("4");
    let c = run("4");
    assert_eq!(a, b, "worker count changed the output bytes");
    assert_eq!(b, c, "repeated run changed the output bytes");
}

#[test]
fn different_seeds_change_sampled_outputs() {
    let run = |seed: &str| {
        let dir = TempDir::new().unwrap();
        let out = hetdim(&[
            "local",
            "--twist",
            "1",
            "--samples",
            "50",
            "--seed",
            seed,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0);
        fs::read(dir.path().join("sweep.csv")).unwrap()
    };
    assert_ne!(run("1"), run("2"), "seed should steer the sampled points");
}
