//! End-to-end checks of the binary: exit-code contract, report determinism,
//! artifact layout.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_torusendo")
}

fn run(args: &[&str], out: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    let out_str = out.to_str().unwrap().to_string();
    let leaked: &'static str = Box::leak(out_str.into_boxed_str());
    all.push("--out");
    all.push(leaked);
    Command::new(bin())
        .args(&all)
        .output()
        .expect("binary runs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("torusendo-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn certify_sve_exit_codes() {
    let dir = tmp_dir("sve-codes");
    // Certified on the skew example.
    let out = run(
        &["certify-sve", "--gallery", "paper_example", "--grid", "256", "--no-auto"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    // Failed on the product (Jacobian dips below |lambda_1|).
    let out = run(
        &["certify-sve", "--gallery", "product_example", "--grid", "64", "--no-auto"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
    // Inconclusive on a too-coarse grid without auto-doubling.
    let out = run(
        &["certify-sve", "--gallery", "paper_example", "--grid", "8", "--no-auto"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn certify_ph_failure_exit() {
    let dir = tmp_dir("ph-fail");
    // diag(2,5) rotates the horizontal cone out.
    let out = run(
        &[
            "certify-ph", "--matrix", "2,0,0,5", "--grid", "8", "--lambda", "1.5", "--no-auto",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn covering_not_found_from_trapped_annulus() {
    let dir = tmp_dir("covering");
    let out = run(
        &[
            "covering", "--gallery", "product_example", "--region", "annulus:0.08", "--nmax", "40",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
    let json = std::fs::read_to_string(dir.join("covering.report.json")).unwrap();
    assert!(json.contains("\"verdict\": \"not-found\""));
}

#[test]
fn errors_exit_with_one() {
    let dir = tmp_dir("errors");
    let out = run(&["gallery", "mystery_map"], &dir);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["certify-sve", "--map", "/nonexistent/x.map"], &dir);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["frobnicate"], &dir);
    assert_eq!(out.status.code(), Some(1));
    // Rotation matrix: no integer eigenvalues.
    let out = run(&["certify-sve", "--matrix", "0,-1,1,0", "--grid", "8"], &dir);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn flag_validation_exits_with_usage_error() {
    let dir = tmp_dir("flags");
    for bad in [
        vec!["certify-sve", "--grid", "1"],
        vec!["certify-ph", "--lambda", "0.5"],
        vec!["certify-ph", "--slope", "-1"],
        vec!["dichotomy", "--r-mult", "1.5"],
        vec!["directions", "--trials", "1"],
        vec!["essential", "--region", "rect:1,1,0,0"],
    ] {
        let out = run(&bad, &dir);
        assert_eq!(out.status.code(), Some(1), "args {bad:?}: {out:?}");
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    }
}

#[test]
fn parse_error_reports_line() {
    let dir = tmp_dir("parse");
    let bad = dir.join("bad.map");
    std::fs::write(&bad, "matrix = 5 0 ; 0\n").unwrap();
    let out = Command::new(bin())
        .args(["certify-sve", "--map", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1"), "stderr: {err}");
}

#[test]
fn json_reports_are_byte_identical_for_fixed_inputs() {
    let dir_a = tmp_dir("det-a");
    let dir_b = tmp_dir("det-b");
    let args = [
        "dichotomy", "--gallery", "product_example", "--grid", "3", "--seed", "11",
    ];
    let out_a = run(&args, &dir_a);
    let out_b = run(&args, &dir_b);
    assert_eq!(out_a.status.code(), out_b.status.code());
    let a = std::fs::read(dir_a.join("dichotomy.report.json")).unwrap();
    let b = std::fs::read(dir_b.join("dichotomy.report.json")).unwrap();
    assert_eq!(a, b, "reports must be byte-identical");
}

#[test]
fn gallery_roundtrip_through_file() {
    let dir = tmp_dir("gallery");
    let out = run(&["gallery", "paper_example"], &dir);
    assert_eq!(out.status.code(), Some(0));
    let map_path = dir.join("paper_example.map");
    assert!(map_path.exists());
    // The written spec parses and certifies like the built-in.
    let out = Command::new(bin())
        .args([
            "certify-sve",
            "--map",
            map_path.to_str().unwrap(),
            "--grid",
            "256",
            "--no-auto",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn report_json_has_contract_fields() {
    let dir = tmp_dir("schema");
    let out = run(
        &["certify-sve", "--gallery", "paper_example", "--grid", "256", "--no-auto"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("certify-sve.report.json")).unwrap())
            .unwrap();
    for key in ["version", "command", "spec_digest", "seed", "params", "verdict", "margin", "witnesses"] {
        assert!(json.get(key).is_some(), "missing field {key}");
    }
    assert!(json["spec_digest"].as_str().unwrap().starts_with("fnv1a:"));
    // No timestamps in the JSON document.
    assert!(!json.to_string().contains("wall"));
}

#[test]
fn fibers_and_directions_emit_csv() {
    let dir = tmp_dir("csv");
    let out = run(
        &["fibers", "--gallery", "product_example", "--grid", "3", "--svg"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = std::fs::read_to_string(dir.join("fibers.csv")).unwrap();
    assert!(csv.starts_with("x,y,diameter,dir_x,dir_y\n"));
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(dir.join("fibers.svg").exists());

    let out = run(
        &["directions", "--gallery", "product_example", "--grid", "3", "--depth", "6"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = std::fs::read_to_string(dir.join("directions.csv")).unwrap();
    assert!(csv.starts_with("x,y,dir_x,dir_y,width\n"));
    let csv = std::fs::read_to_string(dir.join("center_directions.csv")).unwrap();
    assert!(csv.starts_with("x,y,dir_x,dir_y,steps_verified\n"));
}

fn report_json(dir: &Path, command: &str) -> serde_json::Value {
    serde_json::from_str(
        &std::fs::read_to_string(dir.join(format!("{command}.report.json"))).unwrap(),
    )
    .unwrap()
}

#[test]
fn shipped_paper_example_map_matches_gallery() {
    // The spec digest is the canonical serialization of the parsed map, so
    // digest equality means the shipped file parses to exactly the built-in
    // map (linear part diag(5,2) and all coefficients).
    let map_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("maps/paper_example.map");
    let dir_file = tmp_dir("ship-file");
    let out = Command::new(bin())
        .args([
            "semiconj", "--map", map_path.to_str().unwrap(), "--grid", "4",
            "--out", dir_file.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let dir_gallery = tmp_dir("ship-gallery");
    let out = Command::new(bin())
        .args([
            "semiconj", "--gallery", "paper_example", "--grid", "4",
            "--out", dir_gallery.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let from_file = report_json(&dir_file, "semiconj");
    let from_gallery = report_json(&dir_gallery, "semiconj");
    assert_eq!(from_file["spec_digest"], from_gallery["spec_digest"]);
    assert_eq!(from_file["details"]["kappa0"], from_gallery["details"]["kappa0"]);
}

#[test]
fn dichotomy_on_linear_map_reports_conjugacy_evidence() {
    let dir = tmp_dir("dich-lin");
    let out = run(&["dichotomy", "--matrix", "5,0,0,2", "--grid", "3"], &dir);
    assert_eq!(out.status.code(), Some(0));
    let json = report_json(&dir, "dichotomy");
    assert_eq!(json["verdict"], "conjugacy-evidence");
}

#[test]
fn canonical_form_prints_worked_case() {
    let dir = tmp_dir("canon");
    let out = run(&["canonical-form", "--matrix", "4,1,2,3"], &dir);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[[5, 0], [2, 2]]"), "stdout: {stdout}");
    assert!(stdout.contains("[[-1, 1], [1, -2]]"));
}

#[test]
fn essential_writes_witness_csv() {
    let dir = tmp_dir("witness-csv");
    let out = run(
        &["essential", "--matrix", "5,0,0,2", "--region", "rect:0,0,0.3,0.3", "--nmax", "4"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = std::fs::read_to_string(dir.join("witnesses.csv")).unwrap();
    assert!(csv.starts_with("n,x,y,lift_i,lift_j\n"));
    assert!(csv.lines().count() > 10);
    // Every row carries the found iterate in column 1.
    let json = report_json(&dir, "essential");
    let n = json["details"]["iterate"].as_u64().unwrap();
    for row in csv.lines().skip(1) {
        assert!(row.starts_with(&format!("{n},")));
    }
}

#[test]
fn reports_identical_across_thread_counts() {
    let dir1 = tmp_dir("thr-1");
    let dir4 = tmp_dir("thr-4");
    let args = |dir: &Path, threads: &str| {
        Command::new(bin())
            .args([
                "certify-sve", "--gallery", "paper_example", "--grid", "256", "--no-auto",
                "--threads", threads, "--out", dir.to_str().unwrap(),
            ])
            .output()
            .unwrap()
    };
    let a = args(&dir1, "1");
    let b = args(&dir4, "4");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let ja = std::fs::read(dir1.join("certify-sve.report.json")).unwrap();
    let jb = std::fs::read(dir4.join("certify-sve.report.json")).unwrap();
    assert_eq!(ja, jb, "certificates must not depend on the thread count");
}

#[test]
fn eps_flag_flows_into_gallery_map() {
    let dir = tmp_dir("eps");
    let out = run(
        &["semiconj", "--gallery", "paper_example", "--eps", "0.05", "--grid", "16"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("semiconj.report.json")).unwrap())
            .unwrap();
    let kappa0 = json["details"]["kappa0"].as_f64().unwrap();
    assert!((kappa0 - 1.05 / std::f64::consts::TAU).abs() < 1e-12);
}
