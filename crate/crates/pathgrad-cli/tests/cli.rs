//! End-to-end checks of the command-line surface against golden files and
//! the documented behaviors.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn workdir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathgrad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn golden_linear_attribution_is_byte_identical() {
    let dir = workdir("cli-golden");
    run_ok(&[
        "attribute",
        "--model", golden("linear.model").to_str().unwrap(),
        "--input", golden("input.csv").to_str().unwrap(),
        "--method", "ig",
        "--steps", "1",
        "--out", dir.to_str().unwrap(),
    ]);
    let produced = std::fs::read(dir.join("attribution.csv")).unwrap();
    let expected = std::fs::read(golden("attribution.csv")).unwrap();
    assert_eq!(produced, expected, "attribution.csv deviates from the golden file");
}

#[test]
fn zero_input_zero_baseline_gives_zero_attribution() {
    let dir = workdir("cli-zero");
    run_ok(&[
        "attribute",
        "--model", golden("linear.model").to_str().unwrap(),
        "--input", golden("zeros.csv").to_str().unwrap(),
        "--out", dir.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(dir.join("attribution.csv")).unwrap();
    assert_eq!(csv, "feature,value\nx1,0\nx2,0\n");
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("attribution total: 0\n"));
    assert!(summary.contains("completeness gap: 0\n"));
}

/// The σ(10x) story end to end: the integrated total recovers the score
/// delta while the plain-gradient total is tiny.
#[test]
fn sigma_summary_contrasts_ig_and_grad() {
    let dir = workdir("cli-sigma");
    // Write the σ(10x) model through the train-free path: a hand header.
    let model = dir.join("sigma.model");
    let mut bytes =
        b"pathgrad-model v1\narch mlp sizes=1,1 hidden=identity head=sigmoid\nparam w0 1 1\nparam b0 1\ndata\n"
            .to_vec();
    for v in [10.0f64, 0.0] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&model, bytes).unwrap();
    std::fs::write(dir.join("x.csv"), "x,1.0\n").unwrap();

    run_ok(&[
        "attribute",
        "--model", model.to_str().unwrap(),
        "--input", dir.join("x.csv").to_str().unwrap(),
        "--method", "ig",
        "--steps", "500",
        "--out", dir.join("ig").to_str().unwrap(),
    ]);
    run_ok(&[
        "attribute",
        "--model", model.to_str().unwrap(),
        "--input", dir.join("x.csv").to_str().unwrap(),
        "--method", "grad",
        "--out", dir.join("grad").to_str().unwrap(),
    ]);

    let total_of = |p: PathBuf| -> f64 {
        let s = std::fs::read_to_string(p).unwrap();
        s.lines()
            .find_map(|l| l.strip_prefix("attribution total: "))
            .unwrap()
            .parse()
            .unwrap()
    };
    let ig_total = total_of(dir.join("ig/summary.txt"));
    let grad_total = total_of(dir.join("grad/summary.txt"));
    assert!((ig_total - 0.4999546).abs() < 5e-3, "ig total {ig_total}");
    assert!(grad_total.abs() < 1e-3, "grad total {grad_total}");
}

/// An α list of {1.0} produces a single frame identical to the
/// plain-gradient heatmap.
#[test]
fn interior_at_alpha_one_matches_gradient_heatmap() {
    let dir = workdir("cli-interior");
    run_ok(&[
        "interior",
        "--model", golden("linear.model").to_str().unwrap(),
        "--input", golden("input.csv").to_str().unwrap(),
        "--alphas", "1.0",
        "--out", dir.join("frames").to_str().unwrap(),
    ]);
    run_ok(&[
        "attribute",
        "--model", golden("linear.model").to_str().unwrap(),
        "--input", golden("input.csv").to_str().unwrap(),
        "--method", "grad",
        "--out", dir.join("grad").to_str().unwrap(),
    ]);
    let frames: Vec<_> = std::fs::read_dir(dir.join("frames"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(frames.contains(&"heatmap_alpha_1.pgm".to_string()));
    assert_eq!(frames.iter().filter(|f| f.ends_with(".pgm")).count(), 1);
    let frame = std::fs::read(dir.join("frames/heatmap_alpha_1.pgm")).unwrap();
    let grad = std::fs::read(dir.join("grad/heatmap.pgm")).unwrap();
    assert_eq!(frame, grad);
}

/// The default α grid emits ten frames.
#[test]
fn interior_default_grid_emits_ten_frames() {
    let dir = workdir("cli-interior-grid");
    run_ok(&[
        "interior",
        "--model", golden("linear.model").to_str().unwrap(),
        "--input", golden("input.csv").to_str().unwrap(),
        "--out", dir.to_str().unwrap(),
    ]);
    let frames = std::fs::read_dir(&dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".pgm")
        })
        .count();
    assert_eq!(frames, 10);
}

#[test]
fn saturate_on_linear_model_writes_linear_curve() {
    let dir = workdir("cli-saturate");
    run_ok(&[
        "evaluate", "saturate",
        "--model", golden("linear.model").to_str().unwrap(),
        "--input", golden("input.csv").to_str().unwrap(),
        "--out", dir.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(dir.join("saturation.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("x,y,label"));
    for row in rows {
        let mut cells = row.split(',');
        let x: f64 = cells.next().unwrap().parse().unwrap();
        let y: f64 = cells.next().unwrap().parse().unwrap();
        // F(αx) = 5α for the golden model at (1,1).
        assert!((y - 5.0 * x).abs() < 1e-12, "non-linear point ({x}, {y})");
    }
}

#[test]
fn unknown_dataset_tag_is_a_usage_error() {
    let out = run(&["train", "--dataset", "nonsense", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_model_file_is_a_data_error() {
    let out = run(&[
        "attribute",
        "--model", "/definitely/not/here.model",
        "--input", golden("input.csv").to_str().unwrap(),
        "--out", "/tmp/unused-2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn truncated_model_file_is_a_data_error() {
    let dir = workdir("cli-truncated");
    let mut bytes = std::fs::read(golden("linear.model")).unwrap();
    bytes.truncate(bytes.len() - 3);
    let bad = dir.join("bad.model");
    std::fs::write(&bad, bytes).unwrap();
    let out = run(&[
        "attribute",
        "--model", bad.to_str().unwrap(),
        "--input", golden("input.csv").to_str().unwrap(),
        "--out", dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
}

/// Same seed, two runs of train: byte-identical model files, and the
/// printed accuracy clears the blobs bar.
#[test]
fn train_is_byte_deterministic() {
    let dir = workdir("cli-train-det");
    for sub in ["a", "b"] {
        let out = run_ok(&[
            "train",
            "--dataset", "blobs",
            "--seed", "5",
            "--out", dir.join(sub).to_str().unwrap(),
        ]);
        let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
        let acc: f64 = stdout
            .lines()
            .find_map(|l| l.strip_prefix("training accuracy: "))
            .expect("accuracy line")
            .parse()
            .unwrap();
        assert!(acc >= 0.95, "blobs accuracy {acc}");
    }
    let a = std::fs::read(dir.join("a/blobs.model")).unwrap();
    let b = std::fs::read(dir.join("b/blobs.model")).unwrap();
    assert_eq!(a, b);
}

/// Full pixel-ablation pipeline through the binary: train the patch
/// classifier, run the protocol, and check the two labelled curves with
/// integrated gradients above plain gradients at the final step.
#[test]
fn aopc_pipeline_end_to_end() {
    let dir = workdir("cli-aopc");
    run_ok(&[
        "train",
        "--dataset", "patches",
        "--seed", "42",
        "--out", dir.to_str().unwrap(),
    ]);
    run_ok(&[
        "evaluate", "aopc",
        "--model", dir.join("patches.model").to_str().unwrap(),
        "--count", "10",
        "--out", dir.join("aopc").to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(dir.join("aopc/aopc.csv")).unwrap();
    let final_of = |label: &str| -> f64 {
        csv.lines()
            .rev()
            .find(|l| l.ends_with(&format!(",{label}")))
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(final_of("ig") > final_of("grad"));

    // Single-image localization against a hand-written box sidecar.
    run_ok(&[
        "evaluate", "localize",
        "--model", dir.join("patches.model").to_str().unwrap(),
        "--count", "3",
        "--out", dir.join("loc").to_str().unwrap(),
    ]);
    let report = std::fs::read_to_string(dir.join("loc/report.txt")).unwrap();
    assert!(report.contains("eligible images: 3"));
}

/// Localization on one user-provided image with a box sidecar file.
#[test]
fn localize_accepts_box_sidecar_files() {
    let dir = workdir("cli-boxes");
    run_ok(&[
        "train",
        "--dataset", "patches",
        "--seed", "42",
        "--out", dir.to_str().unwrap(),
    ]);
    // A 16x16 image with a bright 4x4 patch at (row 5, col 6).
    let mut raster = vec![20u8; 256];
    for r in 5..9 {
        for c in 6..10 {
            raster[r * 16 + c] = 230;
        }
    }
    let mut pgm = b"P5\n16 16\n255\n".to_vec();
    pgm.extend_from_slice(&raster);
    std::fs::write(dir.join("img.pgm"), pgm).unwrap();
    std::fs::write(dir.join("boxes.txt"), "# object box\n6 5 10 9\n").unwrap();

    run_ok(&[
        "evaluate", "localize",
        "--model", dir.join("patches.model").to_str().unwrap(),
        "--input", dir.join("img.pgm").to_str().unwrap(),
        "--boxes", dir.join("boxes.txt").to_str().unwrap(),
        "--out", dir.join("one").to_str().unwrap(),
    ]);
    let report = std::fs::read_to_string(dir.join("one/report.txt")).unwrap();
    let frac_of = |key: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    let ig = frac_of("in-box fraction (ig): ");
    let grad = frac_of("in-box fraction (grad): ");
    assert!(ig > 0.0 && ig <= 1.0);
    assert!((0.0..=1.0).contains(&grad));
}

#[test]
fn compare_report_flags_the_expected_methods() {
    let dir = workdir("cli-compare");
    run_ok(&["evaluate", "compare", "--out", dir.to_str().unwrap()]);
    let report = std::fs::read_to_string(dir.join("compare.txt")).unwrap();
    assert!(report.contains("ig:") && report.contains("matches"));
    for method in ["deeplift", "lrp", "deconvnet", "guided"] {
        let line = report
            .lines()
            .find(|l| l.starts_with(method))
            .unwrap_or_else(|| panic!("no line for {method}"));
        assert!(line.ends_with("differs"), "{line}");
    }
}
