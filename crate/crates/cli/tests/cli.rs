use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use statman_cli::ReportDocument;

fn manifold(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifolds").join(name)
}

fn statman(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_statman"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("STATMAN_THREADS", t),
        None => cmd.env_remove("STATMAN_THREADS"),
    };
    cmd.output().expect("statman runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn every_shipped_manifold_has_its_documented_exit_code() {
    let expected = [
        ("sphere.json", 0),
        ("euclidean3.json", 0),
        ("hyperbolic.json", 0),
        ("normal_fisher.json", 0),
        ("gamma_fisher.json", 0),
        ("gamma_natural.json", 0),
        ("flat_with_cubic.json", 0),
        ("polar.json", 0),
        ("tilted_cubic.json", 0),
        ("conflicting_cubic.json", 2),
        ("scale_mismatch.json", 3),
    ];
    for (name, code) in expected {
        let o = statman(&["check", path(&manifold(name)), "--points", "8"], None);
        assert_eq!(
            o.status.code(),
            Some(code),
            "{name}\n{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn json_report_round_trips_and_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let file = manifold("normal_fisher.json");
    let mut bytes = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}.json"));
        let o = statman(
            &["check", path(&file), "--seed", "3", "--json", path(&out)],
            Some(threads),
        );
        assert_eq!(o.status.code(), Some(0));
        bytes.push(std::fs::read_to_string(&out).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let doc: ReportDocument = serde_json::from_str(&bytes[0]).unwrap();
    assert_eq!(doc.to_json(), bytes[0]);
    assert_eq!(doc.command, "check");
    assert_eq!(doc.seed, Some(3));
    assert!(doc.diagnostics.unwrap().passed());
}

#[test]
fn text_report_lists_identities_worst_first() {
    let o = statman(&["check", path(&manifold("sphere.json"))], None);
    let text = stdout(&o);
    assert!(text.contains("identities (worst first):"), "{text}");
    assert!(text.trim_end().ends_with("result: PASS"), "{text}");
    let ratios: Vec<f64> = text
        .lines()
        .skip_while(|l| !l.starts_with("identities"))
        .skip(1)
        .take_while(|l| !l.is_empty())
        .filter(|l| !l.trim_start().starts_with("n/a"))
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            f[1].parse::<f64>().unwrap() / f[3].parse::<f64>().unwrap()
        })
        .collect();
    assert!(ratios.len() > 10);
    assert!(ratios.windows(2).all(|w| w[0] >= w[1]), "{ratios:?}");
}

#[test]
fn eval_prints_coordinate_labelled_components() {
    let o = statman(
        &[
            "eval",
            path(&manifold("polar.json")),
            "--point",
            "2,0",
            "--quantity",
            "gamma_hat",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("gamma_hat^{r}_{t t} = -2.000000000000000e0"), "{text}");
    assert!(text.contains("gamma_hat^{t}_{r t} = 5.000000000000000e-1"), "{text}");
}

#[test]
fn theorems_and_alpha_scan_on_the_sphere() {
    let file = manifold("sphere.json");
    let o = statman(&["verify-theorems", path(&file)], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches(": agree").count(), 2, "{}", stdout(&o));

    let o = statman(&["alpha-scan", path(&file), "--alphas", "-1,0,1"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("hypothesis_g_not_cc: false"));
}

#[test]
fn bad_input_exits_with_two() {
    let sphere = manifold("sphere.json");
    let cases: [&[&str]; 7] = [
        &["check", "/nonexistent/manifold.json"],
        &["check", path(&sphere), "--points", "0"],
        &["check", path(&sphere), "--tol", "-1"],
        &["eval", path(&sphere), "--point", "0.1", "--quantity", "g"],
        &["eval", path(&sphere), "--point", "0.1,0.2", "--quantity", "Q"],
        &["alpha-scan", path(&sphere), "--alphas", "1,,2"],
        &["frobnicate"],
    ];
    for args in cases {
        assert_eq!(statman(args, None).status.code(), Some(2), "{args:?}");
    }
    assert_eq!(statman(&["check", path(&sphere)], Some("zero")).status.code(), Some(2));
}

#[test]
fn degenerate_metric_fails_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("degenerate.json");
    std::fs::write(
        &file,
        r#"{"schema": "statman/1", "name": "degenerate", "coords": ["x", "y"],
            "custom": {"metric": [["x^2", "0"], ["0", "0"]]}}"#,
    )
    .unwrap();
    let o = statman(&["check", path(&file)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("validation: fail"));
}
