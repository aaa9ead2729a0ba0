use std::path::Path;
use std::process::{Command, Output};

fn aniso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aniso"))
        .args(args)
        .output()
        .expect("failed to launch aniso")
}

fn run_to(dir: &Path, file: &str, args: &[&str]) -> (Output, String) {
    let path = dir.join(file);
    let mut all = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.extend(["--out", &p]);
    let out = aniso(&all);
    let body = std::fs::read_to_string(&path).unwrap_or_default();
    (out, body)
}

#[test]
fn check_passes_on_builtins() {
    for name in ["paper", "constant-force", "no-layer", "zero"] {
        let out = aniso(&["check", "--problem", name]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.starts_with("# aniso "));
        assert!(text.contains("compatibility: pass"), "{text}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let out = aniso(&["fd", "--nx", "8", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));

    let out = aniso(&["check", "--problem", "nope"]);
    assert_eq!(out.status.code(), Some(1));

    let out = aniso(&["convergence", "--eps2", "0.1,0.05,0.2", "--nx", "8", "--ny", "8"]);
    assert_eq!(out.status.code(), Some(1));

    let out = aniso(&["mc", "--x", "0.5", "--y", "0", "--paths", "200"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two() {
    let out = aniso(&[
        "fd",
        "--nx",
        "32",
        "--ny",
        "32",
        "--preconditioner",
        "line-sgs",
        "--max-iter",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no convergence"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(aniso(&["--help"]).status.code(), Some(0));
    let out = aniso(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn field_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["fd", "expand"] {
        let (out, body) = run_to(dir.path(), "f.csv", &[cmd, "--nx", "6", "--ny", "4", "--eps2", "0.05"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        let lines: Vec<&str> = body.lines().collect();
        let first_data = lines.iter().position(|l| !l.starts_with('#')).unwrap();
        assert!(first_data >= 3);
        assert!(lines[0].starts_with("# aniso "));
        assert!(lines.contains(&format!("# command: {cmd}").as_str()));
        assert!(lines.contains(&"# eps2: 5.0000000000000003e-2"));
        assert_eq!(lines[first_data], "x,y,value");
        let rows = &lines[first_data + 1..];
        assert_eq!(rows.len(), 6 * 5);
        for r in rows {
            let parts: Vec<f64> = r.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(parts.len(), 3);
        }
        // 17 significant digits
        assert!(rows[0].split(',').all(|v| v.split('e').next().unwrap().len() == 18));
    }
}

#[test]
fn fd_matches_expansion_on_boundary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (_, fd) = run_to(dir.path(), "fd.csv", &["fd", "--nx", "8", "--ny", "4"]);
    let (_, ex) = run_to(dir.path(), "ex.csv", &["expand", "--nx", "8", "--ny", "4", "--order", "0"]);
    let rows = |s: &str| -> Vec<Vec<f64>> {
        s.lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('x'))
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    };
    let (a, b) = (rows(&fd), rows(&ex));
    assert_eq!(a.len(), b.len());
    // y = 0 carries φ₀ exactly in the FD field and up to the opposite layer's tail in u^[0]
    for (p, q) in a.iter().zip(&b).filter(|(p, _)| p[1] == 0.0) {
        assert_eq!(p[0], q[0]);
        assert!((p[2] - q[2]).abs() < 1e-8, "{p:?} {q:?}");
    }
}

#[test]
fn convergence_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let (out, body) = run_to(
        dir.path(),
        "conv.csv",
        &["convergence", "--eps2", "0.01,0.05,0.1", "--nx", "32", "--ny", "64", "--k", "16"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let data: Vec<&str> = body.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "eps2,r0,r2");
    assert_eq!(data.len(), 4);
    assert!(body.contains("# fit r0: slope"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("conv.json")).unwrap()).unwrap();
    assert_eq!(json["nx"], 32);
    assert_eq!(json["modes"], 16);
    assert_eq!(json["fits"].as_array().unwrap().len(), 2);
    assert!(json["tool"].as_str().unwrap().starts_with("aniso "));
}

#[test]
fn identity_json() {
    let out = aniso(&["identity", "--quad-points", "1024"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["max_deviation"].as_f64().unwrap() < 1e-7);
    assert_eq!(json["y_samples"].as_array().unwrap().len(), 9);
}

#[test]
fn same_flags_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 3] = [
        &["mc", "--x", "0.3", "--y", "0.6", "--paths", "400", "--dt", "1e-3", "--seed", "9"],
        &["fd", "--nx", "16", "--ny", "8"],
        &["convergence", "--eps2", "0.01,0.05,0.1", "--nx", "16", "--ny", "32", "--k", "8"],
    ];
    for args in cases {
        let (_, a) = run_to(dir.path(), "a.csv", args);
        let ja = std::fs::read(dir.path().join("a.json")).ok();
        let (_, b) = run_to(dir.path(), "b.csv", args);
        let jb = std::fs::read(dir.path().join("b.json")).ok();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
        assert_eq!(ja, jb, "{args:?}");
    }
    let (_, a) = run_to(dir.path(), "s.json", cases[0]);
    let mut other = cases[0].to_vec();
    *other.last_mut().unwrap() = "10";
    let (_, b) = run_to(dir.path(), "t.json", &other);
    assert_ne!(a, b);
    let json: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(json["seed"], 9);
    assert_eq!(json["n_paths"], 400);
}
