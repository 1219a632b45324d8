use std::process::Command;

fn steklov(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_steklov"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn spectrum_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.csv");
    let out = steklov(&[
        "spectrum",
        "--weight",
        "alpha-tau:1,0.1",
        "--trunc",
        "32",
        "--out",
        "csv",
        "--out-path",
        path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,lambda_k,disk_k,diff"));
    assert!(lines.next().unwrap().starts_with("0,"));
}

#[test]
fn weight_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weight.json");
    let weight = steklov::make_alpha_tau(2, 0.15).unwrap();
    std::fs::write(&path, serde_json::to_string(&weight).unwrap()).unwrap();
    let from_file = steklov(&[
        "zeta",
        "--weight",
        &format!("file:{}", path.display()),
        "--s",
        "2",
    ]);
    let inline = steklov(&["zeta", "--weight", "alpha-tau:2,0.15", "--s", "2"]);
    assert_eq!(from_file.status.code(), Some(0));
    let a: serde_json::Value = serde_json::from_slice(&from_file.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&inline.stdout).unwrap();
    assert_eq!(a["results"], b["results"]);
    assert!(a["results"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"grid_order\": 2, \"coeffs\": [[1, 0]]}").unwrap();
    let bad_file = steklov(&["spectrum", "--weight", &format!("file:{}", path.display())]);
    assert_eq!(bad_file.status.code(), Some(2));
    assert_eq!(
        steklov(&["spectrum", "--weight", "file:/nonexistent/w.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(steklov(&["launch"]).status.code(), Some(2));
    assert_eq!(
        steklov(&["spectrum", "--trunc", "8"]).status.code(),
        Some(2)
    );
    let rejected = steklov(&[
        "zeta",
        "--weight",
        "alpha-tau:4,0.3",
        "--trunc",
        "16",
        "--s",
        "-4",
        "--deriv",
        "2",
    ]);
    assert_eq!(rejected.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("raise N"));
}

#[test]
fn s0_report() {
    let out = steklov(&["s0"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let s0 = doc["results"]["s0"].as_f64().unwrap();
    assert!(s0 > 3.0 && s0 < 4.0);
    assert_eq!(doc["config_echo"]["command"], "s0");
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn flow_json_lines() {
    let out = steklov(&[
        "flow",
        "--weight",
        "alpha-tau:1,0.05",
        "--trunc",
        "48",
        "--tau-end",
        "0.2",
        "--out",
        "jsonl",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 3);
    for key in ["tau", "residual", "zeta2_at_0", "sup_dist", "snd_der_trace"] {
        assert!(rows[0].get(key).is_some(), "{key}");
    }
    assert!(rows[2]["sup_dist"].as_f64().unwrap() < rows[0]["sup_dist"].as_f64().unwrap());
}

#[test]
fn identical_config_identical_report() {
    let args = [
        "scan",
        "--weight",
        "mobius:0.1,0.2:alpha-tau:1,0.1",
        "--trunc",
        "128",
        "--grid",
        "-2:2:0.5",
    ];
    let a = steklov(&args);
    let b = steklov(&args);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(a.stdout, b.stdout);
}
