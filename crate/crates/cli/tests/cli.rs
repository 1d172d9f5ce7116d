use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn slepian(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slepian"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = slepian(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Metadata lines and the parsed body of a CSV table.
fn parse_csv(text: &str) -> (Vec<String>, Vec<String>, Vec<Vec<String>>) {
    let meta: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(str::to_string)
        .collect();
    let body: String = text.lines().skip(meta.len()).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (meta, header, rows)
}

fn col(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn schema_for(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(name: &str, doc: &Value) {
    let v = schema_for(name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

#[test]
fn csv_headers() {
    let cases: [(&[&str], &str); 4] = [
        (
            &["spectrum", "--c", "5"],
            "n,chi,mu,magnitude_rank,relative_magnitude,singular_value,shannon_index",
        ),
        (&["basis", "--c", "5", "--n-modes", "3"], "n,parity,m,coefficient"),
        (&["nodes", "--c", "5"], "i,x,tau,weight,residual"),
        (&["check", "--c", "5"], "name,measured,tolerance,passed"),
    ];
    for (args, header) in cases {
        let text = stdout(args);
        let first = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(first, header, "{args:?}");
        assert!(text.starts_with("# statistics: fermion\n# c: "), "{args:?}");
    }
}

#[test]
fn nodes_at_c20() {
    let (meta, header, rows) = parse_csv(&stdout(&["nodes", "--c", "20"]));
    assert!(meta.contains(&"# order: 13".to_string()));
    assert_eq!(rows.len(), 13);
    let x = col(&header, &rows, "x");
    let tau = col(&header, &rows, "tau");
    let residual = col(&header, &rows, "residual");
    assert!(residual.iter().all(|r| *r < 1e-10), "{residual:?}");
    assert!(x.windows(2).all(|w| w[0] < w[1]));
    for (a, b) in x.iter().zip(x.iter().rev()) {
        assert!((a + b).abs() < 1e-12);
    }
    // beta = 40 when omega_max = 1
    for (x, t) in x.iter().zip(&tau) {
        assert!((t - 20.0 * (x + 1.0)).abs() < 1e-12);
    }
}

#[test]
fn physical_and_dimensionless_inputs_agree() {
    let (_, h1, r1) = parse_csv(&stdout(&["nodes", "--c", "20"]));
    let (_, h2, r2) = parse_csv(&stdout(&["nodes", "--beta", "2", "--omega-max", "20"]));
    assert_eq!(col(&h1, &r1, "x"), col(&h2, &r2, "x"));
    let tau = col(&h2, &r2, "tau");
    assert!(tau.iter().all(|t| (0.0..=2.0).contains(t)));
}

#[test]
fn singular_values_are_half_mu() {
    // omega_max = 1, so the boson scale omega_max |mu| / 2 is the same.
    for st in ["fermion", "boson"] {
        let (_, h, rows) = parse_csv(&stdout(&["spectrum", "--c", "20", "--statistics", st]));
        let mu = col(&h, &rows, "mu");
        let s = col(&h, &rows, "singular_value");
        for (m, s) in mu.iter().zip(&s) {
            assert!(
                (s - 0.5 * m.abs()).abs() <= 1e-14 * s.abs().max(1e-300),
                "{st}: {s} vs {m}"
            );
        }
        let flags: Vec<&String> = rows.iter().map(|r| &r[6]).filter(|f| *f == "true").collect();
        assert_eq!(flags.len(), 1);
        assert_eq!(rows.len(), 13 + 20);
    }
}

#[test]
fn csv_round_trips_exactly() {
    let text = stdout(&["spectrum", "--c", "7.5", "--statistics", "boson"]);
    let (meta, header, rows) = parse_csv(&text);
    let mut rebuilt = String::new();
    for m in &meta {
        rebuilt.push_str(m);
        rebuilt.push('\n');
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&header).unwrap();
    for r in &rows {
        let cells: Vec<String> = r
            .iter()
            .map(|c| match c.parse::<f64>() {
                Ok(v) if c.contains('e') => format!("{v:.16e}"),
                _ => c.clone(),
            })
            .collect();
        w.write_record(&cells).unwrap();
    }
    rebuilt.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
    assert_eq!(rebuilt, text);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = slepian(&[
            "demo",
            "--c",
            "12",
            "--noise",
            "1e-4",
            "--seed",
            "3",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for f in ["panel_a_spectrum.csv", "panel_b_green.csv", "panel_c_error.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(stdout(&["check", "--c", "3"]), stdout(&["check", "--c", "3"]));
}

#[test]
fn seed_changes_noisy_panels_only() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let d = dir.path().join(name);
        let out = slepian(&[
            "demo",
            "--c",
            "12",
            "--noise",
            "1e-3",
            "--seed",
            seed,
            "--out",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        d
    };
    let a = run("a", "1");
    let b = run("b", "2");
    let read = |d: &Path, f: &str| std::fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(read(&a, "panel_a_spectrum.csv"), read(&b, "panel_a_spectrum.csv"));
    assert_ne!(read(&a, "panel_c_error.csv"), read(&b, "panel_c_error.csv"));
}

#[test]
fn demo_panels() {
    let dir = tempfile::tempdir().unwrap();
    let out = slepian(&["demo", "--c", "20", "--svg", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (_, h, rows) = parse_csv(&std::fs::read_to_string(dir.path().join("panel_a_spectrum.csv")).unwrap());
    assert_eq!(rows.len(), 401);
    let y = col(&h, &rows, "y");
    let a = col(&h, &rows, "a");
    let dy = y[1] - y[0];
    let trapezoid: f64 = a.iter().sum::<f64>() * dy - 0.5 * dy * (a[0] + a[a.len() - 1]);
    assert!((trapezoid - 1.0).abs() < 1e-3, "{trapezoid}");

    let (_, h, rows) = parse_csv(&std::fs::read_to_string(dir.path().join("panel_b_green.csv")).unwrap());
    let nodes = rows.iter().filter(|r| r[0] == "node").count();
    assert_eq!(nodes, 13);
    let g = col(&h, &rows, "g");
    assert!(g.iter().all(|g| *g > 0.0));

    let (_, h, rows) = parse_csv(&std::fs::read_to_string(dir.path().join("panel_c_error.csv")).unwrap());
    let m = col(&h, &rows, "m");
    let err = col(&h, &rows, "rel_error_l2");
    let at = |k: f64| err[m.iter().position(|v| *v == k).unwrap()];
    assert!(at(13.0) < 1e-2 && at(16.0) < 1e-3, "{} {}", at(13.0), at(16.0));

    for f in ["panel_a_spectrum.svg", "panel_b_green.svg", "panel_c_error.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"), "{f}");
    }
}

#[test]
fn json_matches_schemas() {
    let cases: [(&[&str], &str); 4] = [
        (&["spectrum", "--c", "5", "--format", "json"], "spectrum"),
        (&["basis", "--c", "5", "--n-modes", "4", "--format", "json"], "basis"),
        (
            &["nodes", "--beta", "3", "--omega-max", "4", "--format", "json"],
            "nodes",
        ),
        (
            &["check", "--c", "5", "--statistics", "boson", "--format", "json"],
            "check",
        ),
    ];
    for (args, name) in cases {
        let doc: Value = serde_json::from_str(&stdout(args)).unwrap();
        assert_valid(name, &doc);
    }

    let dir = tempfile::tempdir().unwrap();
    let out = slepian(&[
        "demo",
        "--c",
        "8",
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    for (file, name) in [
        ("panel_a_spectrum.json", "demo-spectrum"),
        ("panel_b_green.json", "demo-green"),
        ("panel_c_error.json", "demo-error"),
    ] {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(file)).unwrap()).unwrap();
        assert_valid(name, &doc);
    }
}

#[test]
fn json_and_csv_carry_the_same_numbers() {
    let (_, h, rows) = parse_csv(&stdout(&["nodes", "--c", "9"]));
    let doc: Value = serde_json::from_str(&stdout(&["nodes", "--c", "9", "--format", "json"])).unwrap();
    let weights: Vec<f64> = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["weight"].as_f64().unwrap())
        .collect();
    assert_eq!(weights, col(&h, &rows, "weight"));
}

#[test]
fn check_passes_on_good_inputs() {
    for c in ["5", "20"] {
        for st in ["fermion", "boson"] {
            let out = slepian(&["check", "--c", c, "--statistics", st]);
            assert_eq!(
                out.status.code(),
                Some(0),
                "c={c} {st}: {}",
                String::from_utf8_lossy(&out.stdout)
            );
        }
    }
}

#[test]
fn bad_configuration_fails_before_computing() {
    for args in [
        &["check", "--c", "-1"][..],
        &["nodes", "--c", "0"],
        &["spectrum", "--beta", "2"],
        &["nodes", "--c", "3", "--beta", "2", "--omega-max", "2"],
        &["spectrum", "--c", "nan"],
        &["nodes", "--c", "4", "--order", "0"],
    ] {
        let out = slepian(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn out_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nodes.json");
    let out = slepian(&["nodes", "--c", "6", "--format", "json", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(doc["command"], "nodes");
}
