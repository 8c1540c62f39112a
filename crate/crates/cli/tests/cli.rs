use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmcface")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn gallery_list_names_every_entry() {
    let o = run(&["gallery", "list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["lightlike-line", "horosphere", "elliptic-catenoid-0.3", "parabolic-catenoid", "integral-elliptic-m3", "hyperbolic-w10i", "3-noid", "4noid"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn emitted_frame_has_sqrt_and_log_and_reloads() {
    let o = run(&["gallery", "emit", "parabolic-catenoid"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("sqrt(z)") && text.contains("log(z)"));

    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("pc.json");
    let mesh = dir.path().join("pc.ply");
    let o = run(&["gallery", "emit", "parabolic-catenoid", "-o", spec.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&spec).unwrap(), text);

    let o = run(&["build", spec.to_str().unwrap(), "--resolution", "16,16", "--mesh", mesh.to_str().unwrap(), "--format", "ply"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!(v["triangles"].as_u64().unwrap() > 0);
    assert!(v["max_de_sitter_residual"].as_f64().unwrap() < 1e-8);
    assert!(std::fs::read_to_string(&mesh).unwrap().starts_with("ply"));
}

#[test]
fn osserman_four_noid_is_equality() {
    let o = run(&["osserman", "gallery:4noid"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["verdict"], "equality");
    assert_eq!((v["lhs"].as_i64(), v["rhs"].as_i64()), (Some(6), Some(6)));
}

#[test]
fn osserman_mismatch_when_incomplete_surface_is_declared_complete() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = stdout(&run(&["gallery", "emit", "3-noid"]));
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["flags"]["complete"] = Value::Bool(true);
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let o = run(&["osserman", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(json(&o)["verdict"], "violated");
}

#[test]
fn singular_svg_carries_sector_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("m3.svg");
    let o = run(&["singular", "gallery:integral-elliptic-m3", "--svg", svg.to_str().unwrap()]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["sectors"]["set"]["m"], 3);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    // six sector wedges and at least one traced curve
    assert_eq!(text.matches("fill=\"lightblue\"").count(), 6);
    assert!(text.contains("<polyline"));
}

#[test]
fn monodromy_of_elliptic_catenoid() {
    let o = run(&["monodromy", "gallery:elliptic-catenoid-0.3", "--puncture", "0", "--steps", "512"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["class"]["kind"], "Elliptic");
    assert_eq!(v["end_type"]["kind"], "elliptic_non_integral");
}

#[test]
fn ends_reports_every_puncture() {
    let o = run(&["ends", "gallery:parabolic-catenoid", "--completeness"]);
    assert!(o.status.success());
    let v = json(&o);
    let ends = v.as_array().unwrap();
    assert_eq!(ends.len(), 2);
    for e in ends {
        assert_eq!(e["end_type"]["kind"], "parabolic_first_kind");
        assert_eq!(e["completeness"]["verdict"], "complete");
    }
}

#[test]
fn classify_su11_outputs_class_and_witness() {
    let (c, s) = (0.5f64.cosh().to_string(), 0.5f64.sinh().to_string());
    let o = run(&["classify-su11", &c, &s, &s, &c]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["class"]["kind"], "Hyperbolic");
    assert!(v["witness"]["residual"].as_f64().unwrap() < 1e-8);
    let o = run(&["classify-su11", "0.5", "0", "0", "2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn gallery_verify_subset() {
    let o = run(&["gallery", "verify", "lightlike-line", "horosphere", "--json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    for line in stdout(&o).lines() {
        let c: Value = serde_json::from_str(line).unwrap();
        assert_eq!(c["passed"], true, "{line}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["ends", "gallery:horosphere", "--radius", "-1"]).status.code(), Some(1));
    assert_eq!(run(&["monodromy", "gallery:3-noid", "--puncture", "9"]).status.code(), Some(1));
    assert_eq!(run(&["osserman", "/nonexistent/spec.json"]).status.code(), Some(2));
    assert_eq!(run(&["osserman", "gallery:no-such-entry"]).status.code(), Some(2));
    assert_eq!(run(&["gallery", "verify", "no-such-entry"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": 3}").unwrap();
    assert_eq!(run(&["build", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
