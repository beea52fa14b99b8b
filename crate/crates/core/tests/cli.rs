use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn example() -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.json");
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn qborel(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_qborel")).args(args).output().unwrap().status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn small_k_is_an_assumption_failure_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = example();
    v["spec"]["k"] = 12.into();
    let cfg = write_config(dir.path(), &v);
    let out = dir.path().join("out");
    assert_eq!(qborel(&["check-geometry", "-c", s(&cfg), "-o", s(&out)]), 2);
    let w: Value = serde_json::from_str(&fs::read_to_string(out.join("witness.json")).unwrap()).unwrap();
    assert!(w.to_string().contains("13"), "witness should name the threshold: {w}");
}

#[test]
fn usage_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qborel(&["no-such-verb"]), 64);
    assert_eq!(qborel(&["solve"]), 64);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"spec\": 1}").unwrap();
    assert_eq!(qborel(&["solve", "-c", s(&bad)]), 65);
    assert_eq!(qborel(&["solve", "-c", s(&dir.path().join("missing.json"))]), 65);
    let mut v = example();
    v["surplus"] = 1.into();
    let cfg = write_config(dir.path(), &v);
    assert_eq!(qborel(&["check-geometry", "-c", s(&cfg)]), 65);
}

#[test]
fn zero_forcing_gives_zero_borel_functions() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = example();
    v["spec"]["forcing"]["f0"] = serde_json::json!([{"deg": 0, "symbol": "0"}]);
    v["spec"]["forcing"]["f1"] = serde_json::json!([{"deg": 0, "symbol": "0"}]);
    let cfg = write_config(dir.path(), &v);
    let out = dir.path().join("out");
    assert_eq!(qborel(&["solve", "-c", s(&cfg), "-o", s(&out)]), 0);
    for name in ["omega0.csv", "omega1.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "re_tau,im_tau,m,re_omega,im_omega");
        let mut n = 0;
        for l in lines {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!((f[3], f[4]), (0.0, 0.0));
            n += 1;
        }
        assert!(n > 0);
    }
}

#[test]
fn evaluate_and_residual_accept_json_and_csv_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &example());
    let json = dir.path().join("p.json");
    fs::write(&json, r#"[{"t": 0.2, "z": 0.0, "eps": 0.004}, {"t": [0.3, 0.01], "z": 0.5, "eps": 0.004}]"#).unwrap();
    let csv = dir.path().join("p.csv");
    fs::write(&csv, "re_t,im_t,re_z,im_z,re_eps,im_eps\n0.2,0,0,0,0.004,0\n0.3,0.01,0.5,0,0.004,0\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(qborel(&["evaluate", "-c", s(&cfg), "-o", s(&a), "-p", s(&json)]), 0);
    assert_eq!(qborel(&["evaluate", "-c", s(&cfg), "-o", s(&b), "-p", s(&csv)]), 0);
    let ea = fs::read_to_string(a.join("evaluate.csv")).unwrap();
    assert_eq!(ea, fs::read_to_string(b.join("evaluate.csv")).unwrap());
    assert_eq!(ea.lines().count(), 3);

    assert_eq!(qborel(&["residual", "-c", s(&cfg), "-o", s(&a), "-p", s(&csv)]), 0);
    let r: Value = serde_json::from_str(&fs::read_to_string(a.join("residual.json")).unwrap()).unwrap();
    assert_eq!(r["pass"], Value::Bool(true), "{r}");
    assert!(r["physical_max"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn formal_writes_one_csv_per_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = example();
    v["formal"] = serde_json::json!({"order": 3});
    let cfg = write_config(dir.path(), &v);
    let out = dir.path().join("out");
    assert_eq!(qborel(&["formal", "-c", s(&cfg), "-o", s(&out)]), 0);
    for n in 0..=3 {
        let text = fs::read_to_string(out.join(format!("formal_order_{n}.csv"))).unwrap();
        assert!(text.starts_with("t_power,m,re_u0,im_u0,re_u1,im_u1\n"));
    }
    assert!(!out.join("formal_order_4.csv").exists());
    let f: Value = serde_json::from_str(&fs::read_to_string(out.join("formal.json")).unwrap()).unwrap();
    assert_eq!(f["pass"], Value::Bool(true));
}
