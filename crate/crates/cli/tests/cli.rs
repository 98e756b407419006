use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_chiral-array");

fn write_config(dir: &Path, name: &str, v: &Value) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn run(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("CHIRAL_ARRAY_OUT");
    if let Some(p) = env_out {
        c.env("CHIRAL_ARRAY_OUT", p);
    }
    c.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_spectrum() -> Value {
    json!({ "command": "spectrum", "geometry": { "nside": 5 }, "mode": { "w0": 1.5 } })
}

fn g2_sweep() -> Value {
    json!({
        "command": "sweep",
        "geometry": { "nside": 5 },
        "mode": { "w0": 1.2 },
        "sweep": { "command": "g2", "axis": "mode.w0", "values": [1.4, 1.0, 1.2] }
    })
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect()
}

#[test]
fn validate_prints_the_completed_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &json!({ "command": "spectrum" }));
    let o = run(&["validate", cfg.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["geometry"]["nside"], 7);
    assert_eq!(v["drive"]["n"], 100);
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (json!({ "command": "spectrum", "geometry": { "nsid": 5 } }), "geometry"),
        (json!({ "command": "spectrum", "geometry": { "nside": 4 } }), "geometry.nside"),
        (json!({ "command": "spectrum", "mode": { "w0": -1.0 } }), "mode.w0"),
        (json!({ "command": "warp" }), "command"),
        (json!({ "command": "sweep" }), "sweep"),
        (json!({ "command": "spectrum", "deterministic": false }), "deterministic"),
    ];
    for (i, (cfg, field)) in cases.iter().enumerate() {
        let p = write_config(tmp.path(), &format!("bad{i}.json"), cfg);
        let o = run(&["run", p.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(2), "{cfg}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{cfg}: {}", stderr(&o));
    }
    let p = tmp.path().join("broken.json");
    fs::write(&p, "{ \"command\": ").unwrap();
    assert_eq!(run(&["validate", p.to_str().unwrap()], None).status.code(), Some(2));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn missing_config_is_an_io_failure() {
    let o = run(&["validate", "/nonexistent/config.json"], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn resource_cap_exits_4_with_guidance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({ "command": "g2", "geometry": { "nside": 9 }, "g2": { "level": "three", "delta_e": [-20.0] } });
    let p = write_config(tmp.path(), "cap.json", &cfg);
    let o = run(&["run", p.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("reduce"));
}

#[test]
fn manifest_lists_every_output_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "s.json", &small_spectrum());
    let out = tmp.path().join("out");
    let o = run(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["command"], "spectrum");
    assert!(m["units"].as_str().unwrap().contains("Gamma = 1"));
    let mut listed = BTreeSet::new();
    for f in m["files"].as_array().unwrap() {
        let name = f["path"].as_str().unwrap();
        let bytes = fs::read(out.join(name)).unwrap();
        let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"], hex.as_str(), "{name}");
        assert_eq!(f["bytes"], bytes.len() as u64);
        listed.insert(name.to_string());
    }
    listed.insert("manifest.json".into());
    // nothing else, in particular no leftover temporaries
    assert_eq!(listing(&out), listed);
    assert!(listed.contains("spectrum.csv") && listed.contains("summary.json"));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "g.json", &g2_sweep());
    let (a, b) = (tmp.path().join("t1"), tmp.path().join("t4"));
    for (dir, t) in [(&a, "1"), (&b, "4")] {
        let o = run(&["run", p.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--threads", t], None);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(listing(&a), listing(&b));
    for name in listing(&a) {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn sweep_rows_are_in_ascending_axis_order() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "g.json", &g2_sweep());
    let out = tmp.path().join("o");
    assert!(run(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()], None).status.success());
    let mut rd = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    assert_eq!(&rd.headers().unwrap()[0], "mode.w0");
    let axis: Vec<f64> = rd.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(axis, vec![1.0, 1.2, 1.4]);
}

#[test]
fn single_point_sweep_equals_a_direct_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut direct = small_spectrum();
    direct["mode"]["w0"] = json!(2.0);
    let sweep = json!({
        "command": "sweep",
        "geometry": { "nside": 5 },
        "mode": { "w0": 1.5 },
        "sweep": { "command": "spectrum", "axis": "mode.w0", "values": [2.0] }
    });
    let (pd, ps) = (write_config(tmp.path(), "d.json", &direct), write_config(tmp.path(), "s.json", &sweep));
    let (od, os) = (tmp.path().join("d"), tmp.path().join("s"));
    assert!(run(&["run", pd.to_str().unwrap(), "--out", od.to_str().unwrap()], None).status.success());
    assert!(run(&["run", ps.to_str().unwrap(), "--out", os.to_str().unwrap()], None).status.success());
    let want = fs::read_to_string(od.join("spectrum.csv")).unwrap();
    let got = fs::read_to_string(os.join("spectrum.csv")).unwrap();
    let (wl, gl): (Vec<&str>, Vec<&str>) = (want.lines().collect(), got.lines().collect());
    assert_eq!(wl.len(), gl.len());
    assert_eq!(gl[0], format!("mode.w0,{}", wl[0]));
    for (w, g) in wl.iter().zip(&gl).skip(1) {
        assert_eq!(*g, format!("2,{w}"));
    }
}

#[test]
fn empty_sweep_writes_only_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({ "command": "sweep", "sweep": { "command": "g2", "axis": "mode.w0", "values": [] } });
    let p = write_config(tmp.path(), "e.json", &cfg);
    let out = tmp.path().join("o");
    let o = run(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(listing(&out), BTreeSet::from(["manifest.json".to_string()]));
    assert_eq!(manifest(&out)["files"], json!([]));
}

#[test]
fn failed_sweep_points_are_recorded_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = g2_sweep();
    cfg["sweep"]["values"] = json!([1.2, -1.0]);
    let p = write_config(tmp.path(), "f.json", &cfg);
    let out = tmp.path().join("o");
    let o = run(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    let fails = m["failures"].as_array().unwrap();
    assert_eq!(fails.len(), 1);
    assert_eq!(fails[0]["axis_value"], -1.0);
    assert_eq!(fails[0]["exit_code"], 2);
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert!(rows[1].starts_with("-1,") && rows[1].contains("error"));
    assert!(rows[2].starts_with("1.2,ok"));
}

#[test]
fn sweep_axis_must_name_a_numeric_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = g2_sweep();
    cfg["sweep"]["axis"] = json!("geometry.shape");
    let p = write_config(tmp.path(), "a.json", &cfg);
    let o = run(&["run", p.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweep.axis"));
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_spectrum();
    cfg["output"] = json!({ "dir": tmp.path().join("from_config") });
    let p = write_config(tmp.path(), "s.json", &cfg);
    let env_dir = tmp.path().join("from_env");
    let flag_dir = tmp.path().join("from_flag");

    assert!(run(&["run", p.to_str().unwrap()], None).status.success());
    assert!(tmp.path().join("from_config/manifest.json").exists());

    assert!(run(&["run", p.to_str().unwrap()], Some(&env_dir)).status.success());
    assert!(env_dir.join("manifest.json").exists());

    assert!(run(&["run", p.to_str().unwrap(), "--out", flag_dir.to_str().unwrap()], Some(&env_dir)).status.success());
    assert!(flag_dir.join("manifest.json").exists());

    // the location never enters the config hash
    let h: Vec<Value> = [tmp.path().join("from_config"), env_dir, flag_dir].iter().map(|d| manifest(d)["config_sha256"].clone()).collect();
    assert!(h.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn states_prints_the_bundled_table() {
    let o = run(&["states"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("n,"));
    assert_eq!(text.lines().count() - 1, chiral_array::atomdata::bundled().states.len());
}
