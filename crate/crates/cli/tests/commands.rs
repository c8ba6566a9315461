use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[domain]
L = 1.0
H = 1.0

[layers]
interfaces = [-0.5]
K = [1.0, 10.0]
D = [1.0, 4.0]

[bc]
c_top = 1.0
c_bottom = 0.0

[background]
auto = true
cp = 1.0

[grid]
nx = 8
ny = 1
nz = 32
align_epsilons = [0.04, 0.02]

[time]
t_end = 1.0
cadence = 0.05
dt_max = 0.01
snapshots = [0.5]

[init]
count = 4
"#;

fn ld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ld"))
        .args(args)
        .env("LD_THREADS", "2")
        .env("RUST_LOG", "warn")
        .output()
        .expect("ld runs")
}

fn ok(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null)
}

fn write_config(dir: &Path, extra: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, format!("{CONFIG}{extra}")).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_then_analyse() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&ld(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]));
    ok(&ld(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--member", "1"]));
    for f in ["series.csv", "series.meta.json", "config.toml", "final.json", "final.bin", "snap_0000.json", "ledger.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let csv = fs::read_to_string(a.join("series.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,l2,lr,grad,hs,nu_inst,nu_avg,divmax,dt");
    assert_eq!(csv.lines().count(), 1 + 21);

    let series = a.join("series.csv");
    let nu = ok(&ld(&["nusselt", "--series", series.to_str().unwrap(), "--window", "0.5,1"]));
    assert!(nu["nu"].is_number() && nu["nu_transport"].is_number());

    let ledger = a.join("ledger.json");
    let v = ok(&ld(&["verify", "--series", series.to_str().unwrap(), "--ledger", ledger.to_str().unwrap()]));
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 3);

    let same = ok(&ld(&["compare", "--a", a.to_str().unwrap(), "--b", a.to_str().unwrap(), "--norm", "hs:0.75"]));
    assert_eq!(same["distance"].as_f64().unwrap(), 0.0);
    let diff = ok(&ld(&["compare", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--norm", "l2"]));
    assert!(diff["distance"].as_f64().unwrap() > 0.0);
}

#[test]
fn constants_and_eigenvalues() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let json = tmp.path().join("ledger.json");
    let out = ld(&["constants", "--config", &cfg, "--json", json.to_str().unwrap()]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("M1")));
    let ledger: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(ledger["cp"]["provenance"], "user");

    let eigs = tmp.path().join("eigs.csv");
    ok(&ld(&["eigs", "--config", &cfg, "--count", "3", "--out", eigs.to_str().unwrap()]));
    let text = fs::read_to_string(&eigs).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "kx,ky,n,lambda");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 8 * 3);
    let ground: f64 = rows[0][3].parse().unwrap();
    assert!(ground > 0.0);
}

#[test]
fn epsilon_sweep_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("sweep");
    let res = ld(&["sweep-eps", "--config", &cfg, "--eps", "0.04,0.02", "--times", "0.5,1", "--out", out.to_str().unwrap()]);
    assert!(res.status.code().is_some_and(|c| c == 0 || c == 2));
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["epsilons"].as_array().unwrap().len(), 2);
    assert!(out.join("convergence.csv").exists());
    assert!(out.join("series_sharp.csv").exists());
}

#[test]
fn bad_input_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "\n[extra]\nkey = 1\n");
    let out = ld(&["constants", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = ld(&["compare", "--a", "x", "--b", "y", "--norm", "w:1"]);
    assert_eq!(out.status.code(), Some(1));
}
