use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SYM2: &str = r#"{"dim":1,"atoms":[[[1],1.0],[[-1],1.0],[[0],-2.0]],"sphere":null}"#;
const SYM1: &str = r#"{"dim":1,"atoms":[[[1],1.0],[[-1],-1.0]],"sphere":null}"#;
const WEIERSTRASS: &str = r#"{"kind":"weierstrass","b":2.0,"alpha":0.5,"eval_tol":1e-10}"#;
const BUMP: &str = r#"{"kind":"bump","center":0.0,"width":0.5}"#;
const LINEAR: &str = r#"{"kind":"polynomial","coeffs":[0.5,2.0]}"#;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        let s = Sandbox { dir: TempDir::new().unwrap() };
        for (name, body) in [("sym2.json", SYM2), ("sym1.json", SYM1), ("w.json", WEIERSTRASS), ("bump.json", BUMP), ("lin.json", LINEAR)] {
            std::fs::write(s.path(name), body).unwrap();
        }
        s
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        self.run_env(args, None)
    }

    fn run_env(&self, args: &[&str], budget: Option<&str>) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_osc-lab"));
        cmd.current_dir(self.dir.path()).args(args).env_remove("OSC_LAB_BUDGET");
        if let Some(b) = budget {
            cmd.env("OSC_LAB_BUDGET", b);
        }
        cmd.output().unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn error_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(o.stderr.trim_ascii()).unwrap()
}

#[test]
fn moments_on_sym2_pass() {
    let sb = Sandbox::new();
    let o = sb.run(&["measure", "check", "--file", "sym2.json", "--order", "1", "--out", "m.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("moments: PASS"));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sb.path("m.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "moments");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["tolerances"]["quad_tol"], 1e-8);
}

#[test]
fn moments_failure_exits_one() {
    let sb = Sandbox::new();
    let o = sb.run(&["measure", "check", "--file", "sym1.json", "--order", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("moments: FAIL"));
}

#[test]
fn lil_on_linear_function_is_null() {
    let sb = Sandbox::new();
    let o = sb.run(&["lil", "--mode", "theta", "--fn", "lin.json", "--measure", "sym2.json", "--nmax", "10", "--alpha", "1", "--samples", "8", "--out", "lil.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let mut rdr = csv::Reader::from_path(sb.path("lil.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["x", "n", "eps", "theta", "ratio"]);
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
        rows += 1;
    }
    assert_eq!(rows, 8 * 7);
}

#[test]
fn kernel_compare_rejects_first_order_measure() {
    let sb = Sandbox::new();
    let o = sb.run(&["kernel", "compare", "--fn", "bump.json", "--measure", "sym1.json", "--eps-grid", "2^-1..2^-4", "--out", "cz.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"], "precondition");
    assert_eq!(e["exit_code"], 2);
    assert!(!sb.path("cz.csv").exists());
}

#[test]
fn kernel_commands_write_their_artifacts() {
    let sb = Sandbox::new();
    let o = sb.run(&["kernel", "report", "--measure", "sym2.json", "--out", "report.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sb.path("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["size_ok"], true);

    let o = sb.run(&["kernel", "compare", "--fn", "bump.json", "--measure", "sym2.json", "--eps-grid", "2^-1..2^-14", "--out", "cz.csv", "--svg", "cz.svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(header(&sb.path("cz.csv")), "x,eps,theta_tilde,transform,gap");
    assert!(std::fs::read_to_string(sb.path("cz.svg")).unwrap().contains("<polyline"));
}

#[test]
fn csv_headers_match_the_documented_columns() {
    let sb = Sandbox::new();
    let o = sb.run(&["theta", "--fn", "w.json", "--measure", "sym1.json", "--x", "0.3", "--eps", "1e-4", "--m", "0", "--alpha", "0.5", "--out", "t.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(header(&sb.path("t.csv")), "x,eps,value,error_estimate,evals");

    let o = sb.run(&["martingale", "--fn", "w.json", "--measure", "sym1.json", "--nmax", "6", "--alpha", "0.5", "--samples", "32", "--out", "mart.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(header(&sb.path("mart.csv")), "n,cube_index,S,increment,adjacent_max,comparison_gap");
    let lines = std::fs::read_to_string(sb.path("mart.csv")).unwrap().lines().count();
    assert_eq!(lines, 1 + (1 << 7) - 1);

    let o = sb.run(&["sharpness", "--b", "2", "--nmax", "8", "--samples", "16", "--out", "sharp.csv"]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    assert_eq!(header(&sb.path("sharp.csv")), "x,n,eps,upsilon,partial_sum,gap,ratio");
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let sb = Sandbox::new();
    let args = |threads: &'static str, out: &'static str| {
        vec!["--threads", threads, "lil", "--fn", "w.json", "--measure", "sym1.json", "--nmax", "10", "--alpha", "0.5", "--samples", "32", "--seed", "5", "--out", out]
    };
    for (t, out) in [("1", "a.csv"), ("4", "b.csv"), ("4", "c.csv")] {
        assert!(sb.run(&args(t, out)).status.success());
    }
    let a = std::fs::read(sb.path("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(sb.path("b.csv")).unwrap());
    assert_eq!(a, std::fs::read(sb.path("c.csv")).unwrap());
    let other = sb.run(&["lil", "--fn", "w.json", "--measure", "sym1.json", "--nmax", "10", "--alpha", "0.5", "--samples", "32", "--seed", "6", "--out", "d.csv"]);
    assert!(other.status.success());
    assert_ne!(a, std::fs::read(sb.path("d.csv")).unwrap());
}

#[test]
fn manifest_replays_the_experiment() {
    let sb = Sandbox::new();
    let o = sb.run(&["kernel", "compare", "--fn", "bump.json", "--measure", "sym2.json", "--eps-grid", "2^-2..2^-6", "--x", "-0.25", "--x", "0.1", "--out", "a.csv"]);
    assert!(o.status.success());
    let o = sb.run(&["run", "--config", "a.csv.manifest.json", "--out", "b.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(sb.path("a.csv")).unwrap(), std::fs::read(sb.path("b.csv")).unwrap());
}

#[test]
fn budget_exhaustion_exits_three() {
    let sb = Sandbox::new();
    let args = ["theta", "--fn", "w.json", "--measure", "sym1.json", "--x", "0.3", "--eps", "1e-4", "--alpha", "0.5"];
    let o = sb.run_env(&args, Some("500"));
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"], "budget");
    let o = sb.run_env(&args, Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "config");
}

#[test]
fn configuration_errors_exit_two() {
    let sb = Sandbox::new();
    for args in [
        vec!["theta", "--fn", "missing.json", "--measure", "sym1.json", "--x", "0.3", "--eps", "1e-4", "--alpha", "0.5"],
        vec!["kernel", "compare", "--fn", "bump.json", "--measure", "sym2.json", "--eps-grid", "2^-1..3^-4"],
        vec!["lil", "--fn", "w.json", "--measure", "sym1.json", "--nmax", "5", "--alpha", "0.5"],
        vec!["theta", "--fn", "w.json", "--measure", "sym1.json", "--x", "0.3", "--eps", "1e-4", "--alpha", "0.5", "--quad-tol", "-1"],
    ] {
        let o = sb.run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(error_json(&o)["exit_code"], 2);
    }
}
