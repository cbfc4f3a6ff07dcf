use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const NEUTRAL: &str = r#"
[time]
horizon = 0.5
points = 10

[community]
x0 = [0.1]
pool = [0.6, 0.4]

[environment]
m = { kind = "constant", value = 2.0 }
s = [{ kind = "constant", value = 0.0 }]

[simulation]
model = "sde"
dt = 1e-3
n_reps = 400
seed = 11

[closure]
order = 20
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moranwf")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "neutral", NEUTRAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    let o = run(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&a, "neutral_mc.csv"), read(&b, "neutral_mc.csv"));
    let header = read(&a, "neutral_mc.csv").lines().next().unwrap().to_string();
    assert_eq!(header, "t,x_1_mean,x_1_var,x_1_ci_half,x_2_mean,x_2_var,x_2_ci_half,simpson_mean,simpson_var,simpson_ci_half");
    assert!(read(&a, "neutral_mc.gp").contains("yerrorbars"));

    let c = tmp.path().join("c");
    assert!(run(&["simulate", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "12"]).status.success());
    assert_ne!(read(&a, "neutral_mc.csv"), read(&c, "neutral_mc.csv"));
    assert!(read(&c, "neutral_simulate.meta.toml").contains("seed = 12"));
}

#[test]
fn metadata_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "neutral", NEUTRAL);
    let a = tmp.path().join("a");
    assert!(run(&["moments", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    let meta: toml::Table = toml::from_str(&read(&a, "neutral_moments.meta.toml")).unwrap();
    let echoed = toml::to_string(meta["config"].as_table().unwrap()).unwrap();
    let cfg2 = write_config(tmp.path(), "echo", &echoed);
    let b = tmp.path().join("b");
    let o = run(&["moments", "--config", &cfg2, "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // the echoed config carries its name, so file names match too
    for f in ["neutral_moments.csv", "neutral_closure.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let digests = meta["digests"].as_table().unwrap();
    let expected = digests["neutral_closure.csv"].as_str().unwrap();
    assert!(expected.starts_with("sha256:") && expected.len() == 7 + 64);
}

#[test]
fn unknown_key_fails_and_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad", &NEUTRAL.replace("n_reps", "n_rep"));
    let o = run(&["simulate", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_rep"));

    let cfg = write_config(tmp.path(), "bad2", &NEUTRAL.replace("x0 = [0.1]", "x0 = [1.5]"));
    let o = run(&["moments", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("community.x0"));
}

#[test]
fn compare_passes_when_the_closure_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "neutral", NEUTRAL);
    let o = run(&["compare", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("overall: PASS"));
    assert!(read(tmp.path(), "neutral_compare.meta.toml").contains("pass = true"));
}

#[test]
fn compare_fails_when_the_closure_is_truncated_too_early() {
    // order 2 under s = 8: the neglected third moment carries an O(1) error
    let text = NEUTRAL
        .replace("value = 0.0 }]", "value = 8.0 }]")
        .replace("value = 2.0 }", "value = 0.0 }")
        .replace("x0 = [0.1]", "x0 = [0.5]")
        .replace("order = 20", "order = 2");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "truncated", &text);
    let o = run(&["compare", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(read(tmp.path(), "truncated_compare_report.txt").contains("overall: FAIL"));
}

#[test]
fn equilibrium_and_hitting_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let eq = r#"
[equilibrium]
vary = "m"
from = 0.5
to = 2.0
points = 4
m = 1.0
p = 0.5
s = 0.0
"#;
    let cfg = write_config(tmp.path(), "eq", eq);
    assert!(run(&["equilibrium", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]).status.success());
    let mean = read(tmp.path(), "eq_equilibrium_mean.csv");
    // neutral: E[S] = 1 - 2 p(1-p) m / (m + 1)
    for line in mean.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((v[1] - (1.0 - 0.5 * v[0] / (v[0] + 1.0))).abs() < 1e-12, "{line}");
    }
    assert!(tmp.path().join("eq_equilibrium_var.csv").exists());

    let hit = NEUTRAL.replace("value = 2.0 }", "value = 0.0 }").replace("x0 = [0.1]", "x0 = [0.5]")
        + "\n[hitting]\ntargets = [\"t1\", \"t10\"]\n";
    let cfg = write_config(tmp.path(), "hit", &hit);
    let o = run(&["hitting", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(tmp.path(), "hit_hitting.csv");
    assert!(csv.starts_with("t,p_t1,p_t10\n"));
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    // by symmetry P(T1 <= t) = P(T0 <= t), so P(T10 <= t) = 2 P(T1 <= t)
    assert!((last[2] - 2.0 * last[1]).abs() < 1e-6, "{last:?}");
}
