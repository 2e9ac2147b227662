use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const HEADER: &str = "c,lambda,d,policy,reward,loss,ratio,slope_group,seed,wall_ms";

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twoprice"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("TWOPRICE_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_SOLVE: &str = r#"
policies = ["fluid", "static_opt", "two_price_opt", "sd_opt"]
seed = 3

[instance]
c = 20
lambda = 40.0
reward = { min_affine = [[0.0, 2.0], [1.0, 0.0]] }

[evaluate]
tp = { type = "two_price", x_l = 0.3, x_h = 0.7, tau = 4 }
fl = "fluid"

[expect]
flu = { value = 40.0, tol = 1e-9 }
"#;

#[test]
fn solve_writes_fixed_columns_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "solve.toml", SMALL_SOLVE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = run("solve", &cfg, &a, &["--check", "--no-timing"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run("solve", &cfg, &b, &["--no-timing", "--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv_a = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(csv_a.lines().next(), Some(HEADER));
    assert_eq!(csv_a.lines().count(), 7);
    assert_eq!(csv_a, fs::read_to_string(b.join("results.csv")).unwrap());
    assert!(a.join("report.json").exists());
}

#[test]
fn json_config_accepted() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "solve.json",
        r#"{"instance": {"c": 10, "lambda": 20.0,
             "reward": {"wtp": {"discrete": [[1.0, 0.5], [2.0, 0.5]]}, "objective": "revenue"}},
            "policies": ["fluid", "sd_opt"],
            "evaluate": {"v": [1,1,1,1,1,0.5,0.5,0.5,0.5,0.5]}}"#,
    );
    let o = run("solve", &cfg, &dir.path().join("out"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn malformed_probabilities_exit_2_with_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bad.toml",
        r#"
[instance]
c = 10
lambda = 20.0
reward = { wtp = { discrete = [[1.0, 0.5], [2.0, 0.4]] } }
"#,
    );
    let o = run("solve", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("instance.reward.wtp.discrete"), "{}", stderr(&o));
}

#[test]
fn unknown_field_and_policy_exit_2() {
    let dir = TempDir::new().unwrap();
    let typo = SMALL_SOLVE.replace("seed = 3", "sead = 3");
    let o = run("solve", &write(&dir, "a.toml", &typo), &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let bad = SMALL_SOLVE.replace("\"sd_opt\"]", "\"best\"]");
    let o = run("solve", &write(&dir, "b.toml", &bad), &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("best"));
    let o = run("solve", &write(&dir, "c.toml", SMALL_SOLVE), &dir.path().join("o"), &["--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn abundant_capacity_warns_but_solves() {
    let dir = TempDir::new().unwrap();
    let text = SMALL_SOLVE.replace("lambda = 40.0", "lambda = 10.0").replace("value = 40.0", "value = 10.0");
    let o = run("solve", &write(&dir, "a.toml", &text), &dir.path().join("o"), &["--check"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("not scarce"), "{}", stderr(&o));
}

#[test]
fn failed_expectation_exits_3() {
    let dir = TempDir::new().unwrap();
    let text = SMALL_SOLVE.replace("value = 40.0", "value = 41.0");
    let cfg = write(&dir, "a.toml", &text);
    let o = run("solve", &cfg, &dir.path().join("o"), &["--check"]);
    assert_eq!(o.status.code(), Some(3));
    // without --check expectations are ignored
    let o = run("solve", &cfg, &dir.path().join("o"), &[]);
    assert!(o.status.success());
}

const CERTIFY: &str = r#"
[instance]
c = 50
lambda = 100.0
reward = { min_affine = [[0.0, 2.0], [1.0, 0.0]] }

[[certificates]]
type = "auto"

[[certificates]]
type = "alpha1"
big_r = 2.0
r = 0.5

[[certificates]]
type = "static"
r = 1.0
b = 0.5
q = 0.6
"#;

#[test]
fn certify_passes_and_replays() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run("certify", &write(&dir, "c.toml", CERTIFY), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let written = out.join("certificates.json");
    let text = fs::read_to_string(&written).unwrap();
    assert!(text.contains("\"residuals\"") && text.contains("\"max_violation\""));

    let replay = format!("replay = [{:?}]\n", written.display().to_string());
    let o = run("certify", &write(&dir, "r.toml", &replay), &dir.path().join("r"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn corrupted_certificate_fails() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run("certify", &write(&dir, "c.toml", CERTIFY), &out, &[]);
    assert!(o.status.success());
    let mut entries: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("certificates.json")).unwrap()).unwrap();
    let beta = &mut entries[1]["certificate"]["beta"][3];
    *beta = serde_json::json!(beta.as_f64().unwrap() * 3.0 + 1.0);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&entries[1]["certificate"]).unwrap()).unwrap();
    let truncated = dir.path().join("cut.json");
    fs::write(&truncated, "{\"program\": {\"kind\": \"alpha1\"").unwrap();

    for path in [&bad, &truncated] {
        let replay = format!("replay = [{:?}]\n", path.display().to_string());
        let o = run("certify", &write(&dir, "r.toml", &replay), &dir.path().join("r"), &[]);
        assert_ne!(o.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    }
}

#[test]
fn scale_needs_three_points_and_writes_slopes() {
    let dir = TempDir::new().unwrap();
    let base = r#"
scales = SCALES
policies = ["fluid", "sd_opt"]

[[family]]
name = "kinked"
c = 100
lambda = 200.0
reward = { min_affine = [[0.0, 2.0], [1.0, 0.0]] }
expect = { fluid = [0.45, 0.55] }
"#;
    let o = run(
        "scale",
        &write(&dir, "a.toml", &base.replace("SCALES", "[100, 200]")),
        &dir.path().join("a"),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));

    let out = dir.path().join("b");
    let o = run(
        "scale",
        &write(&dir, "b.toml", &base.replace("SCALES", "[100, 400, 1600]")),
        &out,
        &["--check"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let slopes = fs::read_to_string(out.join("slopes.csv")).unwrap();
    assert!(slopes.starts_with("slope_group,policy,slope,intercept,r2,points"));
    assert_eq!(slopes.lines().count(), 3);
    assert!(fs::read_to_string(out.join("plot.gp")).unwrap().contains("set logscale xy"));
    assert_eq!(fs::read_to_string(out.join("results.csv")).unwrap().lines().count(), 7);
}

#[test]
fn small_stock_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "s.toml",
        "families = [\"kinked\", \"uniform\"]\ninstances = 3\nc = [20]\nseed = 2\n",
    );
    let out = dir.path().join("o");
    let o = run("small-stock", &cfg, &out, &["--check", "--no-timing"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let means = fs::read_to_string(out.join("means.csv")).unwrap();
    assert_eq!(means.lines().next(), Some("family,c,policy,mean_ratio"));
    assert_eq!(means.lines().count(), 9);
    assert_eq!(fs::read_to_string(out.join("results.csv")).unwrap().lines().count(), 25);
}

const SIMULATE: &str = r#"
horizon = 3000.0
seed = 5
policy = "fluid"
durations = [{ type = "exponential" }, { type = "log_normal", cv = 1.5 }]

[instance]
c = 10
lambda = 20.0
reward = { min_affine = [[0.0, 2.0], [1.0, 0.0]] }
"#;

#[test]
fn simulate_writes_distributions() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let o = run("simulate", &write(&dir, "s.toml", SIMULATE), &out, &["--no-timing"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pi = fs::read_to_string(out.join("pi.csv")).unwrap();
    assert_eq!(pi.lines().count(), 12);
    assert!(fs::read_to_string(out.join("insensitivity.json")).unwrap().contains("\"tv\""));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().next(), Some(HEADER));
    assert_eq!(results.lines().count(), 4);
}

#[test]
fn simulate_rejects_mismatched_mean() {
    let dir = TempDir::new().unwrap();
    let text = SIMULATE.replace("{ type = \"exponential\" }", "{ type = \"exponential\", mean = 2.0 }");
    let o = run("simulate", &write(&dir, "s.toml", &text), &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
