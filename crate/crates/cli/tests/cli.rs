use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn aoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoi")).args(args).output().expect("runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV result as string cells.
fn rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let data = r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect();
    (header, data)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn num(x: &str) -> f64 {
    x.parse().unwrap()
}

const UNIFORM_SWEEP: &str = r#"
mode = "theta-sweep"
lambda = 1.5
seed = 3

[distribution]
family = "uniform"
max = 1.0

[sweep]
theta = { start = 0.0, stop = 4.0, points = 201, include_inf = true }
"#;

#[test]
fn theta_sweep_minimum_is_near_the_better_scheme() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "sweep.toml", UNIFORM_SWEEP);
    let out = aoi(&["--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let (h, data) = rows(&text);
    let (t, a) = (column(&h, "theta"), column(&h, "aaoi_analytic"));
    let values: Vec<f64> = data.iter().map(|r| num(&r[a])).collect();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let dnp = values[0];
    let last = data.last().unwrap();
    assert_eq!(last[t], "inf");
    let dop = num(&last[a]);
    assert!(min >= 0.99 * dnp.min(dop) && min <= dnp.min(dop));
}

#[test]
fn crossover_mode_reports_uniform_root() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "x.toml",
        "mode = \"crossover\"\n[distribution]\nfamily = \"uniform\"\nmax = 2.0\n",
    );
    let out = aoi(&["--config", s(&cfg)]);
    assert!(out.status.success());
    let (h, data) = rows(&String::from_utf8(out.stdout).unwrap());
    let x = num(&data[0][column(&h, "lambda_times_scale")]);
    assert!((x - 2.356).abs() < 0.01, "{x}");
}

const SIMULATE: &str = r#"
mode = "simulate"
lambda = 0.8
seed = 17

[distribution]
family = "weibull"
scale = 1.0
shape = 2.0

[policy]
kind = "threshold"
theta = 1.5

[simulation]
cycles = 50000
"#;

#[test]
fn simulation_output_is_byte_identical_for_equal_seeds() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "sim.toml", SIMULATE);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(aoi(&["--config", s(&cfg), "--out", s(&a)]).status.success());
    assert!(aoi(&["--config", s(&cfg), "--out", s(&b)]).status.success());
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    // the output path is part of the embedded config, so compare past it
    let strip = |t: &[u8]| String::from_utf8_lossy(t).lines().filter(|l| !l.starts_with("# con")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&ta), strip(&tb));
    let c = aoi(&["--config", s(&cfg)]).stdout;
    let d = aoi(&["--config", s(&cfg)]).stdout;
    assert_eq!(c, d);
    let e = aoi(&["--config", s(&cfg), "--seed", "18"]).stdout;
    assert_ne!(c, e);
}

#[test]
fn simulate_agrees_with_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "sim.toml", SIMULATE);
    let out = aoi(&["--config", s(&cfg), "--replications", "8", "--set", "simulation.cycles=40000"]);
    let (h, data) = rows(&String::from_utf8(out.stdout).unwrap());
    let r = &data[0];
    assert_eq!(r[column(&h, "replications")], "8");
    let (sim, hw, exact) =
        (num(&r[column(&h, "aaoi_sim")]), num(&r[column(&h, "ci_half_width")]), num(&r[column(&h, "aaoi_analytic")]));
    assert!((sim - exact).abs() <= (3.0 * hw).max(1e-3 * exact));
}

#[test]
fn results_embed_hash_seed_and_verify() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "sweep.toml", UNIFORM_SWEEP);
    for format in ["csv", "json"] {
        let out = dir.path().join(format!("r.{format}"));
        let st = aoi(&["--config", s(&cfg), "--format", format, "--out", s(&out), "--seed", "99"]);
        assert!(st.status.success());
        let text = fs::read_to_string(&out).unwrap();
        if format == "csv" {
            assert!(text.lines().any(|l| l == "# seed: 99"));
            assert!(text.lines().next().unwrap().starts_with("# config_hash: "));
        } else {
            let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(doc["seed"], 99);
            assert_eq!(doc["rows"].as_array().unwrap().len(), 202);
            assert_eq!(doc["rows"][201][1], "inf");
        }
        let v = aoi(&["--verify", s(&out)]);
        assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
        let tampered = text.replacen("\"max\":1.0", "\"max\":1.5", 1).replacen("\"max\": 1.0", "\"max\": 1.5", 1);
        assert_ne!(tampered, text);
        let bad = write(dir.path(), &format!("bad.{format}"), &tampered);
        assert_eq!(aoi(&["--verify", s(&bad)]).status.code(), Some(2));
    }
}

#[test]
fn overrides_shadow_file_values_last_wins() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "x.toml", "mode = \"crossover\"\n[distribution]\nfamily = \"uniform\"\nmax = 1.0\n");
    let out = aoi(&["--config", s(&cfg), "--set", "distribution.max=4", "--set", "distribution.max=2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"max\":2.0"));
    let (h, data) = rows(&text);
    assert!((num(&data[0][column(&h, "scale")]) - 2.0).abs() < 1e-12);
    let out = aoi(&["--config", s(&cfg), "--set", "crossover.lo=0.05", "--set", "crossover.hi=50"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"crossover\":{\"lo\":0.05,\"hi\":50"));
    let out = aoi(&["--config", s(&cfg), "--mode", "theta-sweep", "--set", "lambda=1.5", "--set", "sweep.theta=[0, 1, \"inf\"]"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, data) = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(data.len(), 3);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        "mode = \"theta-sweep\"\nlambda = 1.0\n",
        "mode = \"crossover\"\n[distribution]\nfamily = \"uniform\"\nmax = -1.0\n",
        "mode = \"theta-sweep\"\nlambda = 1.0\n[distribution]\nfamily = \"uniform\"\nmax = 1.0\n[sweep]\ntheta = [1.0, 0.5]\n",
        "mode = \"crossover\"\ncolour = \"red\"\n[distribution]\nfamily = \"uniform\"\nmax = 1.0\n",
        "mode = \"nonsense\"\n",
        "mode = [\n",
    ];
    for (i, c) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{i}.toml"), c);
        let out = aoi(&["--config", s(&cfg)]);
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(aoi(&["--config", s(&dir.path().join("missing.toml"))]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three_and_names_the_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "x.toml", "mode = \"crossover\"\n[distribution]\nfamily = \"exponential\"\nrate = 1.0\n");
    let out = aoi(&["--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NoSignChange"));
}

const CSMA: &str = r#"
mode = "csma-game"
seed = 2

[csma]
sigma2 = [6.0, 10.0]
rate_const = [5.0, 5.0]
noise = 0.5
theta = [0.1, 0.9]
lambda = 1.0
n_draws = 20000
"#;

#[test]
fn csma_game_rows_follow_the_table_layout() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "g.toml", CSMA);
    let out = aoi(&["--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, data) = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(&h[..5], ["theta", "lambda", "ne_profile", "ne_aaoi", "ne_social"]);
    for r in &data {
        assert_eq!(r[column(&h, "ne_profile")], "1.00000000;1.00000000");
        assert_eq!(r[column(&h, "ne_converged")], "true");
        assert!(num(&r[column(&h, "coop_social")]) <= num(&r[column(&h, "ne_social")]) + 1e-9);
    }
}

#[test]
fn non_convergence_exits_with_four_and_keeps_results() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "g.toml", CSMA);
    let out_path = dir.path().join("g.csv");
    let out = aoi(&["--config", s(&cfg), "--set", "csma.max_rounds=1", "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NonConvergence"));
    let (h, data) = rows(&fs::read_to_string(&out_path).unwrap());
    assert_eq!(data.len(), 2);
    assert!(data.iter().all(|r| r[column(&h, "ne_converged")] == "false"));
}

#[test]
fn family_criteria_report_has_no_disagreements() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "t.toml",
        "mode = \"table1\"\nseed = 4\n[table1]\nlambda = [0.1, 0.5, 1.0, 2.0, 5.0]\nuniform_max = [0.5, 1.0, 3.0]\n",
    );
    let out = aoi(&["--config", s(&cfg)]);
    assert!(out.status.success());
    let (h, data) = rows(&String::from_utf8(out.stdout).unwrap());
    let (f, c, d, agree) = (column(&h, "family"), column(&h, "criterion"), column(&h, "direct"), column(&h, "agree"));
    assert!(data.iter().all(|r| r[agree] == "true"));
    let hyper: Vec<_> = data.iter().filter(|r| r[f] == "hyper-exponential").collect();
    assert_eq!(hyper.len(), 50 * 5);
    for r in data.iter().filter(|r| r[f] == "exponential" || r[f] == "hyper-exponential") {
        assert_eq!((r[c].as_str(), r[d].as_str()), ("dop", "dop"));
        assert!(num(&r[column(&h, "d_n")]) >= num(&r[column(&h, "d_o")]) * (1.0 - 1e-12));
    }
    assert!(data.iter().any(|r| r[f] == "uniform" && r[d] == "dnp"));
}

#[test]
fn empirical_samples_load_relative_to_the_config() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "samples.txt", "0.5 1.0\n1.5, 2.0\n");
    let cfg = write(
        dir.path(),
        "e.toml",
        "mode = \"single-analytic\"\nlambda = 1.0\n[distribution]\nfamily = \"empirical\"\npath = \"samples.txt\"\n",
    );
    let out = aoi(&["--config", s(&cfg), "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let inline = write(
        dir.path(),
        "i.toml",
        "mode = \"single-analytic\"\nlambda = 1.0\n[distribution]\nfamily = \"empirical\"\nsamples = [0.5, 1.0, 1.5, 2.0]\n",
    );
    let a: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&aoi(&["--config", s(&inline), "--format", "json"]).stdout).unwrap();
    assert_eq!(a["rows"], b["rows"]);
}

#[test]
fn multisource_mode_lists_every_source_and_scheme() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        r#"
mode = "multisource"
[multisource]
schemes = ["dnp", "dop"]
[[multisource.sources]]
lambda = 0.5
distribution = { family = "uniform", max = 1.0 }
[[multisource.sources]]
lambda = 1.0
distribution = { family = "erlang", shape = 2, rate = 3.0 }
"#,
    );
    let out = aoi(&["--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, data) = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(data.len(), 4);
    assert!(data.iter().all(|r| num(&r[column(&h, "aaoi_analytic")]) > 0.0 && r[column(&h, "aaoi_sim")].is_empty()));
}
