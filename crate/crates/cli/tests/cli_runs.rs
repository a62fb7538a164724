use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const STANDARD: &str = r#"
seed = 42

[model]
horizon_years = 1.0
drift_per_year = 0.05
volatility_per_sqrt_year = 0.2

[intensity]
kind = "power_blowup"
kappa = 1.0
beta = 1.0

[utility]
kind = "power"
gamma = 0.5

[simulation]
n_paths = 20000
"#;

struct Run {
    dir: TempDir,
    config: PathBuf,
}

impl Run {
    fn new(config_text: &str) -> Self {
        let dir = TempDir::new().unwrap();
        let config = dir.path().join("experiment.toml");
        fs::write(&config, config_text).unwrap();
        Self { dir, config }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn exec(&self, sub: &str, out: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_illiquid"))
            .arg(sub)
            .arg("--config")
            .arg(&self.config)
            .arg("--out")
            .arg(self.out(out))
            .args(extra)
            .output()
            .unwrap()
    }
}

fn zero_drift() -> String {
    STANDARD.replace("drift_per_year = 0.05", "drift_per_year = 0.0")
}

/// Data rows of a CSV written by the tool, after the provenance line and header.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let provenance = lines.next().unwrap();
    assert!(provenance.starts_with("# illiquid "), "{provenance}");
    assert!(provenance.contains("config-sha256="), "{provenance}");
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let data = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, data)
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, data) = rows(path);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    data.into_iter().map(|r| r[i].clone()).collect()
}

fn number(path: &Path, name: &str) -> f64 {
    column(path, name)[0].parse().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_drift_solve_reports_terminal_utility_in_two_iterations() {
    let run = Run::new(&zero_drift());
    let o = run.exec("solve", "s", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = run.out("s/summary.csv");
    assert_eq!(number(&summary, "v_star"), 2.0);
    assert_eq!(number(&summary, "iterations"), 2.0);
    for f in ["value.csv", "policy.csv", "value.json"] {
        assert!(run.out("s").join(f).exists(), "{f}");
    }
}

#[test]
fn standard_solve_lies_in_the_bracket() {
    let run = Run::new(STANDARD);
    let o = run.exec("solve", "s", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = run.out("s/summary.csv");
    let v = number(&summary, "v_star");
    let f = number(&summary, "supersolution");
    assert!(v > 2.0 && v <= 2.0 * 0.03125f64.exp(), "{v}");
    assert_eq!(f, 2.0 * 0.03125f64.exp());
    assert!(v <= number(&summary, "merton_value") + 1e-4);
}

#[test]
fn negative_volatility_is_a_config_error_naming_the_field() {
    let run = Run::new(&STANDARD.replace("volatility_per_sqrt_year = 0.2", "volatility_per_sqrt_year = -0.2"));
    let o = run.exec("solve", "s", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.volatility_per_sqrt_year"), "{}", stderr(&o));
    assert!(!run.out("s").exists());
}

#[test]
fn parse_errors_point_at_the_line() {
    let run = Run::new(&STANDARD.replace("kappa = 1.0", "kappa_per_year = 1.0"));
    let o = run.exec("solve", "s", &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("kappa_per_year") && err.contains("line"), "{err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let run = Run::new(STANDARD);
    fs::remove_file(&run.config).unwrap();
    assert_eq!(run.exec("solve", "s", &[]).status.code(), Some(2));
}

#[test]
fn vanishing_volatility_with_drift_violates_no_arbitrage() {
    let run = Run::new(&STANDARD.replace("volatility_per_sqrt_year = 0.2", "volatility_per_sqrt_year = 0.0"));
    let o = run.exec("solve", "s", &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("NA"), "{}", stderr(&o));
    assert!(!run.out("s").exists(), "nothing is computed before the checks pass");
}

#[test]
fn iteration_cap_gives_exit_four_with_outputs() {
    let run = Run::new(&format!("{STANDARD}\n[solver]\nmax_iterations = 3\n"));
    let o = run.exec("solve", "s", &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("did not converge"));
    assert_eq!(column(&run.out("s/summary.csv"), "converged"), ["false"]);
}

#[test]
fn zero_policy_override_gives_exact_utility() {
    let run = Run::new(STANDARD);
    let o = run.exec("simulate", "m", &["--constant-policy", "0", "--paths", "500"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sim = run.out("m/simulation.csv");
    assert_eq!(number(&sim, "mean_utility"), 2.0);
    assert_eq!(number(&sim, "std_error"), 0.0);
    assert_eq!(column(&run.out("m/verdict.csv"), "verdict"), ["n/a"]);
}

#[test]
fn out_of_range_policy_override_is_rejected() {
    let run = Run::new(STANDARD);
    let o = run.exec("simulate", "m", &["--constant-policy", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--constant-policy"));
}

#[test]
fn optimal_policy_simulation_passes_the_verdict() {
    let run = Run::new(STANDARD);
    let o = run.exec("simulate", "m", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let verdict = run.out("m/verdict.csv");
    assert_eq!(column(&verdict, "verdict"), ["PASS"]);
    assert_eq!(column(&verdict, "policy"), ["optimal"]);
    assert!(number(&verdict, "abs_error") <= number(&verdict, "three_se"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let run = Run::new(STANDARD);
    for out in ["a", "b"] {
        assert!(run.exec("simulate", out, &["--paths", "2000"]).status.success());
        assert!(run.exec("converge", out, &["--k-list", "1,2"]).status.success());
    }
    for f in ["simulation.csv", "verdict.csv", "convergence.csv"] {
        let a = fs::read(run.out("a").join(f)).unwrap();
        let b = fs::read(run.out("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    assert!(run.exec("simulate", "c", &["--paths", "2000", "--seed", "43"]).status.success());
    let a = fs::read_to_string(run.out("a/simulation.csv")).unwrap();
    let c = fs::read_to_string(run.out("c/simulation.csv")).unwrap();
    assert_ne!(a.lines().nth(2), c.lines().nth(2), "a different seed changes the estimate");
    assert!(c.starts_with("# illiquid") && c.lines().next().unwrap().ends_with("seed=43"));
}

#[test]
fn single_scale_sweep_writes_one_row() {
    let run = Run::new(STANDARD);
    let o = run.exec("converge", "c", &["--k-list", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, data) = rows(&run.out("c/convergence.csv"));
    assert_eq!(header, ["k", "V_lambda", "V_merton", "abs_gap", "rel_gap", "dp_iterations", "dp_residual", "wall_seconds"]);
    assert_eq!(data.len(), 1);
    assert_eq!(data[0][0], "3");
    assert_eq!(data[0][7], "");
}

#[test]
fn zero_drift_sweep_has_zero_gaps() {
    let run = Run::new(&zero_drift());
    assert!(run.exec("converge", "c", &["--k-list", "1,8,64"]).status.success());
    assert_eq!(column(&run.out("c/convergence.csv"), "abs_gap"), ["0", "0", "0"]);
}

#[test]
fn standard_sweep_ends_close_to_merton() {
    let run = Run::new(STANDARD);
    let o = run.exec("converge", "c", &["--timings"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let path = run.out("c/convergence.csv");
    let ks = column(&path, "k");
    assert_eq!(ks, ["1", "2", "4", "8", "16", "32", "64"]);
    let rel: f64 = column(&path, "rel_gap").last().unwrap().parse().unwrap();
    assert!(rel < 1e-2);
    assert!(column(&path, "wall_seconds").iter().all(|s| s.parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn malformed_scale_list_is_rejected() {
    let run = Run::new(STANDARD);
    assert_eq!(run.exec("converge", "c", &["--k-list", "4,2"]).status.code(), Some(2));
    assert_eq!(run.exec("converge", "c", &["--k-list", "1,x"]).status.code(), Some(2));
}

#[test]
fn trace_with_no_arrivals_is_the_utility() {
    let run = Run::new(STANDARD);
    assert!(run.exec("trace", "t", &["--m-max", "0"]).status.success());
    assert_eq!(column(&run.out("t/trace.csv"), "v_m"), ["2"]);
}

#[test]
fn zero_drift_trace_is_constant() {
    let run = Run::new(&zero_drift());
    assert!(run.exec("iterate-trace", "t", &["--m-max", "5"]).status.success());
    assert_eq!(column(&run.out("t/trace.csv"), "v_m"), vec!["2"; 6]);
}

#[test]
fn standard_trace_increases_below_the_bound() {
    let run = Run::new(STANDARD);
    assert!(run.exec("trace", "t", &[]).status.success());
    let path = run.out("t/trace.csv");
    let v: Vec<f64> = column(&path, "v_m").iter().map(|s| s.parse().unwrap()).collect();
    let f: f64 = column(&path, "supersolution")[0].parse().unwrap();
    assert_eq!(v.len(), 11);
    assert!(v.windows(2).all(|w| w[1] > w[0]), "{v:?}");
    let steps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.windows(2).all(|s| s[1] < s[0]), "increments shrink: {steps:?}");
    assert!(v.iter().all(|&x| x < f));
}

#[test]
fn grid_representation_runs_end_to_end() {
    let cfg = format!(
        "{STANDARD}\n[solver]\nrepresentation = \"grid\"\ntime_intervals = 20\nwealth_nodes = 15\ntime_quadrature = 16\nreturn_quadrature = 12\n"
    );
    let run = Run::new(&cfg);
    let o = run.exec("solve", "g", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, data) = rows(&run.out("g/value.csv"));
    assert_eq!(header.len(), 2 + 15);
    assert_eq!(data.len(), 21);
    let v = number(&run.out("g/summary.csv"), "v_star");
    assert!((v - 2.0404).abs() < 5e-3, "{v}");
}
