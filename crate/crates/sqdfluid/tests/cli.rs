use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sqdfluid"))
}

fn run(verb: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let o = bin().arg(verb).arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap();
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const EXPONENTIAL: &str = r#"
[arrival]
kind = "constant"
rate = 0.5

[service]
family = "exponential"

[initial]
kind = "jobs"
jobs = 1

[pde]
levels = 8
r_max = 12.0
delta = 0.005
horizon = 2.0
record_step = 0.5
output_times = [1.0]

[mc]
servers = 200
replications = 40
seed = 3
sample_times = [0.5, 1.0, 1.5, 2.0]
levels = 3
"#;

#[test]
fn validate_exponential_reports_ode_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", EXPONENTIAL);
    let (code, text) = run("validate", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("PASS ode_tail[1]"), "{text}");
    let table = std::fs::read_to_string(dir.path().join("out/validation.csv")).unwrap();
    assert!(table.starts_with("metric,level,points,max_deviation"));
    for name in ["mc_tails", "mc_wait", "pde_tails", "pde_wait", "pde_slices"] {
        assert!(dir.path().join(format!("out/{name}.csv")).exists(), "{name}");
    }
}

#[test]
fn empty_system_validates_with_zero_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let text = EXPONENTIAL.replace("rate = 0.5", "rate = 0.0").replace("jobs = 1", "jobs = 0");
    let cfg = write(dir.path(), "s.toml", &text);
    let (code, out) = run("validate", &cfg, &dir.path().join("out"), &["--tolerance", "0"]);
    assert_eq!(code, 0, "{out}");
    let table = std::fs::read_to_string(dir.path().join("out/validation.csv")).unwrap();
    for line in table.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3], "0", "{line}");
    }
}

#[test]
fn impossible_tolerance_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", EXPONENTIAL);
    // one replication has no standard error to hide behind
    let (code, out) = run("validate", &cfg, &dir.path().join("out"), &["--tolerance", "0", "--reps", "1"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("FAIL queue_tail"));
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", EXPONENTIAL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("simulate", &cfg, &a, &[]).0, 0);
    assert_eq!(run("simulate", &cfg, &b, &[]).0, 0);
    for name in ["mc_tails", "mc_wait", "mc_chaos", "mc_actual_wait"] {
        let f = format!("{name}.csv");
        assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{name}");
    }
    let c = dir.path().join("c");
    assert_eq!(run("simulate", &cfg, &c, &["--seed", "4"]).0, 0);
    assert_ne!(std::fs::read(a.join("mc_tails.csv")).unwrap(), std::fs::read(c.join("mc_tails.csv")).unwrap());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let no_seed = write(dir.path(), "a.toml", &EXPONENTIAL.replace("seed = 3\n", ""));
    let (code, text) = run("simulate", &no_seed, &out, &[]);
    assert_eq!(code, 2);
    assert!(text.contains("mc.seed"), "{text}");
    // the flag supplies the missing seed
    assert_eq!(run("simulate", &no_seed, &out, &["--seed", "1", "--reps", "2"]).0, 0);
    let unknown = write(dir.path(), "b.toml", &EXPONENTIAL.replace("[pde]", "[pde]\nfoo = 1"));
    assert_eq!(run("solve-pde", &unknown, &out, &[]).0, 2);
    assert_eq!(run("solve-pde", &dir.path().join("missing.toml"), &out, &[]).0, 2);
    let no_ctmc = write(dir.path(), "c.toml", EXPONENTIAL);
    assert_eq!(run("oracle-ctmc", &no_ctmc, &out, &[]).0, 2);
}

#[test]
fn instability_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // λδ > 1 overfills the first row in one step
    let text = EXPONENTIAL
        .replace("rate = 0.5", "rate = 3.0")
        .replace("jobs = 1", "jobs = 0")
        .replace("delta = 0.005", "delta = 0.5");
    let cfg = write(dir.path(), "s.toml", &text);
    let (code, out) = run("solve-pde", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code, 3, "{out}");
}

#[test]
fn solve_pde_writes_slices_at_output_times() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", EXPONENTIAL);
    assert_eq!(run("solve-pde", &cfg, &dir.path().join("out"), &[]).0, 0);
    let tails = std::fs::read_to_string(dir.path().join("out/pde_tails.csv")).unwrap();
    let times: Vec<&str> = tails.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(times, ["0", "0.5", "1", "1.5", "2"]);
    let slices = std::fs::read_to_string(dir.path().join("out/pde_slices.csv")).unwrap();
    // 8 levels × 2401 points at t = 1
    assert_eq!(slices.lines().count(), 1 + 8 * 2401);
}

#[test]
fn ctmc_oracle_writes_marginals() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{EXPONENTIAL}\n[ctmc]\nservers = 2\nrate = 0.5\ncap = 20\ninitial = [1, 1]\ntimes = [1.0, 5.0]\n");
    let cfg = write(dir.path(), "s.toml", &text);
    assert_eq!(run("oracle-ctmc", &cfg, &dir.path().join("out"), &[]).0, 0);
    let f = std::fs::read_to_string(dir.path().join("out/ctmc_fractions.csv")).unwrap();
    assert_eq!(f.lines().count(), 1 + 2 * 20);
}

#[test]
fn effective_rate_of_a_flat_profile_is_its_mean() {
    let dir = tempfile::tempdir().unwrap();
    let text = EXPONENTIAL
        .replace("kind = \"constant\"\nrate = 0.5", "kind = \"periodic\"\nmean = 0.7\ndelta = 0.0\nperiod = 2.0")
        .replace("delta = 0.005", "delta = 0.02")
        .replace("record_step = 0.5", "")
        .replace("output_times = [1.0]", "");
    let cfg = write(dir.path(), "s.toml", &text);
    let (code, out) = run("effective-rate", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code, 0, "{out}");
    let t = std::fs::read_to_string(dir.path().join("out/effective_rate.csv")).unwrap();
    let row: Vec<&str> = t.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4], "0.7");
}

#[test]
fn backlog_scenario_orders_relaxation_times() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[arrival]
kind = "constant"
rate = 0.6

[service]
family = "lomax"
shape = 2.5

[pde]
levels = 12
r_max = 20.0
delta = 0.01
horizon = 20.0

[backlog]
history = [{ duration = 10.0, rate = 0.6 }, { duration = 2.0, rate = 5.0 }]
nominal_rate = 0.6
horizon = 20.0
families = [{ family = "lomax", shape = 1.25 }, { family = "lomax", shape = 2.5 }]
"#;
    let cfg = write(dir.path(), "s.toml", text);
    let (code, out) = run("scenario-backlog", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code, 0, "{out}");
    let t = std::fs::read_to_string(dir.path().join("out/relaxation.csv")).unwrap();
    let relax: Vec<f64> = t.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(relax[0] < relax[1], "{relax:?}");
}
