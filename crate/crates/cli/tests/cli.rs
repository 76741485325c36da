use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use impulse_sir::scenario::parse_scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_impulse-sir"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TOY: &str = r#"
name = "toy"

[run]
horizon = 2.0
step = 0.01
classes = [4]

[initial]
s = 0.4
i1 = 0.3
i2 = 0.2

[epidemic]
delta1 = 0.1875
delta2 = 0.25
sigma1 = 0.25
sigma2 = 0.2

[costs]
a1 = 5.0
a2 = 7.5
b1 = 10.0
b2 = 25.0
g_coeff = 0.25

[schedule]
events = [{ strain = 1, k = 4, tau = 1.0, c = 0.05, u_bar = 0.5 }]
"#;

fn read_series(path: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut it = l.split_whitespace().map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect()
}

#[test]
fn simulate_prints_cost_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--preset", "case1", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("case1 simulate: J = 105.2"), "{text}");
    assert!(text.contains("k = 4: p1 = 38, p2 = 44"), "{text}");
    let traj = fs::read_to_string(dir.path().join("res/case1_simulate_trajectory.csv")).unwrap();
    assert!(traj.starts_with("time,k,S,I1,I2,R,jump_flag,strain,applied_intensity\n"));
    let cost = fs::read_to_string(dir.path().join("res/case1_simulate_cost.csv")).unwrap();
    assert!(cost.starts_with("time,cumulative_J\n"));
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = run(&["simulate", "--preset", "case2", "--out", out, "--seed", "9"], dir.path());
        assert!(o.status.success());
    }
    for file in ["case2_simulate_trajectory.csv", "case2_simulate_cost.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(file)).unwrap(),
            fs::read(dir.path().join("b").join(file)).unwrap()
        );
    }
}

#[test]
fn disease_free_start_costs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TOY
        .replace("s = 0.4\ni1 = 0.3\ni2 = 0.2", "s = 1.0\ni1 = 0.0\ni2 = 0.0")
        .replace("g_coeff = 0.25", "g_coeff = 0.0")
        .replace("events = [{ strain = 1, k = 4, tau = 1.0, c = 0.05, u_bar = 0.5 }]", "events = []");
    fs::write(dir.path().join("free.toml"), cfg).unwrap();
    let o = run(&["simulate", "--config", "free.toml", "--out", "."], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("toy simulate: J = 0\n"), "{text}");
    assert!(text.contains("p1 = 0, p2 = 0"), "{text}");
}

#[test]
fn unknown_key_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), TOY.replace("[run]", "[run]\nhorizn = 3.0")).unwrap();
    let o = run(&["simulate", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("horizn"), "{}", stderr(&o));
}

#[test]
fn constraint_violation_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), TOY.replace("classes = [4]", "classes = [2]")).unwrap();
    let o = run(&["evaluate", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.classes"), "{}", stderr(&o));
}

#[test]
fn io_failures_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--config", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    fs::write(dir.path().join("blocker"), "").unwrap();
    let o = run(&["simulate", "--preset", "case1", "--out", "blocker/sub"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn plot_files_conserve_mass_and_show_both_jump_sides() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["simulate", "--preset", "case1", "--out", "."], dir.path()).status.success());
    let o = run(&["plot-data", "--input", "case1_simulate_trajectory.csv", "--out", "plots"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let p = dir.path().join("plots");
    let series: Vec<Vec<(f64, f64)>> = ["S", "I1", "I2", "R"]
        .iter()
        .map(|c| read_series(&p.join(format!("case1_simulate_k4_{c}.dat"))))
        .collect();
    let n = series[0].len();
    assert!(series.iter().all(|s| s.len() == n));
    for i in 0..n {
        let total: f64 = series.iter().map(|s| s[i].1).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    // the first inspection at t = 2 treats both strains
    let at_two: Vec<f64> = series[1].iter().filter(|(t, _)| *t == 2.0).map(|(_, v)| *v).collect();
    assert_eq!(at_two.len(), 2);
    assert!(at_two[1] < at_two[0]);
    let j = read_series(&p.join("case1_simulate_J.dat"));
    assert_eq!(j.len(), n);
}

#[test]
fn empty_trajectory_gives_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e_trajectory.csv"), "").unwrap();
    fs::write(dir.path().join("e_cost.csv"), "time,cumulative_J\n").unwrap();
    let o = run(&["plot-data", "--input", "e_trajectory.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("e_J.dat")).unwrap(), "");
}

#[test]
fn malformed_row_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("m.csv"),
        "time,k,S,I1,I2,R,jump_flag,strain,applied_intensity\n0,4,0.4,0.3,0.2,0.1,0,0,0\n0.1,4,x,0.3,0.2,0.1,0,0,0\n",
    )
    .unwrap();
    let o = run(&["plot-data", "--input", "m.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
    assert!(stderr(&o).contains("`S`"), "{}", stderr(&o));
}

#[test]
fn optimized_time_matches_grid_search() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.toml"), TOY).unwrap();
    let o = run(&["optimize-times", "--config", "toy.toml", "--out", "."], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let schedule = fs::read_to_string(dir.path().join("toy_optimize-times_schedule.csv")).unwrap();
    let row: Vec<&str> = schedule.lines().nth(1).unwrap().split(',').collect();
    let tau: f64 = row[2].parse().unwrap();

    let cfg = parse_scenario(TOY).unwrap();
    let problem = cfg.to_problem().unwrap();
    let mut sched = cfg.resolve_schedule(&problem).unwrap();
    let (mut best, mut best_tau) = (f64::INFINITY, 0.0);
    for i in 1..=1000 {
        sched.events[0].tau = 2.0 * i as f64 / 1001.0;
        let j = problem.objective(&sched).unwrap();
        if j < best {
            (best, best_tau) = (j, sched.events[0].tau);
        }
    }
    assert!((tau - best_tau).abs() <= 2.0 * cfg.optimizer.tol_tau, "{tau} vs {best_tau}");

    let report = fs::read_to_string(dir.path().join("toy_optimize-times_report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().contains("interior_stationary"), "{report}");
}

#[test]
fn optimizer_rerun_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.toml"), TOY).unwrap();
    let files = ["schedule.csv", "report.csv", "summary.csv", "scenario.toml"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = run(&["optimize-intensities", "--config", "toy.toml", "--out", "a"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let bytes: Vec<Vec<u8>> = files
            .iter()
            .map(|f| fs::read(dir.path().join(format!("a/toy_optimize-intensities_{f}"))).unwrap())
            .collect();
        runs.push(bytes);
    }
    assert_eq!(runs[0], runs[1]);
    // the written scenario is itself a valid input
    let o = run(
        &["simulate", "--config", "a/toy_optimize-intensities_scenario.toml", "--out", "c"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn non_convergence_exits_with_three_and_keeps_the_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.toml"), format!("{TOY}\n[optimizer]\nmax_sweeps = 1\n")).unwrap();
    let o = run(&["optimize-times", "--config", "toy.toml", "--out", "."], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(dir.path().join("toy_optimize-times_report.csv").exists());
    assert!(dir.path().join("toy_optimize-times_summary.csv").exists());
}

#[test]
fn summation_override_simulates_the_whole_support() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.toml"), TOY.replace("[run]", "[network]\nk_max = 6\n\n[run]")).unwrap();
    let o = run(&["simulate", "--config", "toy.toml", "--theta-mode", "summation", "--out", "."], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = fs::read_to_string(dir.path().join("toy_simulate_trajectory.csv")).unwrap();
    let ks: std::collections::BTreeSet<&str> = traj.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ks.into_iter().collect::<Vec<_>>(), ["4", "5", "6"]);
}
