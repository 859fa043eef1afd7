use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynbandit::action_space::ActionSet;
use dynbandit::fixtures::SystemFixture;
use dynbandit::harness::output::read_aggregate;
use dynbandit::lti_env::SimState;
use dynbandit::sysid;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynbandit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn small_config(dir: &Path, system: &str) -> PathBuf {
    let path = dir.join("cfg.json");
    let text = format!(
        r#"{{
            "schema": 1,
            "system": {system},
            "sigma": 0.01,
            "actions": {{"kind": "budget_box", "d": 3, "budget": 1.5}},
            "policies": [{{"name": "dynlin_ucb", "rho_bar": 0.2}}, {{"name": "exp3"}}],
            "horizon": 200,
            "seeds": [1, 2]
        }}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_csvs_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        "--config",
        repo_config("synthetic.json").to_str().unwrap(),
        "--override",
        "horizon=300",
        "--seeds",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_aggregate(out.join("aggregate.csv")).unwrap();
    assert!(rows.iter().all(|r| r.checkpoint <= 300 && r.n_seeds == 2));
    assert!(rows.iter().any(|r| r.policy == "linucb" && r.checkpoint == 300));
    let text = std::fs::read_to_string(out.join("traces.csv")).unwrap();
    assert!(text.starts_with("policy,seed,checkpoint,online_regret,offline_regret,chosen_action_json"));
    assert!(out.join("config.json").exists());
}

#[test]
fn sweep_emits_one_block_per_rho_bar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#"{"kind": "fixture", "name": "synthetic"}"#);
    for (rhos, expected) in [(None, 5usize), (Some("0.3"), 1), (Some("0,0.5,0.9"), 3)] {
        let out = dir.path().join(format!("sweep{expected}"));
        let mut args = vec!["sweep-rho", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        if let Some(r) = rhos {
            args.extend(["--rho-bars", r]);
        }
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        let rows = read_aggregate(out.join("aggregate.csv")).unwrap();
        let mut policies: Vec<String> = rows.iter().map(|r| r.policy.clone()).collect();
        policies.dedup();
        assert_eq!(policies.len(), expected, "{policies:?}");
        assert!(policies.iter().all(|p| p.starts_with("dynlin_ucb(rho_bar=")));
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "--config", "/no/such/config.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/config.json"));

    let cfg = small_config(dir.path(), r#"{"kind": "file", "path": "/no/such/fixture.json"}"#);
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/fixture.json"), "{}", stderr(&o));

    let cfg = small_config(dir.path(), r#"{"kind": "fixture", "name": "synthetic"}"#);
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--override", "horizonn=5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("horizonn"), "{}", stderr(&o));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"schema\": 1,\n  oops\n}").unwrap();
    let o = run(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = run(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_reports_both_parameter_sources() {
    let cfg = repo_config("synthetic.json");
    let o = run(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["optimal_action"], serde_json::json!([0.5, 1.0, 0.0]));

    let o = run(&["oracle", "--config", cfg.to_str().unwrap(), "--override", "use_stated_h=true"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["optimal_action"], serde_json::json!([1.0, 0.5, 0.0]));
    assert!((v["optimal_value"].as_f64().unwrap() - 0.81).abs() < 1e-12);
}

#[test]
fn sysid_round_trip_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sys = SystemFixture::builtin("advertising").unwrap().system.with_sigma(0.0).unwrap();
    let set = ActionSet::budget_box(3, 1.5).unwrap();
    let traj = sysid::simulate_trajectory(&sys, &set, 20_000, 2).unwrap();
    let csv = dir.path().join("traj.csv");
    traj.write_csv(&csv).unwrap();
    let out = dir.path().join("model.json");
    let o = run(&[
        "sysid",
        "--trajectory",
        csv.to_str().unwrap(),
        "--order",
        "3",
        "--history",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model: sysid::IdentifiedModel = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let h = sys.cumulative_markov().unwrap();
    let err: f64 = model.h.iter().zip(h.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(err < 1e-3, "{err}");
    assert_eq!(model.order, 3);
    assert_eq!(model.singular_values.len(), 10);

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["sysid", "--trajectory", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "t,u_1,y_1\n1,0.5,0.1\n2,0.5\n").unwrap();
    let o = run(&["sysid", "--trajectory", ragged.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let short = dir.path().join("short.csv");
    std::fs::write(&short, "t,u_1,y_1\n1,0.5,0.1\n2,0.5,0.2\n").unwrap();
    let o = run(&["sysid", "--trajectory", short.to_str().unwrap(), "--history", "4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn make_instance_writes_reloadable_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 4] = [
        ("hard", &["--rho", "0.5", "--eps", "0.1", "--signs", "1,-1,1"]),
        ("delayed", &["--mu", "0.2,0.9", "--tau", "3"]),
        ("composite", &["--mu", "0.2,0.9", "--weights", "0.5,0.5"]),
        ("ar1", &["--mu", "0.2,0.9", "--gamma", "0.5"]),
    ];
    for (kind, params) in cases {
        let out = dir.path().join(format!("{kind}.json"));
        let mut args = vec!["make-instance", kind];
        args.extend_from_slice(params);
        args.extend(["--out", out.to_str().unwrap()]);
        let o = run(&args);
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
        let f = SystemFixture::load(&out).unwrap();
        assert_eq!(SystemFixture::from_json(&f.to_json().unwrap()).unwrap(), f);
        let sys = &f.system;
        let mut st = SimState::new(sys, 0);
        let basis = ActionSet::canonical_basis(sys.action_dim()).unwrap();
        let u = basis.get(0);
        assert_eq!(sys.step(&mut st, u).unwrap(), sys.theta()[0]);
    }
    let o = run(&["make-instance", "ar1", "--mu", "1", "--gamma", "1.5", "--out", "/tmp/never.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["make-instance", "hard", "--rho", "0.5", "--eps", "0.9", "--signs", "1", "--out", "/tmp/never.json"]);
    assert_eq!(o.status.code(), Some(2));
}
