use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use feddg_cli::{read_results, RESOLVED_CONFIG_FILE};
use serde_json::{json, Value};

const FILES: [&str; 4] = [
    "results.json",
    "rounds.csv",
    "heterogeneity.csv",
    "resolved-config.json",
];

fn feddg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feddg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(strategy: Value) -> Value {
    json!({
        "seed": 5,
        "dataset": { "kind": "synthetic", "num_classes": 3, "side": 8, "samples_per_class": 30 },
        "angles_deg": [0, 20, 40],
        "ood_angle_deg": 60,
        "augmentation": { "kind": "random_rotation", "alpha_deg": 20 },
        "strategy": strategy,
        "model": { "input_dim": 64, "hidden_dims": [8], "num_classes": 3 },
        "eval_every_rounds": 2
    })
}

fn fedavg() -> Value {
    json!({ "kind": "fedavg", "rounds": 3, "local_steps": 4, "batch_size": 8, "lr_theta": 0.01 })
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = extra.to_vec();
    args.extend([
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    feddg(&args)
}

fn assert_same_files(a: &Path, b: &Path) {
    for f in FILES {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        if f == RESOLVED_CONFIG_FILE {
            continue;
        }
        assert!(x == y, "{f} differs between {} and {}", a.display(), b.display());
    }
}

#[test]
fn run_writes_all_outputs_and_reproduces_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small_config(fedavg()));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let out = run(&cfg, &a, &["--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fedavg rotation(20)"));
    for f in FILES {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    assert!(run(&cfg, &b, &["--threads", "2"]).status.success());
    assert_same_files(&a, &b);

    // The resolved config is a complete config on its own.
    assert!(run(&a.join(RESOLVED_CONFIG_FILE), &c, &[]).status.success());
    assert_same_files(&a, &c);

    let result = read_results(&a).unwrap();
    assert_eq!(result.records.len(), 3);
    assert_eq!(result.num_clients, 3);
    let evaluated: Vec<usize> = result
        .records
        .iter()
        .filter(|r| r.ood_accuracy.is_some())
        .map(|r| r.round)
        .collect();
    assert_eq!(evaluated, vec![2, 3]);
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small_config(fedavg()));
    assert!(run(&cfg, &tmp.path().join("a"), &[]).status.success());
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--seed", "6", "--out"];
    let b = tmp.path().join("b");
    args.push(b.to_str().unwrap());
    assert!(feddg(&args).status.success());
    let ra = read_results(&tmp.path().join("a")).unwrap();
    let rb = read_results(&b).unwrap();
    assert_eq!(rb.seed, 6);
    assert_ne!(ra.records, rb.records);
}

#[test]
fn every_strategy_runs_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, kind) in ["fedavg", "afl", "gen_afl", "vm", "fed_irm", "fedprox", "centralized"]
        .iter()
        .enumerate()
    {
        let mut s = fedavg();
        s["kind"] = json!(kind);
        s["lambda_min"] = json!(-0.5);
        if *kind == "fedprox" {
            s["optimizer"] = json!("sgd");
        }
        let cfg = write_config(tmp.path(), &format!("{i}.json"), &small_config(s));
        let out = run(&cfg, &tmp.path().join(kind), &[]);
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let r = read_results(&tmp.path().join(kind)).unwrap();
        assert_eq!(r.strategy, *kind);
        assert!(r.final_summary.ood_accuracy >= 0.0 && r.final_summary.ood_accuracy <= 1.0);
    }
}

#[test]
fn config_errors_exit_with_2_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();

    let mut s = fedavg();
    s["kind"] = json!("gen_afl");
    s["lambda_min"] = json!(0.9);
    let cfg = write_config(tmp.path(), "lam.json", &small_config(s));
    let out = run(&cfg, &tmp.path().join("x"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda_min must be < 1/n"));
    assert!(!tmp.path().join("x").exists());

    let mut typo = small_config(fedavg());
    typo["strategy"]["lamda_min"] = json!(0.1);
    let cfg = write_config(tmp.path(), "typo.json", &typo);
    let out = run(&cfg, &tmp.path().join("y"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("strategy") && err.contains("lamda_min"), "{err}");

    let mut rot = small_config(fedavg());
    rot["augmentation"]["alpha_deg"] = json!(-3);
    let cfg = write_config(tmp.path(), "rot.json", &rot);
    assert_eq!(run(&cfg, &tmp.path().join("z"), &[]).status.code(), Some(2));

    assert_eq!(
        feddg(&["run", "--config", "/nonexistent/c.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        feddg(&["--threads", "0", "analyze", "--tv-dirac", "0", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(feddg(&["bogus"]).status.code(), Some(2));
}

#[test]
fn tv_queries_print_closed_forms() {
    let stdout = |args: &[&str]| {
        let out = feddg(args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    assert_eq!(stdout(&["analyze", "--tv-dirac", "0", "15"]).trim(), "2");
    assert_eq!(stdout(&["analyze", "--tv-dirac", "15", "15"]).trim(), "0");
    assert_eq!(stdout(&["analyze", "--tv-uniform", "0", "15", "30"]).trim(), "0.5");
    assert_eq!(stdout(&["analyze", "--tv-uniform", "0", "15", "7.5"]).trim(), "2");
    let both = stdout(&["analyze", "--tv-uniform", "0", "15", "30", "--tv-dirac", "-5", "5"]);
    assert_eq!(both.lines().collect::<Vec<_>>(), vec!["2", "0.5"]);
    assert_eq!(
        feddg(&["analyze", "--tv-uniform", "0", "15", "-1"]).status.code(),
        Some(2)
    );
    assert_eq!(feddg(&["analyze"]).status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_point_and_analyze_groups_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = json!({
        "base": small_config(fedavg()),
        "axes": [
            { "path": "augmentation", "values": [{ "kind": "none" }, { "kind": "random_rotation", "alpha_deg": 30 }] },
            { "path": "seed", "values": [1, 2] }
        ]
    });
    let cfg = write_config(tmp.path(), "sweep.json", &sweep);
    let out_dir = tmp.path().join("sw");
    let out = feddg(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.lines().skip(1).all(|l| l.contains(",ok,")));
    for i in 0..4 {
        assert!(out_dir.join(format!("point-{i:03}")).join("results.json").is_file());
    }

    let out = feddg(&["analyze", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(
        table.lines().skip(1).all(|l| l.split(',').nth(4) == Some("2")),
        "{table}"
    );
    assert!(out_dir.join("ood_vs_augmentation.csv").is_file());
    let out = feddg(&["analyze", out_dir.to_str().unwrap(), "--table", "heterogeneity"]);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("strategy,augmentation,rounds,local_steps,runs,grad_sq_norm_mean"));
}

#[test]
fn sweep_with_a_failing_point_exits_with_4() {
    let tmp = tempfile::tempdir().unwrap();
    let mut base = small_config(fedavg());
    base["strategy"]["kind"] = json!("gen_afl");
    let sweep = json!({
        "base": base,
        "axes": [{ "path": "strategy.lambda_min", "values": [-0.5, 0.9] }]
    });
    let cfg = write_config(tmp.path(), "sweep.json", &sweep);
    let out_dir = tmp.path().join("sw");
    let out = feddg(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",ok,"));
    assert!(rows[1].contains(",failed,") && rows[1].contains("lambda_min must be < 1/n"));
}

#[test]
fn gap_of_a_run_against_itself_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let mut s = fedavg();
    s["kind"] = json!("centralized");
    let cfg = write_config(tmp.path(), "c.json", &small_config(s));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&cfg, &a, &[]).status.success());
    assert!(run(&cfg, &b, &[]).status.success());
    let out = feddg(&["analyze", a.to_str().unwrap(), "--gap", b.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",0")), "{text}");
    assert!(a.join("gap.csv").is_file());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let text = std::fs::read_to_string(&path).unwrap();
        if name.starts_with("sweep-") {
            let sweep: feddg_cli::SweepConfig = feddg_cli::parse_json(&text).unwrap();
            sweep.expand().unwrap_or_else(|e| panic!("{name}: {e}"));
        } else {
            let cfg: feddg_cli::ExperimentConfig = feddg_cli::parse_json(&text).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        seen += 1;
    }
    assert!(seen >= 5);
}
