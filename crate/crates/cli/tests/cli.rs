use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn visolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_visolve"))
        .args(args)
        .env_remove("VISOLVE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn reproduce_writes_documented_files() {
    let dir = tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = visolve(&["reproduce", "fig2-b", "--out", out, "--iters", "50", "--seeds", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        first_line(&dir.path().join("fig2-b_runs.csv")),
        "method,seed,k,dist_sq_u,dist_sq_h,alpha"
    );
    assert_eq!(
        first_line(&dir.path().join("fig2-b_summary.csv")),
        "method,k,mean_dist_sq,std_dist_sq"
    );
    assert!(dir.path().join("fig2-b_meta.json").exists());
}

#[test]
fn check_certifies_example1() {
    let o = visolve(&["check", "example1", "--p", "2", "--mu", "0.5", "--samples", "10000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("quasi-sharpness: certified-at-samples"), "{text}");
    assert!(text.contains("linear growth (declared): certified-at-samples"), "{text}");
    assert!(text.contains("monotonicity: violated"), "{text}");
}

#[test]
fn missing_config_exits_with_one() {
    let o = visolve(&["run", "--config", "missing.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.toml"));
}

#[test]
fn malformed_config_reports_the_field() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "name = \"bad\"\niterations = 10\nn_seeds = 1\n\n[operator]\nfamily = \"example1\"\np = 2.0\n\n[[methods]]\nmethod = \"popov\"\nschedule = { kind = \"constant\", alfa = 0.1 }\n",
    )
    .unwrap();
    let o = visolve(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("alpha") && err.contains("line"), "{err}");
}

#[test]
fn all_runs_diverging_exits_with_two() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("blowup.toml");
    std::fs::write(
        &path,
        "name = \"blowup\"\niterations = 200\nn_seeds = 2\nu0 = [3.0, 1.0]\n\n[operator]\nfamily = \"example1\"\np = 2.0\n\n[[methods]]\nmethod = \"projection\"\nschedule = { kind = \"constant\", alpha = 50.0 }\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = visolve(&["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(out.join("blowup_runs.csv").exists());
}

#[test]
fn run_overrides_seeds_and_iterations() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(
        &path,
        "name = \"exp\"\niterations = 1000\nn_seeds = 9\n\n[operator]\nfamily = \"example1\"\np = 1.5\nnoise_var = 0.5\n\n[[methods]]\nmethod = \"popov\"\nschedule = { kind = \"switching\", a = 0.7, d = 7.0 }\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = visolve(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "2",
        "--iters",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = std::fs::read_to_string(out.join("exp_runs.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 4);
}

#[test]
fn bounds_emits_csv() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "mu = 1.0\nL = 1.0\nsigma_sq = 0.0\nr_1 = 1.0\n").unwrap();
    let o = visolve(&["bounds", "thm4", "--constants", path.to_str().unwrap(), "--k-max", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theorem,K,bound");
    assert_eq!(lines.len(), 10);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&first[..2], ["thm4", "2"]);
    let v: f64 = first[2].parse().unwrap();
    assert!((v - 95.95).abs() < 0.01);

    let o = visolve(&["bounds", "thm2", "--constants", path.to_str().unwrap(), "--k-max", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`C`"));

    std::fs::write(&path, "mu = 1.0\nLL = 1.0\n").unwrap();
    let o = visolve(&["bounds", "thm4", "--constants", path.to_str().unwrap(), "--k-max", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn thread_settings_do_not_change_output() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let base = ["reproduce", "example-p", "--iters", "300", "--seeds", "5", "--out"];
    let mut args_a = base.to_vec();
    args_a.push(a.to_str().unwrap());
    args_a.push("--deterministic-order");
    let o = visolve(&args_a);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut args_b = base.to_vec();
    args_b.push(b.to_str().unwrap());
    let o = Command::new(env!("CARGO_BIN_EXE_visolve"))
        .args(&args_b)
        .env("VISOLVE_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["example-p_runs.csv", "example-p_summary.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }

    let o = Command::new(env!("CARGO_BIN_EXE_visolve"))
        .args(["reproduce", "fig3", "--iters", "5", "--seeds", "1", "--out", a.to_str().unwrap()])
        .env("VISOLVE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_preset_and_operator_exit_with_one() {
    assert_eq!(visolve(&["reproduce", "fig7"]).status.code(), Some(1));
    assert_eq!(visolve(&["check", "nonsense"]).status.code(), Some(1));
    assert_eq!(visolve(&["check", "example1"]).status.code(), Some(1));
}
