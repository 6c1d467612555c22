use std::path::Path;
use std::process::{Command, Output};

use nlho_core::config::ExperimentConfig;
use tempfile::TempDir;

fn nlho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlho")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small problem that runs in seconds.
const SMALL: &str = "n_modes = 24\nquad_order = 96\nm_list = [40.0, 80.0]\ns_end = 2000.0\nn_phases = 8\n";

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, format!("{SMALL}output_dir = {:?}\n", dir.display().to_string())).unwrap();
    path.display().to_string()
}

#[test]
fn print_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let first = nlho(&["print-config"]);
    assert!(first.status.success());
    let path = dir.path().join("c.toml");
    std::fs::write(&path, &first.stdout).unwrap();
    let second = nlho(&["--config", path.to_str().unwrap(), "print-config"]);
    assert_eq!(first.stdout, second.stdout);
    let cfg = ExperimentConfig::from_toml(&String::from_utf8(first.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}

#[test]
fn locked_constants_reload_identically() {
    let dir = TempDir::new().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.locked_constants.b = Some(4.816_618_055_959_582);
    cfg.locked_constants.c_prime = Some(1.373e-4);
    cfg.locked_constants.phase = Some(23);
    let path = dir.path().join("locked.toml");
    cfg.save(&path).unwrap();
    let out = nlho(&["--config", path.to_str().unwrap(), "print-config"]);
    let back = ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(back.locked_constants, cfg.locked_constants);
}

#[test]
fn lambda_two_has_no_soliton() {
    let dir = TempDir::new().unwrap();
    let o = nlho(&["--output", dir.path().to_str().unwrap(), "--epsilon", "0", "soliton"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no nontrivial soliton"), "{}", stderr(&o));
}

#[test]
fn missing_output_dir_is_config_error() {
    let o = nlho(&["--output", "/nonexistent/nlho-out", "soliton"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not exist"));
}

#[test]
fn growth_names_missing_dependency() {
    let dir = TempDir::new().unwrap();
    let o = nlho(&["--output", dir.path().to_str().unwrap(), "growth"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nlho trajectory"), "{}", stderr(&o));
}

#[test]
fn single_terminal_time_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("one.toml");
    std::fs::write(&path, "m_list = [400.0]\n").unwrap();
    let o = nlho(&["--config", path.to_str().unwrap(), "--output", dir.path().to_str().unwrap(), "evolve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Cauchy needs ≥ 2 runs"));
}

#[test]
fn soliton_csv_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = nlho(&["--output", d.path().to_str().unwrap(), "--n-modes", "32", "soliton"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["soliton_profile.csv", "soliton_coeffs.csv", "bifurcation.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let head = std::fs::read_to_string(a.path().join("bifurcation.csv")).unwrap();
    assert!(head.starts_with("epsilon,l2_norm,"));
}

#[test]
fn zero_soliton_spectrum_is_exact() {
    let dir = TempDir::new().unwrap();
    let o = nlho(&["--output", dir.path().to_str().unwrap(), "--n-modes", "32", "spectrum", "--zero-soliton"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,lambda_p,lambda_m,mu,gap_to_4n"));
    for line in lines {
        let gap: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(gap.abs() < 1e-10, "{line}");
    }
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let run = |args: &[&str]| {
        let mut all = vec!["--config", cfg.as_str()];
        all.extend_from_slice(args);
        nlho(&all)
    };
    // Exit 1 is allowed: invariants calibrated for the default size may not hold at N = 24.
    for step in [&["--calibrate", "trajectory"][..], &["--calibrate", "evolve"][..]] {
        let o = run(step);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{step:?}: {}", stderr(&o));
    }
    for f in ["trajectory.csv", "trajectory.json", "samples_M40.csv", "ledger_M80.json", "w_limit.bin", "w_limit.json"]
    {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let ledger: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ledger_M40.json")).unwrap()).unwrap();
    for key in ["M", "s0", "B", "bound_stat", "l2_drift", "samples_path"] {
        assert!(ledger.get(key).is_some(), "{key}");
    }
    let o = run(&["growth"]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("growth.json")).unwrap()).unwrap();
    for key in ["ratio_band", "growth_certified", "v_decay_certified"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    let header = std::fs::read_to_string(dir.path().join("growth.csv")).unwrap();
    assert!(header.starts_with("t,s,L,b,E,norm_u_hx1,norm_u0_hx1,norm_u1_hx1,ratio\n"));

    // Locked constants reload and drive a regression run with the same verdict.
    let locked = dir.path().join("config.locked.toml");
    let l = ExperimentConfig::load(&locked).unwrap().locked_constants;
    assert!(l.b.is_some() && l.c_prime.is_some() && l.phase.is_some());
    let o = nlho(&["--config", locked.to_str().unwrap(), "trajectory"]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));

    // Horizon beyond the trajectory.
    let far = dir.path().join("far.toml");
    std::fs::write(&far, format!("{SMALL}t_max = 1e9\noutput_dir = {:?}\n", dir.path().display().to_string())).unwrap();
    let o = nlho(&["--config", far.to_str().unwrap(), "growth"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("outside the sampled range"), "{}", stderr(&o));
}
