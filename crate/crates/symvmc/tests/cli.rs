use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use symvmc::config::{BaselineConfig, ExperimentConfig, SubsetSelector};
use tempfile::TempDir;

const WELL: &str = r#"
seed = 5

[system]
lattice = "chain"
scale = 6.283185307179586
atoms = [[0.0]]
depth = 0.5
width = 0.8
n_up = 2

[group]
name = "chain-reflection"

[ansatz]
cutoff = 2
noise = 0.1

[sampler]
batch = 32
burn_in = 20

[training]
steps = 4
lr = 0.02
checkpoint_every = 2

[evaluation]
chains = 2
samples_per_chain = 100
thin = 2
burn_in = 20

[stats]
replicates = 2
batches = [8]

[probe]
epsilons = [0.1, 0.05]
scan_points = 200

[scan]
resolution = 11
seeds = [[0.2]]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symvmc"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).arg("--quiet").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn free_chain_oracle_spectrum() {
    let dir = TempDir::new().unwrap();
    let text = "seed = 1\n[system]\nlattice = \"chain\"\nscale = 6.283185307179586\nn_up = 1\n\
                [group]\nname = \"chain-reflection\"\n[ansatz]\ncutoff = 3\n";
    let cfg = write_config(dir.path(), "free.toml", text);
    let o = run(&["oracle"], &cfg, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&dir.path().join("reports/oracle.json"));
    let ev: Vec<f64> = v["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (a, b) in ev.iter().zip([0.0, 0.5, 0.5, 2.0, 2.0]) {
        assert!((a - b).abs() < 1e-10, "{ev:?}");
    }
}

#[test]
fn oracle_refuses_interacting_system() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &WELL.replace("n_up = 2", "n_up = 2\ninteraction = 0.3"));
    let o = run(&["oracle"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("oracle requires non-interacting"), "{}", stderr(&o));
}

#[test]
fn malformed_config_names_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &WELL.replace("burn_in = 20\n\n[training]", "burnin = 20\n\n[training]"));
    let o = run(&["oracle"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("burnin"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "d.toml", &WELL.replace("scale = 6.283185307179586", "scale = \"big\""));
    let o = run(&["oracle"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scale"), "{}", stderr(&o));
}

#[test]
fn config_round_trips_through_both_formats() {
    let mut c = ExperimentConfig::from_toml(WELL).unwrap();
    for (subset, baseline) in [
        (SubsetSelector::Named("full".into()), BaselineConfig::Named("batch-mean".into())),
        (SubsetSelector::Indices(vec![0]), BaselineConfig::Fixed(-1.5)),
    ] {
        c.method.subset = subset;
        c.sampler.baseline = baseline;
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
        assert_eq!(ExperimentConfig::parse(&c.to_json()).unwrap(), c);
    }
}

#[test]
fn zero_steps_writes_only_the_initial_checkpoint() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &WELL.replace("steps = 4", "steps = 0"));
    let out = dir.path().join("run");
    let o = run(&["train"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> =
        fs::read_dir(out.join("checkpoints")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["step_0.bin", "step_0.json"]);
    assert!(out.join("config.json").exists());
    assert!(!out.join("timings.csv").exists());
}

#[test]
fn training_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", WELL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["train"], &cfg, out);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["metrics.csv", "config.json", "checkpoints/step_2.bin", "checkpoints/step_4.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(!a.join("checkpoints/step_3.bin").exists());
    let rows = fs::read_to_string(a.join("metrics.csv")).unwrap().lines().count();
    assert_eq!(rows, 5);
}

#[test]
fn seed_flag_changes_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", WELL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&["train"], &cfg, &a);
    let o = bin().args(["train", "--quiet", "--seed", "99", "--config"]).arg(&cfg).arg("--out").arg(&b).output().unwrap();
    assert!(o.status.success());
    assert_ne!(fs::read(a.join("metrics.csv")).unwrap(), fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(json(&b.join("config.json"))["seed"], 99);
}

#[test]
fn pa_is_rejected_at_train_time() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", WELL);
    let o = bin().args(["train", "--method", "pa", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("inference-only"));
}

#[test]
fn divergence_keeps_partial_artifacts() {
    let dir = TempDir::new().unwrap();
    let text = WELL
        .replace("n_up = 2", "n_up = 2\nn_down = 1\ninteraction = 0.5")
        .replace("noise = 0.1", "noise = 0.1\njastrow = true")
        .replace("lr = 0.02", "lr = 1e6")
        .replace("steps = 4", "steps = 20");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let out = dir.path().join("run");
    let o = run(&["train"], &cfg, &out);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(out.join("checkpoints/step_0.bin").exists());
    assert!(fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count() >= 2);
}

#[test]
fn evaluate_identity_subset_matches_og() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("{WELL}\n[method]\nsubset = [0]\n"));
    for m in ["og", "pa"] {
        let o = bin().args(["evaluate", "--quiet", "--method", m, "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let og = json(&dir.path().join("reports/evaluate_og.json"));
    let pa = json(&dir.path().join("reports/evaluate_pa.json"));
    for key in ["energy", "stderr", "variance", "acceptance", "n_samples"] {
        assert_eq!(og[key], pa[key], "{key}");
    }
    assert_eq!(pa["var_pa_over_og"].as_f64().unwrap(), 0.0);
}

#[test]
fn evaluate_checkpoint_and_incompatible_checkpoint() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", WELL);
    let out = dir.path().join("run");
    assert!(run(&["train"], &cfg, &out).status.success());
    let ck = out.join("checkpoints/step_4.bin");
    let o = bin().args(["evaluate", "--quiet", "--config"]).arg(&cfg).arg("--out").arg(&out).arg("--checkpoint").arg(&ck).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(json(&out.join("reports/evaluate_og.json"))["energy"].as_f64().unwrap().is_finite());

    let other = write_config(dir.path(), "d.toml", &WELL.replace("cutoff = 2", "cutoff = 3"));
    let o = bin().args(["evaluate", "--config"]).arg(&other).arg("--out").arg(&out).arg("--checkpoint").arg(&ck).output().unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    fs::write(&ck, b"not a checkpoint").unwrap();
    let o = bin().args(["evaluate", "--config"]).arg(&cfg).arg("--out").arg(&out).arg("--checkpoint").arg(&ck).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn pc_with_wide_epsilon_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("{WELL}\n[method]\nmode = \"pc\"\nepsilon = 0.3\n"));
    let o = run(&["evaluate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("method.epsilon"));
}

#[test]
fn gradstats_with_two_replicates() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &WELL.replace("batch = 32", "batch = 8"));
    let o = run(&["gradstats"], &cfg, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&dir.path().join("reports/gradstats.json"));
    assert_eq!(v["methods"].as_array().unwrap().len(), 4);
}

#[test]
fn scan_under_trivial_group_is_flat() {
    let dir = TempDir::new().unwrap();
    let text = WELL.replace("name = \"chain-reflection\"", "generators = [{ rotation = [1], translation = [0.0] }]");
    let cfg = write_config(dir.path(), "c.toml", &text.replace("seeds = [[0.2]]", "positions = [0.1, 0.35]"));
    let o = run(&["scan"], &cfg, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&dir.path().join("scans/og.json"));
    assert_eq!(v["max_error"].as_f64().unwrap(), 0.0);
    let csv = fs::read_to_string(dir.path().join("scans/og.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t0,value,error");
    assert_eq!(rows.len(), 12);
    assert!(rows[1..].iter().all(|r| r.ends_with(",0")));
}

#[test]
fn scan_rejects_asymmetric_base() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &WELL.replace("seeds = [[0.2]]", "positions = [0.1, 0.35]"));
    let o = run(&["scan"], &cfg, dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("element"), "{}", stderr(&o));
}

#[test]
fn probe_smoothing_row_per_epsilon() {
    let dir = TempDir::new().unwrap();
    let text = WELL.replace("chain-reflection", "chain-half-translation").replace("n_up = 2", "n_up = 1");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let o = run(&["probe-smoothing"], &cfg, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(dir.path().join("reports/probe_smoothing.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    assert_eq!(&headers[0], "kind");
    assert_eq!(r.records().count(), 4);
}
