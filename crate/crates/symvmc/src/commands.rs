//! Subcommand implementations. Each takes a validated config and an output
//! directory and returns the report it wrote.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use symvmc_core::ansatz::{Ansatz, Wavefunction};
use symvmc_core::error::Error as CoreError;
use symvmc_core::groups::{Configuration, SpaceGroup};
use symvmc_core::metrics::{evaluate_metrics, var_pa_over_og};
use symvmc_core::oracle;
use symvmc_core::rng::{child_rng, child_seed, stream_seed, EVALUATION};
use symvmc_core::sampler::{random_configuration, sample_series};
use symvmc_core::scan::{lemma_defect, orbit_configuration, scan, symmetry_error};
use symvmc_core::stats::{
    blowup_probe, clt_check, electron_scan, lemma42_check, prop41_check, update_distribution, SamplingMode,
    UpdateFixture,
};
use symvmc_core::symmetrize::{GroupAveraged, SmoothedCanonical};
use symvmc_core::train::{StepRecord, Trainer};

use crate::checkpoint::{self, CheckpointMeta};
use crate::config::{ExperimentConfig, Mode, SamplingConfig};
use crate::error::{AppError, Result};

const PROBE_STREAM: &str = "probe";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let f = fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// Finite values as numbers, everything else as `null`.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Wavefunction a mode evaluates: the base ansatz, its average over the
/// configured subset, or its smoothed canonicalization.
pub fn wavefunction<'a>(
    cfg: &ExperimentConfig,
    mode: Mode,
    ansatz: &'a Ansatz,
    group: &SpaceGroup,
) -> Result<Box<dyn Wavefunction + 'a>> {
    Ok(match mode {
        Mode::Og | Mode::Da => Box::new(ansatz),
        Mode::Ga | Mode::Pa => Box::new(GroupAveraged::from_group(ansatz, group, &cfg.subset(group)?)?),
        Mode::Gas => Box::new(GroupAveraged::full(ansatz, group)?),
        Mode::Sc | Mode::Pc => Box::new(SmoothedCanonical::new(ansatz, group.clone(), cfg.region()?, cfg.smoothing()?)?),
    })
}

pub fn load_ansatz(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Ansatz> {
    match checkpoint {
        Some(p) => checkpoint::load(p, cfg),
        None => cfg.initial_ansatz(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub lattice: String,
    pub cutoff: u32,
    pub eigenvalues: Vec<f64>,
    pub ground_state_energy: f64,
    pub degenerate: bool,
}

pub fn oracle(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<OracleReport> {
    let h = cfg.hamiltonian()?;
    let (n_up, n_down) = (cfg.system.n_up, cfg.system.n_down);
    let levels = cfg.oracle.levels.max(n_up).max(n_down);
    let s = oracle::diagonalize(&h, cfg.oracle.cutoff, levels)?;
    let report = OracleReport {
        lattice: cfg.system.lattice.clone(),
        cutoff: s.cutoff,
        eigenvalues: s.eigenvalues.iter().take(levels).copied().collect(),
        ground_state_energy: oracle::ground_state_energy(&s, n_up, n_down)?,
        degenerate: oracle::is_degenerate(&s, n_up, n_down),
    };
    if let Some(dir) = out {
        write_json(&dir.join("reports").join("oracle.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: usize,
    pub final_energy: Option<f64>,
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Serialize)]
struct MetricsRow {
    step: usize,
    energy: f64,
    stderr: f64,
    variance: f64,
    acceptance: f64,
    lr: f64,
    node_resamples: usize,
    samp_evals: u64,
    grad_evals: u64,
}

impl From<&StepRecord> for MetricsRow {
    fn from(r: &StepRecord) -> Self {
        MetricsRow {
            step: r.step,
            energy: r.energy,
            stderr: r.stderr,
            variance: r.variance,
            acceptance: r.acceptance,
            lr: r.lr,
            node_resamples: r.node_resamples,
            samp_evals: r.samp_evals,
            grad_evals: r.grad_evals,
        }
    }
}

#[derive(Serialize)]
struct TimingRow {
    step: usize,
    samp_seconds: f64,
    grad_seconds: f64,
}

/// Trains from the initial ansatz, writing `config.json`, `metrics.csv`
/// and checkpoints into `out`. Rows and checkpoints written before a
/// divergence are kept.
pub fn train(cfg: &ExperimentConfig, out: &Path, log: &mut dyn FnMut(&str)) -> Result<TrainSummary> {
    let h = cfg.hamiltonian()?;
    let group = cfg.group()?;
    let settings = cfg.train_settings(&group)?;
    let ansatz = cfg.initial_ansatz()?;
    fs::create_dir_all(out).map_err(|e| AppError::io(out, e))?;
    write_json(&out.join("config.json"), cfg)?;

    let ck_dir = out.join("checkpoints");
    let steps = cfg.training.steps;
    let every = cfg.training.checkpoint_every;
    let mut checkpoints = vec![checkpoint::write(
        &ck_dir,
        &CheckpointMeta::for_config(cfg, 0, ansatz.n_params(), None),
        &ansatz.params(),
    )?];

    let mut metrics = csv_writer(&out.join("metrics.csv"))?;
    let mut timings = if cfg.training.timings { Some(csv_writer(&out.join("timings.csv"))?) } else { None };
    let mut trainer = Trainer::new(&h, &group, ansatz, settings)?;
    let start = Instant::now();
    let mut clock = || start.elapsed().as_secs_f64();
    let mut last = None;
    for i in 0..steps {
        let rec = match trainer.step_with_clock(&mut clock) {
            Ok(r) => r,
            Err(CoreError::Diverged { step, energy }) => {
                metrics.flush().map_err(|e| AppError::io(out.join("metrics.csv"), e))?;
                return Err(AppError::Diverged { step, energy });
            }
            Err(e) => return Err(e.into()),
        };
        metrics.serialize(MetricsRow::from(&rec))?;
        if let Some(t) = timings.as_mut() {
            t.serialize(TimingRow { step: rec.step, samp_seconds: rec.samp_seconds, grad_seconds: rec.grad_seconds })?;
        }
        let done = i + 1;
        if done == steps || (every > 0 && done % every == 0) {
            metrics.flush().map_err(|e| AppError::io(out.join("metrics.csv"), e))?;
            let a = trainer.ansatz();
            let meta = CheckpointMeta::for_config(cfg, done, a.n_params(), Some(rec.energy));
            checkpoints.push(checkpoint::write(&ck_dir, &meta, &a.params())?);
            log(&format!("step {done}/{steps}: energy {:.6} +- {:.6}", rec.energy, rec.stderr));
        }
        last = Some(rec.energy);
    }
    metrics.flush().map_err(|e| AppError::io(out.join("metrics.csv"), e))?;
    if let Some(t) = timings.as_mut() {
        t.flush().map_err(|e| AppError::io(out.join("timings.csv"), e))?;
    }
    Ok(TrainSummary { steps, final_energy: last, checkpoints })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateReport {
    pub mode: Mode,
    pub energy: f64,
    pub stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
    pub acceptance: f64,
    pub n_samples: usize,
    pub nodes_skipped: usize,
    /// Variance of the averaged-to-original ratio under the original's
    /// density (averaging modes only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_pa_over_og: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset_size: Option<usize>,
}

pub fn evaluate(cfg: &ExperimentConfig, ansatz: &Ansatz, mode: Mode, out: Option<&Path>) -> Result<EvaluateReport> {
    let h = cfg.hamiltonian()?;
    let group = cfg.group()?;
    let e = &cfg.evaluation;
    let seed = stream_seed(cfg.seed, EVALUATION);
    let n_up = cfg.system.n_up;
    let psi = wavefunction(cfg, mode, ansatz, &group)?;
    let (samples, acc) =
        sample_series(&*psi, e.chains, e.samples_per_chain, e.thin, e.burn_in, cfg.sampler.step_size, seed, n_up)?;
    let m = evaluate_metrics(&h, &*psi, &samples, acc)?;
    let (var_ratio, subset_size) = match mode {
        Mode::Pa | Mode::Ga => {
            let subset = group.subset(&cfg.subset(&group)?)?;
            let (og, _) =
                sample_series(ansatz, e.chains, e.samples_per_chain, e.thin, e.burn_in, cfg.sampler.step_size, seed, n_up)?;
            (Some(var_pa_over_og(ansatz, &subset, &og)?.0), Some(subset.len()))
        }
        _ => (None, None),
    };
    let report = EvaluateReport {
        mode,
        energy: m.energy,
        stderr: m.stderr,
        variance: m.variance,
        variance_stderr: m.variance_stderr,
        acceptance: m.acceptance,
        n_samples: m.n_samples,
        nodes_skipped: m.nodes_skipped,
        var_pa_over_og: var_ratio,
        subset_size,
    };
    if let Some(dir) = out {
        write_json(&dir.join("reports").join(format!("evaluate_{mode}.json")), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanElement {
    pub element: usize,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub mode: Mode,
    pub resolution: usize,
    pub axes: Vec<usize>,
    pub base: Vec<f64>,
    pub group_order: usize,
    pub max_error: f64,
    pub mean_error: f64,
    pub nodes: usize,
    pub satisfied_relations: usize,
    pub per_element: Vec<ScanElement>,
    /// Spot check of the translated-scan identity at random translations.
    pub identity_defect: Option<f64>,
}

pub const SCAN_TOL: f64 = 1e-9;

fn scan_base(cfg: &ExperimentConfig, group: &SpaceGroup) -> Result<Configuration> {
    let d = group.dim();
    let base = if let Some(p) = &cfg.scan.positions {
        Configuration::with_counts(d, p.clone(), cfg.system.n_up).map_err(|e| AppError::Config(format!("scan.positions: {e}")))?
    } else {
        let seeds = cfg.scan.seeds.clone().unwrap_or_else(|| vec![vec![0.0; d]]);
        orbit_configuration(group, &seeds).map_err(|e| AppError::Config(format!("scan.seeds: {e}")))?
    };
    let n = cfg.system.n_up + cfg.system.n_down;
    if base.n() != n || base.count(symvmc_core::groups::Spin::Up) != cfg.system.n_up {
        return Err(AppError::Config(format!(
            "scan: base configuration has {} electrons ({} up), system has {} ({} up)",
            base.n(),
            base.count(symvmc_core::groups::Spin::Up),
            n,
            cfg.system.n_up
        )));
    }
    Ok(base)
}

/// `log|psi|^2` over all translations of the base configuration, written as
/// `scans/<mode>.csv` with a symmetry-error column and a JSON summary.
pub fn scan_command(cfg: &ExperimentConfig, ansatz: &Ansatz, mode: Mode, out: Option<&Path>) -> Result<ScanSummary> {
    let group = cfg.group()?;
    let base = scan_base(cfg, &group)?;
    let psi = wavefunction(cfg, mode, ansatz, &group)?;
    let grid = scan(&*psi, &group, &base, cfg.scan.resolution)?;
    let err = symmetry_error(&grid, &group)?;

    let mut rng = child_rng(stream_seed(cfg.seed, "scan"), 0);
    let spots: Vec<Vec<f64>> = (0..8).map(|_| random_configuration(&mut rng, group.dim(), 1, 0).positions().to_vec()).collect();
    let identity_defect = finite(lemma_defect(&*psi, &group, &base, &spots)?);

    let summary = ScanSummary {
        mode,
        resolution: grid.resolution,
        axes: grid.axes.clone(),
        base: base.positions().to_vec(),
        group_order: group.order(),
        max_error: err.max,
        mean_error: err.mean,
        nodes: err.nodes,
        satisfied_relations: err.satisfied(SCAN_TOL),
        per_element: err.per_element.iter().map(|e| ScanElement { element: e.element, max_error: e.max }).collect(),
        identity_defect,
    };
    if let Some(dir) = out {
        let scans = dir.join("scans");
        fs::create_dir_all(&scans).map_err(|e| AppError::io(&scans, e))?;
        let path = scans.join(format!("{mode}.csv"));
        let mut f = fs::File::create(&path).map_err(|e| AppError::io(&path, e))?;
        let axes: Vec<String> = grid.axes.iter().map(|a| a.to_string()).collect();
        let base_s: Vec<String> = summary.base.iter().map(|v| v.to_string()).collect();
        writeln!(f, "# axes: {}", axes.join(" "))
            .and_then(|_| writeln!(f, "# resolution: {}", grid.resolution))
            .and_then(|_| writeln!(f, "# base: {}", base_s.join(" ")))
            .and_then(|_| writeln!(f, "# value: log|psi(base + t)|^2, nan at nodes; error: max over group of |value(g t) - value(t)|"))
            .map_err(|e| AppError::io(&path, e))?;
        let mut w = csv::Writer::from_writer(f);
        let mut header: Vec<String> = grid.axes.iter().map(|a| format!("t{a}")).collect();
        header.push("value".into());
        header.push("error".into());
        w.write_record(&header)?;
        for i in 0..grid.len() {
            let mut row: Vec<String> = grid.translation(i).iter().map(|t| t.to_string()).collect();
            row.push(grid.values[i].to_string());
            row.push(err.map[i].to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| AppError::io(&path, e))?;
        write_json(&scans.join(format!("{mode}.json")), &summary)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodStats {
    pub method: String,
    pub n: usize,
    pub k: usize,
    pub replicates: usize,
    pub q: usize,
    pub norm: f64,
    pub norm_se: f64,
    pub diag_max_norm: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub node_resamples: usize,
    pub bound_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub n: usize,
    pub passed: bool,
    pub max_z: f64,
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltRow {
    pub n: usize,
    pub ks: Vec<f64>,
    pub ks_se: Vec<f64>,
    pub ks_max_dev: f64,
    pub dkw_band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltSummary {
    pub method: String,
    pub monotone: bool,
    pub rows: Vec<CltRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradstatsReport {
    pub sampling: SamplingConfig,
    pub methods: Vec<MethodStats>,
    /// DA/OG mean and excess-covariance identity; needs a density invariant
    /// under the group.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub da_identity: Option<Result<IdentityReport, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ga_identity: Option<Result<IdentityReport, String>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub clt: Vec<CltSummary>,
}

pub fn gradstats(cfg: &ExperimentConfig, ansatz: &Ansatz, out: Option<&Path>) -> Result<GradstatsReport> {
    let h = cfg.hamiltonian()?;
    let group = cfg.group()?;
    let s = &cfg.stats;
    let k = cfg.method.k;
    let batches = if s.batches.is_empty() { vec![cfg.sampler.batch] } else { s.batches.clone() };
    let methods = cfg.stats_methods();
    for &n in &batches {
        if n == 0 || (k > 0 && n % k != 0 && methods.iter().any(|m| matches!(m, symvmc_core::update::Method::Da | symvmc_core::update::Method::Ga))) {
            return Err(AppError::Config(format!("stats.batches: {n} is not divisible by method.k = {k}")));
        }
    }
    let sampling = match s.sampling {
        SamplingConfig::Exact => SamplingMode::Exact { probes: s.probes, margin: s.margin },
        SamplingConfig::Mcmc => SamplingMode::Mcmc(cfg.mcmc()),
    };
    let subset = cfg.subset(&group)?;
    let mut fixture =
        UpdateFixture::new(&h, ansatz, &group, batches[0], k, cfg.baseline()?, sampling, Some(&subset), cfg.seed)?;

    let mut rows = Vec::new();
    for (j, &n) in batches.iter().enumerate() {
        for &m in &methods {
            let st = update_distribution(m, &fixture, n, s.replicates, child_seed(cfg.seed, j as u64))?;
            rows.push(MethodStats {
                method: m.name().to_ascii_lowercase(),
                n,
                k: st.k,
                replicates: st.replicates,
                q: st.q,
                norm: st.norm,
                norm_se: st.norm_se,
                diag_max_norm: st.diag_max_norm,
                mean: st.mean,
                variance: st.cov_diag,
                node_resamples: st.node_resamples,
                bound_violations: st.bound_violations,
            });
        }
    }

    let (mut da_identity, mut ga_identity) = (None, None);
    if s.identities {
        fixture.n = batches[0];
        da_identity = Some(match prop41_check(&fixture, s.replicates, cfg.seed) {
            Ok(r) => Ok(IdentityReport {
                n: r.n,
                passed: r.passed,
                max_z: r.mean.max_z.max(r.excess.max_z),
                violations: r.mean.violations + r.excess.violations,
                min_eigenvalue: Some(r.min_eigenvalue),
                min_eigenvalue_sigma: Some(r.min_eigenvalue_sigma),
            }),
            Err(e @ (CoreError::NotInvariant(_) | CoreError::Invalid(_))) => Err(e.to_string()),
            Err(e) => return Err(e.into()),
        });
        ga_identity = Some(match lemma42_check(&fixture, s.replicates, cfg.seed) {
            Ok(r) => Ok(IdentityReport {
                n: r.n,
                passed: r.passed,
                max_z: r.check.max_z,
                violations: r.check.violations,
                min_eigenvalue: None,
                min_eigenvalue_sigma: None,
            }),
            Err(e @ CoreError::Invalid(_)) => Err(e.to_string()),
            Err(e) => return Err(e.into()),
        });
    }

    let mut clt = Vec::new();
    if s.clt {
        for &m in &methods {
            let sweep = clt_check(m, &fixture, &batches, s.replicates, stream_seed(cfg.seed, "clt"))?;
            clt.push(CltSummary {
                method: m.name().to_ascii_lowercase(),
                monotone: sweep.monotone,
                rows: sweep
                    .reports
                    .iter()
                    .map(|r| CltRow { n: r.n, ks: r.ks.clone(), ks_se: r.ks_se.clone(), ks_max_dev: r.ks_max_dev, dkw_band: r.dkw_band })
                    .collect(),
            });
        }
    }

    let report = GradstatsReport { sampling: s.sampling, methods: rows, da_identity, ga_identity, clt };
    if let Some(dir) = out {
        write_json(&dir.join("reports").join("gradstats.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub kind: String,
    pub epsilon: f64,
    pub max_d1: f64,
    pub max_d2: f64,
    pub energy_deviation: f64,
    pub scan_points: usize,
    pub shell_points: usize,
    pub nodes_skipped: usize,
}

/// `lambda_eps` derivative maxima and the smoothed-canonical local-energy
/// deviation along one electron scan, one row per `(kind, eps)`.
pub fn probe_smoothing(cfg: &ExperimentConfig, ansatz: &Ansatz, out: Option<&Path>) -> Result<Vec<ProbeRow>> {
    let h = cfg.hamiltonian()?;
    let group = cfg.group()?;
    let region = cfg.region()?;
    let p = &cfg.probe;
    let d = group.dim();
    let (n_up, n_down) = (cfg.system.n_up, cfg.system.n_down);
    let start = match &p.start {
        Some(x) => Configuration::with_counts(d, x.clone(), n_up).map_err(|e| AppError::Config(format!("probe.start: {e}")))?,
        None => {
            let mut rng = child_rng(stream_seed(cfg.seed, PROBE_STREAM), 0);
            random_configuration(&mut rng, d, n_up, n_down)
        }
    };
    if start.n() != n_up + n_down {
        return Err(AppError::Config(format!("probe.start: {} electrons, system has {}", start.n(), n_up + n_down)));
    }
    if p.electron >= start.n() || p.axis >= d {
        return Err(AppError::Config("probe: electron or axis out of range".into()));
    }
    for &eps in &p.epsilons {
        if eps >= region.inradius() {
            return Err(AppError::Config(format!(
                "probe.epsilons: {eps} must be below the region inradius {}",
                region.inradius()
            )));
        }
    }
    let scan = electron_scan(&start, p.electron, p.axis, p.scan_points);
    let mut rows = Vec::new();
    for kind in cfg.step_kinds() {
        for r in blowup_probe(&h, ansatz, &group, &region, kind, &p.epsilons, &scan)? {
            rows.push(ProbeRow {
                kind: kind.name().into(),
                epsilon: r.epsilon,
                max_d1: r.max_d1,
                max_d2: r.max_d2,
                energy_deviation: r.energy_deviation,
                scan_points: r.scan_points,
                shell_points: r.shell_points,
                nodes_skipped: r.nodes_skipped,
            });
        }
    }
    if let Some(dir) = out {
        let path = dir.join("reports").join("probe_smoothing.csv");
        let mut w = csv_writer(&path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| AppError::io(&path, e))?;
    }
    Ok(rows)
}
