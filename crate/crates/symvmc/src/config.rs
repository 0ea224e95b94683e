//! Experiment configuration: a TOML document (JSON also accepted) with one
//! section per stage.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use symvmc_core::ansatz::Ansatz;
use symvmc_core::groups::{close_group, Isometry, SpaceGroup};
use symvmc_core::hamiltonian::Hamiltonian;
use symvmc_core::lattice::{Cell, LatticeKind};
use symvmc_core::rng::{stream_seed, INIT};
use symvmc_core::sampler::McmcParams;
use symvmc_core::smoothing::{FundamentalRegion, SmoothingSpec, StepKind};
use symvmc_core::train::{LrSchedule, TrainSettings};
use symvmc_core::update::{Baseline, Method};

use crate::error::AppError;

const MAX_GROUP_ORDER: usize = 192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub system: SystemConfig,
    pub group: GroupConfig,
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub scan: ScanConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// `chain`, `square`, `hexagonal` or `cubic`.
    pub lattice: String,
    /// Physical length of a lattice vector.
    pub scale: f64,
    /// Well positions in lattice coordinates.
    #[serde(default)]
    pub atoms: Vec<Vec<f64>>,
    #[serde(default)]
    pub depth: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default)]
    pub interaction: f64,
    #[serde(default)]
    pub offset: f64,
    pub n_up: usize,
    #[serde(default)]
    pub n_down: usize,
}

fn default_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Row-major integer matrix in lattice coordinates.
    pub rotation: Vec<i32>,
    pub translation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub center: Vec<f64>,
    pub normals: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    /// Built-in group name; alternative to `generators`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<GeneratorConfig>>,
    /// Fundamental region for canonicalization; built-in groups have one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    pub cutoff: u32,
    #[serde(default)]
    pub jastrow: bool,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Og,
    Da,
    Ga,
    Gas,
    Pa,
    Sc,
    Pc,
}

impl Mode {
    pub const ALL: [Mode; 7] = [Mode::Og, Mode::Da, Mode::Ga, Mode::Gas, Mode::Pa, Mode::Sc, Mode::Pc];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Og => "og",
            Mode::Da => "da",
            Mode::Ga => "ga",
            Mode::Gas => "gas",
            Mode::Pa => "pa",
            Mode::Sc => "sc",
            Mode::Pc => "pc",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }

    pub fn trains(self) -> bool {
        matches!(self, Mode::Og | Mode::Da | Mode::Ga | Mode::Gas | Mode::Sc)
    }

    pub fn evaluates(self) -> bool {
        matches!(self, Mode::Og | Mode::Pa | Mode::Pc)
    }

    /// Update estimator used when training in this mode.
    pub fn update_method(self) -> Option<Method> {
        match self {
            Mode::Og | Mode::Sc => Some(Method::Og),
            Mode::Da => Some(Method::Da),
            Mode::Ga => Some(Method::Ga),
            Mode::Gas => Some(Method::Gas),
            Mode::Pa | Mode::Pc => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `full`, `generators`, `subgroup:<name>`, or explicit element indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubsetSelector {
    Named(String),
    Indices(Vec<usize>),
}

impl Default for SubsetSelector {
    fn default() -> Self {
        SubsetSelector::Named("full".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// DA augmentations per sample, GA batch divisor, GAs subset size.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub subset: SubsetSelector,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing: String,
}

fn default_mode() -> Mode {
    Mode::Og
}
fn default_k() -> usize {
    1
}
fn default_epsilon() -> f64 {
    symvmc_core::smoothing::DEFAULT_EPSILON
}
fn default_smoothing() -> String {
    "spline2".into()
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            mode: default_mode(),
            k: default_k(),
            subset: SubsetSelector::default(),
            epsilon: default_epsilon(),
            smoothing: default_smoothing(),
        }
    }
}

/// `batch-mean` or a fixed number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaselineConfig {
    Fixed(f64),
    Named(String),
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig::Named("batch-mean".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Batch size `N`.
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// Metropolis steps between harvested draws (`m`).
    #[serde(default = "default_steps_per_draw")]
    pub steps_per_draw: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

fn default_batch() -> usize {
    256
}
fn default_steps_per_draw() -> usize {
    5
}
fn default_burn_in() -> usize {
    100
}
fn default_step_size() -> f64 {
    0.3
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            batch: default_batch(),
            steps_per_draw: default_steps_per_draw(),
            burn_in: default_burn_in(),
            step_size: default_step_size(),
            baseline: BaselineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default)]
    pub steps: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Multiply the learning rate by `lr_decay_factor` every this many steps
    /// (0 keeps it constant).
    #[serde(default)]
    pub lr_decay_every: usize,
    #[serde(default = "default_decay_factor")]
    pub lr_decay_factor: f64,
    /// Checkpoint period; 0 writes only the initial and final checkpoints.
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Also write wall-clock timings (not reproducible).
    #[serde(default)]
    pub timings: bool,
}

fn default_lr() -> f64 {
    0.05
}
fn default_decay_factor() -> f64 {
    0.5
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            steps: 0,
            lr: default_lr(),
            lr_decay_every: 0,
            lr_decay_factor: default_decay_factor(),
            checkpoint_every: 0,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_per_chain")]
    pub samples_per_chain: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_eval_burn_in")]
    pub burn_in: usize,
}

fn default_chains() -> usize {
    8
}
fn default_per_chain() -> usize {
    2000
}
fn default_thin() -> usize {
    4
}
fn default_eval_burn_in() -> usize {
    200
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            chains: default_chains(),
            samples_per_chain: default_per_chain(),
            thin: default_thin(),
            burn_in: default_eval_burn_in(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_oracle_cutoff")]
    pub cutoff: u32,
    /// Eigenvalues written to the report.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_oracle_cutoff() -> u32 {
    16
}
fn default_levels() -> usize {
    5
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { cutoff: default_oracle_cutoff(), levels: default_levels() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingConfig {
    Exact,
    Mcmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Batch sizes to measure; empty means `[sampler.batch]`.
    #[serde(default)]
    pub batches: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingConfig,
    /// Random probes used to bound `|psi|^2` for exact sampling.
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Also run the DA/OG and GA identity checks (exact sampling only).
    #[serde(default)]
    pub identities: bool,
    /// Also run the normality tests along `batches`.
    #[serde(default)]
    pub clt: bool,
}

fn default_replicates() -> usize {
    400
}
fn default_methods() -> Vec<String> {
    vec!["og".into(), "da".into(), "ga".into(), "gas".into()]
}
fn default_sampling() -> SamplingConfig {
    SamplingConfig::Mcmc
}
fn default_probes() -> usize {
    4000
}
fn default_margin() -> f64 {
    1.0
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            replicates: default_replicates(),
            batches: Vec::new(),
            methods: default_methods(),
            sampling: default_sampling(),
            probes: default_probes(),
            margin: default_margin(),
            identities: false,
            clt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<String>,
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
    /// Start configuration of the electron scan; random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub electron: usize,
    #[serde(default)]
    pub axis: usize,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.1, 0.05, 0.01]
}
fn default_kinds() -> Vec<String> {
    vec!["spline2".into(), "smooth_inf".into()]
}
fn default_scan_points() -> usize {
    10_000
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epsilons: default_epsilons(),
            kinds: default_kinds(),
            scan_points: default_scan_points(),
            start: None,
            electron: 0,
            axis: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Seed points whose orbit under the rotation group forms the base
    /// configuration (all spin up).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<Vec<f64>>>,
    /// Explicit base configuration, `n x d` flattened, up spins first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<f64>>,
}

fn default_resolution() -> usize {
    symvmc_core::scan::DEFAULT_RESOLUTION
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { resolution: default_resolution(), seeds: None, positions: None }
    }
}

fn cfg_err(key: &str, msg: impl fmt::Display) -> AppError {
    AppError::Config(format!("{key}: {msg}"))
}

pub fn parse_lattice(s: &str) -> Option<LatticeKind> {
    [LatticeKind::Chain, LatticeKind::Square, LatticeKind::Hexagonal, LatticeKind::Cubic]
        .into_iter()
        .find(|l| l.name() == s)
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self, AppError> {
        let c: ExperimentConfig = toml::from_str(s).map_err(|e| AppError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(s: &str) -> Result<Self, AppError> {
        let c: ExperimentConfig = serde_json::from_str(s).map_err(|e| AppError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Parses JSON when the text starts with `{`, TOML otherwise.
    pub fn parse(s: &str) -> Result<Self, AppError> {
        if s.trim_start().starts_with('{') {
            Self::from_json(s)
        } else {
            Self::from_toml(s)
        }
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes to JSON")
    }

    pub fn lattice(&self) -> Result<LatticeKind, AppError> {
        parse_lattice(&self.system.lattice)
            .ok_or_else(|| cfg_err("system.lattice", format!("unknown lattice `{}`", self.system.lattice)))
    }

    pub fn cell(&self) -> Result<Cell, AppError> {
        Ok(Cell::new(self.lattice()?, self.system.scale))
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian, AppError> {
        let d = self.lattice()?.dim();
        let mut atoms = Vec::with_capacity(self.system.atoms.len());
        for a in &self.system.atoms {
            if a.len() != d {
                return Err(cfg_err("system.atoms", format!("atom {a:?} needs {d} coordinates")));
            }
            let mut p = [0.0; 3];
            p[..d].copy_from_slice(a);
            atoms.push(p);
        }
        let s = &self.system;
        Hamiltonian::new(self.cell()?, atoms, s.depth, s.width, s.interaction, s.offset)
            .map_err(|e| cfg_err("system", e))
    }

    pub fn group(&self) -> Result<SpaceGroup, AppError> {
        let lattice = self.lattice()?;
        let g = match (&self.group.name, &self.group.generators) {
            (Some(name), None) => {
                SpaceGroup::builtin(name).ok_or_else(|| cfg_err("group.name", format!("unknown group `{name}`")))?
            }
            (None, Some(gens)) => {
                let isos = gens
                    .iter()
                    .map(|g| Isometry::new(&g.rotation, &g.translation))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| cfg_err("group.generators", e))?;
                close_group(lattice, &isos, MAX_GROUP_ORDER).map_err(|e| cfg_err("group.generators", e))?
            }
            _ => return Err(cfg_err("group", "exactly one of `name` and `generators` is required")),
        };
        if g.lattice() != lattice {
            return Err(cfg_err("group", format!("group acts on a {} lattice", g.lattice().name())));
        }
        Ok(g)
    }

    pub fn region(&self) -> Result<FundamentalRegion, AppError> {
        if let Some(r) = &self.group.region {
            return FundamentalRegion::new(self.lattice()?, &r.center, &r.normals).map_err(|e| cfg_err("group.region", e));
        }
        self.group
            .name
            .as_deref()
            .and_then(FundamentalRegion::for_builtin_group)
            .ok_or_else(|| cfg_err("group.region", "no built-in region for this group; give `region`"))
    }

    pub fn smoothing(&self) -> Result<SmoothingSpec, AppError> {
        let kind = StepKind::parse(&self.method.smoothing)
            .ok_or_else(|| cfg_err("method.smoothing", format!("unknown step `{}`", self.method.smoothing)))?;
        SmoothingSpec::new(kind, self.method.epsilon).map_err(|e| cfg_err("method.epsilon", e))
    }

    /// Group element indices named by `method.subset`.
    pub fn subset(&self, group: &SpaceGroup) -> Result<Vec<usize>, AppError> {
        let key = "method.subset";
        let ix = match &self.method.subset {
            SubsetSelector::Indices(ix) => ix.clone(),
            SubsetSelector::Named(s) if s == "full" => (0..group.order()).collect(),
            SubsetSelector::Named(s) if s == "generators" => {
                let mut ix = vec![0];
                ix.extend(group.generator_indices().iter().copied().filter(|&i| i != 0));
                ix
            }
            SubsetSelector::Named(s) => {
                let name = s
                    .strip_prefix("subgroup:")
                    .ok_or_else(|| cfg_err(key, format!("unknown selector `{s}`")))?;
                let sub = SpaceGroup::builtin(name).ok_or_else(|| cfg_err(key, format!("unknown group `{name}`")))?;
                sub.elements()
                    .iter()
                    .map(|g| group.index_of(g).ok_or_else(|| cfg_err(key, format!("`{name}` is not a subgroup"))))
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        if ix.is_empty() {
            return Err(cfg_err(key, "subset is empty"));
        }
        if let Some(&bad) = ix.iter().find(|&&i| i >= group.order()) {
            return Err(cfg_err(key, format!("element {bad} does not exist (group order {})", group.order())));
        }
        Ok(ix)
    }

    pub fn baseline(&self) -> Result<Baseline, AppError> {
        match &self.sampler.baseline {
            BaselineConfig::Fixed(b) => Ok(Baseline::Fixed(*b)),
            BaselineConfig::Named(s) if s == "batch-mean" => Ok(Baseline::BatchMean),
            BaselineConfig::Named(s) => Err(cfg_err("sampler.baseline", format!("unknown baseline `{s}`"))),
        }
    }

    pub fn mcmc(&self) -> McmcParams {
        McmcParams {
            step_size: self.sampler.step_size,
            burn_in: self.sampler.burn_in,
            steps_per_draw: self.sampler.steps_per_draw,
        }
    }

    pub fn initial_ansatz(&self) -> Result<Ansatz, AppError> {
        let s = &self.system;
        Ansatz::initial(
            self.cell()?,
            self.ansatz.cutoff,
            s.n_up,
            s.n_down,
            self.ansatz.jastrow,
            self.ansatz.noise,
            stream_seed(self.seed, INIT),
        )
        .map_err(|e| cfg_err("ansatz", e))
    }

    pub fn train_settings(&self, group: &SpaceGroup) -> Result<TrainSettings, AppError> {
        let mode = self.method.mode;
        let method = mode.update_method().ok_or_else(|| {
            cfg_err("method.mode", format!("`{mode}` is inference-only; train with og, da, ga, gas or sc"))
        })?;
        let ga_subset = match mode {
            Mode::Ga => Some(self.subset(group)?),
            _ => None,
        };
        let canonical = match mode {
            Mode::Sc => Some((self.region()?, self.smoothing()?)),
            _ => None,
        };
        let t = &self.training;
        Ok(TrainSettings {
            method,
            steps: t.steps,
            batch: self.sampler.batch,
            k: self.method.k,
            mcmc: self.mcmc(),
            lr: LrSchedule { initial: t.lr, every: t.lr_decay_every, factor: t.lr_decay_factor },
            baseline: self.baseline()?,
            seed: self.seed,
            ga_subset,
            canonical,
        })
    }

    /// Schema-level and cross-field checks.
    pub fn validate(&self) -> Result<(), AppError> {
        let lattice = self.lattice()?;
        let s = &self.system;
        if !(s.scale > 0.0) {
            return Err(cfg_err("system.scale", "must be positive"));
        }
        if !(s.width > 0.0) {
            return Err(cfg_err("system.width", "must be positive"));
        }
        if s.n_up + s.n_down == 0 {
            return Err(cfg_err("system.n_up", "at least one electron is required"));
        }
        self.hamiltonian()?;
        let group = self.group()?;
        if self.ansatz.cutoff == 0 {
            return Err(cfg_err("ansatz.cutoff", "must be at least 1"));
        }
        self.initial_ansatz()?;
        let m = &self.method;
        let n = self.sampler.batch;
        if n == 0 {
            return Err(cfg_err("sampler.batch", "must be positive"));
        }
        if !(self.sampler.step_size > 0.0) {
            return Err(cfg_err("sampler.step_size", "must be positive"));
        }
        match m.mode {
            Mode::Da | Mode::Ga => {
                if m.k == 0 || !n.is_multiple_of(m.k) {
                    return Err(cfg_err("method.k", format!("batch {n} is not divisible by k = {}", m.k)));
                }
            }
            Mode::Gas => {
                if m.k == 0 || m.k > group.order() {
                    return Err(cfg_err("method.k", format!("k = {} out of range for group order {}", m.k, group.order())));
                }
            }
            Mode::Sc | Mode::Pc => {
                let region = self.region()?;
                let spec = self.smoothing()?;
                if region.lattice() != lattice {
                    return Err(cfg_err("group.region", "region lattice differs from the system lattice"));
                }
                if !(spec.epsilon < region.inradius()) {
                    return Err(cfg_err(
                        "method.epsilon",
                        format!("epsilon {} must be below the region inradius {}", spec.epsilon, region.inradius()),
                    ));
                }
            }
            Mode::Og | Mode::Pa => {}
        }
        self.subset(&group)?;
        self.baseline()?;
        let t = &self.training;
        if !(t.lr > 0.0) || !(t.lr_decay_factor > 0.0) {
            return Err(cfg_err("training.lr", "learning rate and decay factor must be positive"));
        }
        let e = &self.evaluation;
        if e.chains == 0 || e.samples_per_chain == 0 || e.thin == 0 {
            return Err(cfg_err("evaluation", "chains, samples_per_chain and thin must be positive"));
        }
        for name in &self.stats.methods {
            if Method::parse(name).is_none() {
                return Err(cfg_err("stats.methods", format!("unknown method `{name}`")));
            }
        }
        for k in &self.probe.kinds {
            if StepKind::parse(k).is_none() {
                return Err(cfg_err("probe.kinds", format!("unknown step `{k}`")));
            }
        }
        if self.probe.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(cfg_err("probe.epsilons", "must be positive"));
        }
        if self.scan.resolution < 2 {
            return Err(cfg_err("scan.resolution", "must be at least 2"));
        }
        Ok(())
    }

    pub fn stats_methods(&self) -> Vec<Method> {
        self.stats.methods.iter().filter_map(|m| Method::parse(m)).collect()
    }

    pub fn step_kinds(&self) -> Vec<StepKind> {
        self.probe.kinds.iter().filter_map(|k| StepKind::parse(k)).collect()
    }
}
