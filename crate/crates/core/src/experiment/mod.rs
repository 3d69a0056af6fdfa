//! Configured runs: value iteration against its error bounds, and the
//! learners with a plaintext table beside a shadow table computed by an
//! exact, noisy or encrypted engine. Each run writes its tables as CSV
//! plus a manifest that reproduces it.

mod bench;
mod preset;
mod vi;

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dp::BoundReport;
use crate::hebackend::{Backend, NoiseMode};
use crate::mdp::{GridConfig, GridWorld, Hyperparams};
use crate::protocol::{Client, Cloud, InProcess, Rule, TcpTransport, Transport};
use crate::tdlearn::{
    run_learning, write_trace_csv, write_values_csv, Algorithm, LearnerConfig, LearnerState,
    ProtocolEngine, UpdateEngine, DEFAULT_EPISODES,
};
use crate::{Error, Result};

pub use bench::{bench, BenchReport, MIN_BENCH_UPDATES, UPDATE_TIME_LIMIT};
pub use preset::{list_presets, Preset, PresetInfo, DESK_MIN_DEPTH};
pub use vi::{run_value_iteration, write_vi_values_csv, ViOutcome};

/// Value iterations run by default.
pub const DEFAULT_ITERATIONS: usize = 500;

/// Version recorded in manifests: the crate version and, when built from
/// a checkout, `git describe` output.
pub fn build_version() -> String {
    match option_env!("ENCRL_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => format!("{} ({d})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ViSync,
    ViSyncNoisy,
    ViAsync,
    ViAsyncNoisy,
    Td0,
    Sarsa,
    Z,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::ViSync,
        Mode::ViSyncNoisy,
        Mode::ViAsync,
        Mode::ViAsyncNoisy,
        Mode::Td0,
        Mode::Sarsa,
        Mode::Z,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::ViSync => "vi-sync",
            Mode::ViSyncNoisy => "vi-sync-noisy",
            Mode::ViAsync => "vi-async",
            Mode::ViAsyncNoisy => "vi-async-noisy",
            Mode::Td0 => "td0",
            Mode::Sarsa => "sarsa",
            Mode::Z => "z",
        }
    }

    /// The learner, for learning modes.
    pub fn algorithm(self) -> Option<Algorithm> {
        match self {
            Mode::Td0 => Some(Algorithm::Td0),
            Mode::Sarsa => Some(Algorithm::Sarsa),
            Mode::Z => Some(Algorithm::Z),
            _ => None,
        }
    }

    pub fn is_value_iteration(self) -> bool {
        self.algorithm().is_none()
    }

    pub fn is_async(self) -> bool {
        matches!(self, Mode::ViAsync | Mode::ViAsyncNoisy)
    }

    pub fn is_noisy(self) -> bool {
        matches!(self, Mode::ViSyncNoisy | Mode::ViAsyncNoisy)
    }

    /// Circuit evaluated under encryption.
    pub fn rule(self) -> Rule {
        self.algorithm().map_or(Rule::QBackup, Algorithm::rule)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Where shadow values come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Exact,
    Noise,
    Encrypted,
}

impl BackendChoice {
    pub fn name(self) -> &'static str {
        match self {
            BackendChoice::Exact => "exact",
            BackendChoice::Noise => "noise",
            BackendChoice::Encrypted => "encrypted",
        }
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BackendChoice::Exact),
            "noise" => Ok(BackendChoice::Noise),
            "encrypted" => Ok(BackendChoice::Encrypted),
            other => Err(Error::Config(format!("unknown backend {other:?}"))),
        }
    }
}

/// State order of asynchronous value iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsyncOrder {
    RoundRobin,
    /// States visited by an ε-greedy agent acting on `V*`.
    Explore,
}

impl FromStr for AsyncOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round-robin" => Ok(AsyncOrder::RoundRobin),
            "explore" => Ok(AsyncOrder::Explore),
            other => Err(Error::Config(format!("unknown update order {other:?}"))),
        }
    }
}

/// Everything that determines a run's artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Defaults to `encrypted` when a preset is named, `noise` for the
    /// noisy value-iteration modes and `exact` otherwise.
    pub backend: Option<BackendChoice>,
    /// Defaults to `desk` under encryption.
    pub preset: Option<Preset>,
    /// Injected noise level of the `noise` backend.
    pub eps: f64,
    pub noise_mode: NoiseMode,
    /// Sample-path seed. Keys and injected noise use [`Self::key_seed`].
    pub seed: u64,
    pub episodes: usize,
    pub max_updates: Option<usize>,
    /// Synchronous sweeps, or sweeps' worth of single-state updates.
    pub iterations: usize,
    pub order: AsyncOrder,
    /// Exploration rate of [`AsyncOrder::Explore`].
    pub explore_eps: f64,
    pub circuit_privacy: bool,
    /// Its discount replaces the grid's.
    pub hyper: Hyperparams,
    pub grid: GridConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Td0,
            backend: None,
            preset: None,
            eps: 0.01,
            noise_mode: NoiseMode::Uniform,
            seed: 0,
            episodes: DEFAULT_EPISODES,
            max_updates: None,
            iterations: DEFAULT_ITERATIONS,
            order: AsyncOrder::RoundRobin,
            explore_eps: 0.8,
            circuit_privacy: false,
            hyper: Hyperparams::default(),
            grid: GridConfig::default(),
        }
    }
}

/// A config with everything defaulted filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub backend: BackendChoice,
    /// Set exactly when the backend is `encrypted`.
    pub preset: Option<Preset>,
    pub depth: usize,
    pub key_seed: u64,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    /// Accepts a bare config or a run manifest, whose `[config]` table is
    /// used.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let table = match table.get("config") {
            Some(toml::Value::Table(inner)) => inner.clone(),
            _ => table,
        };
        table
            .try_into()
            .map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Seed for keys and injected noise, distinct from the sample path.
    pub fn key_seed(&self) -> u64 {
        self.seed ^ 0x5eed_0000
    }

    /// The grid with the run's discount.
    pub fn world(&self) -> Result<GridWorld> {
        let mut grid = self.grid.clone();
        grid.gamma = self.hyper.gamma;
        GridWorld::new(grid)
    }

    pub fn learner_config(&self) -> Option<LearnerConfig> {
        self.mode.algorithm().map(|algorithm| LearnerConfig {
            algorithm,
            hyper: self.hyper.clone(),
            episodes: self.episodes,
            seed: self.seed,
            max_updates: self.max_updates,
        })
    }

    /// Multiplicative depth of the circuit the run evaluates.
    pub fn circuit_depth(&self) -> usize {
        self.mode.rule().depth(self.hyper.taylor_degree)
    }

    /// Checks the config and fills in defaults. Cheap: nothing is
    /// generated, so bad combinations fail before any real work.
    pub fn resolve(&self) -> Result<Plan> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed {} exceeds 2^63 - 1", self.seed)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("noise level {} is not a finite ε >= 0", self.eps)));
        }
        let backend = match (self.backend, self.preset) {
            (Some(b), _) => b,
            (None, Some(_)) => BackendChoice::Encrypted,
            (None, None) if self.mode.is_noisy() => BackendChoice::Noise,
            (None, None) => BackendChoice::Exact,
        };
        if self.mode.is_noisy() && backend == BackendChoice::Exact {
            return Err(Error::Config(format!(
                "{} needs the noise or encrypted backend",
                self.mode
            )));
        }
        let depth = self.circuit_depth();
        if let Some(p) = self.preset {
            p.check_depth(depth)?;
        }
        match self.learner_config() {
            Some(lc) => lc.validate()?,
            None => {
                if !(0.0..1.0).contains(&self.hyper.gamma) {
                    return Err(Error::Config(format!(
                        "gamma {} outside [0, 1)",
                        self.hyper.gamma
                    )));
                }
                if self.iterations < 4 {
                    return Err(Error::Config(format!(
                        "{} iterations leave no window to check the bound",
                        self.iterations
                    )));
                }
                if !(0.0..=1.0).contains(&self.explore_eps) {
                    return Err(Error::Config(format!(
                        "exploration rate {} outside [0, 1]",
                        self.explore_eps
                    )));
                }
            }
        }
        self.world()?;
        let preset = (backend == BackendChoice::Encrypted).then(|| self.preset.unwrap_or(Preset::Desk));
        Ok(Plan {
            backend,
            preset,
            depth,
            key_seed: self.key_seed(),
        })
    }
}

/// Builds the protocol engine, in process or against a running cloud.
pub fn protocol_engine(
    cfg: &ExperimentConfig,
    plan: &Plan,
    cloud: Option<&str>,
) -> Result<ProtocolEngine> {
    let preset = plan.preset.unwrap_or(Preset::Desk);
    let client = Client::new(preset.params(plan.depth)?, plan.key_seed)?;
    let setup = client.setup(cfg.circuit_privacy);
    let transport: Box<dyn Transport + Send> = match cloud {
        Some(addr) => Box::new(TcpTransport::connect(addr, &setup, client.context().clone())?),
        None => Box::new(InProcess::new(
            Cloud::new(client.context().clone(), setup.evaluation, cfg.circuit_privacy)?,
            false,
        )),
    };
    Ok(ProtocolEngine::new(client, transport))
}

fn update_engine(
    cfg: &ExperimentConfig,
    plan: &Plan,
    cloud: Option<&str>,
) -> Result<Box<dyn UpdateEngine>> {
    Ok(match plan.backend {
        BackendChoice::Exact => Box::new(Backend::exact()),
        BackendChoice::Noise => Box::new(Backend::bounded_noise(
            cfg.eps,
            cfg.noise_mode,
            plan.key_seed,
        )?),
        BackendChoice::Encrypted => Box::new(protocol_engine(cfg, plan, cloud)?),
    })
}

/// Runs a learner with its shadow table.
pub fn run_learner(cfg: &ExperimentConfig, cloud: Option<&str>) -> Result<LearnerState> {
    let plan = cfg.resolve()?;
    let lc = cfg
        .learner_config()
        .ok_or_else(|| Error::Config(format!("{} is not a learning mode", cfg.mode)))?;
    let world = cfg.world()?;
    let mut engine = update_engine(cfg, &plan, cloud)?;
    run_learning(&world, &lc, Some(engine.as_mut()))
}

/// What a run wrote and how it went.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub backend: BackendChoice,
    pub preset: Option<Preset>,
    /// Updates for learners, trajectory steps for value iteration.
    pub updates: usize,
    pub max_error: f64,
    pub final_error: f64,
    /// Value-iteration bound check.
    pub report: Option<BoundReport>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct SeedRecord {
    sample: u64,
    keys: u64,
}

#[derive(Serialize)]
struct PresetRecord {
    name: String,
    degree: usize,
    modulus_bits: f64,
    log2_scale: f64,
    sigma: f64,
    depth: usize,
    chain: Vec<u64>,
    special: Option<u64>,
}

#[derive(Serialize)]
struct SummaryRecord {
    updates: usize,
    max_error: f64,
    final_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound_pass: Option<bool>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: String,
    mode: Mode,
    backend: BackendChoice,
    two_process: bool,
    artifacts: Vec<String>,
    seeds: SeedRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<PresetRecord>,
    summary: SummaryRecord,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct ReportRecord {
    mode: Mode,
    backend: BackendChoice,
    /// Perturbation level the bound is computed from.
    eps: f64,
    gamma: f64,
    bound: f64,
    observed: f64,
    pass: bool,
    window_start: usize,
    window_end: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweeps: Option<usize>,
}

fn create(out: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = out.join(name);
    let f = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(f))
}

fn write_text(out: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

/// Runs `cfg` and writes `values.csv`, `trace.csv`, `report.toml` (value
/// iteration only) and `manifest.toml` into `out`. With `cloud`, updates
/// go to the cloud listening at that address.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, cloud: Option<&str>) -> Result<RunSummary> {
    let plan = cfg.resolve()?;
    let params = plan.preset.map(|p| p.params(plan.depth)).transpose()?;
    fs::create_dir_all(out)?;
    let world = cfg.world()?;
    let mut files = Vec::new();

    let (updates, max_error, final_error, report) = if cfg.mode.is_value_iteration() {
        let vi = run_value_iteration(cfg, cloud)?;
        write_vi_values_csv(create(out, "values.csv", &mut files)?, &vi, &world)?;
        write_trace_csv(create(out, "trace.csv", &mut files)?, &vi.trace)?;
        let record = ReportRecord {
            mode: cfg.mode,
            backend: plan.backend,
            eps: vi.eps,
            gamma: cfg.hyper.gamma,
            bound: vi.report.bound,
            observed: vi.report.observed,
            pass: vi.report.pass,
            window_start: vi.report.window.first().copied().unwrap_or(0),
            window_end: vi.report.window.last().copied().unwrap_or(0),
            sweep_length: vi.sweeps.as_ref().map(|t| t.m),
            sweeps: vi.sweeps.as_ref().map(|t| t.sweeps()),
        };
        write_text(out, "report.toml", &to_toml(&record)?, &mut files)?;
        let last = vi.trace.last().map_or(0.0, |e| e.max_error);
        (vi.trace.len(), vi.trace.max_error(), last, Some(vi.report))
    } else {
        let state = run_learner(cfg, cloud)?;
        write_values_csv(create(out, "values.csv", &mut files)?, &state, &world)?;
        write_trace_csv(create(out, "trace.csv", &mut files)?, state.trace())?;
        let last = state.trace().last().map_or(0.0, |e| e.max_error);
        (state.updates(), state.trace().max_error(), last, None)
    };

    let mut artifacts: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    artifacts.push("manifest.toml".into());
    let manifest = Manifest {
        version: build_version(),
        mode: cfg.mode,
        backend: plan.backend,
        two_process: cloud.is_some(),
        artifacts,
        seeds: SeedRecord {
            sample: cfg.seed,
            keys: plan.key_seed,
        },
        preset: plan.preset.zip(params).map(|(p, params)| PresetRecord {
            name: p.name().into(),
            degree: params.degree(),
            modulus_bits: params.ring().total_bits(),
            log2_scale: params.log2_scale(),
            sigma: params.sigma(),
            depth: params.depth(),
            chain: params.ring().chain().to_vec(),
            special: params.ring().special(),
        }),
        summary: SummaryRecord {
            updates,
            max_error,
            final_error,
            bound_pass: report.as_ref().map(|r| r.pass),
        },
        config: cfg,
    };
    write_text(out, "manifest.toml", &to_toml(&manifest)?, &mut files)?;

    Ok(RunSummary {
        mode: cfg.mode,
        backend: plan.backend,
        preset: plan.preset,
        updates,
        max_error,
        final_error,
        report,
        files,
    })
}
