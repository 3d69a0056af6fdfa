//! Per-phase wall time of learning updates.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{BackendChoice, ExperimentConfig, Mode, Preset};
use crate::ckks::Ciphertext;
use crate::hebackend::{Backend, EncryptedBackend};
use crate::protocol::{ClientRequest, Cloud, Role, RoleKind, Rule, TdInputs, ZInputs};
use crate::tdlearn::{run_learning, EngineOutput, UpdateEngine};
use crate::{Error, Result};

/// Fewest updates a benchmark averages over.
pub const MIN_BENCH_UPDATES: usize = 100;

/// Target for one encrypted update at the desk preset.
pub const UPDATE_TIME_LIMIT: Duration = Duration::from_secs(1);

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Phases {
    encode: Duration,
    encrypt: Duration,
    evaluate: Duration,
    decrypt: Duration,
}

fn timed<T>(acc: &mut Duration, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    *acc += t.elapsed();
    out
}

enum Inner {
    Plain(Backend),
    Encrypted {
        keys: Box<EncryptedBackend>,
        cloud: Cloud,
        rng: ChaCha8Rng,
        next_id: u64,
    },
}

/// Runs every circuit locally, timing each phase separately.
struct TimedEngine {
    inner: Inner,
    phases: Phases,
}

impl TimedEngine {
    fn encrypted_call(&mut self, rule: Rule, degree: u32, inputs: &[(RoleKind, f64)]) -> Result<EngineOutput> {
        let Inner::Encrypted {
            keys,
            cloud,
            rng,
            next_id,
        } = &mut self.inner
        else {
            unreachable!("plain engines never reach here")
        };
        let ctx = keys.ctx.clone();
        let p = &mut self.phases;
        let scale = ctx.params().log2_scale();
        let top = ctx.max_level();
        let pts = timed(&mut p.encode, || {
            inputs
                .iter()
                .map(|&(_, x)| ctx.encode_scalar(x, scale, top))
                .collect::<Result<Vec<_>>>()
        })?;
        let cts = timed(&mut p.encrypt, || {
            pts.iter()
                .map(|pt| ctx.encrypt_symmetric(pt, &keys.keys.secret, rng))
                .collect::<Result<Vec<Ciphertext>>>()
        })?;
        *next_id += 1;
        let req = ClientRequest {
            id: *next_id,
            rule,
            degree,
            roles: inputs
                .iter()
                .map(|&(kind, _)| Role::new(kind))
                .zip(cts)
                .collect(),
        };
        let resp = timed(&mut p.evaluate, || cloud.evaluate(&req))?;
        let ct = &resp.results[0];
        let value = timed(&mut p.decrypt, || ctx.decrypt_scalar(ct, &keys.keys.secret))?;
        Ok(EngineOutput {
            value,
            epsilon: ct.noise_epsilon(),
        })
    }
}

impl UpdateEngine for TimedEngine {
    fn name(&self) -> &'static str {
        match &self.inner {
            Inner::Plain(b) => b.name(),
            Inner::Encrypted { .. } => "encrypted",
        }
    }

    fn td(&mut self, rule: Rule, x: &TdInputs) -> Result<EngineOutput> {
        if let Inner::Plain(b) = &mut self.inner {
            return timed(&mut self.phases.evaluate, || b.td(rule, x));
        }
        self.encrypted_call(
            rule,
            0,
            &[
                (RoleKind::Value, x.value),
                (RoleKind::NextValue, x.next_value),
                (RoleKind::Alpha, x.alpha),
                (RoleKind::Gamma, x.gamma),
                (RoleKind::Reward, x.reward),
            ],
        )
    }

    fn z(&mut self, x: &ZInputs, degree: usize) -> Result<EngineOutput> {
        if let Inner::Plain(b) = &mut self.inner {
            return timed(&mut self.phases.evaluate, || b.z(x, degree));
        }
        self.encrypted_call(
            Rule::Z,
            degree as u32,
            &[
                (RoleKind::Value, x.value),
                (RoleKind::NextValue, x.next_value),
                (RoleKind::Alpha, x.alpha),
                (RoleKind::Cost, x.cost),
            ],
        )
    }
}

/// Mean wall time per update of each phase.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub mode: Mode,
    pub backend: BackendChoice,
    pub preset: Option<Preset>,
    pub degree: Option<usize>,
    pub updates: usize,
    #[serde(serialize_with = "seconds")]
    pub encode: Duration,
    #[serde(serialize_with = "seconds")]
    pub encrypt: Duration,
    #[serde(serialize_with = "seconds")]
    pub evaluate: Duration,
    #[serde(serialize_with = "seconds")]
    pub decrypt: Duration,
    #[serde(serialize_with = "seconds")]
    pub limit: Duration,
}

fn seconds<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl BenchReport {
    /// Encode, encrypt and decrypt.
    pub fn client(&self) -> Duration {
        self.encode + self.encrypt + self.decrypt
    }

    pub fn per_update(&self) -> Duration {
        self.client() + self.evaluate
    }

    pub fn within_limit(&self) -> bool {
        self.per_update() < self.limit
    }

    pub fn to_toml_string(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Record<'a> {
            #[serde(flatten)]
            report: &'a BenchReport,
            client: f64,
            per_update: f64,
            within_limit: bool,
        }
        toml::to_string(&Record {
            report: self,
            client: self.client().as_secs_f64(),
            per_update: self.per_update().as_secs_f64(),
            within_limit: self.within_limit(),
        })
        .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Times `updates` (at least [`MIN_BENCH_UPDATES`]) learning updates of
/// `cfg`, writing `bench.toml` into `out` when given. The plain backends
/// spend all their time in the evaluate phase.
pub fn bench(cfg: &ExperimentConfig, updates: usize, out: Option<&Path>) -> Result<BenchReport> {
    let plan = cfg.resolve()?;
    let mut lc = cfg.learner_config().ok_or_else(|| {
        Error::Config(format!("{} is not a learning mode and cannot be benchmarked", cfg.mode))
    })?;
    let updates = updates.max(MIN_BENCH_UPDATES);
    lc.max_updates = Some(updates);
    let world = cfg.world()?;

    let mut degree = None;
    let inner = match plan.backend {
        BackendChoice::Exact => Inner::Plain(Backend::exact()),
        BackendChoice::Noise => {
            Inner::Plain(Backend::bounded_noise(cfg.eps, cfg.noise_mode, plan.key_seed)?)
        }
        BackendChoice::Encrypted => {
            let preset = plan.preset.unwrap_or(Preset::Desk);
            let keys = EncryptedBackend::new(preset.params(plan.depth)?, plan.key_seed)?;
            degree = Some(keys.ctx.degree());
            let cloud = Cloud::new(
                keys.ctx.clone(),
                keys.keys.evaluation.clone(),
                cfg.circuit_privacy,
            )?;
            Inner::Encrypted {
                keys: Box::new(keys),
                cloud,
                rng: ChaCha8Rng::seed_from_u64(plan.key_seed),
                next_id: 0,
            }
        }
    };
    let mut engine = TimedEngine {
        inner,
        phases: Phases::default(),
    };
    let state = run_learning(&world, &lc, Some(&mut engine))?;
    let done = state.updates();
    if done == 0 {
        return Err(Error::Config("the run made no updates".into()));
    }
    let mean = |d: Duration| d / done as u32;
    let p = engine.phases;
    let report = BenchReport {
        mode: cfg.mode,
        backend: plan.backend,
        preset: plan.preset,
        degree,
        updates: done,
        encode: mean(p.encode),
        encrypt: mean(p.encrypt),
        evaluate: mean(p.evaluate),
        decrypt: mean(p.decrypt),
        limit: UPDATE_TIME_LIMIT,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("bench.toml"), report.to_toml_string()?)?;
    }
    Ok(report)
}
