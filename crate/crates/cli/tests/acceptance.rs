//! End-to-end checks of the library's guarantees. Prints one PASS or FAIL
//! line per check and exits nonzero if any fails. Extra arguments select
//! checks by substring.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use encrl::ckks::{CkksContext, Evaluator, KeySet};
use encrl::dp::{bellman_backup, q_backup, vi_sync};
use encrl::experiment::{run_learner, run_value_iteration, AsyncOrder, ExperimentConfig, Mode, Preset};
use encrl::hebackend::{Arithmetic, Backend, NoiseMode, NoiseModel};
use encrl::mdp::{estimate_model, Mdp, Transition};
use encrl::protocol::{taylor_remainder, td_circuit};
use encrl::protocol::samples::{reencode_sample, sample_messages};
use encrl::protocol::SetupMessage;
use encrl::tdlearn::{greedy_rollout, run_learning};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const SEEDS: u64 = 100;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn vi_config(mode: Mode, seed: u64, noise: NoiseMode) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(mode);
    cfg.seed = seed;
    cfg.noise_mode = noise;
    cfg
}

fn sync_bound() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut bound = 0.0;
    let mut passed = 0;
    for noise in [NoiseMode::Uniform, NoiseMode::Adversarial] {
        for seed in 0..SEEDS {
            let out = run_value_iteration(&vi_config(Mode::ViSyncNoisy, seed, noise), None)
                .map_err(|e| e.to_string())?;
            worst = worst.max(out.report.observed);
            bound = out.report.bound;
            passed += usize::from(out.report.pass && out.report.bound <= 0.1 + 1e-12);
        }
    }
    let elapsed = start.elapsed();
    ensure(passed == 2 * SEEDS as usize, || {
        format!("{passed}/200 runs within {bound}, worst {worst:e}")
    })?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "200/200 runs, worst gap {worst:.4e} <= {bound:.4}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn async_bound() -> Outcome {
    let mut notes = Vec::new();
    for order in [AsyncOrder::RoundRobin, AsyncOrder::Explore] {
        let mut passed = 0;
        let mut worst_ratio = 0.0f64;
        let mut m_max = 0;
        for seed in 0..SEEDS {
            let mut cfg = vi_config(Mode::ViAsyncNoisy, seed, NoiseMode::Uniform);
            cfg.order = order;
            let out = run_value_iteration(&cfg, None).map_err(|e| e.to_string())?;
            let m = out.sweeps.as_ref().map_or(0, |t| t.m);
            let expect = m as f64 * out.eps / (1.0 - cfg.hyper.gamma);
            ensure((out.report.bound - expect).abs() <= 1e-9 * expect, || {
                format!("seed {seed}: bound {} is not M eps/(1-gamma) = {expect}", out.report.bound)
            })?;
            passed += usize::from(out.report.pass);
            worst_ratio = worst_ratio.max(out.report.observed / out.report.bound);
            m_max = m_max.max(m);
        }
        ensure(passed == SEEDS as usize, || format!("{order:?}: {passed}/100 within bound"))?;
        notes.push(format!("{order:?} 100/100 (M <= {m_max}, worst gap/bound {worst_ratio:.2e})"));
    }
    Ok(notes.join(", "))
}

fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize) -> Mdp {
    let n = rng.gen_range(4..=max_states);
    let a = rng.gen_range(2..=4);
    let gamma = rng.gen_range(0.5..0.95);
    Mdp::random(n, a, gamma, rng).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, range: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-range..range)).collect()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let m = random_mdp(&mut rng, 8);
        let v = random_vec(&mut rng, m.n_states(), 10.0);
        let w = random_vec(&mut rng, m.n_states(), 10.0);
        let lhs = sup(&bellman_backup(&m, &v).unwrap(), &bellman_backup(&m, &w).unwrap());
        let rhs = m.gamma() * sup(&v, &w);
        if lhs > rhs + 1e-12 {
            violations += 1;
        }
        worst = worst.max(lhs / rhs);
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("0/10000 violations, largest ratio to gamma-scaled input gap {worst:.4}"))
}

fn noisy_max() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for trial in 0..10_000u64 {
        let eps = rng.gen_range(1e-6..1.0);
        let mode = if trial % 2 == 0 {
            NoiseMode::Uniform
        } else {
            NoiseMode::Adversarial
        };
        let mut noise = NoiseModel::new(eps, mode, trial).unwrap();
        let n = rng.gen_range(1..=9);
        let x = random_vec(&mut rng, n, 10.0);
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let noisy = x
            .iter()
            .map(|&xi| noise.perturb(xi))
            .fold(f64::NEG_INFINITY, f64::max);
        if (noisy - max).abs() > eps * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok("0/10000 violations".into())
}

/// Gaussian elimination with partial pivoting on a dense row-major system.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

fn vi_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = random_mdp(&mut rng, 8);
        let n = m.n_states();
        let (v, _) = vi_sync(&m, &vec![0.0; n], 1e-13, 100_000).map_err(|e| e.to_string())?;
        let policy = q_backup(&m, &v).unwrap().greedy_policy();
        let mut a = vec![vec![0.0; n]; n];
        let mut r = vec![0.0; n];
        for s in 0..n {
            a[s][s] += 1.0;
            for t in m.transitions(s, policy[s]) {
                a[s][t.next] -= m.gamma() * t.prob;
                r[s] += t.prob * t.reward;
            }
        }
        worst = worst.max(sup(&v, &gauss_solve(a, r)));
    }
    ensure(worst <= 1e-8, || format!("largest difference {worst:e}"))?;
    Ok(format!("20 MDPs, largest difference {worst:.2e}"))
}

fn ckks_correctness() -> Outcome {
    let params = Preset::Desk.params(2).map_err(|e| e.to_string())?;
    let ctx = CkksContext::new(params.clone()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let keys = ctx.keygen(&mut rng);
    let slots = ctx.slots();

    let mut round_trip = 0.0f64;
    for _ in 0..1000 {
        let x = random_vec(&mut rng, slots, 10.0);
        let ct = ctx
            .encrypt_values(&x, &keys.public, &mut rng)
            .map_err(|e| e.to_string())?;
        round_trip = round_trip.max(sup(&x, &ctx.decrypt_values(&ct, &keys.secret).unwrap()));
    }
    ensure(round_trip <= 1e-6, || format!("round trip error {round_trip:e}"))?;

    let mut exact = Backend::exact();
    let mut enc = Backend::encrypted(params, 5).map_err(|e| e.to_string())?;
    let mut circuit = 0.0f64;
    for _ in 0..1000 {
        let inputs = [
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let run = |b: &mut Backend| -> encrl::Result<f64> {
            let x = inputs.iter().map(|&v| b.encrypt(v)).collect::<encrl::Result<Vec<_>>>()?;
            let out = td_circuit(b, &x[0], &x[1], &x[2], &x[3], &x[4])?;
            b.decrypt(&out)
        };
        let want = run(&mut exact).map_err(|e| e.to_string())?;
        let got = run(&mut enc).map_err(|e| e.to_string())?;
        circuit = circuit.max((want - got).abs());
    }
    ensure(circuit <= 1e-4, || format!("update circuit error {circuit:e}"))?;

    let (trials, violations) = operation_trials(&ctx, &keys, &mut rng)?;
    ensure(violations == 0, || format!("{violations}/{trials} operations above their bound"))?;
    Ok(format!(
        "round trip {round_trip:.2e}, update circuit {circuit:.2e}, {trials}/{trials} operations within bound"
    ))
}

fn zip_with(xa: &[f64], xb: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    xa.iter().zip(xb).map(|(&p, &q)| f(p, q)).collect()
}

/// Random operations on a pool of ciphertexts with known plaintexts. Each
/// result is decrypted and compared with the bound it carries, then may
/// replace a pool entry so that later trials see lower levels.
fn operation_trials(
    ctx: &Arc<CkksContext>,
    keys: &KeySet,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, usize), String> {
    let mut eval =
        Evaluator::new(ctx.clone(), keys.evaluation.clone()).map_err(|e| e.to_string())?;
    let slots = ctx.slots();
    let fresh = 16;
    let mut pool = Vec::new();
    for _ in 0..64 {
        let x = random_vec(rng, slots, 3.0);
        pool.push((ctx.encrypt_values(&x, &keys.public, rng).unwrap(), x));
    }
    let trials = 10_000;
    let mut violations = 0;
    for _ in 0..trials {
        let (a, xa) = &pool[rng.gen_range(0..pool.len())];
        let (b, xb) = &pool[rng.gen_range(0..pool.len())];
        let c = rng.gen_range(-3.0..3.0);
        let deep = a.level() > 0 && b.level() > 0;
        let (ct, want) = match rng.gen_range(0..6) {
            0 => (Arithmetic::add(&mut eval, a, b), zip_with(xa, xb, |p, q| p + q)),
            1 => (Arithmetic::sub(&mut eval, a, b), zip_with(xa, xb, |p, q| p - q)),
            2 => (Arithmetic::neg(&mut eval, a), zip_with(xa, xb, |p, _| -p)),
            3 => (Arithmetic::add_const(&mut eval, a, c), zip_with(xa, xb, |p, _| p + c)),
            4 if deep => (Arithmetic::mul_const(&mut eval, a, c), zip_with(xa, xb, |p, _| p * c)),
            5 if deep => (Arithmetic::mul(&mut eval, a, b), zip_with(xa, xb, |p, q| p * q)),
            _ => (Arithmetic::add(&mut eval, a, b), zip_with(xa, xb, |p, q| p + q)),
        };
        let ct = ct.map_err(|e| e.to_string())?;
        let got = ctx.decrypt_values(&ct, &keys.secret).map_err(|e| e.to_string())?;
        if sup(&want, &got) > ct.noise_epsilon() {
            violations += 1;
        }
        let small = want.iter().all(|x| x.abs() <= 10.0);
        if small && ct.level() > 0 && rng.gen_bool(0.25) {
            let i = rng.gen_range(fresh..pool.len());
            pool[i] = (ct, want);
        }
    }
    Ok((trials, violations))
}

fn paper_presets() -> Outcome {
    let mut notes = Vec::new();
    for (mode, preset) in [(Mode::Td0, Preset::PaperTd0), (Mode::Z, Preset::PaperZ)] {
        let mut cfg = ExperimentConfig::new(mode);
        cfg.preset = Some(preset);
        cfg.max_updates = Some(100);
        let start = Instant::now();
        let state = run_learner(&cfg, None).map_err(|e| format!("{preset}: {e}"))?;
        let err = state.trace().max_error();
        ensure(state.updates() == 100, || format!("{preset}: {} updates", state.updates()))?;
        ensure(err <= 1e-3, || format!("{preset}: shadow error {err:e}"))?;
        notes.push(format!(
            "{preset} {mode} 100 updates, error {err:.1e}, {:.1} s",
            start.elapsed().as_secs_f64()
        ));
    }
    Ok(notes.join(", "))
}

fn encrypted_learning() -> Outcome {
    const UPDATES: usize = 30_000;
    let mut notes = Vec::new();
    for mode in [Mode::Td0, Mode::Sarsa, Mode::Z] {
        let mut cfg = ExperimentConfig::new(mode);
        cfg.preset = Some(Preset::Desk);
        cfg.max_updates = Some(UPDATES);
        let start = Instant::now();
        let state = run_learner(&cfg, None).map_err(|e| format!("{mode}: {e}"))?;
        let elapsed = start.elapsed();
        let lc = cfg.learner_config().unwrap();
        let plain = run_learning(&cfg.world().unwrap(), &lc, None).map_err(|e| e.to_string())?;
        let trace = state.trace();
        let worst = trace.max_error();
        let last = trace.last().map_or(f64::INFINITY, |e| e.max_error);
        let mut final_limit = 1e-4;
        if mode == Mode::Z {
            final_limit += taylor_remainder(lc.hyper.taylor_degree, lc.hyper.max_cost);
        }
        ensure(state.updates() == UPDATES, || format!("{mode}: {} updates", state.updates()))?;
        ensure(worst <= 1e-3, || format!("{mode}: trace reaches {worst:e}"))?;
        ensure(last <= final_limit, || format!("{mode}: final error {last:e} above {final_limit:e}"))?;
        ensure(state.fingerprint() == plain.fingerprint(), || {
            format!("{mode}: encrypted run consumed different samples")
        })?;
        notes.push(format!(
            "{mode} max {worst:.1e} final {last:.1e} in {:.0} s",
            elapsed.as_secs_f64()
        ));
    }
    Ok(notes.join(", "))
}

fn learning_sanity() -> Outcome {
    for mode in [Mode::Td0, Mode::Sarsa] {
        for seed in 0..10 {
            let mut cfg = ExperimentConfig::new(mode);
            cfg.seed = seed;
            let world = cfg.world().unwrap();
            let lc = cfg.learner_config().unwrap();
            let state = run_learning(&world, &lc, None).map_err(|e| e.to_string())?;
            let r = greedy_rollout(&state, &world, lc.hyper.gamma);
            ensure(r.reached_goal && !r.hit_trap, || {
                format!("{mode} seed {seed}: path {:?}", r.states)
            })?;
        }
    }
    Ok("td0 and sarsa reach the goal without a trap in 10/10 seeds".into())
}

fn known_kernel() -> Mdp {
    let probs = [
        [[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]],
        [[0.3, 0.4, 0.3], [0.0, 0.5, 0.5]],
        [[0.25, 0.25, 0.5], [0.9, 0.05, 0.05]],
    ];
    let rows = probs
        .iter()
        .flatten()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(next, &prob)| Transition {
                    next,
                    prob,
                    reward: next as f64 - 1.0,
                })
                .collect()
        })
        .collect();
    Mdp::new(3, 2, rows, 0.9, vec![false; 3]).unwrap()
}

fn model_estimation() -> Outcome {
    let m = known_kernel();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..100_000)
            .map(|_| {
                let s = rng.gen_range(0..3);
                let a = rng.gen_range(0..2);
                m.step(s, a, &mut rng)
            })
            .collect::<encrl::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let est = estimate_model(&samples, 3, 2, 0.9).map_err(|e| e.to_string())?;
        for s in 0..3 {
            for a in 0..2 {
                for next in 0..3 {
                    worst = worst.max((est.mdp.prob(s, a, next) - m.prob(s, a, next)).abs());
                }
            }
        }
    }
    ensure(worst <= 0.05, || format!("largest deviation {worst}"))?;
    Ok(format!("10/10 seeds, largest deviation {worst:.4}"))
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/v1")
}

fn run_cli(out: &Path, extra: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_encrl"))
        .args(["run", "--algo", "td0", "--backend", "encrypted", "--max-updates", "1000"])
        .arg("--out")
        .arg(out)
        .args(extra)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("encrl exited with {status}"))
}

fn protocol() -> Outcome {
    let dir = golden_dir();
    let samples = sample_messages().map_err(|e| e.to_string())?;
    let setup = fs::read(dir.join("setup.bin")).map_err(|e| e.to_string())?;
    let setup = SetupMessage::from_bytes(&setup).map_err(|e| e.to_string())?;
    let ctx = CkksContext::new(setup.params).map_err(|e| e.to_string())?;
    for (name, bytes) in &samples {
        let stored = fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(stored == *bytes, || format!("{name} differs from its fixture"))?;
        let again = reencode_sample(&ctx, name, &stored).map_err(|e| e.to_string())?;
        ensure(again == stored, || format!("{name} does not re-encode to itself"))?;
    }

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (one, two) = (tmp.path().join("one"), tmp.path().join("two"));
    run_cli(&one, &[])?;
    run_cli(&two, &["--two-process"])?;
    for file in ["values.csv", "trace.csv"] {
        let a = fs::read(one.join(file)).map_err(|e| e.to_string())?;
        let b = fs::read(two.join(file)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{file} differs between in-process and two-process runs"))?;
    }
    Ok(format!(
        "{} fixtures bit-exact, 1000-update td0 tables identical over loopback",
        samples.len()
    ))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 11] = [
        ("synchronous noisy value iteration bound", sync_bound),
        ("asynchronous noisy value iteration bound", async_bound),
        ("backup contraction", contraction),
        ("noisy max perturbation", noisy_max),
        ("value iteration against linear solve", vi_oracle),
        ("ckks correctness at desk size", ckks_correctness),
        ("large presets run", paper_presets),
        ("encrypted against plain learning", encrypted_learning),
        ("greedy policy reaches the goal", learning_sanity),
        ("model estimation", model_estimation),
        ("wire format and loopback", protocol),
    ];
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
