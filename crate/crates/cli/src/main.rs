use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode, Stdio};

use clap::{Args, Parser, Subcommand};
use encrl::experiment::{
    bench, list_presets, run_experiment, AsyncOrder, BackendChoice, ExperimentConfig, Mode,
    Preset, RunSummary, MIN_BENCH_UPDATES,
};
use encrl::hebackend::NoiseMode;
use encrl::mdp::GridConfig;
use encrl::protocol::serve;

/// Output root used when `--out` is not given.
const OUT_ROOT_VAR: &str = "ENCRL_OUT_ROOT";

/// Exit status of a run whose bound check failed.
const BOUND_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "encrl", version, about = "Reinforcement learning over CKKS encryption")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its CSV tables and manifest.
    Run(RunArgs),
    /// Print the encryption presets.
    ListPresets,
    /// Time the phases of learning updates.
    Bench(BenchArgs),
    /// Evaluate client requests as the cloud.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file, or the manifest of an earlier run. Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// vi-sync, vi-sync-noisy, vi-async, vi-async-noisy, td0, sarsa or z.
    #[arg(long)]
    algo: Option<Mode>,
    /// exact, noise or encrypted.
    #[arg(long)]
    backend: Option<BackendChoice>,
    /// desk, paper-td0 or paper-z.
    #[arg(long)]
    preset: Option<Preset>,
    /// Injected noise level of the noise backend.
    #[arg(long)]
    eps: Option<f64>,
    /// uniform or adversarial.
    #[arg(long)]
    noise_mode: Option<NoiseMode>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    max_updates: Option<usize>,
    /// Value-iteration sweeps.
    #[arg(long)]
    iterations: Option<usize>,
    /// round-robin or explore.
    #[arg(long)]
    order: Option<AsyncOrder>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid-world TOML file.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Pad cloud results with an added zero and a multiplication by one.
    #[arg(long)]
    circuit_privacy: bool,
}

impl ConfigArgs {
    fn build(&self) -> encrl::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = self.algo {
            cfg.mode = m;
        }
        if self.backend.is_some() {
            cfg.backend = self.backend;
        }
        if self.preset.is_some() {
            cfg.preset = self.preset;
        }
        if let Some(e) = self.eps {
            cfg.eps = e;
        }
        if let Some(m) = self.noise_mode {
            cfg.noise_mode = m;
        }
        if let Some(path) = &self.grid {
            cfg.grid = GridConfig::from_file(path)?;
        }
        if let Some(g) = self.gamma {
            cfg.hyper.gamma = g;
            cfg.grid.gamma = g;
        }
        if let Some(n) = self.episodes {
            cfg.episodes = n;
        }
        if self.max_updates.is_some() {
            cfg.max_updates = self.max_updates;
        }
        if let Some(n) = self.iterations {
            cfg.iterations = n;
        }
        if let Some(o) = self.order {
            cfg.order = o;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.circuit_privacy |= self.circuit_privacy;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory; defaults to a per-run directory under
    /// $ENCRL_OUT_ROOT, or under ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Start a cloud in a child process and talk to it over loopback.
    #[arg(long, conflicts_with = "cloud")]
    two_process: bool,
    /// Address of an already running `encrl serve`.
    #[arg(long)]
    cloud: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = MIN_BENCH_UPDATES)]
    updates: usize,
    /// Directory for bench.toml.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
    /// Exit after this many clients.
    #[arg(long)]
    connections: Option<usize>,
}

fn default_out(cfg: &ExperimentConfig) -> encrl::Result<PathBuf> {
    let root = std::env::var_os(OUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    let backend = cfg.resolve()?.backend;
    Ok(root.join(format!("{}-{}-seed{}", cfg.mode, backend, cfg.seed)))
}

/// A cloud in a child process, killed when dropped.
struct ChildCloud {
    child: Child,
    addr: String,
}

impl ChildCloud {
    fn spawn() -> encrl::Result<Self> {
        let exe = std::env::current_exe()?;
        let mut child = Command::new(exe)
            .args(["serve", "--listen", "127.0.0.1:0", "--connections", "1"])
            .stdout(Stdio::piped())
            .spawn()?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line)?;
        let Some(addr) = line.trim().strip_prefix("listening on ") else {
            let _ = child.kill();
            return Err(encrl::Error::Protocol(format!(
                "cloud process did not report an address: {line:?}"
            )));
        };
        let addr = addr.to_string();
        Ok(Self { child, addr })
    }

    fn finish(mut self) -> encrl::Result<()> {
        let status = self.child.wait()?;
        if !status.success() {
            return Err(encrl::Error::Protocol(format!("cloud process exited with {status}")));
        }
        Ok(())
    }
}

impl Drop for ChildCloud {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

fn print_summary(s: &RunSummary, out: &Path) {
    println!("mode       {}", s.mode);
    println!("backend    {}", s.backend);
    if let Some(p) = s.preset {
        println!("preset     {p}");
    }
    println!("updates    {}", s.updates);
    println!("max error  {:e}", s.max_error);
    println!("last error {:e}", s.final_error);
    if let Some(r) = &s.report {
        println!(
            "bound      {} observed {:e} -> {}",
            r.bound,
            r.observed,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    println!("output     {}", out.display());
}

fn run(args: RunArgs) -> encrl::Result<ExitCode> {
    let cfg = args.config.build()?;
    // reject bad configs before starting anything
    cfg.resolve()?;
    let out = match args.out {
        Some(o) => o,
        None => default_out(&cfg)?,
    };
    let summary = if args.two_process {
        let cloud = ChildCloud::spawn()?;
        let summary = run_experiment(&cfg, &out, Some(&cloud.addr))?;
        cloud.finish()?;
        summary
    } else {
        run_experiment(&cfg, &out, args.cloud.as_deref())?
    };
    print_summary(&summary, &out);
    Ok(match &summary.report {
        Some(r) if !r.pass => ExitCode::from(BOUND_FAILED),
        _ => ExitCode::SUCCESS,
    })
}

fn presets() -> encrl::Result<ExitCode> {
    println!(
        "{:<10} {:>6} {:>13} {:>7} {:>6} {:>6}  circuits",
        "preset", "N", "modulus bits", "sigma", "scale", "depth"
    );
    for p in list_presets()? {
        println!(
            "{:<10} {:>6} {:>13.1} {:>7.3} {:>6} {:>6}  {}",
            p.name, p.degree, p.modulus_bits, p.sigma, p.log2_scale, p.depth_budget, p.circuits
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: BenchArgs) -> encrl::Result<ExitCode> {
    let cfg = args.config.build()?;
    let r = bench(&cfg, args.updates, args.out.as_deref())?;
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    println!("{} on {} over {} updates", r.mode, r.backend, r.updates);
    if let (Some(p), Some(n)) = (r.preset, r.degree) {
        println!("preset {p}, N = {n}");
    }
    println!("encode    {:>10.3} ms", ms(r.encode));
    println!("encrypt   {:>10.3} ms", ms(r.encrypt));
    println!("evaluate  {:>10.3} ms", ms(r.evaluate));
    println!("decrypt   {:>10.3} ms", ms(r.decrypt));
    println!("client    {:>10.3} ms", ms(r.client()));
    println!("total     {:>10.3} ms", ms(r.per_update()));
    println!(
        "limit     {:>10.3} ms ({})",
        ms(r.limit),
        if r.within_limit() { "met" } else { "exceeded" }
    );
    Ok(ExitCode::SUCCESS)
}

fn run_serve(args: ServeArgs) -> encrl::Result<ExitCode> {
    let listener = TcpListener::bind(&args.listen)?;
    println!("listening on {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    serve(&listener, args.connections)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(a) => run(a),
        Cmd::ListPresets => presets(),
        Cmd::Bench(a) => run_bench(a),
        Cmd::Serve(a) => run_serve(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
