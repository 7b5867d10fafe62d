//! Command-line front end.
//!
//! Subcommands bind configuration files to the simulation and comparison
//! pipelines:
//! - `simulate`: run Z, Z*, Z^H and write trajectory exports;
//! - `compare`: run the three-process equivalence study and write the
//!   report CSV set (exit 0 iff every criterion passes);
//! - `kernel`: tabulate the analytic one-point kernels on a z grid;
//! - `correlate`: empirical autocovariance against the covariance
//!   quadrature.
//!
//! Exit codes: 0 success/pass, 1 criterion failure, 2 usage or
//! configuration error. Environment overrides: RUN_SEED, RUN_WORKERS
//! (both yield to explicit flags).

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heterou::engine::{self, EnsembleParams};
use heterou::export;
use heterou::harness;
use heterou::populations::PopulationSpec;
use heterou::specfun::{self, KernelParams};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "heterou", version, about = "Heterogeneous Ornstein-Uhlenbeck ensemble toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate Z, Z* and Z^H and export their trajectories.
    Simulate(SimArgs),
    /// Run the three-process equivalence study.
    Compare(CompareArgs),
    /// Tabulate the analytic one-point kernels on a z grid.
    Kernel(KernelArgs),
    /// Compare empirical autocovariance with the covariance quadrature.
    Correlate(CorrelateArgs),
}

#[derive(Args)]
struct CommonRunArgs {
    /// Configuration file (key-value text with sections).
    #[arg(long)]
    config: PathBuf,
    /// Seed override (also RUN_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; all artifacts are written beneath it.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Worker threads (also RUN_WORKERS); 0 = all cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Trajectory format: csv or binary (overrides the config).
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonRunArgs,
}

#[derive(Args)]
struct KernelArgs {
    /// M-Wright mixing order β ∈ (0, 1].
    #[arg(long)]
    beta: f64,
    /// Self-similarity exponent H ∈ (0, 1).
    #[arg(long = "H")]
    h: f64,
    /// Time at which to evaluate the kernels.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    zmin: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    zmax: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Output CSV path.
    #[arg(long, default_value = "kernel.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// (t,s) pairs as "t:s,t:s,..." (overrides the config's list).
    #[arg(long)]
    pairs: Option<String>,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Kernel(args) => cmd_kernel(args),
        Command::Correlate(args) => cmd_correlate(args),
    }
}

fn env_u64(name: &str) -> Result<Option<u64>, String> {
    match std::env::var(name) {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|e| format!("{name}={v}: {e}")),
        Err(_) => Ok(None),
    }
}

/// Loads config applying flag > env > file precedence for seed, and builds
/// the ensemble parameters.
fn load(common: &CommonRunArgs) -> Result<(RunConfig, String, EnsembleParams), String> {
    let (mut cfg, raw) = RunConfig::from_path(&common.config).map_err(|e| e.to_string())?;
    if let Some(seed) = env_u64("RUN_SEED")? {
        cfg.seed = seed;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let params = cfg.ensemble_params().map_err(|e| e.to_string())?;
    Ok((cfg, raw, params))
}

fn build_pool(common: &CommonRunArgs, cfg: &RunConfig) -> Result<rayon::ThreadPool, String> {
    let workers = match common.workers {
        Some(w) => Some(w),
        None => match env_u64("RUN_WORKERS")? {
            Some(w) => Some(w as usize),
            None => cfg.workers,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| e.to_string())
}

fn ensure_out_dir(dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))
}

fn write_echo(dir: &Path, raw: &str) -> Result<(), String> {
    std::fs::write(dir.join("config_echo.cfg"), raw).map_err(|e| e.to_string())
}

fn cmd_simulate(args: SimArgs) -> Result<ExitCode, String> {
    let (cfg, raw, params) = load(&args.common)?;
    let pool = build_pool(&args.common, &cfg)?;
    ensure_out_dir(&args.common.out)?;
    write_echo(&args.common.out, &raw)?;

    let format = args
        .format
        .or_else(|| cfg.output.trajectory_format.clone())
        .unwrap_or_else(|| "csv".to_string());
    if format != "csv" && format != "binary" {
        return Err(format!("format must be csv or binary, got {format}"));
    }

    let batches = pool.install(|| -> Result<_, String> {
        Ok(vec![
            engine::simulate_z(&params).map_err(|e| e.to_string())?,
            engine::simulate_zstar(&params).map_err(|e| e.to_string())?,
            engine::simulate_zh(&params).map_err(|e| e.to_string())?,
        ])
    })?;
    for batch in &batches {
        let name = match format.as_str() {
            "csv" => format!("{}.csv", batch.process.as_str().to_lowercase()),
            _ => format!("{}.bin", batch.process.as_str().to_lowercase()),
        };
        let path = args.common.out.join(name);
        let res = match format.as_str() {
            "csv" => export::write_batch_csv(&path, batch),
            _ => export::write_batch_binary(&path, batch),
        };
        res.map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    println!(
        "wrote {} trajectory files to {}",
        batches.len(),
        args.common.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode, String> {
    let (cfg, raw, params) = load(&args.common)?;
    let pool = build_pool(&args.common, &cfg)?;
    ensure_out_dir(&args.common.out)?;
    write_echo(&args.common.out, &raw)?;

    let times = cfg.equivalence_times();
    let mut indices = Vec::with_capacity(times.len());
    for &t in &times {
        let idx = params
            .t_grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| format!("equivalence time {t} is not on the time grid"))?;
        indices.push(idx);
    }

    let outcome = pool
        .install(|| harness::run_equivalence(&params, &indices, cfg.significance(), &raw))
        .map_err(|e| e.to_string())?;
    let report = &outcome.report;

    let out = &args.common.out;
    if cfg.output.write_trajectories.unwrap_or(false) {
        for batch in &outcome.batches {
            let path = out.join(format!("{}.csv", batch.process.as_str().to_lowercase()));
            export::write_batch_csv(&path, batch)
                .map_err(|e| format!("writing {}: {e}", path.display()))?;
        }
    }
    export::write_ks_csv(&out.join("ks.csv"), report).map_err(|e| e.to_string())?;
    export::write_variance_csv(&out.join("variance.csv"), report).map_err(|e| e.to_string())?;
    export::write_scaling_csv(&out.join("scaling.csv"), report).map_err(|e| e.to_string())?;
    export::write_criteria_csv(&out.join("criteria.csv"), report).map_err(|e| e.to_string())?;
    export::write_resolved_txt(&out.join("resolved.txt"), report).map_err(|e| e.to_string())?;
    if let Some(g0) = cfg.ensemble.gamma0 {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new()
            .append(true)
            .open(out.join("resolved.txt"))
            .map_err(|e| e.to_string())?;
        // Inert legacy parameter, recorded for provenance only.
        writeln!(f, "gamma0={}", export::fmt17(g0)).map_err(|e| e.to_string())?;
    }
    std::fs::write(
        out.join("run_meta.txt"),
        format!("wall_clock_seconds={}\n", report.wall_clock.as_secs_f64()),
    )
    .map_err(|e| e.to_string())?;

    let passed = report.flags.iter().filter(|f| f.pass).count();
    println!(
        "{}/{} criteria passed{}",
        passed,
        report.flags.len(),
        if report.inconclusive { " (inconclusive)" } else { "" }
    );
    if report.all_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_kernel(args: KernelArgs) -> Result<ExitCode, String> {
    if !(args.zmin < args.zmax) {
        return Err(format!(
            "zmin must be below zmax, got ({}, {})",
            args.zmin, args.zmax
        ));
    }
    if args.points < 2 {
        return Err("need at least two grid points".into());
    }
    let kp = KernelParams::new(args.h, args.beta, args.t).map_err(|e| e.to_string())?;
    // The mixture column carries the Λ population f = M_β as an
    // inverse-CDF table; it must agree with the closed form. β = 1 is the
    // degenerate limit M_1 = δ(λ - 1).
    let f = if args.beta == 1.0 {
        PopulationSpec::delta(1.0).map_err(|e| e.to_string())?
    } else {
        let grid = specfun::mwright_quantile_grid(args.beta, 4096).map_err(|e| e.to_string())?;
        PopulationSpec::tabulated(grid).map_err(|e| e.to_string())?
    };
    let vt = args.t.powf(2.0 * args.h);

    let mut out = String::from("z,t,density,kernel_id,beta,h\n");
    for i in 0..args.points {
        let z = args.zmin + (args.zmax - args.zmin) * i as f64 / (args.points - 1) as f64;
        let d_ggbm = specfun::ggbm_density(z, &kp).map_err(|e| e.to_string())?;
        let d_mix = specfun::mixture_density(z, vt, &f).map_err(|e| e.to_string())?;
        for (d, id) in [(d_ggbm, "ggbm"), (d_mix, "mixture")] {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                export::fmt17(z),
                export::fmt17(args.t),
                export::fmt17(d),
                id,
                export::fmt17(args.beta),
                export::fmt17(args.h),
            ));
        }
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_out_dir(parent)?;
        }
    }
    std::fs::write(&args.out, out).map_err(|e| e.to_string())?;
    println!("wrote kernel table to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_pairs(s: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut pairs = Vec::new();
    for item in s.split(',').filter(|p| !p.is_empty()) {
        let (a, b) = item
            .split_once(':')
            .ok_or_else(|| format!("pair `{item}` is not in t:s form"))?;
        let t: f64 = a.trim().parse().map_err(|e| format!("pair `{item}`: {e}"))?;
        let sv: f64 = b.trim().parse().map_err(|e| format!("pair `{item}`: {e}"))?;
        pairs.push((t, sv));
    }
    Ok(pairs)
}

fn cmd_correlate(args: CorrelateArgs) -> Result<ExitCode, String> {
    let (cfg, raw, params) = load(&args.common)?;
    let pool = build_pool(&args.common, &cfg)?;
    let pairs = match &args.pairs {
        Some(s) => parse_pairs(s)?,
        None => cfg.correlation.pairs.clone().unwrap_or_default(),
    };
    if pairs.is_empty() {
        return Err("no (t, s) pairs requested".into());
    }
    ensure_out_dir(&args.common.out)?;
    write_echo(&args.common.out, &raw)?;

    let rows = pool
        .install(|| harness::run_correlation(&params, &pairs))
        .map_err(|e| e.to_string())?;
    export::write_correlation_csv(&args.common.out.join("correlation.csv"), &rows)
        .map_err(|e| e.to_string())?;
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0f64, f64::max);
    println!(
        "wrote {} correlation rows (max relative error {:.3e})",
        rows.len(),
        worst
    );
    Ok(ExitCode::SUCCESS)
}
