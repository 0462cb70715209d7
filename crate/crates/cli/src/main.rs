use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use turbssm::harness::check::{self, Mutation, SuiteReport};
use turbssm::harness::config::INVERT_FRAME_CAP;
use turbssm::harness::tensor_file::{write_array, write_atomic};
use turbssm::harness::{bench, image_io, invert, simulate, RunConfig};
use turbssm::lpd::{LatentPhaseDistortion, RbnWeights};
use turbssm::scanorder::{build_permutation, ScanOrder};
use turbssm::{Error, TiltField};

const EXIT_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "turbssm", version, about = "Turbulence degradation simulator and state-space scan kernels")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "TURBSSM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a turbulence field and degrade an input sequence.
    Simulate(SimulateArgs),
    /// Time low-rank vs direct degradation and the scan/attention ladders.
    Bench,
    /// Recover tilt and latent statistics by gradient descent.
    Invert(InvertArgs),
    /// Run self-check suites and print a CSV summary.
    Check(CheckArgs),
    /// Scan-order utilities.
    ScanOrder {
        #[command(subcommand)]
        action: ScanOrderAction,
    },
    /// Scan oracle equivalence and complexity slopes as CSV.
    SsmCheck,
    /// Write seeded re-blur network weights.
    GenWeights(GenWeightsArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Tensor file, PNG, or directory of PNG frames.
    #[arg(long)]
    input: PathBuf,
    /// Compare against the diffraction-limited or direct reference.
    #[arg(long)]
    self_check: bool,
    /// Sequence id for the metrics row (default: input file stem).
    #[arg(long)]
    id: Option<String>,
}

#[derive(Args, Debug)]
struct InvertArgs {
    /// Generate a problem with known answer instead of reading inputs.
    #[arg(long, conflicts_with_all = ["degraded", "clean"])]
    synthetic: bool,
    #[arg(long, requires = "clean")]
    degraded: Option<PathBuf>,
    #[arg(long, requires = "degraded")]
    clean: Option<PathBuf>,
    /// Weight stem written by `gen-weights`; seeded weights otherwise.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Known tilt (`T×H×W×2` tensor) for RMSE reporting.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Suites to run.
    suites: Vec<String>,
    /// Run every suite.
    #[arg(long, conflicts_with = "suites")]
    all: bool,
    /// Inject a fault to show a suite can fail.
    #[arg(long, default_value = "none")]
    mutate: String,
}

#[derive(Subcommand, Debug)]
enum ScanOrderAction {
    /// Print `seq_pos,t,y,x` for every token.
    Dump {
        #[arg(long)]
        order: Option<ScanOrder>,
        #[arg(long, default_value_t = 1)]
        frames: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        block: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct GenWeightsArgs {
    /// Output stem; `.tsm` and `.json` are appended.
    #[arg(long, default_value = "rbn")]
    name: String,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

/// Input-stage errors: unreadable or oversized data.
fn input_err(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| match e {
        Error::Config(_) => Failure::new(EXIT_CONFIG, e.to_string()),
        _ => Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())),
    }
}

fn run_err(e: Error) -> Failure {
    let code = match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Diverged { .. } => EXIT_DIVERGED,
        Error::SizeCap(_) | Error::Format(_) | Error::Image(_) => EXIT_INPUT,
        _ => EXIT_FAILED,
    };
    Failure::new(code, e.to_string())
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io(io) => Failure::new(EXIT_CONFIG, format!("{}: {io}", p.display())),
            other => Failure::new(EXIT_CONFIG, other.to_string()),
        })?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<&Path, Failure> {
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Failure::new(EXIT_FAILED, format!("{}: {e}", cli.out_dir.display())))?;
    Ok(&cli.out_dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    write_atomic(path, text.as_bytes()).map_err(run_err)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<u8, Failure> {
    let cfg = load_config(cli)?;
    let image = image_io::read_sequence(&args.input).map_err(input_err(&args.input))?;
    let sim = simulate::build_simulator(&cfg).map_err(run_err)?;
    let out = simulate::simulate(&sim, &cfg, &image, cfg.seed, args.self_check).map_err(run_err)?;
    let id = args.id.clone().unwrap_or_else(|| {
        args.input.file_stem().map_or("sequence".into(), |s| s.to_string_lossy().into_owned())
    });
    simulate::write_outputs(&out, out_dir(cli)?, &id).map_err(run_err)?;
    println!("sequence_id,psnr,ssim\n{id},{:.6},{:.6}", out.meta.psnr_db, out.meta.ssim);
    match &out.meta.self_check {
        Some(c) if !c.passed => {
            eprintln!(
                "self-check failed against the {} reference: relative error {:.3e}, PSNR {:.2} dB",
                c.reference, c.relative_error, c.psnr_db
            );
            Ok(EXIT_FAILED)
        }
        _ => Ok(0),
    }
}

fn cmd_bench(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load_config(cli)?;
    let report = bench::run_bench(&cfg).map_err(run_err)?;
    let csv = report.to_csv();
    write_text(&out_dir(cli)?.join("bench.csv"), &csv)?;
    print!("{csv}");
    Ok(0)
}

fn cmd_invert(cli: &Cli, args: &InvertArgs) -> Result<u8, Failure> {
    let cfg = load_config(cli)?;
    let (clean, degraded, weights, truth) = if args.synthetic {
        let p = invert::synthetic_problem(&cfg.invert, cfg.seed).map_err(run_err)?;
        (p.clean, p.degraded, p.weights, Some(p.truth.tilt))
    } else {
        let (Some(dp), Some(cp)) = (&args.degraded, &args.clean) else {
            return Err(Failure::new(EXIT_CONFIG, "invert needs --synthetic or both --degraded and --clean"));
        };
        let degraded = image_io::read_sequence(dp).map_err(input_err(dp))?;
        let clean = image_io::read_sequence(cp).map_err(input_err(cp))?;
        let weights = match &args.weights {
            Some(stem) => RbnWeights::load(stem).map_err(input_err(stem))?,
            None => RbnWeights::random(cfg.invert.arch, cfg.seed.wrapping_add(17), cfg.invert.residual_scale)
                .map_err(run_err)?,
        };
        let truth = match &args.truth {
            Some(p) => {
                let arr = turbssm::harness::tensor_file::read_array(p).map_err(input_err(p))?;
                let arr = arr.into_dimensionality().map_err(|_| Failure::new(EXIT_INPUT, "truth must be rank 4"))?;
                Some(TiltField::new(arr).map_err(input_err(p))?)
            }
            None => None,
        };
        (clean, degraded, weights, truth)
    };
    let (t, h, w, _) = clean.dims();
    if t > INVERT_FRAME_CAP {
        return Err(Failure::new(EXIT_INPUT, format!("inversion takes at most {INVERT_FRAME_CAP} frames")));
    }
    let init = invert::initial_lpd(t, h, w, weights.arch().latent_channels);
    let result = invert::invert(&clean, &degraded, &weights, init, &cfg.invert, cfg.seed, truth.as_ref())
        .map_err(run_err)?;
    let dir = out_dir(cli)?;
    write_text(&dir.join("convergence.csv"), &result.to_csv())?;
    write_array(&dir.join("lpd.tsm"), &LatentPhaseDistortion::to_stacked(&result.lpd).into_dyn()).map_err(run_err)?;
    let summary = serde_json::json!({
        "steps": cfg.invert.steps,
        "initial_loss": result.initial_loss(),
        "final_loss": result.final_loss(),
        "loss_ratio": result.initial_loss() / result.final_loss(),
        "tilt_rmse": result.final_tilt_rmse(),
    });
    write_text(&dir.join("invert.json"), &serde_json::to_string_pretty(&summary).expect("json"))?;
    println!("{summary}");
    Ok(0)
}

fn cmd_check(cli: &Cli, args: &CheckArgs) -> Result<u8, Failure> {
    let cfg = load_config(cli)?;
    let mutation: Mutation = args.mutate.parse().map_err(|e: Error| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let names: Vec<String> = if args.all {
        check::SUITES.iter().map(|s| s.to_string()).collect()
    } else {
        args.suites.iter().filter(|s| !s.trim().is_empty()).cloned().collect()
    };
    let reports = check::run_suites(&names, mutation, cfg.seed).map_err(run_err)?;
    print!("{}", check::reports_to_csv(&reports));
    Ok(if reports.iter().all(SuiteReport::passed) { 0 } else { EXIT_FAILED })
}

fn cmd_scan_order(cli: &Cli, action: &ScanOrderAction) -> Result<u8, Failure> {
    let ScanOrderAction::Dump { order, frames, height, width, block } = action;
    let cfg = load_config(cli)?;
    let order = order.unwrap_or(cfg.scan.order);
    let block = block.unwrap_or(cfg.scan.block);
    let perm = build_permutation(order, *frames, *height, *width, block)
        .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let mut out = String::with_capacity(perm.len() * 16);
    out.push_str("seq_pos,t,y,x\n");
    for s in 0..perm.len() {
        let (t, y, x) = perm.coords(s);
        out.push_str(&format!("{s},{t},{y},{x}\n"));
    }
    print!("{out}");
    Ok(0)
}

fn cmd_ssm_check(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load_config(cli)?;
    let b = &cfg.bench;
    let mut rows: Vec<(String, f64, f64, bool)> = Vec::new();
    for name in ["scan-oracle", "scan-linearity", "conv-kernel", "guidance"] {
        let r = check::run_suite(name, Mutation::None, cfg.seed).map_err(run_err)?;
        rows.push((name.to_string(), r.worst, r.tolerance, r.passed()));
    }
    let scan = bench::scan_ladder(b.scan_log2[0], b.scan_log2[1], b.scan_state_size, cfg.ssm.chunk, b.repeats, cfg.seed)
        .map_err(run_err)?;
    let attn = bench::attention_ladder(b.attention_log2[0], b.attention_log2[1], b.attention_dim, b.repeats, cfg.seed)
        .map_err(run_err)?;
    let s1 = bench::ladder_slope(&scan).map_err(run_err)?;
    let s2 = bench::ladder_slope(&attn).map_err(run_err)?;
    rows.push(("scan_slope".into(), s1, 0.15, (s1 - 1.0).abs() <= 0.15));
    rows.push(("attention_slope".into(), s2, 0.2, (s2 - 2.0).abs() <= 0.2));
    let mut csv = String::from("check,value,tolerance,status\n");
    for (name, v, tol, ok) in &rows {
        csv.push_str(&format!("{name},{v:.6e},{tol:.3e},{}\n", if *ok { "pass" } else { "fail" }));
    }
    write_text(&out_dir(cli)?.join("ssm_check.csv"), &csv)?;
    print!("{csv}");
    Ok(if rows.iter().all(|r| r.3) { 0 } else { EXIT_FAILED })
}

fn cmd_gen_weights(cli: &Cli, args: &GenWeightsArgs) -> Result<u8, Failure> {
    let cfg = load_config(cli)?;
    let w = RbnWeights::random(cfg.invert.arch, cfg.seed, cfg.invert.residual_scale).map_err(run_err)?;
    let stem = out_dir(cli)?.join(&args.name);
    w.save(&stem).map_err(run_err)?;
    println!("{}", serde_json::to_string(&w.descriptor()).expect("json"));
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_CONFIG, format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Bench => cmd_bench(cli),
        Command::Invert(a) => cmd_invert(cli, a),
        Command::Check(a) => cmd_check(cli, a),
        Command::ScanOrder { action } => cmd_scan_order(cli, action),
        Command::SsmCheck => cmd_ssm_check(cli),
        Command::GenWeights(a) => cmd_gen_weights(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
