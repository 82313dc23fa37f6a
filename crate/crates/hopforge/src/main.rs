//! Command-line entry point: distance sweeps, reward traces, coverage
//! reports, and the gradient checker.

use std::fs::{self, File};
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rand::Rng;

use hopforge::harness::{
    coverage_range, read_sweep_csv, resolve_seed, run_distance_sweep, run_reward_trace,
    write_sweep_csv, write_trace_csv, ExperimentConfig,
};
use hopforge::neural::{grad_check, min_relu_input_magnitude, Activation, DenseNet, NetConfig};
use hopforge::rng::{derive_seed, rng_from_seed, tags};

#[derive(Parser)]
#[command(
    name = "hopforge",
    about = "Link-level simulator and beamforming optimizer for multi-hop RIS-assisted THz downlinks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config file and the environment variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides experiment.output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scheme shorthand; overrides experiment.scheme.
    #[arg(long)]
    scheme: Option<String>,
    /// Config overrides of the form key.path=value; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scheme over the distance grid and write sweep.csv.
    Sweep(RunArgs),
    /// Train the DRL scheme at each configured transmit power and write
    /// trace.csv with per-step rewards.
    Trace(RunArgs),
    /// Compute per-scheme coverage ranges from an existing sweep CSV.
    Coverage {
        #[command(flatten)]
        run: RunArgs,
        /// Sweep CSV to analyze (defaults to <output_dir>/sweep.csv).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Throughput threshold in bits/s.
        #[arg(long)]
        threshold_bps: f64,
    },
    /// Verify analytic gradients against central finite differences on
    /// randomly drawn networks.
    GradCheck {
        #[arg(long)]
        seed: Option<u64>,
        /// Number of random networks to check.
        #[arg(long, default_value_t = 20)]
        nets: usize,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> hopforge::Result<ExitCode> {
    match cli.command {
        Command::Sweep(args) => {
            let (cfg, canonical, seed) = load(&args)?;
            let hash = ExperimentConfig::hash_of(&canonical);
            let cells = run_distance_sweep(&cfg, seed)?;
            let out_dir = output_dir(&args, &cfg)?;
            let path = out_dir.join("sweep.csv");
            write_sweep_csv(&path, &cells, &hash, seed)?;
            println!("wrote {} rows to {}", cells.len(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Trace(args) => {
            let (cfg, canonical, seed) = load(&args)?;
            let hash = ExperimentConfig::hash_of(&canonical);
            let rows = run_reward_trace(&cfg, seed)?;
            let out_dir = output_dir(&args, &cfg)?;
            let path = out_dir.join("trace.csv");
            write_trace_csv(&path, &rows, &hash, seed)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Coverage { run: args, input, threshold_bps } => {
            let (cfg, canonical, seed) = load(&args)?;
            let hash = ExperimentConfig::hash_of(&canonical);
            let out_dir = output_dir(&args, &cfg)?;
            let input = input.unwrap_or_else(|| out_dir.join("sweep.csv"));
            let cells = read_sweep_csv(&input)?;
            let reports = coverage_range(&cells, threshold_bps);
            let path = out_dir.join("coverage.csv");
            let mut file = File::create(&path)?;
            writeln!(file, "# config_sha256={hash} seed={seed}")?;
            let mut writer = csv::Writer::from_writer(file);
            for r in &reports {
                writer
                    .serialize(r)
                    .map_err(hopforge::Error::from)?;
                println!(
                    "{}: max_distance={} m (interpolated {:.6} m){}",
                    r.scheme,
                    r.max_distance_m,
                    r.interpolated_distance_m,
                    if r.threshold_met { "" } else { " [threshold never met]" }
                );
            }
            writer.flush().map_err(hopforge::Error::Io)?;
            println!("wrote {} schemes to {}", reports.len(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::GradCheck { seed, nets, tolerance } => {
            let seed = resolve_seed(seed, Some(0))?;
            let mut failures = 0usize;
            for i in 0..nets {
                let mut rng = rng_from_seed(derive_seed(seed, &[tags::GRAD_CHECK, i as u64]));
                let report = check_one_net(i, &mut rng, tolerance)?;
                println!(
                    "net {i:3}: max_rel_error={:.3e} over {} params{}",
                    report.max_rel_error,
                    report.num_params,
                    if report.passed() { "" } else { "  FAIL" }
                );
                if !report.passed() {
                    failures += 1;
                }
            }
            if failures == 0 {
                println!("gradient check passed on all {nets} networks (tolerance {tolerance:.1e})");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{failures}/{nets} networks failed the gradient check");
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn check_one_net(
    index: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    tolerance: f64,
) -> hopforge::Result<hopforge::neural::GradCheckReport> {
    // Rotate through layer shapes and activations; skip batches that put a
    // ReLU input near its kink.
    let widths = [3usize, 5, 8];
    let input = widths[index % widths.len()];
    let hidden = widths[(index / widths.len()) % widths.len()];
    let output = 1 + index % 3;
    let cfg = NetConfig {
        input,
        hidden: vec![hidden, hidden],
        output,
        batchnorm: index % 2 == 0,
        hidden_activation: if index % 3 == 0 { Activation::Tanh } else { Activation::Relu },
        output_activation: if index % 2 == 0 { Activation::Tanh } else { Activation::Identity },
        bn_momentum: 0.1,
        bn_epsilon: 1e-5,
        output_init_scale: None,
    };
    loop {
        let mut net = DenseNet::new(&cfg, rng)?;
        let batch = DMatrix::from_fn(input, 6, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        if cfg.hidden_activation == Activation::Relu
            && min_relu_input_magnitude(&mut net, &batch)? <= 1e-3
        {
            continue;
        }
        let loss = |out: &DMatrix<f64>| {
            let v = out.iter().map(|x| x * x).sum::<f64>();
            (v, out.map(|x| 2.0 * x))
        };
        return grad_check(&mut net, &batch, loss, 1e-4, tolerance);
    }
}

fn load(args: &RunArgs) -> hopforge::Result<(ExperimentConfig, String, u64)> {
    let mut overrides = args.overrides.clone();
    if let Some(scheme) = &args.scheme {
        overrides.push(format!("experiment.scheme=\"{scheme}\""));
    }
    let (cfg, canonical) = ExperimentConfig::load(&args.config, &overrides)?;
    let seed = resolve_seed(args.seed, cfg.experiment.seed)?;
    Ok((cfg, canonical, seed))
}

fn output_dir(args: &RunArgs, cfg: &ExperimentConfig) -> hopforge::Result<PathBuf> {
    let dir = args.out.clone().unwrap_or_else(|| cfg.experiment.output_dir.clone());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}
