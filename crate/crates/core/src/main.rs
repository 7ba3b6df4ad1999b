use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use junction::cli::{parse_config, run_experiment, sweep_beta};
use junction::Error;

/// Trajectory-ensemble simulation of a lossy two-level junction.
///
/// Flags override values read from the configuration file.
#[derive(Debug, Parser)]
#[command(name = "junction", version)]
struct Args {
    /// Flat `key = value` configuration file.
    #[arg(long, allow_hyphen_values = true)]
    config: Option<PathBuf>,
    /// SMJ, SMJ+NHC, SMJ+nH or SMJ+nH+NHC.
    #[arg(long, allow_hyphen_values = true)]
    mode: Option<String>,
    /// Inverse temperature (β0 of a sweep).
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Number of sweep temperatures β0·(1+l).
    #[arg(long = "sweep-count", allow_hyphen_values = true)]
    sweep_count: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// Monte Carlo samples.
    #[arg(long, allow_hyphen_values = true)]
    samples: Option<String>,
    /// Integration steps.
    #[arg(long, allow_hyphen_values = true)]
    steps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    /// Output directory.
    #[arg(long, allow_hyphen_values = true)]
    out: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    workers: Option<String>,
    /// Record every this many steps.
    #[arg(long, allow_hyphen_values = true)]
    stride: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    coupling: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mu1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mu2: Option<String>,
}

impl Args {
    fn overrides(&self) -> Vec<(String, String)> {
        let pairs = [
            ("mode", &self.mode),
            ("beta", &self.beta),
            ("sweep_count", &self.sweep_count),
            ("seed", &self.seed),
            ("n_mcs", &self.samples),
            ("n_step", &self.steps),
            ("tau", &self.tau),
            ("output_dir", &self.out),
            ("workers", &self.workers),
            ("record_stride", &self.stride),
            ("gamma", &self.gamma),
            ("omega", &self.omega),
            ("delta", &self.delta),
            ("coupling", &self.coupling),
            ("mu1", &self.mu1),
            ("mu2", &self.mu2),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let config = match parse_config(args.config.as_deref(), &args.overrides()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };

    if config.beta_sweep.is_some() {
        let summary = sweep_beta(&config);
        for cell in &summary.cells {
            match &cell.result {
                Ok(s) => println!("beta_{} {} ok ({:.1} s) -> {}", cell.l, cell.mode, s.wall_seconds, s.output_dir.display()),
                Err(e) => eprintln!("beta_{} {} failed: {e}", cell.l, cell.mode),
            }
        }
        let failed = summary.failures();
        if failed > 0 {
            eprintln!("{failed} of {} sweep cells failed", summary.cells.len());
            return ExitCode::from(2);
        }
        return ExitCode::SUCCESS;
    }

    match run_experiment(&config) {
        Ok(s) => {
            println!(
                "{} samples ({} aborted) in {:.1} s -> {}",
                s.samples_used,
                s.aborted,
                s.wall_seconds,
                s.output_dir.display()
            );
            if let Some(reason) = s.spectrum_skipped {
                println!("spectrum skipped: {reason}");
            }
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(2)
        }
    }
}
