use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedpart::fedcore::{recommended_step_sizes, StepSizeInputs, StepSizeVariant};
use fedpart::harness::{
    estimate_for_config, load_config, load_sweep, run_experiment, run_sweep, stationarity_floor,
};
use fedpart::metrics::EstimateOptions;
use fedpart::Error;

#[derive(Parser)]
#[command(name = "fedpart", version, about = "Partial-personalization FL simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace CSV.
    Run { config: PathBuf },
    /// Run a grid over one hyperparameter and write per-cell traces plus a summary.
    Sweep { spec: PathBuf },
    /// Print the recommended step sizes for given problem constants.
    Stepsize(StepsizeArgs),
    /// Estimate L, b² and F0 for a config's objective at its initial point.
    Estimate {
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        probes: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 200)]
        calibration_steps: usize,
    },
}

#[derive(clap::Args)]
struct StepsizeArgs {
    #[arg(long, value_enum)]
    variant: StepSizeVariant,
    #[arg(long = "L")]
    l: f64,
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "T")]
    t: usize,
    #[arg(long = "F0")]
    f0: f64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma_u: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma_v: f64,
    /// Gradient dissimilarity `b` (not squared).
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    /// Initial `Σ_i ‖∇_u f_i‖²`, used by the full-participation variant.
    #[arg(long = "B0", default_value_t = 0.0)]
    b0: f64,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

/// Problems with the inputs themselves exit with 2.
fn usage(error: Error) -> Failure {
    Failure { code: 2, error }
}

fn runtime(error: Error) -> Failure {
    let code = match &error {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    };
    Failure { code, error }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config } => {
            let config = load_config(&config).map_err(usage)?;
            let outcome = run_experiment(&config).map_err(runtime)?;
            println!("trace written to {}", outcome.trace_path.display());
            println!("config echo written to {}", outcome.echo_path.display());
            if !outcome.output.traces.is_empty() {
                println!("floor = {:e}", stationarity_floor(&outcome.output.traces));
            }
        }
        Command::Sweep { spec } => {
            let spec = load_sweep(&spec).map_err(usage)?;
            let summary = run_sweep(&spec).map_err(runtime)?;
            println!("summary written to {}", summary.summary_path.display());
            for (value, floor) in summary.mean_floors() {
                println!("{} = {value}: mean floor = {floor:e}", spec.axis.name());
            }
        }
        Command::Stepsize(a) => {
            let inputs = StepSizeInputs {
                l: a.l,
                k: a.k,
                t: a.t,
                f0: a.f0,
                sigma_u: a.sigma_u,
                sigma_v: a.sigma_v,
                b: a.b,
                m: a.m,
                n: a.n,
                b0: a.b0,
            };
            let s = recommended_step_sizes(a.variant, &inputs).map_err(usage)?;
            let (gamma_u, gamma_v) = s.inner();
            println!("gamma = {}", s.gamma);
            println!("eta_u_min = {}", s.eta_u_min);
            println!("eta_v_min = {}", s.eta_v_min);
            println!("gamma_u = {gamma_u}");
            println!("gamma_v = {gamma_v}");
        }
        Command::Estimate {
            config,
            probes,
            radius,
            calibration_steps,
        } => {
            let config = load_config(&config).map_err(usage)?;
            let options = EstimateOptions {
                probes,
                radius,
                calibration_steps,
            };
            let (est, closed_form) = estimate_for_config(&config, options).map_err(runtime)?;
            println!("L_hat = {}", est.l_hat);
            println!("b2_hat = {}", est.b2_hat);
            println!("F0 = {}", est.f0);
            if let Some(b2) = closed_form {
                println!("b2_closed_form = {b2}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
