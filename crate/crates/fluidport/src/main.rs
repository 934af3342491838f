use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fluidport::experiment::{gnuplot_script, run_experiment, ExperimentSpec};
use fluidport::pipelines::MethodId;

/// Outage benchmarking for fluid antenna port selection.
#[derive(Parser, Debug)]
#[command(name = "fluidport", version, about)]
struct Cli {
    /// Config file with key=value lines (flags override it)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Named sweep preset ("figs": widths 0.5/2/5, observed 1..=10, all methods)
    #[arg(long)]
    preset: Option<String>,

    /// Number of ports N
    #[arg(long)]
    ports: Option<usize>,

    /// Aperture width(s) in wavelengths, comma separated
    #[arg(long, value_delimiter = ',')]
    width: Option<Vec<f64>>,

    /// Observed port count(s) |K|, comma separated
    #[arg(long, value_delimiter = ',')]
    observed: Option<Vec<usize>>,

    /// Method(s): reference, aa, spo, lstm, spo-lstm, aa-spo-lstm,
    /// fixed-antenna, oracle
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<MethodId>>,

    /// Monte-Carlo trials per sweep cell
    #[arg(long)]
    trials: Option<usize>,

    /// Outage SNR threshold in dB
    #[arg(long)]
    target_snr_db: Option<f64>,

    /// Average SNR in dB (default: calibrated so one port sits at outage 0.5)
    #[arg(long)]
    avg_snr_db: Option<f64>,

    /// Training set size for the learning methods
    #[arg(long)]
    train_q: Option<usize>,

    /// Recurrent-network training epochs
    #[arg(long)]
    epochs: Option<usize>,

    /// Recurrent-network learning rate
    #[arg(long)]
    lr: Option<f64>,

    /// Root seed; everything downstream is derived from it
    #[arg(long)]
    seed: Option<u64>,

    /// CSV output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write a gnuplot script next to the CSV
    #[arg(long)]
    gnuplot_script: bool,
}

fn build_spec(cli: &Cli) -> fluidport::Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)?;
        spec.apply_config(&text)?;
    }
    if let Some(preset) = &cli.preset {
        match preset.as_str() {
            "figs" => spec = ExperimentSpec::figs_preset(),
            other => {
                return Err(fluidport::Error::Parse(format!("unknown preset {other:?}")))
            }
        }
    }
    if let Some(v) = cli.ports {
        spec.n_ports = v;
    }
    if let Some(v) = &cli.width {
        spec.widths = v.clone();
    }
    if let Some(v) = &cli.observed {
        spec.observed_counts = v.clone();
    }
    if let Some(v) = &cli.method {
        spec.methods = v.clone();
    }
    if let Some(v) = cli.trials {
        spec.trials = v;
    }
    if let Some(v) = cli.target_snr_db {
        spec.target_snr_db = v;
    }
    if let Some(v) = cli.avg_snr_db {
        spec.avg_snr_db = Some(v);
    }
    if let Some(v) = cli.train_q {
        spec.train_q = v;
    }
    if let Some(v) = cli.epochs {
        spec.epochs = v;
    }
    if let Some(v) = cli.lr {
        spec.learning_rate = v;
    }
    if let Some(v) = cli.seed {
        spec.root_seed = v;
    }
    if let Some(v) = &cli.out {
        spec.output_path = Some(v.display().to_string());
    }
    spec.validate()?;
    Ok(spec)
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("FLUIDPORT_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        } else {
            eprintln!("warning: ignoring unparseable FLUIDPORT_THREADS={raw:?}");
        }
    }
}

fn run() -> fluidport::Result<()> {
    let cli = Cli::parse();
    configure_threads();
    let spec = build_spec(&cli)?;
    let csv = run_experiment(&spec)?;
    match &spec.output_path {
        Some(path) => {
            fs::write(path, &csv)?;
            eprintln!("wrote {path}");
            if cli.gnuplot_script {
                let script_path = format!("{path}.gp");
                fs::write(&script_path, gnuplot_script(&spec, path))?;
                eprintln!("wrote {script_path}");
            }
        }
        None => {
            if cli.gnuplot_script {
                return Err(fluidport::Error::InvalidConfig(
                    "--gnuplot-script requires --out".into(),
                ));
            }
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
