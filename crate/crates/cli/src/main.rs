use clap::{Args, Parser, Subcommand, ValueEnum};
use ris_secrecy_cli::{
    load_config, plan, render_csv, run_series, run_validation, sweep::default_series, CliError, ExperimentConfig, Preset,
};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Secrecy-rate analysis, simulation and RIS phase optimization.
#[derive(Parser)]
#[command(name = "ris-secrecy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the selected engines over a parameter sweep.
    Sweep(Common),
    /// Run the property and oracle checks at the configured operating point.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Multiply every upper tolerance by this factor.
        #[arg(long, hide = true, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
    /// Run a predefined figure sweep; flags override its parameters.
    Preset {
        name: PresetName,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetName {
    Fig3,
    Fig4,
    Fig5a,
    Fig5b,
    Fig6,
}

#[derive(Args)]
struct Common {
    /// Number of RIS elements N.
    #[arg(long)]
    elements: Option<String>,
    /// Phase resolution in bits, or `inf` for continuous phases.
    #[arg(long)]
    bits: Option<String>,
    /// Von Mises concentration of the estimation error.
    #[arg(long)]
    kappa: Option<String>,
    /// Jitter standard deviation at the trusted receiver (m).
    #[arg(long)]
    sigma_j_u: Option<String>,
    /// Jitter standard deviation at the eavesdropper (m).
    #[arg(long)]
    sigma_j_e: Option<String>,
    /// Refractive-index structure parameter (m^-2/3).
    #[arg(long)]
    cn2: Option<String>,
    /// Beam waist over aperture radius.
    #[arg(long)]
    w_over_l: Option<String>,
    /// Transmit SNR P/delta^2 in dB.
    #[arg(long, allow_negative_numbers = true)]
    tx_snr_db: Option<String>,
    /// Monte Carlo trials (channel realizations) per point.
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Phase-error model: p1 (quantization) or p2 (quantization and estimation).
    #[arg(long)]
    error_model: Option<String>,
    /// Comma-separated engines: analytic, montecarlo, optimize-statistical,
    /// optimize-perfect, random-baseline.
    #[arg(long)]
    engines: Option<String>,
    /// Sweep as AXIS:START:STOP:STEP or AXIS:VALUE.
    #[arg(long, allow_hyphen_values = true)]
    sweep: Option<String>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key = value configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record measured run times in the wallclock_ms column.
    #[arg(long)]
    wallclock: bool,
}

impl Common {
    fn flags(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let fields = [
            ("elements", &self.elements),
            ("bits", &self.bits),
            ("kappa", &self.kappa),
            ("sigma_j_u", &self.sigma_j_u),
            ("sigma_j_e", &self.sigma_j_e),
            ("cn2", &self.cn2),
            ("w_over_l", &self.w_over_l),
            ("tx_snr_db", &self.tx_snr_db),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("error_model", &self.error_model),
            ("engines", &self.engines),
            ("sweep", &self.sweep),
        ];
        for (k, v) in fields {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        if let Some(p) = &self.out {
            out.push(("out".into(), p.display().to_string()));
        }
        if self.wallclock {
            out.push(("wallclock".into(), "true".into()));
        }
        out
    }

    fn load(&self, base: ExperimentConfig) -> Result<ExperimentConfig, CliError> {
        load_config(base, self.config.as_deref(), &self.flags())
    }
}

fn emit(config: &ExperimentConfig, text: &str) -> Result<(), CliError> {
    match &config.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep(common) => {
            let config = common.load(ExperimentConfig::default())?;
            let series = default_series(&config.engines);
            let result = run_series(&config, &series)?;
            emit(&config, &render_csv("sweep", &config, &series, &[], &result.rows))?;
            check_convergence(&result)
        }
        Command::Preset { name, common } => {
            let preset = match name {
                PresetName::Fig3 => Preset::Fig3,
                PresetName::Fig4 => Preset::Fig4,
                PresetName::Fig5a => Preset::Fig5a,
                PresetName::Fig5b => Preset::Fig5b,
                PresetName::Fig6 => Preset::Fig6,
            };
            let p = plan(preset);
            let config = common.load(p.config.clone())?;
            let series = p.active_series(&config);
            if series.is_empty() {
                return Err(CliError::Usage(format!("no series of {} uses the selected engines", preset.name())));
            }
            let result = run_series(&config, &series)?;
            let command = format!("preset {}", preset.name());
            emit(&config, &render_csv(&command, &config, &series, &p.notes, &result.rows))?;
            check_convergence(&result)
        }
        Command::Validate { common, tolerance_scale } => {
            let config = common.load(ExperimentConfig::default())?;
            let report = run_validation(&config, tolerance_scale)?;
            eprint!("{}", report.human());
            emit(&config, &report.csv())?;
            let failures = report.failures();
            if failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Validation(failures))
            }
        }
    }
}

fn check_convergence(result: &ris_secrecy_cli::SweepResult) -> Result<(), CliError> {
    if result.nonconverged > 0 {
        return Err(CliError::NonConvergence(format!(
            "{} of {} SDP solves did not converge",
            result.nonconverged, result.sdp_solves
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
