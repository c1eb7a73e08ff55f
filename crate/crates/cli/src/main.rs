//! `ionring`: runs one experiment per invocation and writes its results
//! plus a `manifest.json` into the output directory.
//!
//! Exit codes: 0 on success, 1 on usage or I/O errors, 2 on physics errors
//! (infeasible profile, divergence, no horizon, inconclusive run).

mod commands;
mod output;
mod units;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ionring::RingConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ionring::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(e) if e.is_physics() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ionring",
    version,
    about = "Phonons of an acoustic black hole on a rotating ion ring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Plain-text `key = value` configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Assert that the run uses no random numbers (always true).
    #[arg(long)]
    seedless: bool,
    /// Override a config key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Drop the interpolated external-potential curvature from the force matrix.
    #[arg(long)]
    no_external_hessian: bool,
}

impl Common {
    pub fn load(&self) -> Result<RingConfig, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("--config is required".into()))?;
        let mut cfg = RingConfig::from_path(path)?;
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{o}`")))?;
            cfg = cfg.with_override(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn options(&self) -> ionring::experiments::RunOptions {
        ionring::experiments::RunOptions {
            external_hessian: !self.no_external_hessian,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Velocity profile, horizons, Hawking temperature and equilibrium forces.
    Profile {
        #[command(flatten)]
        common: Common,
    },
    /// Phonon dispersion of the flat subsonic region, both interaction models.
    Dispersion {
        #[command(flatten)]
        common: Common,
    },
    /// Floquet classification of the static profile.
    Stability {
        #[command(flatten)]
        common: Common,
    },
    /// Backward propagation of a final pulse and the thermal comparison.
    Thermality {
        #[command(flatten)]
        common: Common,
        /// Central mode of the final pulse (overrides `pulse.s`).
        #[arg(long)]
        s: Option<u32>,
    },
    /// Correlation maps after the black-hole-forming quench.
    Quench {
        #[command(flatten)]
        common: Common,
        /// Initial temperature in units of the target `T_H`.
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        /// Use displacement instead of momentum correlations.
        #[arg(long)]
        displacement: bool,
    },
    /// Logarithmic negativity between the horizon-adjacent windows.
    Negativity {
        #[command(flatten)]
        common: Common,
        /// Initial temperatures in units of `T_H`, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "0,10,100")]
        temperatures: Vec<f64>,
        /// Sample times in `T`, comma-separated; default `[τ, 3τ]` every `T/N`.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Window width in ions (overrides `regions.width_frac`).
        #[arg(long)]
        width: Option<usize>,
    },
    /// Physical values of the natural units for a given ion species and ring.
    Units {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 9.012183)]
        mass_amu: f64,
        #[arg(long, default_value_t = 1.0)]
        charge: f64,
        /// Mean ion spacing `L/N` in metres.
        #[arg(long, default_value_t = 10e-6)]
        spacing_m: f64,
        /// Rotation frequency `1/T` in hertz.
        #[arg(long, default_value_t = 5.5e3)]
        rotation_hz: f64,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Profile { common }
            | Command::Dispersion { common }
            | Command::Stability { common }
            | Command::Thermality { common, .. }
            | Command::Quench { common, .. }
            | Command::Negativity { common, .. }
            | Command::Units { common, .. } => common,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = cli.command.common().clone();
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Profile { common } => commands::profile(&common),
        Command::Dispersion { common } => commands::dispersion(&common),
        Command::Stability { common } => commands::stability(&common),
        Command::Thermality { common, s } => commands::thermality(&common, s),
        Command::Quench {
            common,
            temperature,
            displacement,
        } => commands::quench(&common, temperature, displacement),
        Command::Negativity {
            common,
            temperatures,
            times,
            width,
        } => commands::negativity(&common, &temperatures, times.as_deref(), width),
        Command::Units {
            common,
            mass_amu,
            charge,
            spacing_m,
            rotation_hz,
        } => commands::units(&common, mass_amu, charge, spacing_m, rotation_hz),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
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
            ExitCode::from(e.exit_code())
        }
    }
}
