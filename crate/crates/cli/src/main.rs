use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod svg;
mod table;

use commands::DemoOptions;
use config::RunConfig;

/// Singular functions, sampling grids and sampling experiments for
/// imaginary-time kernels.
#[derive(Debug, Parser)]
#[command(name = "slepian", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kernel eigenvalues and singular values.
    Spectrum(RunConfig),
    /// Legendre coefficients of the prolate modes.
    Basis(RunConfig),
    /// Sampling nodes, times and weights.
    Nodes(RunConfig),
    /// Forward/backward sampling experiment with three panel files.
    Demo(DemoArgs),
    /// Run the invariant suite; exit status 0 iff every check passes.
    Check(RunConfig),
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[command(flatten)]
    config: RunConfig,
    /// Also write an SVG rendering of each panel.
    #[arg(long)]
    svg: bool,
    /// Uniform noise on the observations, relative to max |G|.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Points in the dense reference grid.
    #[arg(long, default_value_t = 201)]
    n_dense: usize,
}

fn config_of(cmd: &Command) -> &RunConfig {
    match cmd {
        Command::Spectrum(c) | Command::Basis(c) | Command::Nodes(c) | Command::Check(c) => c,
        Command::Demo(d) => &d.config,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = config_of(&cli.command).spec() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Spectrum(cfg) => commands::spectrum_table(cfg).and_then(|t| commands::run_simple(t, cfg)),
        Command::Basis(cfg) => commands::basis_table(cfg).and_then(|t| commands::run_simple(t, cfg)),
        Command::Nodes(cfg) => commands::nodes_table(cfg).and_then(|t| commands::run_simple(t, cfg)),
        Command::Demo(d) => {
            let opts = DemoOptions {
                svg: d.svg,
                noise: d.noise,
                n_dense: d.n_dense,
            };
            commands::run_demo(&d.config, &opts).map(|paths| {
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            })
        }
        Command::Check(cfg) => match commands::run_check(cfg) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
