use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use slepian_core::{KernelSpec, Statistics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticsArg {
    Fermion,
    Boson,
}

impl From<StatisticsArg> for Statistics {
    fn from(s: StatisticsArg) -> Self {
        match s {
            StatisticsArg::Fermion => Statistics::Fermion,
            StatisticsArg::Boson => Statistics::Boson,
        }
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Bandwidth c = beta * omega_max / 2.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    /// Inverse temperature.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Frequency cutoff; defaults to 1 when only --c is given.
    #[arg(long, allow_hyphen_values = true)]
    pub omega_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = StatisticsArg::Fermion)]
    pub statistics: StatisticsArg,
    /// Number of prolate modes.
    #[arg(long)]
    pub n_modes: Option<usize>,
    /// Grid order N, overriding ceil(N_c).
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file (directory for `demo`); standard output when absent.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Seed for synthetic noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        bail!("--{name} must be a positive finite number, got {v}");
    }
    Ok(())
}

impl RunConfig {
    /// Kernel parameters, validated before any computation.
    pub fn spec(&self) -> Result<KernelSpec> {
        let st = self.statistics.into();
        let spec = match (self.c, self.beta, self.omega_max) {
            (None, None, _) => bail!("give either --c or both --beta and --omega-max"),
            (None, Some(_), None) => bail!("--beta needs --omega-max"),
            (Some(c), None, omega) => {
                require_positive("c", c)?;
                let omega = omega.unwrap_or(1.0);
                require_positive("omega-max", omega)?;
                KernelSpec::from_c(st, c, omega)?
            }
            (c, Some(beta), Some(omega)) => {
                require_positive("beta", beta)?;
                require_positive("omega-max", omega)?;
                let spec = KernelSpec::new(st, beta, omega)?;
                if let Some(c) = c {
                    require_positive("c", c)?;
                    if (c - spec.c).abs() > 1e-12 * c.abs().max(1.0) {
                        bail!("--c {c} disagrees with beta * omega_max / 2 = {}", spec.c);
                    }
                }
                spec
            }
            (Some(_), Some(_), None) => bail!("--beta needs --omega-max"),
        };
        if self.n_modes == Some(0) {
            bail!("--n-modes must be at least 1");
        }
        if self.order == Some(0) {
            bail!("--order must be at least 1");
        }
        Ok(spec)
    }
}
