use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use insulation_cli::config::Settings;
use insulation_cli::run::load_config;

/// Optimal thin insulation: energy and eigenvalue studies on P1 meshes.
///
/// Settings come from --config (flat key = value file with [section]
/// headers) and are overridden by flags. Exit status: 0 on success, 1 on a
/// configuration or input error, 2 when a solver fails to converge or a
/// result is inconsistent.
#[derive(Parser, Debug)]
#[command(name = "insulate", version, allow_negative_numbers = true)]
struct Cli {
    /// Config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// energy | eigen | threshold | sweep | concentration | two-component
    #[arg(long)]
    mode: Option<String>,
    /// square:N | disc:R:L | two-discs:R1:R2:GAP:L | file:PATH
    #[arg(long)]
    domain: Option<String>,
    /// Conductivity of the insulating layer.
    #[arg(long)]
    k: Option<String>,
    /// Insulator mass.
    #[arg(long)]
    m: Option<String>,
    /// Geometric mass grid a:b:steps (sweep, concentration).
    #[arg(long = "m-grid")]
    m_grid: Option<String>,
    /// Constant heat source.
    #[arg(long = "f-const")]
    f_const: Option<String>,
    /// Relative tolerance of the outer minimizations.
    #[arg(long)]
    tol: Option<String>,
    /// Restarts of the eigenvalue minimization.
    #[arg(long)]
    restarts: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Uniform refinements applied to the domain mesh.
    #[arg(long)]
    refine: Option<String>,
    /// Threshold search bracket lo:hi.
    #[arg(long)]
    bracket: Option<String>,
    /// Relative width at which the threshold bisection stops.
    #[arg(long = "bracket-tol")]
    bracket_tol: Option<String>,
    /// eigen | energy (sweep mode).
    #[arg(long = "sweep-kind")]
    sweep_kind: Option<String>,
}

impl Cli {
    fn flags(self) -> (Option<PathBuf>, Settings) {
        let pairs = [
            ("mode", self.mode),
            ("domain", self.domain),
            ("k", self.k),
            ("m", self.m),
            ("m-grid", self.m_grid),
            ("f-const", self.f_const),
            ("tol", self.tol),
            ("restarts", self.restarts),
            ("seed", self.seed),
            ("out", self.out),
            ("refine", self.refine),
            ("bracket", self.bracket),
            ("bracket-tol", self.bracket_tol),
            ("sweep-kind", self.sweep_kind),
        ];
        let settings = pairs
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect();
        (self.config, settings)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let (path, flags) = cli.flags();
    let result = load_config(path.as_deref(), flags).and_then(|cfg| insulation_cli::run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
