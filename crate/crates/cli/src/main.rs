use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ecp_cli::commands::{self, BisectArgs, CurveArgs, ScanArgs, TestOptions, EXIT_INVALID};
use ecp_core::scan::{Mode, DEFAULT_BRACKET_WIDTH};
use ecp_core::Side;

#[derive(Parser)]
#[command(name = "ecp", version, about = "Test piecewise Extended Chebyshev spaces and sample design curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ecp,
    Design,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ecp => Mode::Ecp,
            ModeArg::Design => Mode::Design,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Args)]
struct TestFlags {
    /// Positivity threshold (default 1e-30, or $ECP_TOL).
    #[arg(long)]
    tol: Option<f64>,
    /// Largest condition estimate accepted for the basis systems.
    #[arg(long)]
    kappa_max: Option<f64>,
}

impl TestFlags {
    fn options(&self, trace: bool) -> TestOptions {
        TestOptions { tol: self.tol, kappa_max: self.kappa_max, trace }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Test the space described by a spec file.
    Test {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "ecp")]
        mode: ModeArg,
        #[command(flatten)]
        flags: TestFlags,
        /// Report the minimum coefficient of every level reached.
        #[arg(long)]
        trace: bool,
    },
    /// Test every node of a parameter grid of a built-in family.
    Scan {
        #[arg(long)]
        family: String,
        /// Grid axis `name=min:max:step`; repeatable.
        #[arg(long = "param")]
        params: Vec<String>,
        /// Fixed binding `name=value`; repeatable.
        #[arg(long)]
        fixed: Vec<String>,
        #[arg(long, value_enum, default_value = "design")]
        mode: ModeArg,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        flags: TestFlags,
    },
    /// Sample the curve with given Bezier points in a space good for design.
    Curve {
        spec: PathBuf,
        #[arg(long)]
        control_points: PathBuf,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Limit taken at interior knots.
        #[arg(long, value_enum, default_value = "right")]
        side: SideArg,
        #[command(flatten)]
        flags: TestFlags,
    },
    /// Bracket the parameter value where the classification changes.
    Bisect {
        #[arg(long)]
        family: String,
        #[arg(long)]
        fixed: Vec<String>,
        #[arg(long)]
        free: String,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, value_enum, default_value = "design")]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_BRACKET_WIDTH)]
        width: f64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[command(flatten)]
        flags: TestFlags,
    },
    /// List the built-in families and their parameters.
    Families,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID as u8 } else { 0 });
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Test { spec, mode, flags, trace } => {
            commands::cmd_test(&spec, mode.into(), &flags.options(trace), &mut out)
        }
        Command::Scan { family, params, fixed, mode, out: path, jobs, flags } => commands::cmd_scan(
            &ScanArgs { family, params, fixed, mode: mode.into(), out: path, jobs, test: flags.options(false) },
            &mut out,
        ),
        Command::Curve { spec, control_points, samples, out: path, side, flags } => commands::cmd_curve(
            &CurveArgs {
                spec,
                control_points,
                samples,
                out: path,
                side: match side {
                    SideArg::Left => Side::Left,
                    SideArg::Right => Side::Right,
                },
                test: flags.options(false),
            },
            &mut out,
        ),
        Command::Bisect { family, fixed, free, lo, hi, mode, width, max_iters, flags } => commands::cmd_bisect(
            &BisectArgs { family, fixed, free, lo, hi, mode: mode.into(), width, max_iters, test: flags.options(false) },
            &mut out,
        ),
        Command::Families => commands::cmd_families(&mut out),
    };
    let _ = out.flush();
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID as u8)
        }
    }
}
