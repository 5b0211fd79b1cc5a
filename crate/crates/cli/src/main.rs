//! `holo` renders incoherent focal stacks from layered-depth scenes and
//! optimizes time-multiplexed phase-hologram batches against them.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration,
//! 3 for numerical failure or divergence, 1 for I/O errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use holo_core::{Error, Result};

use config::{Length, RunConfig};

#[derive(Parser)]
#[command(
    name = "holo",
    version,
    about = "Focal-stack rendering and phase-only hologram batch optimization"
)]
struct Cli {
    /// JSON run configuration; omitted sections use built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (overrides HOLO_THREADS). 1 runs sequentially.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the incoherent focal stack of a layered-depth scene.
    Render {
        /// Scene directory (manifest.json + per-layer color/depth).
        #[arg(long, value_name = "DIR")]
        ldi: PathBuf,
        /// Output stack directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Number of focal planes.
        #[arg(long, value_name = "N")]
        planes: Option<usize>,
        /// Nearest focal depth, e.g. "-3mm".
        #[arg(long, value_name = "LEN", allow_hyphen_values = true)]
        near: Option<Length>,
        /// Farthest focal depth, e.g. "3mm".
        #[arg(long, value_name = "LEN", allow_hyphen_values = true)]
        far: Option<Length>,
    },

    /// Optimize a hologram batch against a rendered stack.
    Optimize {
        /// Rendered stack directory.
        #[arg(long, value_name = "DIR")]
        stack: PathBuf,
        /// Output batch directory (frames, history.csv, config.json).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_name = "N")]
        iterations: Option<usize>,
        /// Time-multiplexed frames per channel.
        #[arg(long, value_name = "N")]
        frames: Option<usize>,
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
        /// Adam step size.
        #[arg(long, value_name = "F")]
        step: Option<f64>,
        /// Per-pixel source amplitude profile (f32 raw, row-major).
        #[arg(long, value_name = "FILE")]
        laser: Option<PathBuf>,
        /// Binary sidecar of propagation tables, loaded and re-saved.
        #[arg(long, value_name = "FILE")]
        kernel_cache: Option<PathBuf>,
    },

    /// Score a batch against a stack through one viewing pupil.
    Eval {
        /// Hologram batch directory.
        #[arg(long, value_name = "DIR")]
        batch: PathBuf,
        /// Rendered stack directory with the reference planes.
        #[arg(long, value_name = "DIR")]
        stack: PathBuf,
        /// Output report path (JSON).
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Also save tone-mapped reconstructions into this directory.
        #[arg(long, value_name = "DIR")]
        recon: Option<PathBuf>,
        /// Stack plane index to score (repeatable); default all.
        #[arg(long = "plane", value_name = "K")]
        planes: Vec<usize>,
        /// Pupil center x, e.g. "2mm".
        #[arg(long, value_name = "LEN", allow_hyphen_values = true)]
        pupil_x: Option<Length>,
        /// Pupil center y.
        #[arg(long, value_name = "LEN", allow_hyphen_values = true)]
        pupil_y: Option<Length>,
        /// Pupil radius; default is the configured base radius.
        #[arg(long, value_name = "LEN")]
        pupil_radius: Option<Length>,
        #[arg(long, value_name = "FILE")]
        laser: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        kernel_cache: Option<PathBuf>,
    },

    /// Reconstruction sweeps over focus depth or pupil position.
    Sweep {
        #[command(subcommand)]
        mode: SweepMode,
    },

    /// Run the numerical self-checks and report pass/fail.
    OracleCheck {
        /// Random propagation test cases.
        #[arg(long, default_value_t = 20, value_name = "N")]
        cases: usize,
        #[arg(long, default_value_t = 7, value_name = "SEED")]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum SweepMode {
    /// Reconstruct at evenly spaced focus depths through one pupil.
    Focus {
        #[arg(long, value_name = "DIR")]
        batch: PathBuf,
        /// Output directory for previews and index.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// First focus depth.
        #[arg(long, value_name = "LEN", allow_hyphen_values = true)]
        near: Length,
        /// Last focus depth.
        #[arg(long, value_name = "LEN", allow_hyphen_values = true)]
        far: Length,
        #[arg(long, default_value_t = 9, value_name = "N")]
        count: usize,
        #[arg(long, value_name = "LEN", allow_hyphen_values = true)]
        pupil_x: Option<Length>,
        #[arg(long, value_name = "LEN", allow_hyphen_values = true)]
        pupil_y: Option<Length>,
        #[arg(long, value_name = "LEN")]
        pupil_radius: Option<Length>,
        #[arg(long, value_name = "FILE")]
        laser: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        kernel_cache: Option<PathBuf>,
    },
    /// Score a lattice of pupil positions across the eye box.
    Eyebox {
        #[arg(long, value_name = "DIR")]
        batch: PathBuf,
        #[arg(long, value_name = "DIR")]
        stack: PathBuf,
        /// Output report path (JSON).
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Lattice size per axis.
        #[arg(long, default_value_t = 3, value_name = "N")]
        side: usize,
        /// Pupil radius; default is the configured base radius.
        #[arg(long, value_name = "LEN")]
        radius: Option<Length>,
        /// Stack plane index to score (repeatable); default all.
        #[arg(long = "plane", value_name = "K")]
        planes: Vec<usize>,
        #[arg(long, value_name = "FILE")]
        laser: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        kernel_cache: Option<PathBuf>,
    },
}

/// Builds the global worker pool from `--threads` or `HOLO_THREADS`.
fn init_threads(requested: Option<usize>) -> Result<()> {
    let count = match requested {
        Some(n) => Some(n),
        None => match std::env::var("HOLO_THREADS") {
            Err(_) => None,
            Ok(text) => Some(
                text.parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad HOLO_THREADS value {text:?}")))?,
            ),
        },
    };
    let Some(count) = count else { return Ok(()) };
    if count == 0 {
        return Err(Error::invalid("thread count must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build_global()
            .map_err(|e| Error::invalid(format!("cannot size the worker pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    {
        if count > 1 {
            log::warn!("built without the parallel feature; running sequentially");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let mut config = RunConfig::load(cli.config.as_deref())?;

    match cli.command {
        Command::Render { ldi, out, planes, near, far } => {
            if let Some(planes) = planes {
                config.render.planes = planes;
            }
            if near.is_some() {
                config.render.near = near;
            }
            if far.is_some() {
                config.render.far = far;
            }
            commands::render(&config, &ldi, &out)
        }
        Command::Optimize { stack, out, iterations, frames, seed, step, laser, kernel_cache } => {
            if let Some(iterations) = iterations {
                config.optimize.iterations = iterations;
            }
            if let Some(frames) = frames {
                config.optimize.frames = frames;
            }
            if let Some(seed) = seed {
                config.optimize.seed = seed;
            }
            if let Some(step) = step {
                config.optimize.step_size = step;
            }
            commands::optimize_cmd(
                &config,
                &stack,
                &out,
                laser.as_deref(),
                kernel_cache.as_deref(),
            )
        }
        Command::Eval {
            batch,
            stack,
            report,
            recon,
            planes,
            pupil_x,
            pupil_y,
            pupil_radius,
            laser,
            kernel_cache,
        } => {
            if pupil_x.is_some() {
                config.eval.pupil_x = pupil_x;
            }
            if pupil_y.is_some() {
                config.eval.pupil_y = pupil_y;
            }
            if pupil_radius.is_some() {
                config.eval.pupil_radius = pupil_radius;
            }
            commands::eval(
                &config,
                &batch,
                &stack,
                &report,
                recon.as_deref(),
                &planes,
                laser.as_deref(),
                kernel_cache.as_deref(),
            )
        }
        Command::Sweep { mode } => match mode {
            SweepMode::Focus {
                batch,
                out,
                near,
                far,
                count,
                pupil_x,
                pupil_y,
                pupil_radius,
                laser,
                kernel_cache,
            } => {
                if pupil_x.is_some() {
                    config.eval.pupil_x = pupil_x;
                }
                if pupil_y.is_some() {
                    config.eval.pupil_y = pupil_y;
                }
                if pupil_radius.is_some() {
                    config.eval.pupil_radius = pupil_radius;
                }
                commands::sweep_focus(
                    &config,
                    &batch,
                    &out,
                    near.0,
                    far.0,
                    count,
                    laser.as_deref(),
                    kernel_cache.as_deref(),
                )
            }
            SweepMode::Eyebox {
                batch,
                stack,
                report,
                side,
                radius,
                planes,
                laser,
                kernel_cache,
            } => commands::sweep_eyebox(
                &config,
                &batch,
                &stack,
                &report,
                side,
                radius.map(|l| l.0),
                &planes,
                laser.as_deref(),
                kernel_cache.as_deref(),
            ),
        },
        Command::OracleCheck { cases, seed } => commands::oracle_check(cases, seed),
    }
}

/// 2 for rejected input, 3 for numerical failure, 1 for I/O trouble.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::GridMismatch(_) | Error::Json(_) | Error::Image(_) => 2,
        Error::NonFinite(_) | Error::Numerical(_) => 3,
        Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
