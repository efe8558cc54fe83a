//! `surftex`: texture backprojection from the command line.

mod bench;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use surftex::ErrorKind;

#[derive(Parser)]
#[command(name = "surftex", version, about = "Multi-view texture backprojection for UV-mapped meshes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
pub struct Global {
    /// Seed for every random choice; overrides the seed in config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core). Use 1 for reproducible runs.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Write 0 instead of measured wall times so reports are byte-stable.
    #[arg(long, global = true)]
    pub no_timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a mesh, build its texel map and optionally its geodesic cache.
    Prepare(stages::PrepareArgs),
    /// Render depth maps and G-buffers for an external image generator.
    RenderViews(stages::RenderArgs),
    /// Fuse view images listed in a manifest into a texture.
    Backproject(stages::BackprojectArgs),
    /// Train the network on the synthetic corpus.
    Train(bench::TrainArgs),
    /// Score baselines and network on the held-out corpus.
    Eval(bench::EvalArgs),
    /// Train, export, backproject, inpaint and evaluate the synthetic corpus.
    Pipeline(bench::PipelineArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Frontfacing,
    Average,
    Weighted,
    Neural,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.workers).build_global() {
        log::warn!("could not configure the worker pool: {e}");
    }
    let g = cli.global;
    let result = match cli.command {
        Command::Prepare(a) => stages::prepare(&a, &g),
        Command::RenderViews(a) => stages::render_views(&a, &g),
        Command::Backproject(a) => stages::backproject(&a, &g),
        Command::Train(a) => bench::train(&a, &g),
        Command::Eval(a) => bench::eval(&a, &g),
        Command::Pipeline(a) => bench::pipeline(&a, &g),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}

/// Creates `dir` and its parents.
pub fn ensure_dir(dir: &PathBuf) -> surftex::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| surftex::Error::io(dir, e))
}

/// Pretty JSON to `path`.
pub fn write_json(path: PathBuf, value: &impl serde::Serialize) -> surftex::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| surftex::Error::io(path, e))
}
