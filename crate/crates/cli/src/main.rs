//! `scenewire` command line: fit the shape space, generate masks and
//! synthetic scenes, run inference, evaluate and render.

mod commands;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "scenewire", version, about = "Monocular multi-car 3D scene inference")]
struct Cli {
    /// Master seed; defaults to the project seed, or 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Project manifest or module configuration JSON. Falls back to $SCENEWIRE_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the PCA shape space to exemplar wireframes.
    FitShape(FitShapeArgs),
    /// Generate the occlusion mask catalog.
    GenMasks(GenMasksArgs),
    /// Generate a project of synthetic scenes with evidence and pre-detections.
    Synth(SynthArgs),
    /// Infer a scene, or every scene of a project.
    Infer(InferArgs),
    /// Evaluate inference results against ground truth.
    Eval(EvalArgs),
    /// Draw the image overlay and bird's-eye view of a result.
    Render(RenderArgs),
    /// Per-part likelihood breakdown of a result.
    Explain(ExplainArgs),
}

#[derive(Args, Debug)]
pub struct FitShapeArgs {
    /// Exemplar set JSON.
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    pub exemplars: Option<PathBuf>,
    /// Use this many procedural exemplars instead of a file.
    #[arg(long)]
    pub generate: Option<usize>,
    /// Also write the generated exemplars here.
    #[arg(long, requires = "generate")]
    pub save_exemplars: Option<PathBuf>,
    /// Number of principal components; defaults to the configured rank.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenMasksArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Also draw the catalog as an SVG sheet.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
    /// Settings used when no --config is given.
    #[arg(long, value_enum, default_value_t = settings::Preset::Default)]
    pub preset: settings::Preset,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// A single scene directory (scene.json, detections.json, responses.bin).
    #[arg(long, conflicts_with = "all", required_unless_present = "all")]
    pub scene_dir: Option<PathBuf>,
    /// Infer every scene of the project.
    #[arg(long)]
    pub all: bool,
    /// Model variant, e.g. fg+gp+do+so; repeatable; `table` runs every variant.
    #[arg(long, default_value = "fg+gp+do+so")]
    pub variant: Vec<String>,
    /// Result file for a single scene and variant.
    #[arg(long, required_unless_present = "all")]
    pub out: Option<PathBuf>,
    /// Results root for --all, laid out as <variant>/<scene>.json; defaults
    /// to the project's results directory.
    #[arg(long, requires = "all")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub results_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene_dir: PathBuf,
    #[arg(long)]
    pub result: PathBuf,
    /// Receives overlay.svg and birdseye.svg.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub scene_dir: PathBuf,
    #[arg(long)]
    pub result: PathBuf,
    /// Only this object of the result.
    #[arg(long)]
    pub object: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))?;
    }
    let ctx = settings::Context::resolve(cli.config, cli.seed)?;
    match cli.command {
        Command::FitShape(a) => commands::fit_shape(&ctx, a),
        Command::GenMasks(a) => commands::gen_masks(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Infer(a) => commands::infer(&ctx, a),
        Command::Eval(a) => commands::eval(a),
        Command::Render(a) => commands::render(&ctx, a),
        Command::Explain(a) => commands::explain(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
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
