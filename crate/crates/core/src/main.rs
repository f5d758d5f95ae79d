use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nlpersp::pipeline::{
    cmd_augment, cmd_eval, cmd_extract, cmd_infer, cmd_match, cmd_train, ProjectManifest, Stage,
};
use nlpersp::{exec, Error};

#[derive(Parser, Debug)]
#[command(
    name = "nlpersp",
    version,
    about = "Learn and apply artist-style perspective deviations"
)]
struct Cli {
    /// TOML or JSON file with [extract], [matching] and [training] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single-threaded execution; outputs are byte-identical across runs.
    #[arg(long, global = true)]
    deterministic: bool,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Last training stage to run.
    #[arg(long, global = true, value_enum, default_value = "aug2")]
    stage: StageArg,

    /// Triangulated OBJ mesh; centered and scaled into [-1, 1]^3 on load.
    #[arg(long, global = true)]
    mesh: Option<PathBuf>,
    /// Camera JSON.
    #[arg(long, global = true)]
    camera: Option<PathBuf>,
    /// Sketch SVG.
    #[arg(long, global = true)]
    sketch: Option<PathBuf>,
    /// anchors.json from `extract`; extracted from the mesh when absent.
    #[arg(long, global = true)]
    contours: Option<PathBuf>,
    /// matches.json from `match`; computed when absent.
    #[arg(long, global = true)]
    matches: Option<PathBuf>,
    /// Deviation field checkpoint.
    #[arg(long, global = true)]
    field: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StageArg {
    Init,
    Aug1,
    Aug2,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Visible analytic contours: contours.svg, anchors.json.
    Extract,
    /// Match contours to sketch strokes: matches.json, overlay.svg.
    Match,
    /// Train a deviation field: field.json, field_<stage>.json, loss.csv.
    Train,
    /// Run augmentation stages on an existing field.
    Augment,
    /// Render deviated contours: infer.svg.
    Infer,
    /// Chamfer metrics and the optional cross-view experiment: metrics.json.
    Eval {
        /// Rotation for the cross-view consistency experiment, in degrees.
        #[arg(long)]
        consistency_deg: Option<f64>,
    },
}

fn run(cli: &Cli) -> Result<(), Error> {
    let manifest = ProjectManifest {
        mesh: cli.mesh.clone(),
        sketch: cli.sketch.clone(),
        camera: cli.camera.clone(),
        contours: cli.contours.clone(),
        matches: cli.matches.clone(),
        field: cli.field.clone(),
        config: cli.config.clone(),
        out: cli.out.clone(),
        seed: cli.seed,
        stage: match cli.stage {
            StageArg::Init => Stage::Init,
            StageArg::Aug1 => Stage::Aug1,
            StageArg::Aug2 => Stage::Aug2,
        },
    };
    let project = manifest.load()?;
    match &cli.command {
        Command::Extract => cmd_extract(&project).map(drop),
        Command::Match => cmd_match(&project).map(drop),
        Command::Train => cmd_train(&project).map(drop),
        Command::Augment => cmd_augment(&project).map(drop),
        Command::Infer => cmd_infer(&project).map(drop),
        Command::Eval { consistency_deg } => {
            let m = cmd_eval(&project, consistency_deg.map(f64::to_radians))?;
            println!(
                "analytic vs sketch {:.4e}, output vs sketch {:.4e}",
                m.analytic_vs_sketch, m.output_vs_sketch
            );
            if let Some(c) = m.consistency {
                println!(
                    "view consistency at {:.4} rad: {:.4e}",
                    c.angle_rad, c.chamfer
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match exec::with_threads(cli.deterministic, || run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
