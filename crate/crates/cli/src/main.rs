mod commands;
mod pose_binary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avatar-forge", version, about = "Parametric avatars: shape bases, motion, garments, datasets and a session service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shape basis containers.
    #[command(subcommand)]
    Basis(BasisCommand),
    /// BVH motion files.
    #[command(subcommand)]
    Bvh(BvhCommand),
    /// Transfer a BVH clip onto another skeleton.
    Retarget {
        #[arg(long)]
        bvh: PathBuf,
        /// Target skeleton: skeleton JSON or a BVH file whose hierarchy is used.
        #[arg(long)]
        target: PathBuf,
        /// Retarget map JSON (overrides, aliases, primary_child).
        #[arg(long)]
        map: Option<PathBuf>,
        /// `.bvh` writes a clip; any other extension writes the binary pose format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Garment preparation.
    #[command(subcommand)]
    Garment(GarmentCommand),
    /// Asset library catalogue.
    #[command(subcommand)]
    Assets(AssetsCommand),
    /// Run a dataset generation config.
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve the session API over an asset library.
    Serve {
        #[arg(long)]
        assets: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Minutes before an idle session is dropped.
        #[arg(long, default_value_t = 30)]
        idle_minutes: u64,
    },
    /// Write a small ready-to-scan demo library.
    Demo {
        dir: PathBuf,
        #[arg(long, default_value_t = 24)]
        frames: usize,
    },
}

#[derive(Subcommand)]
enum BasisCommand {
    /// Build a basis from a corpus of per-attribute OBJ directories.
    Build {
        /// Directory with one subdirectory of OBJ samples per attribute.
        #[arg(long)]
        corpus: PathBuf,
        /// Rest mesh OBJ.
        #[arg(long)]
        rest: PathBuf,
        /// Output `.avbasis` (or `.json`).
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a basis summary.
    Info { file: PathBuf },
}

#[derive(Subcommand)]
enum BvhCommand {
    /// Print the joint tree, frame count and frame time.
    Info { file: PathBuf },
}

#[derive(Subcommand)]
enum GarmentCommand {
    /// Push a cloth mesh outside the body and transfer skin weights.
    Prepare {
        /// Body-basis manifest (resolve and transfer weights) or OBJ mesh (resolve only).
        #[arg(long)]
        body: PathBuf,
        #[arg(long)]
        cloth: PathBuf,
        /// Output directory for the garment OBJ, weights and manifest.
        #[arg(long)]
        out: PathBuf,
        /// Garment id; defaults to the cloth file stem.
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Albedo texture path.
        #[arg(long)]
        albedo: Option<PathBuf>,
        /// Normal map texture path.
        #[arg(long)]
        normal: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AssetsCommand {
    /// Validate and list every manifest under a directory.
    Scan {
        dir: PathBuf,
        /// Print the catalogue as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Basis(BasisCommand::Build { corpus, rest, out }) => commands::basis_build(&corpus, &rest, &out),
        Command::Basis(BasisCommand::Info { file }) => commands::basis_info(&file),
        Command::Bvh(BvhCommand::Info { file }) => commands::bvh_info(&file),
        Command::Retarget { bvh, target, map, out } => commands::retarget(&bvh, &target, map.as_deref(), &out),
        Command::Garment(GarmentCommand::Prepare { body, cloth, out, id, epsilon, albedo, normal }) => {
            commands::garment_prepare(&commands::GarmentArgs { body, cloth, out, id, epsilon, albedo, normal })
        }
        Command::Assets(AssetsCommand::Scan { dir, json }) => commands::assets_scan(&dir, json),
        Command::Generate { config } => commands::generate(&config),
        Command::Serve { assets, port, host, idle_minutes } => commands::serve(&assets, &host, port, idle_minutes),
        Command::Demo { dir, frames } => commands::demo(&dir, frames),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
