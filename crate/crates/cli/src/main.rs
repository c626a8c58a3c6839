//! `sefm`: dense two-view matching along corresponding epipolar lines.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use sefm_core::config::PipelineConfig;
use sefm_core::evalbench::{default_scene, SceneKind};
use sefm_core::pipeline::{
    load_inputs, reconstruct, run_eval, run_match, with_workers, write_atomic, write_match_outputs, write_scene,
};

#[derive(Parser)]
#[command(name = "sefm", version, about = "Dense matching along corresponding epipolar lines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match two images and write matches.txt, report.txt, fundamental.txt and viz.ppm.
    Match(PairArgs),
    /// Match two images and also write the surviving matches as cloud.ply.
    Reconstruct(PairArgs),
    /// Render a synthetic scene with its intrinsics and ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Ground-truth sampling stride in pixels.
        #[arg(long, default_value_t = 8)]
        gt_stride: usize,
    },
    /// Run the pipeline on a synthetic scene and write metrics.csv and metrics.txt.
    Eval {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct PairArgs {
    img1: PathBuf,
    img2: PathBuf,
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    #[arg(long)]
    ext_matches: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Synthetic scene: plane or two-plane.
    #[arg(long)]
    scene: Option<SceneKind>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        }
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.scene {
            cfg.eval_scene = s;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

impl PairArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = self.common.config()?;
        cfg.img1 = Some(self.img1.clone());
        cfg.img2 = Some(self.img2.clone());
        if self.intrinsics.is_some() {
            cfg.intrinsics = self.intrinsics.clone();
        }
        if self.ext_matches.is_some() {
            cfg.ext_matches = self.ext_matches.clone();
        }
        Ok(cfg)
    }
}

fn run_pair(cfg: &PipelineConfig, cloud: bool) -> Result<()> {
    let (img1, img2, inputs) = load_inputs(cfg)?;
    if inputs.intrinsics.is_none() {
        warn!("no intrinsics given: depth checks are disabled and reconstructions are projective");
    }
    let result = with_workers(cfg.workers, || run_match(&img1, &img2, &inputs, cfg))??;
    write_match_outputs(&cfg.out_dir, &img1, &img2, &result, cfg)?;
    println!("{}", result.report);
    if cloud {
        let pc = with_workers(cfg.workers, || reconstruct(&img1, &result))?;
        if pc.points.is_empty() {
            warn!("no surviving matches; writing an empty point cloud");
        }
        if pc.projective {
            warn!("point cloud is projective (no intrinsics)");
        }
        write_atomic(&cfg.out_dir.join("cloud.ply"), pc.to_ply().as_bytes())?;
        info!("wrote {} points", pc.points.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (common, cfg) = match &cli.command {
        Command::Match(p) | Command::Reconstruct(p) => (&p.common, p.config()?),
        Command::Synth { common, .. } | Command::Eval { common } => (common, common.config()?),
    };
    if common.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    match cli.command {
        Command::Match(_) => run_pair(&cfg, false),
        Command::Reconstruct(_) => run_pair(&cfg, true),
        Command::Synth { gt_stride, .. } => {
            let scene = default_scene(cfg.eval_scene, cfg.seed)?;
            write_scene(&cfg.out_dir, &scene, gt_stride)?;
            println!("wrote {} scene to {}", cfg.eval_scene, cfg.out_dir.display());
            Ok(())
        }
        Command::Eval { .. } => {
            let out = with_workers(cfg.workers, || run_eval(&cfg))??;
            print!("{}", out.metrics);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
