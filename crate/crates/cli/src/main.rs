//! Command-line driver for the articulation-reconstruction library:
//! synthetic scene generation, per-track analysis, clustering, field
//! fitting, evaluation, the end-to-end pipeline, ablations, and gradient
//! verification.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use artic_core::cluster::{cluster_tracks, FilterConfig};
use artic_core::eval::evaluate_field;
use artic_core::field::DeformationField;
use artic_core::motion::AnalysisThresholds;
use artic_core::pipeline::{
    ablation_table, analyze_all, history_csv, run_ablations, run_pipeline, write_atomic,
    InputSource, PipelineConfig,
};
use artic_core::tracks::{
    add_noise_detailed, load_tracks, save_tracks, scenes, synth_generate, GroundTruth,
    SceneConfig,
};
use artic_core::train::{grad_check, init_from_motion, train_field, TrainConfig};
use artic_core::ArtError;

#[derive(Parser)]
#[command(name = "artic", about = "Articulation reconstruction from 3D point tracks")]
struct Cli {
    /// JSON configuration file for the subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output rendering on stdout
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: track file plus ground truth
    Gen,
    /// Classify every track's motion pattern
    Analyze,
    /// Group analyzed tracks into parts and aggregate joint parameters
    Cluster,
    /// Initialize and train a deformation field; write a checkpoint
    Fit,
    /// Score a trained checkpoint against ground truth
    Eval,
    /// Full pipeline: generate/load → analyze → cluster → fit → eval
    Pipeline,
    /// Run the pipeline once per ablation row and compare
    Ablate,
    /// Verify analytic gradients against finite differences
    Gradcheck,
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Option<PathBuf>) -> anyhow::Result<T> {
    let path = path
        .as_ref()
        .context("this subcommand requires --config <path>")?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn out_dir(cli: &Cli) -> anyhow::Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[derive(Deserialize)]
struct BuiltinScene {
    name: String,
    #[serde(default = "default_points")]
    points: usize,
    #[serde(default = "default_frames")]
    frames: usize,
    #[serde(default)]
    n_drawers: usize,
    #[serde(default)]
    n_doors: usize,
    #[serde(default)]
    seed: u64,
}

fn default_points() -> usize {
    40
}
fn default_frames() -> usize {
    60
}

#[derive(Deserialize)]
struct GenConfig {
    scene: Option<SceneConfig>,
    builtin: Option<BuiltinScene>,
    #[serde(default)]
    noise_sigma: f64,
    #[serde(default)]
    outlier_frac: f64,
}

fn resolve_scene(cfg: &GenConfig) -> anyhow::Result<SceneConfig> {
    match (&cfg.scene, &cfg.builtin) {
        (Some(s), None) => Ok(s.clone()),
        (None, Some(b)) => match b.name.as_str() {
            "door" => Ok(scenes::door(b.points, b.frames, b.seed)),
            "drawer" => Ok(scenes::drawer(b.points, b.frames, b.seed)),
            "cabinet" => Ok(scenes::cabinet(
                b.n_drawers.max(1),
                b.n_doors,
                b.points,
                b.frames,
                b.seed,
            )),
            other => anyhow::bail!("unknown builtin scene '{other}'"),
        },
        _ => anyhow::bail!("config must set exactly one of 'scene' or 'builtin'"),
    }
}

#[derive(Deserialize)]
struct AnalyzeConfig {
    tracks: PathBuf,
    #[serde(default)]
    thresholds: Option<AnalysisThresholds>,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
struct ClusterConfig {
    tracks: PathBuf,
    #[serde(default)]
    thresholds: Option<AnalysisThresholds>,
    #[serde(default)]
    filter: Option<FilterConfig>,
    k_prismatic: usize,
    k_revolute: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
struct EvalConfig {
    checkpoint: PathBuf,
    tracks: PathBuf,
    ground_truth: PathBuf,
    #[serde(default)]
    thresholds: Option<AnalysisThresholds>,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
struct GradcheckConfig {
    #[serde(default)]
    scene: Option<SceneConfig>,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default)]
    seed: u64,
}

fn default_epsilon() -> f64 {
    1e-5
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig { scene: None, epsilon: default_epsilon(), seed: 0 }
    }
}

fn load_gt(path: &Path) -> anyhow::Result<GroundTruth> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read ground truth {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn emit<T: serde::Serialize>(cli: &Cli, value: &T, table: String) -> anyhow::Result<()> {
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
        Format::Table => print!("{table}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen => {
            let mut cfg: GenConfig = read_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                if let Some(s) = cfg.scene.as_mut() {
                    s.seed = seed;
                }
                if let Some(b) = cfg.builtin.as_mut() {
                    b.seed = seed;
                }
            }
            let scene = resolve_scene(&cfg)?;
            let (clean, mut gt) = synth_generate(&scene)?;
            let ts = if cfg.noise_sigma > 0.0 || cfg.outlier_frac > 0.0 {
                let (noisy, outliers) = add_noise_detailed(
                    &clean,
                    cfg.noise_sigma,
                    cfg.outlier_frac,
                    scene.seed ^ 0x5EED,
                );
                gt.outliers = outliers;
                noisy
            } else {
                clean
            };
            let dir = out_dir(cli)?;
            save_tracks(&ts, &dir.join("tracks.bin"))?;
            write_atomic(&dir.join("ground_truth.json"), &serde_json::to_string_pretty(&gt)?)?;
            println!(
                "wrote {} tracks over {} frames to {}",
                ts.tracks.len(),
                ts.num_frames,
                dir.display()
            );
            Ok(())
        }
        Command::Analyze => {
            let cfg: AnalyzeConfig = read_config(&cli.config)?;
            let ts = load_tracks(&cfg.tracks)?;
            let th = cfg.thresholds.unwrap_or_default();
            let seed = cli.seed.unwrap_or(cfg.seed);
            let motions = analyze_all(&ts, &th, seed)?;
            let dir = out_dir(cli)?;
            write_atomic(&dir.join("motions.json"), &serde_json::to_string_pretty(&motions)?)?;
            let mut counts = [0usize; 4];
            for m in &motions {
                counts[match m.class {
                    artic_core::motion::MotionClass::Static => 0,
                    artic_core::motion::MotionClass::Prismatic => 1,
                    artic_core::motion::MotionClass::Revolute => 2,
                    artic_core::motion::MotionClass::Noise => 3,
                }] += 1;
            }
            emit(
                cli,
                &motions,
                format!(
                    "{} tracks: {} static, {} prismatic, {} revolute, {} noise\n",
                    motions.len(),
                    counts[0],
                    counts[1],
                    counts[2],
                    counts[3]
                ),
            )
        }
        Command::Cluster => {
            let cfg: ClusterConfig = read_config(&cli.config)?;
            let ts = load_tracks(&cfg.tracks)?;
            let th = cfg.thresholds.unwrap_or_default();
            let seed = cli.seed.unwrap_or(cfg.seed);
            let motions = analyze_all(&ts, &th, seed)?;
            let result = cluster_tracks(
                &ts.tracks,
                &motions,
                cfg.k_prismatic,
                cfg.k_revolute,
                &cfg.filter.unwrap_or_default(),
                th.eps_s,
                ts.scene_scale,
                seed,
            )?;
            let dir = out_dir(cli)?;
            write_atomic(&dir.join("clusters.json"), &serde_json::to_string_pretty(&result)?)?;
            let mut table = String::new();
            for (i, c) in result.clusters.iter().enumerate() {
                table.push_str(&format!(
                    "cluster {i}: {:?}, {} members, axis ({:.4}, {:.4}, {:.4})\n",
                    c.kind,
                    c.member_ids.len(),
                    c.mean_direction.x,
                    c.mean_direction.y,
                    c.mean_direction.z
                ));
            }
            emit(cli, &result, table)
        }
        Command::Fit => {
            let mut cfg: PipelineConfig = read_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                cfg.train.seed = seed;
            }
            cfg.out_dir = None; // artifacts written here, not by the stages
            let dir = out_dir(cli)?;
            let (ts, _gt) = match &cfg.input {
                InputSource::Tracks { tracks, ground_truth } => {
                    (load_tracks(tracks)?, load_gt(ground_truth)?)
                }
                InputSource::Scene { scene, .. } => synth_generate(scene)?,
            };
            let motions = analyze_all(&ts, &cfg.thresholds, cfg.train.seed)?;
            let clustering = cluster_tracks(
                &ts.tracks,
                &motions,
                cfg.k_prismatic,
                cfg.k_revolute,
                &cfg.filter,
                cfg.thresholds.eps_s,
                ts.scene_scale,
                cfg.train.seed,
            )?;
            let mut field = init_from_motion(&clustering.clusters, &ts, &motions, &cfg.train)?;
            let report = train_field(&mut field, &ts, &cfg.train)?;
            field.save(&dir.join("field.json"))?;
            write_atomic(&dir.join("history.csv"), &history_csv(&report.history))?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("checkpoint written to {}", dir.join("field.json").display());
            Ok(())
        }
        Command::Eval => {
            let cfg: EvalConfig = read_config(&cli.config)?;
            let field = DeformationField::load(&cfg.checkpoint)?;
            let ts = load_tracks(&cfg.tracks)?;
            let gt = load_gt(&cfg.ground_truth)?;
            let th = cfg.thresholds.unwrap_or_default();
            let seed = cli.seed.unwrap_or(cfg.seed);
            let motions = analyze_all(&ts, &th, seed)?;
            let report = evaluate_field(&field, &ts, &gt, &motions, f64::NAN)?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                write_atomic(&dir.join("report.json"), &report.to_json()?)?;
            }
            emit(cli, &report, report.to_table())
        }
        Command::Pipeline => {
            let mut cfg: PipelineConfig = read_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                cfg.train.seed = seed;
            }
            if cli.out.is_some() {
                cfg.out_dir = cli.out.clone();
            }
            let report = run_pipeline(&cfg)?;
            emit(cli, &report, report.to_table())
        }
        Command::Ablate => {
            let mut cfg: PipelineConfig = read_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                cfg.train.seed = seed;
            }
            if cli.out.is_some() {
                cfg.out_dir = cli.out.clone();
            }
            let rows = run_ablations(&cfg);
            let table = ablation_table(&rows);
            if let Some(dir) = &cfg.out_dir {
                std::fs::create_dir_all(dir)?;
                write_atomic(&dir.join("ablations.txt"), &table)?;
            }
            print!("{table}");
            // propagate the first failure so exit codes reflect it
            for (_, r) in rows {
                r?;
            }
            Ok(())
        }
        Command::Gradcheck => {
            let cfg: GradcheckConfig = match &cli.config {
                Some(_) => read_config(&cli.config)?,
                None => GradcheckConfig::default(),
            };
            let seed = cli.seed.unwrap_or(cfg.seed);
            let scene = cfg.scene.clone().unwrap_or_else(|| scenes::door(10, 30, seed));
            let (ts, _) = synth_generate(&scene)?;
            let th = AnalysisThresholds::default();
            let motions = analyze_all(&ts, &th, seed)?;
            let mut train_cfg = TrainConfig::default();
            train_cfg.seed = seed;
            train_cfg.pretrain_steps = 200;
            let n_rev = motions
                .iter()
                .any(|m| m.class == artic_core::motion::MotionClass::Revolute)
                as usize;
            let n_pris = motions
                .iter()
                .any(|m| m.class == artic_core::motion::MotionClass::Prismatic)
                as usize;
            let clustering = cluster_tracks(
                &ts.tracks,
                &motions,
                n_pris,
                n_rev,
                &FilterConfig::default(),
                th.eps_s,
                ts.scene_scale,
                seed,
            )?;
            let field = init_from_motion(&clustering.clusters, &ts, &motions, &train_cfg)?;
            let batch: Vec<(usize, usize)> = (0..6.min(ts.tracks.len()))
                .map(|i| (i, (ts.num_frames - 1).min(5 + 3 * i)))
                .collect();
            let pairs: Vec<(usize, usize, usize)> = (0..6.min(ts.tracks.len()))
                .map(|i| (i, 2 + i, (ts.num_frames - 1).min(12 + i)))
                .collect();
            let report = grad_check(&field, &ts, &batch, &pairs, cfg.epsilon, seed)?;
            let mut table = String::new();
            for (name, err) in &report.per_block {
                table.push_str(&format!("{name:<18} {err:.3e}\n"));
            }
            table.push_str(&format!("max relative error  {:.3e}\n", report.max_rel_error));
            emit(cli, &report, table)?;
            if report.max_rel_error > 1e-4 {
                return Err(ArtError::numerical(format!(
                    "gradient check failed: max relative error {:.3e}",
                    report.max_rel_error
                ))
                .into());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<ArtError>()
                .map(|a| a.exit_code())
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
