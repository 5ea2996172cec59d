//! End-to-end driver: tracks (loaded or generated) → per-track motion
//! analysis → clustering → field initialization → training → evaluation,
//! with artifacts written as each stage completes, plus the ablation
//! runner.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_purity, cluster_tracks, ClusteringResult, FilterConfig};
use crate::error::{ArtError, Result};
use crate::eval::{evaluate_field, EvalReport};
use crate::field::DeformationField;
use crate::motion::{analyze_track, AnalysisThresholds, TrackMotion};
use crate::tracks::{add_noise_detailed, load_tracks, synth_generate, GroundTruth, SceneConfig, TrackSet};
use crate::train::{
    init_from_motion, loss_c2o, loss_o2o, sample_c2o_batch, sample_o2o_pairs, train_field,
    TrainConfig,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    /// Load a saved track file; ground truth is required for evaluation.
    Tracks {
        tracks: PathBuf,
        ground_truth: PathBuf,
    },
    /// Generate a synthetic scene, optionally corrupted.
    Scene {
        scene: SceneConfig,
        #[serde(default)]
        noise_sigma: f64,
        #[serde(default)]
        outlier_frac: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: InputSource,
    #[serde(default)]
    pub thresholds: AnalysisThresholds,
    #[serde(default)]
    pub filter: FilterConfig,
    pub k_prismatic: usize,
    pub k_revolute: usize,
    #[serde(default)]
    pub train: TrainConfig,
    /// artifact directory; nothing is written when absent
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.filter.validate()?;
        self.train.validate()?;
        if self.k_prismatic + self.k_revolute == 0 {
            return Err(ArtError::config("at least one movable part is required"));
        }
        if let InputSource::Scene { noise_sigma, outlier_frac, .. } = &self.input {
            if *noise_sigma < 0.0 || !(0.0..1.0).contains(outlier_frac) {
                return Err(ArtError::config(
                    "noise sigma must be >= 0 and outlier fraction in [0,1)",
                ));
            }
        }
        Ok(())
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| ArtError::Stage { stage: name, source: Box::new(e) })
}

/// Write via a temp file + rename so readers never observe partial files.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_artifact(out_dir: &Option<PathBuf>, name: &str, contents: &str) -> Result<()> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join(name), contents)?;
    }
    Ok(())
}

fn json_of<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| ArtError::config(e.to_string()))
}

pub fn history_csv(history: &[crate::train::LossRecord]) -> String {
    let mut s = String::from("step,l_c2o,l_o2o,total\n");
    for r in history {
        s.push_str(&format!("{},{:?},{:?},{:?}\n", r.step, r.l_c2o, r.l_o2o, r.total));
    }
    s
}

/// The full reconstruction pipeline. Artifacts are written into `out_dir`
/// as each stage finishes, so a failed stage still leaves everything its
/// predecessors produced.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<EvalReport> {
    let started = std::time::Instant::now();
    cfg.validate()?;

    let (ts, gt) = stage("input", load_input(cfg))?;
    write_artifact(&cfg.out_dir, "ground_truth.json", &json_of(&gt)?)?;

    let motions = stage("analyze", analyze_all(&ts, &cfg.thresholds, cfg.train.seed))?;
    write_artifact(&cfg.out_dir, "motions.json", &json_of(&motions)?)?;

    let clustering = stage(
        "cluster",
        cluster_tracks(
            &ts.tracks,
            &motions,
            cfg.k_prismatic,
            cfg.k_revolute,
            &cfg.filter,
            cfg.thresholds.eps_s,
            ts.scene_scale,
            cfg.train.seed,
        ),
    )?;
    write_artifact(&cfg.out_dir, "clusters.json", &json_of(&clustering)?)?;

    let mut field = stage(
        "init",
        init_from_motion(&clustering.clusters, &ts, &motions, &cfg.train),
    )?;

    let train_report = stage("train", train_field(&mut field, &ts, &cfg.train))?;
    write_artifact(&cfg.out_dir, "field.json", &field.to_json()?)?;
    write_artifact(&cfg.out_dir, "history.csv", &history_csv(&train_report.history))?;

    let mut report = stage("eval", build_report(cfg, &ts, &gt, &motions, &clustering, &field))?;
    report.warnings = train_report.warnings;
    report.seed = cfg.train.seed;
    report.config_echo = serde_json::to_value(cfg).map_err(|e| ArtError::config(e.to_string()))?;
    report.wall_time_seconds = started.elapsed().as_secs_f64();
    write_artifact(&cfg.out_dir, "report.json", &report.to_json()?)?;
    write_artifact(&cfg.out_dir, "report.txt", &report.to_table())?;
    Ok(report)
}

fn load_input(cfg: &PipelineConfig) -> Result<(TrackSet, GroundTruth)> {
    match &cfg.input {
        InputSource::Tracks { tracks, ground_truth } => {
            let ts = load_tracks(tracks)?;
            let text = std::fs::read_to_string(ground_truth)?;
            let gt: GroundTruth = serde_json::from_str(&text)
                .map_err(|e| ArtError::config(format!("bad ground-truth file: {e}")))?;
            if gt.labels.len() != ts.tracks.len() {
                return Err(ArtError::validation(
                    "ground-truth labels do not match the track count",
                ));
            }
            Ok((ts, gt))
        }
        InputSource::Scene { scene, noise_sigma, outlier_frac } => {
            let (clean, mut gt) = synth_generate(scene)?;
            if *noise_sigma > 0.0 || *outlier_frac > 0.0 {
                let (noisy, outliers) =
                    add_noise_detailed(&clean, *noise_sigma, *outlier_frac, scene.seed ^ 0x5EED);
                gt.outliers = outliers;
                Ok((noisy, gt))
            } else {
                Ok((clean, gt))
            }
        }
    }
}

pub fn analyze_all(
    ts: &TrackSet,
    thresholds: &AnalysisThresholds,
    seed: u64,
) -> Result<Vec<TrackMotion>> {
    ts.tracks
        .iter()
        .map(|t| analyze_track(t, ts.canonical_frame, thresholds, ts.scene_scale, seed))
        .collect()
}

fn build_report(
    cfg: &PipelineConfig,
    ts: &TrackSet,
    gt: &GroundTruth,
    motions: &[TrackMotion],
    clustering: &ClusteringResult,
    field: &DeformationField,
) -> Result<EvalReport> {
    let gt_map: HashMap<u64, usize> = ts
        .tracks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id, gt.labels[i]))
        .collect();
    let purity = cluster_purity(clustering, &gt_map);
    let mut report = evaluate_field(field, ts, gt, motions, purity)?;
    // deterministic final loss probe
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.train.seed ^ 0xF1A7);
    let batch = sample_c2o_batch(ts, 256, &mut rng);
    if !batch.is_empty() {
        report.final_l_c2o = loss_c2o(field, ts, &batch)?.0;
    }
    let pairs = sample_o2o_pairs(ts, 256, cfg.train.o2o_window, &mut rng);
    if !pairs.is_empty() {
        report.final_l_o2o = loss_o2o(field, ts, &pairs, true)?.0;
    }
    Ok(report)
}

use rand::SeedableRng;

/// The eight ablation rows: the full model plus each disabled component.
pub fn ablation_rows() -> Vec<(&'static str, crate::train::AblationFlags)> {
    use crate::train::AblationFlags as F;
    vec![
        ("full", F::default()),
        (
            "wo_motion_prior",
            F { no_center_init: true, no_axis_init: true, no_deform_init: true, ..F::default() },
        ),
        ("wo_center_init", F { no_center_init: true, ..F::default() }),
        ("wo_axis_init", F { no_axis_init: true, ..F::default() }),
        ("wo_deform_init", F { no_deform_init: true, ..F::default() }),
        ("wo_hybrid", F { no_hybrid: true, ..F::default() }),
        ("wo_l_o2o", F { no_o2o: true, ..F::default() }),
        ("wo_l_c2o", F { no_c2o: true, ..F::default() }),
    ]
}

/// Run the pipeline once per ablation row with a shared seed. A failed
/// row is reported and the remaining rows proceed.
pub fn run_ablations(cfg: &PipelineConfig) -> Vec<(String, Result<EvalReport>)> {
    ablation_rows()
        .into_iter()
        .map(|(name, flags)| {
            let mut row_cfg = cfg.clone();
            row_cfg.train.flags = flags;
            row_cfg.out_dir = cfg.out_dir.as_ref().map(|d| d.join(name));
            (name.to_string(), run_pipeline(&row_cfg))
        })
        .collect()
}

/// Fixed-width comparison table over ablation results.
pub fn ablation_table(rows: &[(String, Result<EvalReport>)]) -> String {
    let mut s = String::from("row              axis_err_deg  pos_err_cm  state_err  purity\n");
    for (name, r) in rows {
        match r {
            Ok(rep) => s.push_str(&format!(
                "{name:<16} {:>12.4}  {}  {:>9.4}  {:>6.4}\n",
                rep.mean_axis_error_deg,
                rep.mean_position_error_cm
                    .map(|p| format!("{p:>10.4}"))
                    .unwrap_or_else(|| "       n/a".into()),
                rep.mean_state_error,
                rep.assignment_purity,
            )),
            Err(e) => s.push_str(&format!("{name:<16} FAILED: {e}\n")),
        }
    }
    s
}
