//! Track data model, synthetic articulated-scene generator, noise
//! injection, and track file I/O (JSON and a compact binary format).

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::geom::{dq_apply, dq_from_joint, JointSpec};

pub const TRACK_SCHEMA_VERSION: u32 = 1;
const BIN_MAGIC: &[u8; 4] = b"ATRK";

/// One 3D point trajectory over `T` frames.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Track {
    pub id: u64,
    /// `T` positions in meters.
    pub positions: Vec<[f64; 3]>,
    /// Per-frame visibility.
    pub valid: Vec<bool>,
}

impl Track {
    pub fn num_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn pos(&self, frame: usize) -> Vector3<f64> {
        let p = self.positions[frame];
        Vector3::new(p[0], p[1], p[2])
    }
}

/// A set of tracks sharing a frame range and a canonical frame.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrackSet {
    pub version: u32,
    pub num_frames: usize,
    pub canonical_frame: usize,
    /// Bounding-box diagonal at the canonical frame, meters.
    pub scene_scale: f64,
    pub tracks: Vec<Track>,
}

impl TrackSet {
    pub fn validate(&self) -> Result<()> {
        if self.tracks.is_empty() {
            return Err(ArtError::TrackFile("no tracks".into()));
        }
        if self.canonical_frame >= self.num_frames {
            return Err(ArtError::TrackFile(format!(
                "canonical frame {} out of range (T = {})",
                self.canonical_frame, self.num_frames
            )));
        }
        if !(self.scene_scale > 0.0) {
            return Err(ArtError::TrackFile(format!(
                "scene_scale must be positive, got {}",
                self.scene_scale
            )));
        }
        for tr in &self.tracks {
            if tr.positions.len() != self.num_frames || tr.valid.len() != self.num_frames {
                return Err(ArtError::TrackFile(format!(
                    "track {} length mismatch: {} positions, {} valid flags, T = {}",
                    tr.id,
                    tr.positions.len(),
                    tr.valid.len(),
                    self.num_frames
                )));
            }
            if tr.num_valid() < 2 {
                return Err(ArtError::TrackFile(format!(
                    "track {} has fewer than 2 valid frames",
                    tr.id
                )));
            }
            for (f, (p, v)) in tr.positions.iter().zip(&tr.valid).enumerate() {
                if *v && !p.iter().all(|c| c.is_finite()) {
                    return Err(ArtError::TrackFile(format!(
                        "track {} has a non-finite position at frame {f}",
                        tr.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn bounding_box_at(&self, frame: usize) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for tr in &self.tracks {
            if tr.valid[frame] {
                for c in 0..3 {
                    lo[c] = lo[c].min(tr.positions[frame][c]);
                    hi[c] = hi[c].max(tr.positions[frame][c]);
                }
            }
        }
        (lo, hi)
    }
}

/// A linear joint-state ramp over a frame window.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScheduleWindow {
    pub start_frame: usize,
    pub end_frame: usize,
    pub theta_start: f64,
    pub theta_end: f64,
}

/// One rigid part: a box sampled on its faces, optionally attached to the
/// base by a joint with a motion schedule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartConfig {
    pub point_count: usize,
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    /// `None` marks the static base part.
    pub joint: Option<JointSpec>,
    #[serde(default)]
    pub schedule: Vec<ScheduleWindow>,
}

/// Synthetic articulated-scene description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneConfig {
    pub parts: Vec<PartConfig>,
    pub num_frames: usize,
    /// Frames `[0, static_prefix)` hold every joint at its initial state.
    pub static_prefix: usize,
    pub seed: u64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let statics = self.parts.iter().filter(|p| p.joint.is_none()).count();
        if statics != 1 {
            return Err(ArtError::config(format!(
                "exactly one static base part required, found {statics}"
            )));
        }
        if self.static_prefix == 0 || self.static_prefix >= self.num_frames {
            return Err(ArtError::config(
                "static prefix must lie in [1, num_frames)".to_string(),
            ));
        }
        for (i, part) in self.parts.iter().enumerate() {
            if part.point_count == 0 {
                return Err(ArtError::config(format!("part {i} has zero points")));
            }
            if let Some(spec) = &part.joint {
                spec.validate()
                    .map_err(|e| ArtError::config(format!("part {i}: {e}")))?;
                let mut prev_end = 0usize;
                for (wi, w) in part.schedule.iter().enumerate() {
                    if w.start_frame < self.static_prefix || w.end_frame > self.num_frames {
                        return Err(ArtError::config(format!(
                            "part {i} window {wi} must lie in [{}, {})",
                            self.static_prefix, self.num_frames
                        )));
                    }
                    if w.end_frame <= w.start_frame {
                        return Err(ArtError::config(format!("part {i} window {wi} is empty")));
                    }
                    if wi > 0 && w.start_frame < prev_end {
                        return Err(ArtError::config(format!(
                            "part {i} windows {} and {wi} overlap",
                            wi - 1
                        )));
                    }
                    prev_end = w.end_frame;
                }
            } else if !part.schedule.is_empty() {
                return Err(ArtError::config(format!(
                    "static part {i} must not have a schedule"
                )));
            }
        }
        Ok(())
    }

    /// Joint state of a movable part at a frame: ramps linearly inside
    /// each window, holds the last value between windows.
    pub fn theta_at(&self, part_idx: usize, frame: usize) -> f64 {
        let part = &self.parts[part_idx];
        let mut theta = part
            .schedule
            .first()
            .map(|w| w.theta_start)
            .unwrap_or(0.0);
        for w in &part.schedule {
            if frame < w.start_frame {
                break;
            }
            if frame >= w.end_frame {
                theta = w.theta_end;
            } else {
                let u = (frame - w.start_frame) as f64 / (w.end_frame - w.start_frame) as f64;
                theta = w.theta_start + u * (w.theta_end - w.theta_start);
            }
        }
        theta
    }
}

/// Generator ground truth: joint specs, per-frame states, and the part
/// label of every track. Part indices refer to `SceneConfig::parts`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Movable part indices in generation order.
    pub movable_parts: Vec<usize>,
    /// Joint spec per movable part (same order as `movable_parts`).
    pub joints: Vec<JointSpec>,
    /// `thetas[j][t]` = state of joint `j` at frame `t`, radians/meters.
    pub thetas: Vec<Vec<f64>>,
    /// Part index per track.
    pub labels: Vec<usize>,
    /// Marks tracks replaced by random walks in `add_noise`; empty until
    /// noise is applied.
    #[serde(default)]
    pub outliers: Vec<bool>,
}

fn sample_box_surface(rng: &mut ChaCha8Rng, lo: [f64; 3], hi: [f64; 3]) -> Vector3<f64> {
    let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    // face areas per axis pair
    let areas = [
        ext[1] * ext[2],
        ext[0] * ext[2],
        ext[0] * ext[1],
    ];
    let total: f64 = 2.0 * (areas[0] + areas[1] + areas[2]);
    let mut pick = rng.gen_range(0.0..total.max(1e-12));
    let mut axis = 0;
    let mut side = 0usize;
    'outer: for a in 0..3 {
        for s in 0..2 {
            if pick < areas[a] {
                axis = a;
                side = s;
                break 'outer;
            }
            pick -= areas[a];
        }
    }
    let mut p = [0.0f64; 3];
    for c in 0..3 {
        p[c] = if c == axis {
            if side == 0 {
                lo[c]
            } else {
                hi[c]
            }
        } else {
            rng.gen_range(0.0..1.0) * ext[c] + lo[c]
        };
    }
    Vector3::new(p[0], p[1], p[2])
}

/// Generate a deterministic synthetic scene: every track on a movable part
/// follows its joint transform exactly, the base part is constant.
pub fn synth_generate(cfg: &SceneConfig) -> Result<(TrackSet, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t_frames = cfg.num_frames;
    let canonical_frame = 0usize;

    let mut tracks = Vec::new();
    let mut labels = Vec::new();
    let mut movable_parts = Vec::new();
    let mut joints = Vec::new();
    let mut thetas = Vec::new();

    for (pi, part) in cfg.parts.iter().enumerate() {
        if part.joint.is_some() {
            movable_parts.push(pi);
        }
    }
    for &pi in &movable_parts {
        joints.push(cfg.parts[pi].joint.unwrap());
        thetas.push((0..t_frames).map(|f| cfg.theta_at(pi, f)).collect());
    }

    let mut next_id = 0u64;
    for (pi, part) in cfg.parts.iter().enumerate() {
        // canonical-state transforms so the sampled box sits at theta(canonical)
        let theta_c = part.joint.map(|_| cfg.theta_at(pi, canonical_frame));
        for _ in 0..part.point_count {
            let canon = sample_box_surface(&mut rng, part.box_min, part.box_max);
            let mut positions = Vec::with_capacity(t_frames);
            for f in 0..t_frames {
                let p = match &part.joint {
                    None => canon,
                    Some(spec) => {
                        let th = cfg.theta_at(pi, f);
                        let fwd = dq_from_joint(spec, th)?;
                        let back = dq_from_joint(spec, theta_c.unwrap())?;
                        let inv = back.inverse_unit();
                        dq_apply(&fwd.mul(inv).normalize(), canon)?
                    }
                };
                positions.push([p.x, p.y, p.z]);
            }
            tracks.push(Track {
                id: next_id,
                positions,
                valid: vec![true; t_frames],
            });
            labels.push(pi);
            next_id += 1;
        }
    }

    let mut ts = TrackSet {
        version: TRACK_SCHEMA_VERSION,
        num_frames: t_frames,
        canonical_frame,
        scene_scale: 1.0,
        tracks,
    };
    let (lo, hi) = ts.bounding_box_at(canonical_frame);
    let diag = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt();
    ts.scene_scale = diag.max(1e-9);
    ts.validate()?;
    let gt = GroundTruth {
        movable_parts,
        joints,
        thetas,
        labels,
        outliers: vec![false; ts.tracks.len()],
    };
    Ok((ts, gt))
}

/// `add_noise` plus the mask of which tracks became random-walk outliers.
pub fn add_noise_detailed(
    ts: &TrackSet,
    sigma: f64,
    outlier_frac: f64,
    seed: u64,
) -> (TrackSet, Vec<bool>) {
    let mut out = ts.clone();
    let n = ts.tracks.len();
    let mut outlier_mask = vec![false; n];
    if sigma == 0.0 && outlier_frac == 0.0 {
        return (out, outlier_mask);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = sigma * ts.scene_scale;

    // pick exactly floor(outlier_frac * n) tracks
    let num_outliers = (outlier_frac * n as f64).floor() as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    for &i in indices.iter().take(num_outliers) {
        outlier_mask[i] = true;
    }

    let gauss = |rng: &mut ChaCha8Rng| -> f64 {
        // Box-Muller
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };

    for (i, tr) in out.tracks.iter_mut().enumerate() {
        if outlier_mask[i] {
            // bounded random walk from the canonical position
            let start = tr.positions[ts.canonical_frame];
            let step = 3.0 * std;
            let bound = 0.6 * ts.scene_scale;
            let mut p = start;
            for f in 0..ts.num_frames {
                for c in 0..3 {
                    p[c] += step * gauss(&mut rng);
                    let lo = start[c] - bound;
                    let hi = start[c] + bound;
                    p[c] = p[c].clamp(lo, hi);
                }
                tr.positions[f] = p;
            }
        } else if std > 0.0 {
            for f in 0..ts.num_frames {
                for c in 0..3 {
                    tr.positions[f][c] += std * gauss(&mut rng);
                }
            }
        }
    }
    (out, outlier_mask)
}

/// Perturb tracks with i.i.d. Gaussian noise and replace a fraction of
/// them by bounded random walks. `sigma` is a fraction of the scene scale.
pub fn add_noise(ts: &TrackSet, sigma: f64, outlier_frac: f64, seed: u64) -> TrackSet {
    add_noise_detailed(ts, sigma, outlier_frac, seed).0
}

pub fn save_tracks(ts: &TrackSet, path: &Path) -> Result<()> {
    if path.extension().map(|e| e == "bin").unwrap_or(false) {
        save_tracks_bin(ts, path)
    } else {
        save_tracks_json(ts, path)
    }
}

pub fn load_tracks(path: &Path) -> Result<TrackSet> {
    if path.extension().map(|e| e == "bin").unwrap_or(false) {
        load_tracks_bin(path)
    } else {
        load_tracks_json(path)
    }
}

pub fn save_tracks_json(ts: &TrackSet, path: &Path) -> Result<()> {
    let data = serde_json::to_vec(ts)
        .map_err(|e| ArtError::TrackFile(format!("serialize failed: {e}")))?;
    std::fs::write(path, data)?;
    Ok(())
}

pub fn load_tracks_json(path: &Path) -> Result<TrackSet> {
    let data = std::fs::read(path)?;
    let ts: TrackSet = serde_json::from_slice(&data)
        .map_err(|e| ArtError::TrackFile(format!("malformed track file: {e}")))?;
    finish_load(ts)
}

fn finish_load(ts: TrackSet) -> Result<TrackSet> {
    if ts.version != TRACK_SCHEMA_VERSION {
        return Err(ArtError::TrackFile(format!(
            "schema version mismatch: file has {}, expected {}",
            ts.version, TRACK_SCHEMA_VERSION
        )));
    }
    ts.validate()?;
    Ok(ts)
}

pub fn save_tracks_bin(ts: &TrackSet, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(BIN_MAGIC)?;
    w.write_u32::<LittleEndian>(ts.version)?;
    w.write_u32::<LittleEndian>(ts.num_frames as u32)?;
    w.write_u32::<LittleEndian>(ts.canonical_frame as u32)?;
    w.write_f64::<LittleEndian>(ts.scene_scale)?;
    w.write_u32::<LittleEndian>(ts.tracks.len() as u32)?;
    for tr in &ts.tracks {
        w.write_u64::<LittleEndian>(tr.id)?;
        for p in &tr.positions {
            for c in p {
                w.write_f64::<LittleEndian>(*c)?;
            }
        }
        for v in &tr.valid {
            w.write_u8(*v as u8)?;
        }
    }
    Ok(())
}

pub fn load_tracks_bin(path: &Path) -> Result<TrackSet> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(ArtError::TrackFile("bad magic, not a track file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    let num_frames = r.read_u32::<LittleEndian>()? as usize;
    let canonical_frame = r.read_u32::<LittleEndian>()? as usize;
    let scene_scale = r.read_f64::<LittleEndian>()?;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let mut tracks = Vec::with_capacity(n);
    for _ in 0..n {
        let id = r.read_u64::<LittleEndian>()?;
        let mut positions = Vec::with_capacity(num_frames);
        for _ in 0..num_frames {
            let mut p = [0.0f64; 3];
            for c in &mut p {
                *c = r.read_f64::<LittleEndian>()?;
            }
            positions.push(p);
        }
        let mut valid = Vec::with_capacity(num_frames);
        for _ in 0..num_frames {
            valid.push(r.read_u8()? != 0);
        }
        tracks.push(Track {
            id,
            positions,
            valid,
        });
    }
    finish_load(TrackSet {
        version,
        num_frames,
        canonical_frame,
        scene_scale,
        tracks,
    })
}

/// Voxel downsample guard used by tests; exported for the motion module.
pub(crate) fn _unused() {}

/// Convenience scene builders used by the benchmark suites and tests.
pub mod scenes {
    use super::*;

    /// Single revolute "door": static frame box plus a door leaf swinging
    /// about a vertical hinge.
    pub fn door(points_per_part: usize, num_frames: usize, seed: u64) -> SceneConfig {
        SceneConfig {
            parts: vec![
                PartConfig {
                    point_count: points_per_part,
                    box_min: [-0.55, -0.05, 0.0],
                    box_max: [-0.45, 0.05, 1.0],
                    joint: None,
                    schedule: vec![],
                },
                PartConfig {
                    point_count: points_per_part,
                    box_min: [-0.45, -0.02, 0.05],
                    box_max: [0.45, 0.02, 0.95],
                    joint: Some(JointSpec::revolute(
                        Vector3::new(0.0, 0.0, 1.0),
                        Vector3::new(-0.45, 0.0, 0.0),
                    )),
                    schedule: vec![ScheduleWindow {
                        start_frame: num_frames / 5,
                        end_frame: num_frames,
                        theta_start: 0.0,
                        theta_end: 1.2,
                    }],
                },
            ],
            num_frames,
            static_prefix: num_frames / 5,
            seed,
        }
    }

    /// Single prismatic drawer.
    pub fn drawer(points_per_part: usize, num_frames: usize, seed: u64) -> SceneConfig {
        SceneConfig {
            parts: vec![
                PartConfig {
                    point_count: points_per_part,
                    box_min: [-0.4, -0.3, 0.0],
                    box_max: [0.4, 0.3, 0.8],
                    joint: None,
                    schedule: vec![],
                },
                PartConfig {
                    point_count: points_per_part,
                    box_min: [-0.35, -0.28, 0.45],
                    box_max: [0.35, 0.32, 0.7],
                    joint: Some(JointSpec::prismatic(Vector3::new(0.0, 1.0, 0.0))),
                    schedule: vec![ScheduleWindow {
                        start_frame: num_frames / 5,
                        end_frame: num_frames,
                        theta_start: 0.0,
                        theta_end: 0.4,
                    }],
                },
            ],
            num_frames,
            static_prefix: num_frames / 5,
            seed,
        }
    }

    /// Cabinet with `n_drawers` prismatic drawers and `n_doors` revolute
    /// doors moving in staggered windows. Supports up to 9 movable parts.
    pub fn cabinet(
        n_drawers: usize,
        n_doors: usize,
        points_per_part: usize,
        num_frames: usize,
        seed: u64,
    ) -> SceneConfig {
        let movable = n_drawers + n_doors;
        assert!(movable >= 1 && movable <= 9);
        let prefix = (num_frames / 6).max(2);
        let span = num_frames - prefix;
        let window = span / movable;
        let mut parts = vec![PartConfig {
            point_count: points_per_part * 2,
            box_min: [-0.6, -0.35, 0.0],
            box_max: [0.6, 0.25, 1.4],
            joint: None,
            schedule: vec![],
        }];
        let mut widx = 0usize;
        for d in 0..n_drawers {
            let z0 = 0.05 + 1.3 * d as f64 / movable as f64;
            let z1 = z0 + 0.55 / movable as f64;
            let start = prefix + widx * window;
            parts.push(PartConfig {
                point_count: points_per_part,
                box_min: [-0.55, -0.32, z0],
                box_max: [0.0, 0.28, z1],
                joint: Some(JointSpec::prismatic(Vector3::new(0.0, 1.0, 0.0))),
                schedule: vec![ScheduleWindow {
                    start_frame: start,
                    end_frame: (start + window).min(num_frames),
                    theta_start: 0.0,
                    theta_end: 0.35 + 0.03 * d as f64,
                }],
            });
            widx += 1;
        }
        for d in 0..n_doors {
            let z0 = 0.05 + 1.3 * (n_drawers + d) as f64 / movable as f64;
            let z1 = z0 + 0.55 / movable as f64;
            let start = prefix + widx * window;
            let hinge_x = if d % 2 == 0 { 0.05 } else { 0.6 };
            parts.push(PartConfig {
                point_count: points_per_part,
                box_min: [0.05, 0.25, z0],
                box_max: [0.6, 0.29, z1],
                joint: Some(JointSpec::revolute(
                    Vector3::new(0.0, 0.0, 1.0),
                    Vector3::new(hinge_x, 0.27, 0.0),
                )),
                schedule: vec![ScheduleWindow {
                    start_frame: start,
                    end_frame: (start + window).min(num_frames),
                    theta_start: 0.0,
                    theta_end: if d % 2 == 0 { 1.1 } else { -1.1 },
                }],
            });
            widx += 1;
        }
        SceneConfig {
            parts,
            num_frames,
            static_prefix: prefix,
            seed,
        }
    }
}
