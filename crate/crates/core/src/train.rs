//! Field initialization from motion clusters, the two tracking losses with
//! analytic gradients, Adam optimization, and finite-difference gradient
//! verification.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tape, Var};
use crate::cluster::MotionCluster;
use crate::error::{ArtError, Result};
use crate::field::{
    block_sizes, forward_core, inverse_core, joint_state_core, DeformationField,
    FieldConfig, BLOCK_NAMES, B_AXIS_DIR, B_AXIS_ORIGIN, B_CENTER_LOGLAM, B_CENTER_P,
    B_CENTER_VQ, B_STATE_NETS, B_STATIC_CENTER, NUM_BLOCKS,
};
use crate::geom::JointKind;
use crate::motion::{MotionClass, TrackMotion};
use crate::tracks::TrackSet;

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct AblationFlags {
    pub no_center_init: bool,
    pub no_axis_init: bool,
    pub no_deform_init: bool,
    pub no_hybrid: bool,
    pub no_o2o: bool,
    pub no_c2o: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps_init: usize,
    pub lr: f64,
    /// learning rate for axis directions/origins and part centers
    pub lr_axes: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_tracks: usize,
    pub o2o_window: usize,
    pub lambda_c2o: f64,
    pub pretrain_steps: usize,
    pub seed: u64,
    /// stop gradients through the inverse pass of the o2o loss
    pub stop_grad_inverse: bool,
    /// static-grid vertex resolutions; every Adam step touches every grid
    /// parameter, so short CPU runs want fewer/coarser levels
    pub grid_levels: Vec<usize>,
    pub flags: AblationFlags,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps_init: 10_000,
            lr: 5e-3,
            lr_axes: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_tracks: 256,
            o2o_window: 30,
            lambda_c2o: 0.5,
            pretrain_steps: 2000,
            seed: 0,
            stop_grad_inverse: false,
            grid_levels: vec![8, 16, 32, 64],
            flags: AblationFlags::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_init == 0
            || self.lr <= 0.0
            || self.lr_axes <= 0.0
            || self.batch_tracks == 0
            || self.o2o_window == 0
            || self.pretrain_steps == 0
        {
            return Err(ArtError::config(
                "training steps, rates, batch and window must be positive",
            ));
        }
        Ok(())
    }
}

/// First/second moment accumulators for one Adam optimizer over the
/// field's parameter blocks.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(blocks: &[Vec<f64>]) -> Self {
        OptimizerState {
            m: blocks.iter().map(|b| vec![0.0; b.len()]).collect(),
            v: blocks.iter().map(|b| vec![0.0; b.len()]).collect(),
            step: 0,
        }
    }

    pub fn apply(
        &mut self,
        blocks: &mut [Vec<f64>],
        grads: &[Vec<f64>],
        cfg: &TrainConfig,
        lr_of: impl Fn(usize) -> f64,
    ) {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - cfg.beta1.powf(t);
        let bc2 = 1.0 - cfg.beta2.powf(t);
        for b in 0..blocks.len() {
            let lr = lr_of(b);
            for i in 0..blocks[b].len() {
                let g = grads[b][i];
                self.m[b][i] = cfg.beta1 * self.m[b][i] + (1.0 - cfg.beta1) * g;
                self.v[b][i] = cfg.beta2 * self.v[b][i] + (1.0 - cfg.beta2) * g * g;
                let mhat = self.m[b][i] / bc1;
                let vhat = self.v[b][i] / bc2;
                blocks[b][i] -= lr * mhat / (vhat.sqrt() + cfg.adam_eps);
            }
        }
    }
}

fn lr_for_block(cfg: &TrainConfig, b: usize) -> f64 {
    match b {
        B_AXIS_DIR | B_AXIS_ORIGIN | B_CENTER_P | B_CENTER_VQ | B_CENTER_LOGLAM => cfg.lr_axes,
        _ => cfg.lr,
    }
}

fn norm_time(frame: usize, num_frames: usize) -> f64 {
    if num_frames <= 1 {
        0.0
    } else {
        frame as f64 / (num_frames - 1) as f64
    }
}

// ---------------------------------------------------------------------------
// initialization
// ---------------------------------------------------------------------------

fn member_start_bbox(
    ts: &TrackSet,
    member_ids: &[u64],
) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for t in &ts.tracks {
        if member_ids.contains(&t.id) {
            let f = t.valid.iter().position(|v| *v).unwrap_or(0);
            let p = t.pos(f);
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
    }
    (lo, hi)
}

/// Regress one joint's state network to a target curve by full-batch Adam.
fn pretrain_state_net(
    field: &mut DeformationField,
    k: usize,
    samples: &[(f64, f64)],
    steps: usize,
    cfg: &TrainConfig,
) -> Result<()> {
    if samples.is_empty() {
        return Ok(());
    }
    let stride = field.config.state_net_len();
    let range = k * stride..(k + 1) * stride;
    let mut net: Vec<f64> = field.blocks[B_STATE_NETS][range.clone()].to_vec();
    let mut m = vec![0.0; net.len()];
    let mut v = vec![0.0; net.len()];
    for step in 1..=steps {
        let tape = Tape::new();
        let vars: Vec<Var> = net.iter().map(|&p| tape.leaf(p)).collect();
        // evaluate joint 0 of a single-net view
        let mut loss = tape.leaf(0.0).lift(0.0);
        for &(t, y) in samples {
            let tv = vars[0].lift(t);
            let theta = joint_state_core(&field.config, &vars, 0, tv);
            let r = theta.add_c(-y);
            loss = loss + r * r;
        }
        loss = loss.mul_c(1.0 / samples.len() as f64);
        if !loss.value().is_finite() {
            return Err(ArtError::numerical(format!(
                "state-net pretraining for joint {k} diverged at step {step}"
            )));
        }
        let adj = tape.backward(loss);
        let t = step as f64;
        let bc1 = 1.0 - cfg.beta1.powf(t);
        let bc2 = 1.0 - cfg.beta2.powf(t);
        let lr = 1e-2;
        for i in 0..net.len() {
            let g = adj[vars[i].index() as usize];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            net[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + cfg.adam_eps);
        }
    }
    field.blocks[B_STATE_NETS][range].copy_from_slice(&net);
    Ok(())
}

/// Build and initialize a deformation field from aggregated motion
/// clusters: axes and origins from the clusters, centers at cluster part
/// centers with member-extent scales, and joint-state networks pretrained
/// to the cluster mean state curves. Ablation flags disable each stage.
pub fn init_from_motion(
    clusters: &[MotionCluster],
    ts: &TrackSet,
    motions: &[TrackMotion],
    cfg: &TrainConfig,
) -> Result<DeformationField> {
    cfg.validate()?;
    if clusters.is_empty() {
        return Err(ArtError::validation("no motion clusters to initialize from"));
    }
    let (blo, bhi) = ts.bounding_box_at(ts.canonical_frame);
    let lo = Vector3::from(blo);
    let hi = Vector3::from(bhi);
    let mut field_cfg = FieldConfig::for_bbox(lo, hi);
    field_cfg.grid_levels = cfg.grid_levels.clone();
    field_cfg.hybrid = !cfg.flags.no_hybrid;
    let kinds: Vec<JointKind> = clusters.iter().map(|c| c.kind).collect();
    let mut field = DeformationField::new(field_cfg, kinds, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD1F7);

    for (k, cluster) in clusters.iter().enumerate() {
        let (d, o) = if cfg.flags.no_axis_init {
            let mut v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            while v.norm() < 1e-3 {
                v = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
            }
            (v.normalize(), cluster.part_center)
        } else {
            (
                cluster.mean_direction,
                cluster.axis_origin.unwrap_or(cluster.part_center),
            )
        };
        field.blocks[B_AXIS_DIR][3 * k..3 * k + 3].copy_from_slice(&[d.x, d.y, d.z]);
        field.blocks[B_AXIS_ORIGIN][3 * k..3 * k + 3].copy_from_slice(&[o.x, o.y, o.z]);

        let p = if cfg.flags.no_center_init {
            Vector3::new(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
                rng.gen_range(lo.z..hi.z),
            )
        } else {
            cluster.part_center
        };
        field.blocks[B_CENTER_P][3 * k..3 * k + 3].copy_from_slice(&[p.x, p.y, p.z]);

        let (mlo, mhi) = member_start_bbox(ts, &cluster.member_ids);
        let floor = 0.02 * ts.scene_scale;
        for c in 0..3 {
            let lam = (0.5 * (mhi[c] - mlo[c])).max(floor);
            field.blocks[B_CENTER_LOGLAM][3 * k + c] = lam.ln();
        }

        if !cfg.flags.no_deform_init {
            let samples: Vec<(f64, f64)> = cluster
                .mean_state
                .iter()
                .enumerate()
                .filter_map(|(f, s)| s.map(|v| (norm_time(f, ts.num_frames), v)))
                .collect();
            pretrain_state_net(&mut field, k, &samples, cfg.pretrain_steps, cfg)?;
        }
    }

    if cfg.flags.no_hybrid {
        // the extra center stands in for the whole static region
        let mut acc = Vector3::zeros();
        let mut lo_s = Vector3::repeat(f64::INFINITY);
        let mut hi_s = Vector3::repeat(f64::NEG_INFINITY);
        let mut n = 0.0;
        for (t, m) in ts.tracks.iter().zip(motions) {
            if m.class == MotionClass::Static {
                let p = t.pos(ts.canonical_frame);
                acc += p;
                lo_s = lo_s.inf(&p);
                hi_s = hi_s.sup(&p);
                n += 1.0;
            }
        }
        if n > 0.0 {
            let c = acc / n;
            field.blocks[B_STATIC_CENTER][0..3].copy_from_slice(&[c.x, c.y, c.z]);
            let floor = 0.02 * ts.scene_scale;
            for c in 0..3 {
                field.blocks[B_STATIC_CENTER][7 + c] =
                    (0.5 * (hi_s[c] - lo_s[c])).max(floor).ln();
            }
        }
    }

    field.validate()?;
    Ok(field)
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

fn lift_blocks<'t>(tape: &'t Tape, blocks: &[Vec<f64>]) -> Vec<Vec<Var<'t>>> {
    blocks
        .iter()
        .map(|b| b.iter().map(|&p| tape.leaf(p)).collect())
        .collect()
}

fn extract_grads(adjoints: &[f64], vars: &[Vec<Var>]) -> Vec<Vec<f64>> {
    vars.iter()
        .map(|b| b.iter().map(|v| adjoints[v.index() as usize]).collect())
        .collect()
}

/// Mean squared canonical→observation error over the batch of
/// (track index, target frame) pairs, with gradients for every block.
pub fn loss_c2o(
    field: &DeformationField,
    ts: &TrackSet,
    batch: &[(usize, usize)],
) -> Result<(f64, Vec<Vec<f64>>)> {
    if batch.is_empty() {
        return Err(ArtError::validation("loss_c2o: empty batch"));
    }
    let tape = Tape::new();
    let vars = lift_blocks(&tape, &field.blocks);
    let proto = vars[B_STATE_NETS][0];
    let zero_delta = vec![0.0; field.n_joints()];
    let mut loss = proto.lift(0.0);
    for &(ti, f) in batch {
        let tr = &ts.tracks[ti];
        let xc = tr.pos(ts.canonical_frame);
        let xt = tr.pos(f);
        let x = [proto.lift(xc.x), proto.lift(xc.y), proto.lift(xc.z)];
        let t = proto.lift(norm_time(f, ts.num_frames));
        let (y, _) = forward_core(&field.config, &field.kinds, &vars, x, None, t, &zero_delta)?;
        for c in 0..3 {
            let r = y[c].add_c(-xt[c]);
            loss = loss + r * r;
        }
    }
    loss = loss.mul_c(1.0 / batch.len() as f64);
    let adj = tape.backward(loss);
    Ok((loss.value(), extract_grads(&adj, &vars)))
}

/// Mean squared observation→observation error over (track, t0, t1) pairs:
/// the t0 observation is pulled back to canonical space and pushed to t1.
/// Gradients flow through both passes unless `stop_grad_inverse` is set.
pub fn loss_o2o(
    field: &DeformationField,
    ts: &TrackSet,
    pairs: &[(usize, usize, usize)],
    stop_grad_inverse: bool,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if pairs.is_empty() {
        return Err(ArtError::validation("loss_o2o: empty pair batch"));
    }
    let tape = Tape::new();
    let vars = lift_blocks(&tape, &field.blocks);
    let proto = vars[B_STATE_NETS][0];
    let zero_delta = vec![0.0; field.n_joints()];
    let mut loss = proto.lift(0.0);
    for &(ti, f0, f1) in pairs {
        let tr = &ts.tracks[ti];
        let x0 = tr.pos(f0);
        let x1 = tr.pos(f1);
        let t0 = proto.lift(norm_time(f0, ts.num_frames));
        let t1 = proto.lift(norm_time(f1, ts.num_frames));
        let xc = if stop_grad_inverse {
            let c = field.inverse(x0, norm_time(f0, ts.num_frames))?;
            [proto.lift(c.x), proto.lift(c.y), proto.lift(c.z)]
        } else {
            let x0v = [proto.lift(x0.x), proto.lift(x0.y), proto.lift(x0.z)];
            inverse_core(&field.config, &field.kinds, &vars, x0v, t0, &zero_delta)?
        };
        let (y, _) = forward_core(&field.config, &field.kinds, &vars, xc, None, t1, &zero_delta)?;
        for c in 0..3 {
            let r = y[c].add_c(-x1[c]);
            loss = loss + r * r;
        }
    }
    loss = loss.mul_c(1.0 / pairs.len() as f64);
    let adj = tape.backward(loss);
    Ok((loss.value(), extract_grads(&adj, &vars)))
}

// ---------------------------------------------------------------------------
// batch sampling
// ---------------------------------------------------------------------------

/// One random valid non-canonical target frame per sampled track.
pub fn sample_c2o_batch(
    ts: &TrackSet,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n);
    let nt = ts.tracks.len();
    for _ in 0..n {
        let ti = rng.gen_range(0..nt);
        let tr = &ts.tracks[ti];
        for _attempt in 0..32 {
            let f = rng.gen_range(0..ts.num_frames);
            if tr.valid[f] && tr.valid[ts.canonical_frame] {
                out.push((ti, f));
                break;
            }
        }
    }
    out
}

/// One random valid ordered frame pair per sampled track, with
/// |t1 − t0| ≤ window.
pub fn sample_o2o_pairs(
    ts: &TrackSet,
    n: usize,
    window: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::with_capacity(n);
    let nt = ts.tracks.len();
    for _ in 0..n {
        let ti = rng.gen_range(0..nt);
        let tr = &ts.tracks[ti];
        for _attempt in 0..32 {
            let f0 = rng.gen_range(0..ts.num_frames);
            let lo = f0.saturating_sub(window);
            let hi = (f0 + window).min(ts.num_frames - 1);
            let f1 = rng.gen_range(lo..=hi);
            if tr.valid[f0] && tr.valid[f1] && f0 != f1 {
                out.push((ti, f0, f1));
                break;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub l_c2o: f64,
    pub l_o2o: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<LossRecord>,
    pub warnings: Vec<String>,
}

fn first_nonfinite_block(grads: &[Vec<f64>]) -> Option<&'static str> {
    for (b, g) in grads.iter().enumerate() {
        if g.iter().any(|v| !v.is_finite()) {
            return Some(BLOCK_NAMES[b]);
        }
    }
    None
}

fn renormalize_axes(field: &mut DeformationField) {
    for k in 0..field.n_joints() {
        let d = &mut field.blocks[B_AXIS_DIR][3 * k..3 * k + 3];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if n > 1e-12 {
            for v in d.iter_mut() {
                *v /= n;
            }
        }
    }
}

/// Optimize the field on L_c2o + L_o2o with Adam for `steps_init` steps.
/// Emits a loss record every 100 steps (and at the final step); aborts on
/// non-finite loss naming the offending parameter block.
pub fn train_field(
    field: &mut DeformationField,
    ts: &TrackSet,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    field.validate()?;
    if cfg.flags.no_c2o && cfg.flags.no_o2o {
        return Err(ArtError::config("both loss terms are disabled"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7E57_0001);
    let mut opt = OptimizerState::new(&field.blocks);
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let sizes = block_sizes(&field.config, field.n_joints());
    let mut collapse_streak = vec![0usize; field.n_joints()];
    let mut collapse_reported = vec![false; field.n_joints()];

    for step in 0..cfg.steps_init {
        let mut grads: Vec<Vec<f64>> = sizes.iter().map(|s| vec![0.0; *s]).collect();
        let mut l_c2o = 0.0;
        let mut l_o2o = 0.0;
        if !cfg.flags.no_c2o {
            let batch = sample_c2o_batch(ts, cfg.batch_tracks, &mut rng);
            let (v, g) = loss_c2o(field, ts, &batch)?;
            l_c2o = v;
            for b in 0..NUM_BLOCKS {
                for i in 0..grads[b].len() {
                    grads[b][i] += g[b][i];
                }
            }
        }
        if !cfg.flags.no_o2o {
            let pairs = sample_o2o_pairs(ts, cfg.batch_tracks, cfg.o2o_window, &mut rng);
            let (v, g) = loss_o2o(field, ts, &pairs, cfg.stop_grad_inverse)?;
            l_o2o = v;
            for b in 0..NUM_BLOCKS {
                for i in 0..grads[b].len() {
                    grads[b][i] += g[b][i];
                }
            }
        }
        let total = l_c2o + l_o2o;
        if !total.is_finite() {
            let block = first_nonfinite_block(&grads).unwrap_or("loss value");
            return Err(ArtError::numerical(format!(
                "non-finite loss at step {step}; first affected block: {block}"
            )));
        }
        opt.apply(&mut field.blocks, &grads, cfg, |b| lr_for_block(cfg, b));
        renormalize_axes(field);

        // collapsed-part monitor: max assignment over a small canonical probe
        if step % 10 == 0 {
            let probes = sample_c2o_batch(ts, 32, &mut rng);
            let mut max_m = vec![0.0f64; field.n_joints()];
            for &(ti, _) in &probes {
                let x = ts.tracks[ti].pos(ts.canonical_frame);
                if let Ok(m) = field.assign(x) {
                    for k in 0..field.n_joints() {
                        max_m[k] = max_m[k].max(m[k + 1]);
                    }
                }
            }
            for k in 0..field.n_joints() {
                if max_m[k] < 0.2 {
                    collapse_streak[k] += 10;
                } else {
                    collapse_streak[k] = 0;
                }
                if collapse_streak[k] >= 500 && !collapse_reported[k] {
                    warnings.push(format!(
                        "collapsed part {}: max assignment below 0.2 for 500 steps",
                        k + 1
                    ));
                    collapse_reported[k] = true;
                }
            }
        }

        if step % 100 == 0 || step + 1 == cfg.steps_init {
            history.push(LossRecord { step, l_c2o, l_o2o, total });
        }
    }
    field.validate()?;
    Ok(TrainReport { history, warnings })
}

// ---------------------------------------------------------------------------
// gradient verification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// (block name, max relative error over sampled entries)
    pub per_block: Vec<(String, f64)>,
    pub max_rel_error: f64,
}

/// Compare analytic gradients with central finite differences on a random
/// subset of entries per parameter block (all entries for small blocks).
pub fn grad_check(
    field: &DeformationField,
    ts: &TrackSet,
    batch: &[(usize, usize)],
    pairs: &[(usize, usize, usize)],
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(ArtError::validation("epsilon must lie in [1e-7, 1e-3]"));
    }
    let value_of = |f: &DeformationField| -> Result<f64> {
        let mut v = 0.0;
        if !batch.is_empty() {
            v += loss_c2o(f, ts, batch)?.0;
        }
        if !pairs.is_empty() {
            v += loss_o2o(f, ts, pairs, false)?.0;
        }
        Ok(v)
    };
    let mut analytic: Vec<Vec<f64>> = field.blocks.iter().map(|b| vec![0.0; b.len()]).collect();
    if !batch.is_empty() {
        let (_, g) = loss_c2o(field, ts, batch)?;
        for b in 0..NUM_BLOCKS {
            for i in 0..analytic[b].len() {
                analytic[b][i] += g[b][i];
            }
        }
    }
    if !pairs.is_empty() {
        let (_, g) = loss_o2o(field, ts, pairs, false)?;
        for b in 0..NUM_BLOCKS {
            for i in 0..analytic[b].len() {
                analytic[b][i] += g[b][i];
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_block = Vec::new();
    let mut worst = 0.0f64;
    for b in 0..NUM_BLOCKS {
        let n = field.blocks[b].len();
        if n == 0 {
            continue;
        }
        let indices: Vec<usize> = if n <= 24 {
            (0..n).collect()
        } else {
            (0..24).map(|_| rng.gen_range(0..n)).collect()
        };
        let mut block_worst = 0.0f64;
        for &i in &indices {
            let mut plus = field.clone();
            plus.blocks[b][i] += epsilon;
            let mut minus = field.clone();
            minus.blocks[b][i] -= epsilon;
            let fd = (value_of(&plus)? - value_of(&minus)?) / (2.0 * epsilon);
            let a = analytic[b][i];
            let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-8);
            block_worst = block_worst.max(rel);
        }
        worst = worst.max(block_worst);
        per_block.push((BLOCK_NAMES[b].to_string(), block_worst));
    }
    Ok(GradCheckReport { per_block, max_rel_error: worst })
}
