//! The articulated deformation field: soft part assignment from learnable
//! part centers plus a multi-resolution static-region grid, per-joint state
//! networks over time, and dual-quaternion blending for the forward and
//! inverse maps between canonical and observed space.
//!
//! All evaluation routines are generic over [`Real`] so the same code path
//! serves plain `f64` inference and tape-based differentiation in training.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{ArtError, Result};
use crate::geom::{dq_blend_generic, dq_from_joint_generic, DualQuat, JointKind, Quat};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldConfig {
    /// per-level vertex resolutions of the dense trilinear grids
    pub grid_levels: Vec<usize>,
    /// features per grid vertex
    pub grid_features: usize,
    /// hidden width of the logit and joint-state networks
    pub hidden: usize,
    /// Fourier frequency bands in the time embedding
    pub fourier_bands: usize,
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    /// false replaces the static grid with an extra learnable part center
    pub hybrid: bool,
}

impl FieldConfig {
    /// Default architecture over the given scene bounding box, inflated by
    /// 10% on each side.
    pub fn for_bbox(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        let pad = (max - min) * 0.05;
        FieldConfig {
            grid_levels: vec![8, 16, 32, 64],
            grid_features: 2,
            hidden: 32,
            fourier_bands: 6,
            bbox_min: [min.x - pad.x, min.y - pad.y, min.z - pad.z],
            bbox_max: [max.x + pad.x, max.y + pad.y, max.z + pad.z],
            hybrid: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_levels.is_empty()
            || self.grid_levels.iter().any(|r| *r < 2)
            || self.grid_features == 0
            || self.hidden == 0
        {
            return Err(ArtError::config("grid levels >= 2 and nonzero widths required"));
        }
        for c in 0..3 {
            if !(self.bbox_max[c] > self.bbox_min[c]) {
                return Err(ArtError::config("bounding box must have positive extent"));
            }
        }
        Ok(())
    }

    pub fn embed_dim(&self) -> usize {
        2 * self.fourier_bands + 1
    }

    pub fn grid_len(&self) -> usize {
        if !self.hybrid {
            return 0;
        }
        self.grid_levels.iter().map(|r| r * r * r * self.grid_features).sum()
    }

    pub fn logit_net_len(&self) -> usize {
        if !self.hybrid {
            return 0;
        }
        let input = self.grid_levels.len() * self.grid_features;
        self.hidden * input + self.hidden + self.hidden + 1
    }

    /// parameters per joint-state network
    pub fn state_net_len(&self) -> usize {
        self.hidden * self.embed_dim() + self.hidden + self.hidden + 1
    }
}

/// Indices into [`DeformationField::blocks`]; block order is fixed so that
/// training code and checkpoints can address parameters uniformly.
pub const B_AXIS_DIR: usize = 0;
pub const B_AXIS_ORIGIN: usize = 1;
pub const B_CENTER_P: usize = 2;
pub const B_CENTER_VQ: usize = 3;
pub const B_CENTER_LOGLAM: usize = 4;
pub const B_GRID: usize = 5;
pub const B_LOGIT_NET: usize = 6;
pub const B_STATIC_CENTER: usize = 7;
pub const B_STATE_NETS: usize = 8;
pub const NUM_BLOCKS: usize = 9;

pub const BLOCK_NAMES: [&str; NUM_BLOCKS] = [
    "axis_dir",
    "axis_origin",
    "center_p",
    "center_vq",
    "center_log_lambda",
    "grid",
    "logit_net",
    "static_center",
    "state_nets",
];

/// Per-query residual added to each movable part's squared distance before
/// the softmax. The default (`None`) contributes zero.
pub type ResidualHook<'a> = &'a dyn Fn(usize, Vector3<f64>) -> f64;

/// The deformation field's full parameter state. Part index 0 is the
/// static base (identity transform at all times); movable parts follow in
/// joint order.
#[derive(Clone, Debug)]
pub struct DeformationField {
    pub config: FieldConfig,
    pub kinds: Vec<JointKind>,
    /// flat parameter tensors in `B_*` order
    pub blocks: Vec<Vec<f64>>,
}

pub fn block_sizes(config: &FieldConfig, n_joints: usize) -> [usize; NUM_BLOCKS] {
    let mut sizes = [0usize; NUM_BLOCKS];
    sizes[B_AXIS_DIR] = 3 * n_joints;
    sizes[B_AXIS_ORIGIN] = 3 * n_joints;
    sizes[B_CENTER_P] = 3 * n_joints;
    sizes[B_CENTER_VQ] = 4 * n_joints;
    sizes[B_CENTER_LOGLAM] = 3 * n_joints;
    sizes[B_GRID] = config.grid_len();
    sizes[B_LOGIT_NET] = config.logit_net_len();
    sizes[B_STATIC_CENTER] = if config.hybrid { 0 } else { 10 };
    sizes[B_STATE_NETS] = n_joints * config.state_net_len();
    sizes
}

impl DeformationField {
    /// Fresh field: identity center orientations, unit axis placeholders,
    /// zero grid features, small random hidden layers, zero-initialized
    /// final state-net layers so every joint starts at its bias value.
    pub fn new(config: FieldConfig, kinds: Vec<JointKind>, seed: u64) -> Result<Self> {
        config.validate()?;
        if kinds.is_empty() {
            return Err(ArtError::config("at least one movable part is required"));
        }
        let n = kinds.len();
        let sizes = block_sizes(&config, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks: Vec<Vec<f64>> = sizes.iter().map(|s| vec![0.0; *s]).collect();
        for k in 0..n {
            blocks[B_AXIS_DIR][3 * k + 2] = 1.0;
            blocks[B_CENTER_VQ][4 * k] = 1.0;
        }
        if config.hybrid {
            let input = config.grid_levels.len() * config.grid_features;
            let w = &mut blocks[B_LOGIT_NET];
            for i in 0..config.hidden * input + config.hidden {
                w[i] = rng.gen_range(-0.1..0.1);
            }
            for i in 0..config.hidden {
                w[config.hidden * input + config.hidden + i] = rng.gen_range(-0.1..0.1);
            }
            // final bias stays 0
        } else {
            blocks[B_STATIC_CENTER][3] = 1.0; // identity quaternion
        }
        let stride = config.state_net_len();
        let ed = config.embed_dim();
        for k in 0..n {
            let base = k * stride;
            let s = &mut blocks[B_STATE_NETS];
            for i in 0..config.hidden * ed + config.hidden {
                s[base + i] = rng.gen_range(-0.5..0.5);
            }
            // final layer (weights + bias) zero-initialized
        }
        Ok(DeformationField { config, kinds, blocks })
    }

    pub fn n_joints(&self) -> usize {
        self.kinds.len()
    }

    /// total part count including the static base
    pub fn n_parts(&self) -> usize {
        self.kinds.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let sizes = block_sizes(&self.config, self.kinds.len());
        for (b, size) in sizes.iter().enumerate() {
            if self.blocks[b].len() != *size {
                return Err(ArtError::config(format!(
                    "block '{}' has {} values, expected {size}",
                    BLOCK_NAMES[b],
                    self.blocks[b].len()
                )));
            }
            if self.blocks[b].iter().any(|v| !v.is_finite()) {
                return Err(ArtError::numerical(format!(
                    "block '{}' contains a non-finite parameter",
                    BLOCK_NAMES[b]
                )));
            }
        }
        Ok(())
    }

    pub fn assign(&self, x: Vector3<f64>) -> Result<Vec<f64>> {
        self.assign_with_residual(x, None)
    }

    pub fn assign_with_residual(
        &self,
        x: Vector3<f64>,
        residual: Option<ResidualHook>,
    ) -> Result<Vec<f64>> {
        let delta = residual_values(self.n_joints(), x, residual);
        assign_core(
            &self.config,
            &self.kinds,
            &self.blocks,
            [x.x, x.y, x.z],
            None,
            &delta,
        )
    }

    pub fn joint_state(&self, t: f64, k: usize) -> Result<f64> {
        if k >= self.kinds.len() {
            return Err(ArtError::validation(format!(
                "joint index {k} out of range (have {})",
                self.kinds.len()
            )));
        }
        Ok(joint_state_core(&self.config, &self.blocks[B_STATE_NETS], k, t))
    }

    pub fn part_dqs(&self, t: f64) -> Vec<DualQuat<f64>> {
        part_dqs_core(&self.config, &self.kinds, &self.blocks, t)
    }

    pub fn forward(
        &self,
        x: Vector3<f64>,
        r: Option<Quat<f64>>,
        t: f64,
    ) -> Result<(Vector3<f64>, Option<Quat<f64>>)> {
        let (p, q) = forward_core(
            &self.config,
            &self.kinds,
            &self.blocks,
            [x.x, x.y, x.z],
            r,
            t,
            &residual_values(self.n_joints(), x, None),
        )?;
        Ok((Vector3::new(p[0], p[1], p[2]), q))
    }

    pub fn assign_observed(&self, x: Vector3<f64>, t: f64) -> Result<Vec<f64>> {
        let dqs = part_dqs_core(&self.config, &self.kinds, &self.blocks, t);
        assign_core(
            &self.config,
            &self.kinds,
            &self.blocks,
            [x.x, x.y, x.z],
            Some(&dqs),
            &residual_values(self.n_joints(), x, None),
        )
    }

    pub fn inverse(&self, x: Vector3<f64>, t: f64) -> Result<Vector3<f64>> {
        let p = inverse_core(
            &self.config,
            &self.kinds,
            &self.blocks,
            [x.x, x.y, x.z],
            t,
            &residual_values(self.n_joints(), x, None),
        )?;
        Ok(Vector3::new(p[0], p[1], p[2]))
    }
}

fn residual_values(
    n_joints: usize,
    x: Vector3<f64>,
    residual: Option<ResidualHook>,
) -> Vec<f64> {
    match residual {
        None => vec![0.0; n_joints],
        Some(h) => (0..n_joints).map(|k| h(k, x)).collect(),
    }
}

// ---------------------------------------------------------------------------
// generic evaluation core
// ---------------------------------------------------------------------------

fn vec3_sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn normalize3<T: Real>(v: [T; 3]) -> [T; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let inv = n.recip();
    [v[0] * inv, v[1] * inv, v[2] * inv]
}

fn slice3<T: Real>(b: &[T], k: usize) -> [T; 3] {
    [b[3 * k], b[3 * k + 1], b[3 * k + 2]]
}

/// Concatenated trilinear features from every grid level at `x` (clamped
/// to the bounding box).
pub fn grid_features_at<T: Real>(config: &FieldConfig, grid: &[T], x: &[T; 3]) -> Vec<T> {
    let nf = config.grid_features;
    let mut out = Vec::with_capacity(config.grid_levels.len() * nf);
    let mut level_base = 0usize;
    for &res in &config.grid_levels {
        // normalized cell coordinates per axis
        let mut idx = [0usize; 3];
        let mut frac = [x[0], x[1], x[2]]; // overwritten below
        for c in 0..3 {
            let lo = config.bbox_min[c];
            let hi = config.bbox_max[c];
            let scale = (res - 1) as f64 / (hi - lo);
            let u = (x[c].add_c(-lo)).mul_c(scale);
            let uc = u.value().clamp(0.0, (res - 1) as f64);
            let i0 = (uc.floor() as usize).min(res - 2);
            idx[c] = i0;
            // clamp the continuous coordinate so out-of-box queries hold
            // the boundary value (zero gradient outside)
            let u_cl = if u.value() < 0.0 {
                u.lift(0.0)
            } else if u.value() > (res - 1) as f64 {
                u.lift((res - 1) as f64)
            } else {
                u
            };
            frac[c] = u_cl.add_c(-(i0 as f64));
        }
        for feat in 0..nf {
            let mut acc = x[0].lift(0.0);
            for corner in 0..8usize {
                let mut w = x[0].lift(1.0);
                let mut vi = [0usize; 3];
                for c in 0..3 {
                    if corner >> c & 1 == 1 {
                        vi[c] = idx[c] + 1;
                        w = w * frac[c];
                    } else {
                        vi[c] = idx[c];
                        w = w * (frac[c].mul_c(-1.0).add_c(1.0));
                    }
                }
                let vidx = (vi[0] * res + vi[1]) * res + vi[2];
                acc = acc + w * grid[level_base + vidx * nf + feat];
            }
            out.push(acc);
        }
        level_base += res * res * res * nf;
    }
    out
}

/// Static-region logit: two affine layers with tanh over the concatenated
/// grid features.
pub fn static_logit<T: Real>(config: &FieldConfig, grid: &[T], net: &[T], x: &[T; 3]) -> T {
    let feats = grid_features_at(config, grid, x);
    let input = feats.len();
    let h = config.hidden;
    let (w1, rest) = net.split_at(h * input);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(h);
    let mut out = b2[0];
    for i in 0..h {
        let mut z = b1[i];
        for j in 0..input {
            z = z + w1[i * input + j] * feats[j];
        }
        out = out + w2[i] * z.tanh();
    }
    out
}

fn mahalanobis_sq<T: Real>(
    blocks: &[Vec<T>],
    k: usize,
    x: [T; 3],
) -> T {
    let p = slice3(&blocks[B_CENTER_P], k);
    let vq = Quat::new(
        blocks[B_CENTER_VQ][4 * k],
        blocks[B_CENTER_VQ][4 * k + 1],
        blocks[B_CENTER_VQ][4 * k + 2],
        blocks[B_CENTER_VQ][4 * k + 3],
    )
    .normalize();
    let local = vq.conj().rotate(vec3_sub(x, p));
    let mut d = x[0].lift(0.0);
    for c in 0..3 {
        let lam = blocks[B_CENTER_LOGLAM][3 * k + c].exp();
        let s = local[c] * lam.recip();
        d = d + s * s;
    }
    d
}

fn static_center_neg_dist<T: Real>(blocks: &[Vec<T>], x: [T; 3]) -> T {
    let b = &blocks[B_STATIC_CENTER];
    let p = [b[0], b[1], b[2]];
    let vq = Quat::new(b[3], b[4], b[5], b[6]).normalize();
    let local = vq.conj().rotate(vec3_sub(x, p));
    let mut d = x[0].lift(0.0);
    for c in 0..3 {
        let lam = b[7 + c].exp();
        let s = local[c] * lam.recip();
        d = d + s * s;
    }
    d.mul_c(-1.0)
}

/// Soft part assignment at `x`. With `deform` set (per-part transforms at
/// the query time) each movable part's distance is evaluated against its
/// own deformed center, equivalently at the part-inverse of `x`; the
/// static logit is always taken at the undeformed position.
pub fn assign_core<T: Real>(
    config: &FieldConfig,
    kinds: &[JointKind],
    blocks: &[Vec<T>],
    x: [T; 3],
    deform: Option<&[DualQuat<T>]>,
    delta: &[f64],
) -> Result<Vec<T>> {
    let n = kinds.len();
    let mut logits = Vec::with_capacity(n + 1);
    let l0 = if config.hybrid {
        static_logit(config, &blocks[B_GRID], &blocks[B_LOGIT_NET], &x)
    } else {
        static_center_neg_dist(blocks, x)
    };
    logits.push(l0);
    for k in 0..n {
        let xq = match deform {
            None => x,
            Some(dqs) => dqs[k].inverse_unit().apply(x),
        };
        let d = mahalanobis_sq(blocks, k, xq).add_c(delta[k]);
        logits.push(d.mul_c(-1.0));
    }
    let max = logits
        .iter()
        .map(|l| l.value())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(ArtError::numerical("non-finite assignment logit"));
    }
    let exps: Vec<T> = logits.iter().map(|l| l.add_c(-max).exp()).collect();
    let mut sum = x[0].lift(0.0);
    for e in &exps {
        sum = sum + *e;
    }
    let inv = sum.recip();
    Ok(exps.into_iter().map(|e| e * inv).collect())
}

/// Fourier time embedding [t, sin(2^b π t), cos(2^b π t) for b < B].
pub fn fourier_embed<T: Real>(bands: usize, t: T) -> Vec<T> {
    let mut e = Vec::with_capacity(2 * bands + 1);
    e.push(t);
    for b in 0..bands {
        let w = (1u64 << b) as f64 * std::f64::consts::PI;
        let arg = t.mul_c(w);
        e.push(arg.sin());
        e.push(arg.cos());
    }
    e
}

/// Joint state θ_k(t) from joint k's two-layer network over the time
/// embedding.
pub fn joint_state_core<T: Real>(config: &FieldConfig, state_nets: &[T], k: usize, t: T) -> T {
    let stride = config.state_net_len();
    let net = &state_nets[k * stride..(k + 1) * stride];
    let e = fourier_embed(config.fourier_bands, t);
    let input = e.len();
    let h = config.hidden;
    let (w1, rest) = net.split_at(h * input);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(h);
    let mut out = b2[0];
    for i in 0..h {
        let mut z = b1[i];
        for j in 0..input {
            z = z + w1[i * input + j] * e[j];
        }
        out = out + w2[i] * z.tanh();
    }
    out
}

/// Per-movable-part rigid transforms at time `t` (base part excluded).
pub fn part_dqs_core<T: Real>(
    config: &FieldConfig,
    kinds: &[JointKind],
    blocks: &[Vec<T>],
    t: T,
) -> Vec<DualQuat<T>> {
    kinds
        .iter()
        .enumerate()
        .map(|(k, kind)| {
            let dir = normalize3(slice3(&blocks[B_AXIS_DIR], k));
            let origin = slice3(&blocks[B_AXIS_ORIGIN], k);
            let theta = joint_state_core(config, &blocks[B_STATE_NETS], k, t);
            dq_from_joint_generic(*kind, dir, origin, theta)
        })
        .collect()
}

/// Canonical → observed deformation of a point (and optional orientation)
/// via assignment-weighted dual-quaternion blending.
pub fn forward_core<T: Real>(
    config: &FieldConfig,
    kinds: &[JointKind],
    blocks: &[Vec<T>],
    x: [T; 3],
    r: Option<Quat<T>>,
    t: T,
    delta: &[f64],
) -> Result<([T; 3], Option<Quat<T>>)> {
    let m = assign_core(config, kinds, blocks, x, None, delta)?;
    let dq = blend_assigned(config, kinds, blocks, &m, t)?;
    let p = dq.apply(x);
    let q = r.map(|r| dq.real.mul(r));
    Ok((p, q))
}

fn blend_assigned<T: Real>(
    config: &FieldConfig,
    kinds: &[JointKind],
    blocks: &[Vec<T>],
    m: &[T],
    t: T,
) -> Result<DualQuat<T>> {
    let mut dqs = Vec::with_capacity(kinds.len() + 1);
    dqs.push(DualQuat::identity_like(t));
    dqs.extend(part_dqs_core(config, kinds, blocks, t));
    dq_blend_generic(m, &dqs)
}

/// Observed → canonical: blend with the observation-space assignment, then
/// apply the exact rigid inverse of the blended transform.
pub fn inverse_core<T: Real>(
    config: &FieldConfig,
    kinds: &[JointKind],
    blocks: &[Vec<T>],
    x: [T; 3],
    t: T,
    delta: &[f64],
) -> Result<[T; 3]> {
    let dqs = part_dqs_core(config, kinds, blocks, t);
    let m = assign_core(config, kinds, blocks, x, Some(&dqs), delta)?;
    let dq = blend_assigned(config, kinds, blocks, &m, t)?;
    Ok(dq.inverse_unit().apply(x))
}

// ---------------------------------------------------------------------------
// checkpoint serialization
// ---------------------------------------------------------------------------

pub const FIELD_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedBlock {
    name: String,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: FieldConfig,
    kinds: Vec<JointKind>,
    blocks: Vec<NamedBlock>,
}

impl DeformationField {
    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            version: FIELD_SCHEMA_VERSION,
            config: self.config.clone(),
            kinds: self.kinds.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(BLOCK_NAMES)
                .map(|(data, name)| NamedBlock {
                    name: name.to_string(),
                    data: data.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&ck).map_err(|e| ArtError::config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| ArtError::config(format!("bad checkpoint: {e}")))?;
        if ck.version != FIELD_SCHEMA_VERSION {
            return Err(ArtError::config(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        if ck.blocks.len() != NUM_BLOCKS {
            return Err(ArtError::config("checkpoint block count mismatch"));
        }
        for (b, name) in ck.blocks.iter().zip(BLOCK_NAMES) {
            if b.name != name {
                return Err(ArtError::config(format!(
                    "checkpoint block '{}' out of order (expected '{name}')",
                    b.name
                )));
            }
        }
        let field = DeformationField {
            config: ck.config,
            kinds: ck.kinds,
            blocks: ck.blocks.into_iter().map(|b| b.data).collect(),
        };
        field.validate()?;
        Ok(field)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(ArtError::from)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(ArtError::from)?;
        Self::from_json(&text)
    }
}
