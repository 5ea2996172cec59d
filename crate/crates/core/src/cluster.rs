//! Group analyzed tracks into rigid parts: per-kind motion features,
//! seeded k-means, iterative outlier filtering, and aggregation of each
//! cluster into a single joint initialization.

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::geom::JointKind;
use crate::motion::{MotionClass, TrackMotion};
use crate::tracks::Track;

/// A per-track feature row. Prismatic rows have 10 dims
/// [start(3), mean(3), direction(3), normalized_velocity]; revolute rows
/// have 13 [start(3), mean(3), axis_dir(3), axis_origin(3), ang_velocity].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MotionFeature {
    pub track_id: u64,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub angle_max_deg: f64,
    pub dist_max: f64,
    pub max_iters: usize,
    pub min_cluster_size: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            angle_max_deg: 30.0,
            dist_max: 3.0,
            max_iters: 10,
            min_cluster_size: 3,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.angle_max_deg <= 0.0
            || self.dist_max <= 0.0
            || self.max_iters == 0
            || self.min_cluster_size == 0
        {
            return Err(ArtError::validation("filter config values must be positive"));
        }
        Ok(())
    }
}

/// One recovered part: aggregated joint parameters plus the per-frame mean
/// joint state of its member tracks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MotionCluster {
    pub kind: JointKind,
    pub member_ids: Vec<u64>,
    pub mean_direction: Vector3<f64>,
    pub axis_origin: Option<Vector3<f64>>,
    pub part_center: Vector3<f64>,
    pub mean_state: Vec<Option<f64>>,
    pub filter_floor_hit: bool,
}

fn first_valid_pos(track: &Track) -> Vector3<f64> {
    let f = track.valid.iter().position(|v| *v).unwrap_or(0);
    track.pos(f)
}

fn mean_valid_pos(track: &Track) -> Vector3<f64> {
    let mut acc = Vector3::zeros();
    let mut n = 0.0;
    for f in 0..track.positions.len() {
        if track.valid[f] {
            acc += track.pos(f);
            n += 1.0;
        }
    }
    acc / n
}

/// Path length and active-step count; a step counts as active when its
/// displacement exceeds eps_s·scene_scale.
fn path_stats(track: &Track, eps_s: f64, scene_scale: f64) -> (f64, usize, f64, usize) {
    let mut prev: Option<usize> = None;
    let mut active_len = 0.0;
    let mut active = 0usize;
    let mut total_len = 0.0;
    let mut total = 0usize;
    for f in 0..track.positions.len() {
        if !track.valid[f] {
            continue;
        }
        if let Some(p) = prev {
            let d = (track.pos(f) - track.pos(p)).norm();
            total_len += d;
            total += 1;
            if d > eps_s * scene_scale {
                active_len += d;
                active += 1;
            }
        }
        prev = Some(f);
    }
    (active_len, active, total_len, total)
}

fn swept_stats(track: &Track, state: &[Option<f64>], eps_s: f64, scene_scale: f64) -> (f64, usize) {
    let mut prev: Option<usize> = None;
    let mut swept = 0.0;
    let mut active = 0usize;
    for f in 0..track.positions.len() {
        if !track.valid[f] || state[f].is_none() {
            continue;
        }
        if let Some(p) = prev {
            let disp = (track.pos(f) - track.pos(p)).norm();
            if disp > eps_s * scene_scale {
                swept += (state[f].unwrap() - state[p].unwrap()).abs();
                active += 1;
            }
        }
        prev = Some(f);
    }
    (swept, active)
}

/// Raw (unstandardized) features for all prismatic and revolute tracks.
/// Static/Noise tracks are skipped.
pub fn build_features(
    tracks: &[Track],
    motions: &[TrackMotion],
    eps_s: f64,
    scene_scale: f64,
) -> (Vec<MotionFeature>, Vec<MotionFeature>) {
    let by_id: HashMap<u64, &Track> = tracks.iter().map(|t| (t.id, t)).collect();
    let mut prismatic = Vec::new();
    let mut revolute = Vec::new();
    for m in motions {
        let track = match by_id.get(&m.track_id) {
            Some(t) => *t,
            None => continue,
        };
        let start = first_valid_pos(track);
        let mean = mean_valid_pos(track);
        match m.class {
            MotionClass::Prismatic => {
                let line = m.line.as_ref().expect("prismatic track has a line fit");
                let (alen, acount, _tlen, _tcount) = path_stats(track, eps_s, scene_scale);
                // no active step means the motion is below the noise gate;
                // a raw path-length fallback would be jitter-dominated and
                // inject a random feature dimension
                let vel = if acount > 0 {
                    alen / scene_scale / acount as f64
                } else {
                    0.0
                };
                let d = line.direction;
                prismatic.push(MotionFeature {
                    track_id: m.track_id,
                    values: vec![
                        start.x, start.y, start.z, mean.x, mean.y, mean.z, d.x, d.y, d.z, vel,
                    ],
                });
            }
            MotionClass::Revolute => {
                let circle = m.circle.as_ref().expect("revolute track has a circle fit");
                let state = m.state.as_ref().expect("revolute track has states");
                let (swept, acount) = swept_stats(track, state, eps_s, scene_scale);
                let omega = if acount > 0 { swept / acount as f64 } else { 0.0 };
                let d = circle.normal;
                let o = circle.center; // the center lies on the axis line
                revolute.push(MotionFeature {
                    track_id: m.track_id,
                    values: vec![
                        start.x, start.y, start.z, mean.x, mean.y, mean.z, d.x, d.y, d.z, o.x,
                        o.y, o.z, omega,
                    ],
                });
            }
            MotionClass::Static | MotionClass::Noise => {}
        }
    }
    align_direction_signs(&mut prismatic);
    align_direction_signs(&mut revolute);
    (prismatic, revolute)
}

/// In-place z-score standardization per dimension. Constant dimensions are
/// centered only.
pub fn standardize(rows: &mut [Vec<f64>]) {
    if rows.is_empty() {
        return;
    }
    let dims = rows[0].len();
    let n = rows.len() as f64;
    for d in 0..dims {
        let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-12);
        for r in rows.iter_mut() {
            r[d] = (r[d] - mean) / std;
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ initialization followed by Lloyd iterations until the
/// relative inertia change drops below 1e-8 (or 300 iterations). Empty
/// clusters are re-seeded from the point farthest from its centroid.
/// Runs several restarts and keeps the lowest-inertia labeling, all
/// deterministic in `seed`.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..10u64 {
        let (inertia, labels) =
            kmeans_once(rows, k, seed.wrapping_add(restart.wrapping_mul(0x517c_c1b7_2722_0a95)))?;
        if best.as_ref().map(|(bi, _)| inertia < *bi).unwrap_or(true) {
            best = Some((inertia, labels));
        }
    }
    Ok(best.unwrap().1)
}

fn kmeans_once(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<(f64, Vec<usize>)> {
    let n = rows.len();
    if k == 0 {
        return Err(ArtError::validation("kmeans requires k >= 1"));
    }
    if k > n {
        return Err(ArtError::validation(format!(
            "kmeans: k = {k} exceeds the number of points ({n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(rows[rng.gen_range(0..n)].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = rows
            .iter()
            .map(|r| {
                centroids
                    .iter()
                    .map(|c| sq_dist(r, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centroids.push(rows[idx].clone());
    }

    let dims = rows[0].len();
    let mut labels = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    let mut final_inertia = f64::INFINITY;
    for _ in 0..300 {
        let mut inertia = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, cen) in centroids.iter().enumerate() {
                let d = sq_dist(r, cen);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            labels[i] = best;
            inertia += best_d;
        }
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|i| labels[*i] == c).collect();
            if members.is_empty() {
                // re-seed from the point farthest from its own centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centroids[labels[a]])
                            .total_cmp(&sq_dist(&rows[b], &centroids[labels[b]]))
                    })
                    .unwrap();
                centroids[c] = rows[far].clone();
                labels[far] = c;
                continue;
            }
            let mut cen = vec![0.0; dims];
            for &i in &members {
                for d in 0..dims {
                    cen[d] += rows[i][d];
                }
            }
            for v in cen.iter_mut() {
                *v /= members.len() as f64;
            }
            centroids[c] = cen;
        }
        final_inertia = inertia;
        if (prev_inertia - inertia).abs() <= 1e-8 * prev_inertia.max(1e-30) {
            break;
        }
        prev_inertia = inertia;
    }
    Ok((final_inertia, labels))
}

#[derive(Clone, Debug)]
pub struct FilterOutcome {
    /// indices into the member slice that survive
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub hit_floor: bool,
}

/// A fitted line direction or circle normal is only defined up to sign;
/// features must use one canonical representative or a part's tracks split
/// into two antipodal modes.
fn align_direction_signs(feats: &mut [MotionFeature]) {
    if feats.is_empty() {
        return;
    }
    // Build the scatter matrix of the (sign-invariant) outer products and
    // take its eigenbasis. Each direction gets its sign from the first
    // eigenvector it projects onto decisively; an axis-aligned rule (e.g.
    // "largest component positive") flips per track when two components have
    // near-equal magnitude, splitting one part into two antipodal modes.
    let mut scatter = nalgebra::Matrix3::<f64>::zeros();
    for f in feats.iter() {
        let d = Vector3::new(f.values[6], f.values[7], f.values[8]);
        scatter += d * d.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(scatter);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let basis: Vec<Vector3<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    for f in feats.iter_mut() {
        let d = Vector3::new(f.values[6], f.values[7], f.values[8]);
        let mut sign = 1.0;
        for r in &basis {
            let dot = d.dot(r);
            if dot.abs() >= 0.2 {
                sign = dot.signum();
                break;
            }
            // an orthonormal basis guarantees some |dot| >= 1/sqrt(3)
            sign = dot.signum();
        }
        for k in 6..9 {
            f.values[k] *= sign;
        }
    }
}

fn sign_aligned_mean_dir(dirs: &[Vector3<f64>]) -> Vector3<f64> {
    let reference = dirs[0];
    let mut acc = Vector3::zeros();
    for d in dirs {
        acc += if d.dot(&reference) < 0.0 { -d } else { *d };
    }
    let mut mean = acc.normalize();
    // canonical sign: largest-magnitude component positive, so flipping
    // member signs cannot flip the result
    let argmax = (0..3).max_by(|&a, &b| mean[a].abs().total_cmp(&mean[b].abs())).unwrap();
    if mean[argmax] < 0.0 {
        mean = -mean;
    }
    mean
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Remove members whose direction deviates from the cluster mean by more
/// than `angle_max` or whose mean position is farther from the centroid
/// than `dist_max` robust standard deviations. Repeats until stable, never
/// shrinking below `min_cluster_size`.
pub fn iterative_filter(
    dirs: &[Vector3<f64>],
    mean_positions: &[Vector3<f64>],
    cfg: &FilterConfig,
) -> Result<FilterOutcome> {
    cfg.validate()?;
    if dirs.is_empty() || dirs.len() != mean_positions.len() {
        return Err(ArtError::validation(
            "iterative_filter: empty cluster or mismatched inputs",
        ));
    }
    let mut kept: Vec<usize> = (0..dirs.len()).collect();
    let mut removed = Vec::new();
    let mut hit_floor = false;
    let cos_max = cfg.angle_max_deg.to_radians().cos();
    for _ in 0..cfg.max_iters {
        if kept.len() <= cfg.min_cluster_size {
            break;
        }
        let d_mean = sign_aligned_mean_dir(&kept.iter().map(|&i| dirs[i]).collect::<Vec<_>>());
        let centroid = kept
            .iter()
            .map(|&i| mean_positions[i])
            .sum::<Vector3<f64>>()
            / kept.len() as f64;
        let dists: Vec<f64> = kept.iter().map(|&i| (mean_positions[i] - centroid).norm()).collect();
        let med = median(&mut dists.clone());
        let mad = median(&mut dists.iter().map(|d| (d - med).abs()).collect::<Vec<_>>());
        let robust = 1.4826 * mad;
        let mut next = Vec::new();
        let mut cut = Vec::new();
        for (j, &i) in kept.iter().enumerate() {
            let angle_bad = dirs[i].dot(&d_mean).abs() < cos_max;
            let dist_bad = robust > 1e-12 && dists[j] > cfg.dist_max * robust;
            if angle_bad || dist_bad {
                cut.push(i);
            } else {
                next.push(i);
            }
        }
        if cut.is_empty() {
            break;
        }
        if next.len() < cfg.min_cluster_size {
            hit_floor = true;
            break;
        }
        kept = next;
        removed.extend(cut);
    }
    Ok(FilterOutcome { kept, removed, hit_floor })
}

/// Aggregate surviving members of one cluster into a joint initialization.
/// Member direction / state signs are aligned to the aggregated direction.
pub fn aggregate_cluster(
    kind: JointKind,
    members: &[(&Track, &TrackMotion)],
    filter_floor_hit: bool,
) -> Result<MotionCluster> {
    if members.is_empty() {
        return Err(ArtError::validation("aggregate_cluster: empty cluster"));
    }
    for (_, m) in members {
        let mk = match m.class {
            MotionClass::Prismatic => JointKind::Prismatic,
            MotionClass::Revolute => JointKind::Revolute,
            _ => {
                return Err(ArtError::validation(
                    "aggregate_cluster: static/noise member",
                ))
            }
        };
        if mk != kind {
            return Err(ArtError::validation("aggregate_cluster: mixed joint kinds"));
        }
    }

    let dirs: Vec<Vector3<f64>> = members
        .iter()
        .map(|(_, m)| match kind {
            JointKind::Prismatic => m.line.as_ref().unwrap().direction,
            JointKind::Revolute => m.circle.as_ref().unwrap().normal,
        })
        .collect();
    let d = sign_aligned_mean_dir(&dirs);

    let axis_origin = match kind {
        JointKind::Prismatic => None,
        JointKind::Revolute => {
            let origins: Vec<Vector3<f64>> = members
                .iter()
                .map(|(_, m)| m.circle.as_ref().unwrap().center)
                .collect();
            // least-squares point nearest all member axis lines:
            // Σ (I − d dᵀ) p = Σ (I − d dᵀ) o. The system is singular along
            // any direction shared by all axes; fill those from the mean
            // origin via the eigendecomposition.
            let mut a = Matrix3::zeros();
            let mut b = Vector3::zeros();
            for (di, oi) in dirs.iter().zip(&origins) {
                let proj = Matrix3::identity() - di * di.transpose();
                a += proj;
                b += proj * oi;
            }
            let o_mean = origins.iter().sum::<Vector3<f64>>() / origins.len() as f64;
            let eig = a.symmetric_eigen();
            let l_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let mut p = Vector3::zeros();
            for j in 0..3 {
                let v = eig.eigenvectors.column(j);
                if eig.eigenvalues[j] > 1e-9 * l_max.max(1e-30) {
                    p += v * (v.dot(&b) / eig.eigenvalues[j]);
                } else {
                    p += v * v.dot(&o_mean);
                }
            }
            Some(p)
        }
    };

    let part_center = members
        .iter()
        .map(|(t, _)| first_valid_pos(t))
        .sum::<Vector3<f64>>()
        / members.len() as f64;

    // mean state over frames where at least half the members are valid,
    // each member's sign aligned with the aggregated direction
    let n_frames = members[0].0.positions.len();
    let mut mean_state = vec![None; n_frames];
    for f in 0..n_frames {
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for ((_, m), dir) in members.iter().zip(&dirs) {
            if let Some(states) = &m.state {
                if let Some(s) = states.get(f).copied().flatten() {
                    let sign = if dir.dot(&d) < 0.0 { -1.0 } else { 1.0 };
                    acc += sign * s;
                    cnt += 1;
                }
            }
        }
        if cnt * 2 >= members.len() && cnt > 0 {
            mean_state[f] = Some(acc / cnt as f64);
        }
    }

    Ok(MotionCluster {
        kind,
        member_ids: members.iter().map(|(t, _)| t.id).collect(),
        mean_direction: d,
        axis_origin,
        part_center,
        mean_state,
        filter_floor_hit,
    })
}

/// Per-track cluster assignment from the full pipeline:
/// track id → cluster index in the returned list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub clusters: Vec<MotionCluster>,
    pub assignments: Vec<(u64, usize)>,
}

/// Cluster all analyzed tracks: prismatic and revolute tracks are grouped
/// separately with the given per-kind counts, filtered and aggregated.
pub fn cluster_tracks(
    tracks: &[Track],
    motions: &[TrackMotion],
    k_prismatic: usize,
    k_revolute: usize,
    filter_cfg: &FilterConfig,
    eps_s: f64,
    scene_scale: f64,
    seed: u64,
) -> Result<ClusteringResult> {
    let by_id: HashMap<u64, (&Track, &TrackMotion)> = motions
        .iter()
        .filter_map(|m| {
            tracks
                .iter()
                .find(|t| t.id == m.track_id)
                .map(|t| (m.track_id, (t, m)))
        })
        .collect();
    let (pris_feat, rev_feat) = build_features(tracks, motions, eps_s, scene_scale);

    let mut clusters = Vec::new();
    let mut assignments = Vec::new();
    for (kind, feats, k, salt) in [
        (JointKind::Prismatic, pris_feat, k_prismatic, 0u64),
        (JointKind::Revolute, rev_feat, k_revolute, 1u64),
    ] {
        if k == 0 {
            continue;
        }
        if feats.is_empty() {
            return Err(ArtError::validation(format!(
                "requested {k} {kind:?} clusters but no tracks of that kind were found"
            )));
        }
        let mut rows: Vec<Vec<f64>> = feats.iter().map(|f| f.values.clone()).collect();
        standardize(&mut rows);
        let labels = kmeans(&rows, k, seed.wrapping_add(salt))?;
        for c in 0..k {
            let member_idx: Vec<usize> =
                (0..feats.len()).filter(|&i| labels[i] == c).collect();
            if member_idx.is_empty() {
                continue;
            }
            let members: Vec<(&Track, &TrackMotion)> = member_idx
                .iter()
                .map(|&i| by_id[&feats[i].track_id])
                .collect();
            let dirs: Vec<Vector3<f64>> = members
                .iter()
                .map(|(_, m)| match kind {
                    JointKind::Prismatic => m.line.as_ref().unwrap().direction,
                    JointKind::Revolute => m.circle.as_ref().unwrap().normal,
                })
                .collect();
            let pos: Vec<Vector3<f64>> = members.iter().map(|(t, _)| mean_valid_pos(t)).collect();
            let outcome = iterative_filter(&dirs, &pos, filter_cfg)?;
            let survivors: Vec<(&Track, &TrackMotion)> =
                outcome.kept.iter().map(|&i| members[i]).collect();
            let agg = aggregate_cluster(kind, &survivors, outcome.hit_floor)?;
            let cluster_idx = clusters.len();
            for &i in &outcome.kept {
                assignments.push((members[i].0.id, cluster_idx));
            }
            clusters.push(agg);
        }
    }
    Ok(ClusteringResult { clusters, assignments })
}

/// Average, over clusters, of the fraction of each cluster's members that
/// share the cluster's dominant ground-truth label.
pub fn cluster_purity(result: &ClusteringResult, gt_label_of: &HashMap<u64, usize>) -> f64 {
    let n_clusters = result.clusters.len();
    if n_clusters == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (ci, cluster) in result.clusters.iter().enumerate() {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        let mut n = 0usize;
        for (tid, c) in &result.assignments {
            if *c == ci {
                if let Some(&l) = gt_label_of.get(tid) {
                    *counts.entry(l).or_insert(0) += 1;
                    n += 1;
                }
            }
        }
        let _ = cluster;
        if n > 0 {
            total += *counts.values().max().unwrap() as f64 / n as f64;
        }
    }
    total / n_clusters as f64
}
