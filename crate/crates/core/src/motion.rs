//! Per-track motion pattern analysis: classify each trajectory as static,
//! prismatic, revolute or noise, and extract per-track motion parameters
//! via adaptive downsampling, robust line fitting and 3D circle fitting.

use std::collections::HashSet;

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::tracks::Track;

/// Thresholds for motion analysis. `eps_*` and `ransac_inlier_tol` are
/// fractions of the scene scale.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisThresholds {
    pub eps_s: f64,
    pub eps_l: f64,
    pub eps_c: f64,
    pub ransac_iters: usize,
    pub ransac_inlier_tol: f64,
    pub downsample_target: usize,
}

impl Default for AnalysisThresholds {
    fn default() -> Self {
        AnalysisThresholds {
            eps_s: 0.01,
            eps_l: 0.01,
            eps_c: 0.01,
            ransac_iters: 256,
            ransac_inlier_tol: 0.01,
            downsample_target: 20,
        }
    }
}

impl AnalysisThresholds {
    pub fn validate(&self) -> Result<()> {
        if self.eps_s <= 0.0
            || self.eps_l <= 0.0
            || self.eps_c <= 0.0
            || self.ransac_inlier_tol <= 0.0
            || self.downsample_target == 0
            || self.ransac_iters == 0
        {
            return Err(ArtError::validation(
                "analysis thresholds must be positive and ransac_iters >= 1",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionClass {
    Static,
    Prismatic,
    Revolute,
    Noise,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LineFit {
    pub direction: Vector3<f64>,
    pub point: Vector3<f64>,
    pub rms: f64,
    pub inlier_mask: Vec<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircleFit {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub normal: Vector3<f64>,
    pub rms: f64,
}

/// Classification result plus fitted models and the per-frame joint state
/// (meters along the line for prismatic, radians about the axis for
/// revolute; `None` at invalid frames).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackMotion {
    pub track_id: u64,
    pub class: MotionClass,
    pub line: Option<LineFit>,
    pub circle: Option<CircleFit>,
    pub state: Option<Vec<Option<f64>>>,
}

/// True iff the maximum displacement from the canonical frame stays below
/// `eps_s * scene_scale` over all valid frames.
pub fn classify_static(
    track: &Track,
    canonical_frame: usize,
    eps_s: f64,
    scene_scale: f64,
) -> bool {
    let xc = track.pos(canonical_frame);
    let mut max_d: f64 = 0.0;
    for f in 0..track.positions.len() {
        if track.valid[f] {
            max_d = max_d.max((track.pos(f) - xc).norm());
        }
    }
    max_d < eps_s * scene_scale
}

/// Voxel-grid downsampling: edge = max(range_diag / target, 1e-9), the
/// earliest point per occupied voxel kept, in frame order.
pub fn adaptive_downsample(track: &Track, target: usize) -> Result<Vec<Vector3<f64>>> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut any = false;
    for f in 0..track.positions.len() {
        if track.valid[f] {
            any = true;
            for c in 0..3 {
                lo[c] = lo[c].min(track.positions[f][c]);
                hi[c] = hi[c].max(track.positions[f][c]);
            }
        }
    }
    if !any {
        return Err(ArtError::validation(format!(
            "track {}: all frames invalid",
            track.id
        )));
    }
    let diag = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt();
    let edge = (diag / target as f64).max(1e-9);
    let mut seen: HashSet<[i64; 3]> = HashSet::new();
    let mut out = Vec::new();
    for f in 0..track.positions.len() {
        if !track.valid[f] {
            continue;
        }
        let p = track.positions[f];
        let key = [
            ((p[0] - lo[0]) / edge).floor() as i64,
            ((p[1] - lo[1]) / edge).floor() as i64,
            ((p[2] - lo[2]) / edge).floor() as i64,
        ];
        if seen.insert(key) {
            out.push(track.pos(f));
        }
    }
    Ok(out)
}

fn point_line_dist(p: &Vector3<f64>, origin: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
    let v = p - origin;
    (v - dir * v.dot(dir)).norm()
}

fn principal_direction(points: &[Vector3<f64>], mask: &[bool]) -> (Vector3<f64>, Vector3<f64>) {
    let n = mask.iter().filter(|m| **m).count() as f64;
    let mut centroid = Vector3::zeros();
    for (p, m) in points.iter().zip(mask) {
        if *m {
            centroid += p;
        }
    }
    centroid /= n;
    let mut cov = Matrix3::zeros();
    for (p, m) in points.iter().zip(mask) {
        if *m {
            let d = p - centroid;
            cov += d * d.transpose();
        }
    }
    let eig = cov.symmetric_eigen();
    let mut best = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvectors.column(best).into_owned(), centroid)
}

/// RANSAC line fit: 2-point hypotheses, PCA refit on the best inlier set.
/// Direction sign is fixed to have non-negative dot with (last − first).
pub fn fit_line_ransac(
    points: &[Vector3<f64>],
    thresholds: &AnalysisThresholds,
    scene_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<LineFit> {
    let n = points.len();
    let distinct = {
        let mut d = 0;
        'outer: for i in 0..n {
            for j in 0..i {
                if (points[i] - points[j]).norm() > 1e-12 {
                    d = 2;
                    break 'outer;
                }
            }
        }
        d.max(if n >= 1 { 1 } else { 0 })
    };
    if n < 2 || distinct < 2 {
        return Err(ArtError::DegenerateFit(
            "line fit needs at least 2 distinct points".into(),
        ));
    }
    let tol = thresholds.ransac_inlier_tol * scene_scale;
    let mut best_mask = vec![true; n];
    let mut best_count = 0usize;
    for _ in 0..thresholds.ransac_iters {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let d = points[j] - points[i];
        let len = d.norm();
        if len < 1e-12 {
            continue;
        }
        let dir = d / len;
        let mut mask = vec![false; n];
        let mut count = 0usize;
        for (k, p) in points.iter().enumerate() {
            if point_line_dist(p, &points[i], &dir) <= tol {
                mask[k] = true;
                count += 1;
            }
        }
        if count > best_count {
            best_count = count;
            best_mask = mask;
        }
    }
    if best_count < 2 {
        best_mask = vec![true; n];
    }
    let (mut dir, centroid) = principal_direction(points, &best_mask);
    let span = points[n - 1] - points[0];
    if dir.dot(&span) < 0.0 {
        dir = -dir;
    }
    let mut sum2 = 0.0;
    let mut cnt = 0usize;
    for (p, m) in points.iter().zip(&best_mask) {
        if *m {
            let d = point_line_dist(p, &centroid, &dir);
            sum2 += d * d;
            cnt += 1;
        }
    }
    Ok(LineFit {
        direction: dir,
        point: centroid,
        rms: (sum2 / cnt as f64).sqrt(),
        inlier_mask: best_mask,
    })
}

/// Least-squares plane via SVD of centered points, algebraic circle fit in
/// the plane refined by one Gauss–Newton step. The normal sign makes the
/// point sequence wind counterclockwise.
pub fn fit_circle_3d(points: &[Vector3<f64>]) -> Result<CircleFit> {
    let n = points.len();
    if n < 3 {
        return Err(ArtError::DegenerateFit(
            "circle fit needs at least 3 points".into(),
        ));
    }
    let mut centroid = Vector3::zeros();
    for p in points {
        centroid += p;
    }
    centroid /= n as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    // order eigenvalues: idx[0] smallest
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (_l_min, l_mid, l_max) = (
        eig.eigenvalues[idx[0]].max(0.0),
        eig.eigenvalues[idx[1]].max(0.0),
        eig.eigenvalues[idx[2]].max(0.0),
    );
    if l_mid <= 1e-14 * l_max || l_max <= 0.0 {
        return Err(ArtError::DegenerateFit(
            "collinear points: circle is unidentifiable".into(),
        ));
    }
    let mut normal = eig.eigenvectors.column(idx[0]).into_owned();
    let u = eig.eigenvectors.column(idx[2]).into_owned();
    let v_raw = eig.eigenvectors.column(idx[1]).into_owned();
    // right-handed in-plane basis (u, v, normal)
    let v = if u.cross(&v_raw).dot(&normal) < 0.0 {
        -v_raw
    } else {
        v_raw
    };

    let proj: Vec<Vector2<f64>> = points
        .iter()
        .map(|p| {
            let d = p - centroid;
            Vector2::new(d.dot(&u), d.dot(&v))
        })
        .collect();

    // algebraic (Kåsa) fit: 2a·x + 2b·y + c = x² + y²
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for q in &proj {
        let row = Vector3::new(2.0 * q.x, 2.0 * q.y, 1.0);
        let rhs = q.x * q.x + q.y * q.y;
        ata += row * row.transpose();
        atb += row * rhs;
    }
    let sol = ata.lu().solve(&atb).ok_or_else(|| {
        ArtError::DegenerateFit("circle normal equations are singular".into())
    })?;
    let mut a = sol.x;
    let mut b = sol.y;
    let mut r = (sol.z + a * a + b * b).max(0.0).sqrt();

    // one Gauss-Newton step on geometric residuals
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for q in &proj {
        let dx = q.x - a;
        let dy = q.y - b;
        let di = (dx * dx + dy * dy).sqrt().max(1e-12);
        let res = di - r;
        let jrow = Vector3::new(-dx / di, -dy / di, -1.0);
        jtj += jrow * jrow.transpose();
        jtr += jrow * res;
    }
    if let Some(delta) = jtj.lu().solve(&(-jtr)) {
        a += delta.x;
        b += delta.y;
        r += delta.z;
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(ArtError::DegenerateFit("circle radius collapsed".into()));
    }

    // winding sign: sum of consecutive cross products about the normal
    let mut winding = 0.0;
    for w in proj.windows(2) {
        let p0 = Vector2::new(w[0].x - a, w[0].y - b);
        let p1 = Vector2::new(w[1].x - a, w[1].y - b);
        winding += p0.x * p1.y - p0.y * p1.x;
    }
    if winding < 0.0 {
        normal = -normal;
    }

    let center3 = centroid + u * a + v * b;
    let mut sum2 = 0.0;
    for p in points {
        let d = p - center3;
        let out_of_plane = d.dot(&normal);
        let in_plane = (d - normal * out_of_plane).norm() - r;
        sum2 += in_plane * in_plane + out_of_plane * out_of_plane;
    }
    Ok(CircleFit {
        center: center3,
        radius: r,
        normal,
        rms: (sum2 / n as f64).sqrt(),
    })
}

fn prismatic_states(track: &Track, canonical_frame: usize, fit: &LineFit) -> Vec<Option<f64>> {
    let xc = track.pos(canonical_frame);
    (0..track.positions.len())
        .map(|f| {
            if track.valid[f] {
                Some((track.pos(f) - xc).dot(&fit.direction))
            } else {
                None
            }
        })
        .collect()
}

/// Signed angle about the fitted axis, unwrapped by frame-to-frame
/// continuity, zeroed at the canonical frame.
fn revolute_states(track: &Track, canonical_frame: usize, fit: &CircleFit) -> Vec<Option<f64>> {
    let n_frames = track.positions.len();
    let normal = fit.normal;
    // in-plane basis
    let seed = if normal.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = (seed - normal * seed.dot(&normal)).normalize();
    let v = normal.cross(&u);

    let raw: Vec<Option<f64>> = (0..n_frames)
        .map(|f| {
            if track.valid[f] {
                let d = track.pos(f) - fit.center;
                Some(d.dot(&v).atan2(d.dot(&u)))
            } else {
                None
            }
        })
        .collect();

    // unwrap sequentially over valid frames
    let mut unwrapped = vec![None; n_frames];
    let mut prev: Option<(usize, f64)> = None;
    for f in 0..n_frames {
        if let Some(phi) = raw[f] {
            let val = match prev {
                None => phi,
                Some((_, prev_val)) => {
                    let prev_wrapped = prev_val.rem_euclid(2.0 * std::f64::consts::PI);
                    let mut delta = phi - prev_wrapped;
                    while delta > std::f64::consts::PI {
                        delta -= 2.0 * std::f64::consts::PI;
                    }
                    while delta < -std::f64::consts::PI {
                        delta += 2.0 * std::f64::consts::PI;
                    }
                    prev_val + delta
                }
            };
            unwrapped[f] = Some(val);
            prev = Some((f, val));
        }
    }
    let offset = unwrapped[canonical_frame].unwrap_or(0.0);
    for s in unwrapped.iter_mut() {
        if let Some(v) = s {
            *v -= offset;
        }
    }
    unwrapped
}

/// Full per-track analysis: static test, downsample, fit both models,
/// pick the better (rms normalized by its threshold), verify rigid
/// rotation for revolute candidates, compute per-frame states.
pub fn analyze_track(
    track: &Track,
    canonical_frame: usize,
    thresholds: &AnalysisThresholds,
    scene_scale: f64,
    seed: u64,
) -> Result<TrackMotion> {
    thresholds.validate()?;
    if track.num_valid() < 2 {
        return Err(ArtError::validation(format!(
            "track {} has fewer than 2 valid frames",
            track.id
        )));
    }
    if classify_static(track, canonical_frame, thresholds.eps_s, scene_scale) {
        return Ok(TrackMotion {
            track_id: track.id,
            class: MotionClass::Static,
            line: None,
            circle: None,
            state: None,
        });
    }

    let points = adaptive_downsample(track, thresholds.downsample_target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ track.id.wrapping_mul(0x9e3779b97f4a7c15));
    let line = fit_line_ransac(&points, thresholds, scene_scale, &mut rng).ok();
    let circle = if points.len() >= 3 {
        fit_circle_3d(&points).ok()
    } else {
        None
    };

    // a valid line must both fit tightly and explain most of the track;
    // otherwise a short chord of a noise walk would pass
    let line_ok = line
        .as_ref()
        .map(|l| {
            let frac = l.inlier_mask.iter().filter(|m| **m).count() as f64
                / l.inlier_mask.len() as f64;
            l.rms < thresholds.eps_l * scene_scale && frac >= 0.8
        })
        .unwrap_or(false);
    let mut circle_ok = circle
        .as_ref()
        .map(|c| c.rms < thresholds.eps_c * scene_scale)
        .unwrap_or(false);

    // tiny-arc tie break: a short arc is numerically a chord
    let swept = circle.as_ref().map(|c| {
        let states = revolute_states(track, canonical_frame, c);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in states.iter().flatten() {
            lo = lo.min(*s);
            hi = hi.max(*s);
        }
        hi - lo
    });
    if circle_ok && line_ok {
        if let Some(sw) = swept {
            if sw < 5.0_f64.to_radians() {
                circle_ok = false;
            }
        }
    }

    let choose_revolute = match (line_ok, circle_ok) {
        (false, false) => {
            return Ok(TrackMotion {
                track_id: track.id,
                class: MotionClass::Noise,
                line,
                circle,
                state: None,
            });
        }
        (true, false) => false,
        (false, true) => true,
        (true, true) => {
            let ln = line.as_ref().unwrap().rms / (thresholds.eps_l * scene_scale);
            let cn = circle.as_ref().unwrap().rms / (thresholds.eps_c * scene_scale);
            cn < ln
        }
    };

    if choose_revolute {
        let c = circle.as_ref().unwrap();
        // rigid-rotation verification: distance to the axis line must be
        // frame-invariant
        let d0 = {
            let w = track.pos(canonical_frame) - c.center;
            (w - c.normal * w.dot(&c.normal)).norm()
        };
        let mut ok = true;
        for f in 0..track.positions.len() {
            if track.valid[f] {
                let w = track.pos(f) - c.center;
                let d = (w - c.normal * w.dot(&c.normal)).norm();
                if (d - d0).abs() > 2.0 * thresholds.eps_c * scene_scale {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            return Ok(TrackMotion {
                track_id: track.id,
                class: MotionClass::Noise,
                line,
                circle,
                state: None,
            });
        }
        let state = revolute_states(track, canonical_frame, c);
        Ok(TrackMotion {
            track_id: track.id,
            class: MotionClass::Revolute,
            line,
            circle,
            state: Some(state),
        })
    } else {
        let l = line.as_ref().unwrap();
        let state = prismatic_states(track, canonical_frame, l);
        Ok(TrackMotion {
            track_id: track.id,
            class: MotionClass::Prismatic,
            line,
            circle,
            state: Some(state),
        })
    }
}
