//! Joint-recovery metrics (axis angle, axis position, joint state),
//! permutation-free matching of predicted joints to ground truth, and the
//! serializable evaluation report.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};
use crate::field::{DeformationField, B_AXIS_DIR, B_AXIS_ORIGIN};
use crate::geom::{JointKind, JointSpec};
use crate::motion::{MotionClass, TrackMotion};
use crate::tracks::{GroundTruth, TrackSet};

fn check_unit(v: &Vector3<f64>, what: &str) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-6 {
        return Err(ArtError::validation(format!("{what} must be unit length")));
    }
    Ok(())
}

/// Angle between two joint axes in degrees, sign-invariant.
pub fn metric_axis_angle(pred: &Vector3<f64>, gt: &Vector3<f64>) -> Result<f64> {
    check_unit(pred, "predicted axis")?;
    check_unit(gt, "ground-truth axis")?;
    Ok(pred.dot(gt).abs().clamp(-1.0, 1.0).acos().to_degrees())
}

/// Minimum distance between two infinite axis lines, in centimeters.
pub fn metric_axis_position(
    pred_d: &Vector3<f64>,
    pred_o: &Vector3<f64>,
    gt_d: &Vector3<f64>,
    gt_o: &Vector3<f64>,
) -> Result<f64> {
    check_unit(pred_d, "predicted axis")?;
    check_unit(gt_d, "ground-truth axis")?;
    let n = pred_d.cross(gt_d);
    let w = pred_o - gt_o;
    let meters = if n.norm() < 1e-9 {
        // parallel: point-to-line distance
        (w - gt_d * w.dot(gt_d)).norm()
    } else {
        (w.dot(&n) / n.norm()).abs()
    };
    Ok(meters * 100.0)
}

/// Mean per-frame state error after removing the canonical-frame offset,
/// minimized over the two axis-sign conventions. Degrees for revolute,
/// centimeters for prismatic.
pub fn metric_joint_state(
    pred: &[f64],
    gt: &[f64],
    kind: JointKind,
    canonical_frame: usize,
) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(ArtError::validation(
            "state curves must be non-empty and equal length",
        ));
    }
    let pc = pred[canonical_frame];
    let gc = gt[canonical_frame];
    let mut err_pos = 0.0;
    let mut err_neg = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        let pr = p - pc;
        let gr = g - gc;
        err_pos += (pr - gr).abs();
        err_neg += (-pr - gr).abs();
    }
    let n = pred.len() as f64;
    let raw = (err_pos / n).min(err_neg / n);
    Ok(match kind {
        JointKind::Revolute => raw.to_degrees(),
        JointKind::Prismatic => raw * 100.0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointEval {
    pub kind: JointKind,
    /// index of the matched predicted joint, if any
    pub matched_pred: Option<usize>,
    pub axis_error_deg: f64,
    /// revolute joints only; `None` marks not-applicable
    pub position_error_cm: Option<f64>,
    pub state_error: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_joint: Vec<JointEval>,
    pub mean_axis_error_deg: f64,
    pub mean_position_error_cm: Option<f64>,
    pub mean_state_error: f64,
    /// rows = ground truth, cols = predicted; order Static, Prismatic,
    /// Revolute, Noise
    pub confusion: [[usize; 4]; 4],
    pub cluster_purity: f64,
    pub assignment_purity: f64,
    pub final_l_c2o: f64,
    pub final_l_o2o: f64,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub config_echo: serde_json::Value,
    /// measured but excluded from serialized reports so identical runs
    /// produce byte-identical files
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

fn class_index(c: MotionClass) -> usize {
    match c {
        MotionClass::Static => 0,
        MotionClass::Prismatic => 1,
        MotionClass::Revolute => 2,
        MotionClass::Noise => 3,
    }
}

/// Ground-truth class of each track: outliers are Noise, label 0 is
/// Static, movable labels take their joint's kind.
pub fn gt_classes(gt: &GroundTruth) -> Vec<MotionClass> {
    gt.labels
        .iter()
        .zip(&gt.outliers)
        .map(|(&l, &out)| {
            if out {
                MotionClass::Noise
            } else if l == 0 {
                MotionClass::Static
            } else {
                match gt.joints[l - 1].kind {
                    JointKind::Prismatic => MotionClass::Prismatic,
                    JointKind::Revolute => MotionClass::Revolute,
                }
            }
        })
        .collect()
}

pub fn confusion_matrix(gt: &[MotionClass], pred: &[TrackMotion]) -> [[usize; 4]; 4] {
    let mut m = [[0usize; 4]; 4];
    for (g, p) in gt.iter().zip(pred) {
        m[class_index(*g)][class_index(p.class)] += 1;
    }
    m
}

/// Minimum-cost matching of ground-truth joints to predicted joints with a
/// 45° axis-angle gate and matching joint kinds. Returns, per GT joint,
/// the matched prediction index. Exact via bitmask dynamic programming
/// (joint counts are ≤ 9).
pub fn match_joints(
    gt: &[(JointKind, Vector3<f64>)],
    pred: &[(JointKind, Vector3<f64>)],
) -> Result<Vec<Option<usize>>> {
    const UNMATCHED: f64 = 90.0;
    let ng = gt.len();
    let np = pred.len();
    if np > 20 {
        return Err(ArtError::validation("too many predicted joints to match"));
    }
    let mut cost = vec![vec![f64::INFINITY; np]; ng];
    for (i, (gk, gd)) in gt.iter().enumerate() {
        for (j, (pk, pd)) in pred.iter().enumerate() {
            if gk == pk {
                let a = metric_axis_angle(pd, gd)?;
                if a <= 45.0 {
                    cost[i][j] = a;
                }
            }
        }
    }
    // dp[mask] = best cost assigning gt joints 0..popcount-consumed; we
    // iterate gt joints in order, mask = used predictions
    let full = 1usize << np;
    let mut dp = vec![f64::INFINITY; full];
    let mut choice: Vec<Vec<i32>> = vec![vec![-2; full]; ng];
    dp[0] = 0.0;
    for i in 0..ng {
        let mut next = vec![f64::INFINITY; full];
        for mask in 0..full {
            let base = dp[mask];
            if !base.is_finite() {
                continue;
            }
            // leave gt joint i unmatched
            if base + UNMATCHED < next[mask] {
                next[mask] = base + UNMATCHED;
                choice[i][mask] = -1;
            }
            for j in 0..np {
                if mask >> j & 1 == 0 && cost[i][j].is_finite() {
                    let nm = mask | 1 << j;
                    if base + cost[i][j] < next[nm] {
                        next[nm] = base + cost[i][j];
                        choice[i][nm] = j as i32;
                    }
                }
            }
        }
        dp = next;
    }
    let mut best_mask = 0;
    for mask in 0..full {
        if dp[mask] < dp[best_mask] {
            best_mask = mask;
        }
    }
    // backtrack
    let mut assignment = vec![None; ng];
    let mut mask = best_mask;
    for i in (0..ng).rev() {
        let c = choice[i][mask];
        if c >= 0 {
            assignment[i] = Some(c as usize);
            mask &= !(1usize << c);
        }
    }
    Ok(assignment)
}

fn field_axis(field: &DeformationField, k: usize) -> (Vector3<f64>, Vector3<f64>) {
    let d = Vector3::new(
        field.blocks[B_AXIS_DIR][3 * k],
        field.blocks[B_AXIS_DIR][3 * k + 1],
        field.blocks[B_AXIS_DIR][3 * k + 2],
    )
    .normalize();
    let o = Vector3::new(
        field.blocks[B_AXIS_ORIGIN][3 * k],
        field.blocks[B_AXIS_ORIGIN][3 * k + 1],
        field.blocks[B_AXIS_ORIGIN][3 * k + 2],
    );
    (d, o)
}

/// Score a trained field against generator ground truth: joint metrics via
/// gated matching, classification confusion, and part-assignment purity.
pub fn evaluate_field(
    field: &DeformationField,
    ts: &TrackSet,
    gt: &GroundTruth,
    motions: &[TrackMotion],
    cluster_purity: f64,
) -> Result<EvalReport> {
    let gt_joints: Vec<(JointKind, Vector3<f64>)> =
        gt.joints.iter().map(|j| (j.kind, j.axis_dir)).collect();
    let pred_joints: Vec<(JointKind, Vector3<f64>)> = (0..field.n_joints())
        .map(|k| (field.kinds[k], field_axis(field, k).0))
        .collect();
    let assignment = match_joints(&gt_joints, &pred_joints)?;

    let diag_cm = ts.scene_scale * 100.0;
    let mut per_joint = Vec::new();
    for (gi, spec) in gt.joints.iter().enumerate() {
        let gt_states: Vec<f64> = gt.thetas[gi].clone();
        match assignment[gi] {
            Some(pj) => {
                let (d, o) = field_axis(field, pj);
                let axis_error_deg = metric_axis_angle(&d, &spec.axis_dir)?;
                let position_error_cm = match spec.kind {
                    JointKind::Revolute => Some(metric_axis_position(
                        &d,
                        &o,
                        &spec.axis_dir,
                        &spec.axis_origin,
                    )?),
                    JointKind::Prismatic => None,
                };
                let pred_states: Vec<f64> = (0..ts.num_frames)
                    .map(|f| {
                        let t = if ts.num_frames <= 1 {
                            0.0
                        } else {
                            f as f64 / (ts.num_frames - 1) as f64
                        };
                        field.joint_state(t, pj)
                    })
                    .collect::<Result<_>>()?;
                let state_error = metric_joint_state(
                    &pred_states,
                    &gt_states,
                    spec.kind,
                    ts.canonical_frame,
                )?;
                per_joint.push(JointEval {
                    kind: spec.kind,
                    matched_pred: Some(pj),
                    axis_error_deg,
                    position_error_cm,
                    state_error,
                });
            }
            None => per_joint.push(JointEval {
                kind: spec.kind,
                matched_pred: None,
                axis_error_deg: 90.0,
                position_error_cm: match spec.kind {
                    JointKind::Revolute => Some(diag_cm),
                    JointKind::Prismatic => None,
                },
                state_error: match spec.kind {
                    JointKind::Revolute => 90.0,
                    JointKind::Prismatic => diag_cm,
                },
            }),
        }
    }

    let mean_axis_error_deg =
        per_joint.iter().map(|j| j.axis_error_deg).sum::<f64>() / per_joint.len().max(1) as f64;
    let positions: Vec<f64> = per_joint.iter().filter_map(|j| j.position_error_cm).collect();
    let mean_position_error_cm = if positions.is_empty() {
        None
    } else {
        Some(positions.iter().sum::<f64>() / positions.len() as f64)
    };
    let mean_state_error =
        per_joint.iter().map(|j| j.state_error).sum::<f64>() / per_joint.len().max(1) as f64;

    // assignment purity: argmax part of each non-outlier track's canonical
    // position vs its ground-truth part, with predicted movable parts
    // mapped through the joint matching
    let mut pred_to_gt = vec![None; field.n_joints()];
    for (gi, a) in assignment.iter().enumerate() {
        if let Some(pj) = a {
            pred_to_gt[*pj] = Some(gi + 1);
        }
    }
    let mut correct = 0usize;
    let mut counted = 0usize;
    for (ti, tr) in ts.tracks.iter().enumerate() {
        if gt.outliers[ti] {
            continue;
        }
        let m = field.assign(tr.pos(ts.canonical_frame))?;
        let argmax = m
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let pred_label = if argmax == 0 {
            Some(0)
        } else {
            pred_to_gt[argmax - 1]
        };
        counted += 1;
        if pred_label == Some(gt.labels[ti]) {
            correct += 1;
        }
    }
    let assignment_purity = if counted == 0 {
        0.0
    } else {
        correct as f64 / counted as f64
    };

    Ok(EvalReport {
        per_joint,
        mean_axis_error_deg,
        mean_position_error_cm,
        mean_state_error,
        confusion: confusion_matrix(&gt_classes(gt), motions),
        cluster_purity,
        assignment_purity,
        final_l_c2o: 0.0,
        final_l_o2o: 0.0,
        warnings: Vec::new(),
        seed: 0,
        config_echo: serde_json::Value::Null,
        wall_time_seconds: 0.0,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| ArtError::config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ArtError::config(format!("bad report: {e}")))
    }

    /// Human-readable fixed-width table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str("joint  kind       matched  axis_err_deg  pos_err_cm  state_err\n");
        for (i, j) in self.per_joint.iter().enumerate() {
            let pos = j
                .position_error_cm
                .map(|p| format!("{p:10.4}"))
                .unwrap_or_else(|| "       n/a".to_string());
            s.push_str(&format!(
                "{i:>5}  {:<9}  {:<7}  {:>12.4}  {pos}  {:>9.4}\n",
                format!("{:?}", j.kind),
                j.matched_pred.map(|p| p.to_string()).unwrap_or_else(|| "-".into()),
                j.axis_error_deg,
                j.state_error,
            ));
        }
        s.push_str(&format!(
            "mean axis {:.4} deg | mean position {} | mean state {:.4}\n",
            self.mean_axis_error_deg,
            self.mean_position_error_cm
                .map(|p| format!("{p:.4} cm"))
                .unwrap_or_else(|| "n/a".into()),
            self.mean_state_error,
        ));
        s.push_str(&format!(
            "cluster purity {:.4} | assignment purity {:.4} | l_c2o {:.3e} | l_o2o {:.3e}\n",
            self.cluster_purity, self.assignment_purity, self.final_l_c2o, self.final_l_o2o
        ));
        s.push_str("confusion (rows gt, cols pred; Static Prismatic Revolute Noise):\n");
        for row in &self.confusion {
            s.push_str(&format!(
                "  {:>6} {:>6} {:>6} {:>6}\n",
                row[0], row[1], row[2], row[3]
            ));
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

/// Convenience: evaluate the field's recovered joints only (axis metrics
/// against explicit specs), used by tests.
pub fn field_joint_specs(field: &DeformationField) -> Vec<JointSpec> {
    (0..field.n_joints())
        .map(|k| {
            let (d, o) = field_axis(field, k);
            JointSpec {
                kind: field.kinds[k],
                axis_dir: d,
                axis_origin: o,
            }
        })
        .collect()
}
