//! Quaternion, dual-quaternion and rigid-transform algebra.
//!
//! Quaternions are stored `(w, x, y, z)`; angles are radians internally.
//! Everything is generic over [`Real`] so the same formulas run in plain
//! `f64` and under the autodiff tape.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{ArtError, Result};

/// A quaternion `w + xi + yj + zk`.
#[derive(Clone, Copy, Debug)]
pub struct Quat<T = f64> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quat<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Quat { w, x, y, z }
    }

    /// Identity quaternion in the same scalar context as `proto`.
    pub fn identity_like(proto: T) -> Self {
        Quat {
            w: proto.lift(1.0),
            x: proto.lift(0.0),
            y: proto.lift(0.0),
            z: proto.lift(0.0),
        }
    }

    /// Pure quaternion `(0, v)`.
    pub fn pure(v: [T; 3]) -> Self {
        Quat {
            w: v[0].lift(0.0),
            x: v[0],
            y: v[1],
            z: v[2],
        }
    }

    pub fn conj(self) -> Self {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn scale(self, s: T) -> Self {
        Quat {
            w: self.w * s,
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
        }
    }

    pub fn scale_c(self, s: f64) -> Self {
        Quat {
            w: self.w.mul_c(s),
            x: self.x.mul_c(s),
            y: self.y.mul_c(s),
            z: self.z.mul_c(s),
        }
    }

    pub fn add(self, o: Self) -> Self {
        Quat {
            w: self.w + o.w,
            x: self.x + o.x,
            y: self.y + o.y,
            z: self.z + o.z,
        }
    }

    /// Hamilton product.
    pub fn mul(self, o: Self) -> Self {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalize(self) -> Self {
        let inv = self.norm().recip();
        self.scale(inv)
    }

    pub fn vec(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    /// Rotate a vector: `q ⊗ (0,v) ⊗ q*` (q must be unit).
    pub fn rotate(self, v: [T; 3]) -> [T; 3] {
        self.mul(Quat::pure(v)).mul(self.conj()).vec()
    }

    pub fn values(self) -> [f64; 4] {
        [
            self.w.value(),
            self.x.value(),
            self.y.value(),
            self.z.value(),
        ]
    }
}

impl Quat<f64> {
    pub const IDENTITY: Quat<f64> = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Quat<f64> {
        let h = 0.5 * angle;
        let s = h.sin();
        Quat {
            w: h.cos(),
            x: s * axis.x,
            y: s * axis.y,
            z: s * axis.z,
        }
    }

    pub fn to_rotation_matrix(self) -> Matrix3<f64> {
        let Quat { w, x, y, z } = self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }
}

/// Dual quaternion `real + ε·dual` encoding an SE(3) transform.
#[derive(Clone, Copy, Debug)]
pub struct DualQuat<T = f64> {
    pub real: Quat<T>,
    pub dual: Quat<T>,
}

impl<T: Real> DualQuat<T> {
    pub fn identity_like(proto: T) -> Self {
        DualQuat {
            real: Quat::identity_like(proto),
            dual: Quat::pure([proto.lift(0.0); 3]),
        }
    }

    pub fn from_rotation_translation(rot: Quat<T>, t: [T; 3]) -> Self {
        // q_d = 0.5 (0,t) ⊗ q_r
        DualQuat {
            real: rot,
            dual: Quat::pure(t).mul(rot).scale_c(0.5),
        }
    }

    /// Dual-quaternion composition (this applied after `o`).
    pub fn mul(self, o: Self) -> Self {
        DualQuat {
            real: self.real.mul(o.real),
            dual: self.real.mul(o.dual).add(self.dual.mul(o.real)),
        }
    }

    /// Divide both parts by the norm of the real part.
    pub fn normalize(self) -> Self {
        let inv = self.real.norm().recip();
        DualQuat {
            real: self.real.scale(inv),
            dual: self.dual.scale(inv),
        }
    }

    /// Translation of a unit dual quaternion: vector part of `2·dual⊗conj(real)`.
    pub fn translation(self) -> [T; 3] {
        self.dual.mul(self.real.conj()).scale_c(2.0).vec()
    }

    /// Inverse of a unit dual quaternion (quaternion conjugate of both parts).
    pub fn inverse_unit(self) -> Self {
        DualQuat {
            real: self.real.conj(),
            dual: self.dual.conj(),
        }
    }

    /// Apply a unit dual quaternion to a point.
    pub fn apply(self, p: [T; 3]) -> [T; 3] {
        let r = self.real.rotate(p);
        let t = self.translation();
        [r[0] + t[0], r[1] + t[1], r[2] + t[2]]
    }
}

/// Joint kind: pure translation along an axis, or pure rotation about an
/// axis line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointKind {
    Prismatic,
    Revolute,
}

/// Joint parameterization: kind, unit axis direction, axis origin
/// (ignored for prismatic joints).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JointSpec {
    pub kind: JointKind,
    pub axis_dir: Vector3<f64>,
    pub axis_origin: Vector3<f64>,
}

impl JointSpec {
    pub fn prismatic(dir: Vector3<f64>) -> Self {
        JointSpec {
            kind: JointKind::Prismatic,
            axis_dir: dir,
            axis_origin: Vector3::zeros(),
        }
    }

    pub fn revolute(dir: Vector3<f64>, origin: Vector3<f64>) -> Self {
        JointSpec {
            kind: JointKind::Revolute,
            axis_dir: dir,
            axis_origin: origin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.axis_dir.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(ArtError::validation(format!(
                "joint axis direction must be unit-norm, got norm {n:.12}"
            )));
        }
        if !self.axis_origin.iter().all(|v| v.is_finite()) {
            return Err(ArtError::validation("joint axis origin must be finite"));
        }
        Ok(())
    }
}

/// Joint dual quaternion at state `theta`, generic scalar version.
///
/// Prismatic: real = identity, dual = 0.5·(0, θ·d)⊗real.
/// Revolute: real = (cos θ/2, sin θ/2·d), dual = 0.5·(ō⊗real − real⊗ō)
/// with ō = (0, o).
pub fn dq_from_joint_generic<T: Real>(
    kind: JointKind,
    dir: [T; 3],
    origin: [T; 3],
    theta: T,
) -> DualQuat<T> {
    match kind {
        JointKind::Prismatic => {
            let real = Quat::identity_like(theta);
            let t = [dir[0] * theta, dir[1] * theta, dir[2] * theta];
            DualQuat {
                real,
                dual: Quat::pure(t).mul(real).scale_c(0.5),
            }
        }
        JointKind::Revolute => {
            let half = theta.mul_c(0.5);
            let s = half.sin();
            let real = Quat {
                w: half.cos(),
                x: s * dir[0],
                y: s * dir[1],
                z: s * dir[2],
            };
            let obar = Quat::pure(origin);
            let dual = obar
                .mul(real)
                .add(real.mul(obar).scale_c(-1.0))
                .scale_c(0.5);
            DualQuat { real, dual }
        }
    }
}

/// Joint dual quaternion at state `theta` (radians for revolute, meters
/// for prismatic). Rejects non-unit axes.
pub fn dq_from_joint(spec: &JointSpec, theta: f64) -> Result<DualQuat> {
    spec.validate()?;
    if !theta.is_finite() {
        return Err(ArtError::validation("joint state must be finite"));
    }
    Ok(dq_from_joint_generic(
        spec.kind,
        [spec.axis_dir.x, spec.axis_dir.y, spec.axis_dir.z],
        [spec.axis_origin.x, spec.axis_origin.y, spec.axis_origin.z],
        theta,
    ))
}

/// Weighted dual-quaternion blend with antipodal pre-alignment against the
/// highest-weight element, renormalized by the real part's norm.
pub fn dq_blend_generic<T: Real>(weights: &[T], dqs: &[DualQuat<T>]) -> Result<DualQuat<T>> {
    assert_eq!(weights.len(), dqs.len());
    let wsum: f64 = weights.iter().map(|w| w.value().abs()).sum();
    if wsum < 1e-12 {
        return Err(ArtError::validation("dq_blend: all-zero weight vector"));
    }
    let ref_idx = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value().total_cmp(&b.1.value()))
        .map(|(i, _)| i)
        .unwrap();
    let refq = dqs[ref_idx].real;
    let mut acc_r = Quat::pure([weights[0].lift(0.0); 3]);
    let mut acc_d = acc_r;
    for (w, dq) in weights.iter().zip(dqs) {
        let sign = if dq.real.dot(refq).value() < 0.0 {
            -1.0
        } else {
            1.0
        };
        let ws = w.mul_c(sign);
        acc_r = acc_r.add(dq.real.scale(ws));
        acc_d = acc_d.add(dq.dual.scale(ws));
    }
    let n = acc_r.norm();
    if n.value() < 1e-12 {
        return Err(ArtError::DegenerateBlend(n.value()));
    }
    let inv = n.recip();
    Ok(DualQuat {
        real: acc_r.scale(inv),
        dual: acc_d.scale(inv),
    })
}

/// f64 entry point with the weight-vector precondition checks.
pub fn dq_blend(weights: &[f64], dqs: &[DualQuat]) -> Result<DualQuat> {
    if weights.iter().any(|&w| w < 0.0) {
        return Err(ArtError::validation("dq_blend: negative weight"));
    }
    let sum: f64 = weights.iter().sum();
    if sum.abs() < 1e-12 {
        return Err(ArtError::validation("dq_blend: all-zero weight vector"));
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(ArtError::validation(format!(
            "dq_blend: weights must sum to 1, got {sum:.9}"
        )));
    }
    dq_blend_generic(weights, dqs)
}

/// Rigid transform as rotation matrix plus translation vector.
#[derive(Clone, Copy, Debug)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn compose(&self, o: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * o.rotation,
            translation: self.rotation * o.translation + self.translation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rtr = self.rotation.transpose() * self.rotation;
        let dev = (rtr - Matrix3::identity()).norm();
        if dev > 1e-9 {
            return Err(ArtError::validation(format!(
                "rotation is not orthonormal (|RᵀR−I| = {dev:.3e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(ArtError::validation(format!(
                "rotation determinant must be +1, got {det:.12}"
            )));
        }
        Ok(())
    }
}

fn check_normalized(dq: &DualQuat) -> Result<()> {
    let n = dq.real.norm();
    if (n - 1.0).abs() > 1e-6 {
        return Err(ArtError::validation(format!(
            "dual quaternion not normalized (real norm {n:.9})"
        )));
    }
    Ok(())
}

/// Rotation matrix and translation vector of a unit dual quaternion.
pub fn dq_to_rigid(dq: &DualQuat) -> Result<RigidTransform> {
    check_normalized(dq)?;
    let t = dq.translation();
    Ok(RigidTransform {
        rotation: dq.real.to_rotation_matrix(),
        translation: Vector3::new(t[0], t[1], t[2]),
    })
}

/// Apply a unit dual quaternion to a point.
pub fn dq_apply(dq: &DualQuat, p: Vector3<f64>) -> Result<Vector3<f64>> {
    check_normalized(dq)?;
    let out = dq.apply([p.x, p.y, p.z]);
    Ok(Vector3::new(out[0], out[1], out[2]))
}

/// Exact inverse of a unit dual quaternion.
pub fn dq_inverse(dq: &DualQuat) -> Result<DualQuat> {
    check_normalized(dq)?;
    Ok(dq.inverse_unit())
}

/// Transform a position affinely and left-multiply an orientation by the
/// rotation quaternion; the output orientation is renormalized.
pub fn rigid_apply_oriented(
    t: &RigidTransform,
    q_r: &Quat,
    mu: Vector3<f64>,
    r: &Quat,
) -> (Vector3<f64>, Quat) {
    let pos = t.apply(mu);
    let rot = q_r.mul(*r).normalize();
    (pos, rot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 {
                return v / n;
            }
        }
    }

    fn rand_joint(rng: &mut ChaCha8Rng) -> (JointSpec, f64) {
        let dir = rand_unit(rng);
        let origin = Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        if rng.gen_bool(0.5) {
            (JointSpec::prismatic(dir), rng.gen_range(-1.5..1.5))
        } else {
            (
                JointSpec::revolute(dir, origin),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            )
        }
    }

    /// 4×4 homogeneous matrix oracle: T(o)·R(θ,d)·T(−o) for revolute,
    /// plain translation for prismatic.
    pub(crate) fn joint_matrix_oracle(spec: &JointSpec, theta: f64) -> RigidTransform {
        match spec.kind {
            JointKind::Prismatic => RigidTransform {
                rotation: Matrix3::identity(),
                translation: spec.axis_dir * theta,
            },
            JointKind::Revolute => {
                let r = Quat::from_axis_angle(spec.axis_dir, theta).to_rotation_matrix();
                RigidTransform {
                    rotation: r,
                    translation: spec.axis_origin - r * spec.axis_origin,
                }
            }
        }
    }

    #[test]
    fn prismatic_pure_translation() {
        let spec = JointSpec::prismatic(Vector3::new(0.0, 0.0, 1.0));
        let dq = dq_from_joint(&spec, 2.0).unwrap();
        let t = dq_to_rigid(&dq).unwrap();
        assert!((t.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!((t.translation - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn revolute_about_origin_pi() {
        let spec = JointSpec::revolute(Vector3::new(0.0, 0.0, 1.0), Vector3::zeros());
        let dq = dq_from_joint(&spec, std::f64::consts::PI).unwrap();
        let q = dq.real.values();
        assert!((q[0]).abs() < 1e-12 && (q[3] - 1.0).abs() < 1e-12);
        assert!(dq.dual.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn revolute_offset_quarter_turn() {
        // axis z through (1,0,0), θ=π/2 applied to (2,0,0) → (1,1,0)
        let spec = JointSpec::revolute(Vector3::new(0.0, 0.0, 1.0), Vector3::new(1.0, 0.0, 0.0));
        let dq = dq_from_joint(&spec, std::f64::consts::FRAC_PI_2).unwrap();
        let p = dq_apply(&dq, Vector3::new(2.0, 0.0, 0.0)).unwrap();
        assert!((p - Vector3::new(1.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn non_unit_axis_rejected() {
        let spec = JointSpec::prismatic(Vector3::new(0.0, 0.0, 2.0));
        assert!(dq_from_joint(&spec, 1.0).is_err());
    }

    #[test]
    fn random_joints_match_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut max_dev: f64 = 0.0;
        for _ in 0..1000 {
            let (spec, theta) = rand_joint(&mut rng);
            let dq = dq_from_joint(&spec, theta).unwrap();
            let oracle = joint_matrix_oracle(&spec, theta);
            let p = Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let dev = (dq_apply(&dq, p).unwrap() - oracle.apply(p)).norm();
            max_dev = max_dev.max(dev);
        }
        assert!(max_dev < 1e-9, "max deviation {max_dev:.3e}");
    }

    #[test]
    fn composition_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let (sa, ta) = rand_joint(&mut rng);
            let (sb, tb) = rand_joint(&mut rng);
            let a = dq_from_joint(&sa, ta).unwrap();
            let b = dq_from_joint(&sb, tb).unwrap();
            let ab = dq_to_rigid(&a.mul(b).normalize()).unwrap();
            let composed = dq_to_rigid(&a).unwrap().compose(&dq_to_rigid(&b).unwrap());
            assert!((ab.rotation - composed.rotation).norm() < 1e-9);
            assert!((ab.translation - composed.translation).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_state_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (spec, _) = rand_joint(&mut rng);
            let dq = dq_from_joint(&spec, 0.0).unwrap();
            let id = DualQuat::identity_like(0.0f64);
            let dr: f64 = dq
                .real
                .values()
                .iter()
                .zip(id.real.values())
                .map(|(a, b)| (a - b).abs())
                .sum();
            let dd: f64 = dq.dual.values().iter().map(|v| v.abs()).sum();
            assert!(dr < 1e-12 && dd < 1e-12);
        }
    }

    #[test]
    fn revolute_fixes_axis_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let dir = rand_unit(&mut rng);
            let origin = Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let spec = JointSpec::revolute(dir, origin);
            let theta = rng.gen_range(-3.0..3.0);
            let dq = dq_from_joint(&spec, theta).unwrap();
            let s = rng.gen_range(-5.0..5.0);
            let p = origin + dir * s;
            assert!((dq_apply(&dq, p).unwrap() - p).norm() < 1e-10);
        }
    }

    #[test]
    fn blend_one_hot_selects() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let (sa, ta) = rand_joint(&mut rng);
            let (sb, tb) = rand_joint(&mut rng);
            let dqs = [
                dq_from_joint(&sa, ta).unwrap(),
                dq_from_joint(&sb, tb).unwrap(),
            ];
            let blended = dq_blend(&[0.0, 1.0], &dqs).unwrap();
            for _ in 0..100 {
                let p = Vector3::new(
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                );
                let d = (dq_apply(&blended, p).unwrap() - dq_apply(&dqs[1], p).unwrap()).norm();
                assert!(d < 1e-10);
            }
        }
    }

    #[test]
    fn blend_two_translations() {
        let a = DualQuat::from_rotation_translation(Quat::IDENTITY, [0.0, 0.0, 0.0]);
        let b = DualQuat::from_rotation_translation(Quat::IDENTITY, [0.0, 0.0, 2.0]);
        let m = dq_blend(&[0.5, 0.5], &[a, b]).unwrap();
        let t = m.translation();
        assert!((t[0]).abs() < 1e-12 && (t[1]).abs() < 1e-12 && (t[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blend_matches_independent_oracle() {
        // oracle: direct re-derivation of the weighted-sum blend
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let d1 = rand_unit(&mut rng);
            let d2 = rand_unit(&mut rng);
            let o1 = Vector3::new(rng.gen_range(-1.0..1.0), 0.3, 0.0);
            let o2 = Vector3::new(0.0, rng.gen_range(-1.0..1.0), 0.7);
            let q1 = dq_from_joint(&JointSpec::revolute(d1, o1), 0.9).unwrap();
            let q2 = dq_from_joint(&JointSpec::revolute(d2, o2), -1.2).unwrap();
            let (w1, w2) = (0.3, 0.7);
            let s = if q1.real.dot(q2.real) < 0.0 { -1.0 } else { 1.0 };
            let sum_r = q1.real.scale(w1 * s).add(q2.real.scale(w2));
            let sum_d = q1.dual.scale(w1 * s).add(q2.dual.scale(w2));
            let n = sum_r.norm();
            let oracle = DualQuat {
                real: sum_r.scale(1.0 / n),
                dual: sum_d.scale(1.0 / n),
            };
            let blended = dq_blend(&[w1, w2], &[q1, q2]).unwrap();
            let dr: f64 = blended
                .real
                .values()
                .iter()
                .zip(oracle.real.values())
                .map(|(a, b)| (a - b).abs())
                .sum();
            let dd: f64 = blended
                .dual
                .values()
                .iter()
                .zip(oracle.dual.values())
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(dr < 1e-12 && dd < 1e-12);
        }
    }

    #[test]
    fn blend_rejects_bad_weights() {
        let id = DualQuat::identity_like(0.0f64);
        assert!(dq_blend(&[0.0, 0.0], &[id, id]).is_err());
        assert!(dq_blend(&[0.9, 0.2], &[id, id]).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..200 {
            let (spec, theta) = rand_joint(&mut rng);
            let dq = dq_from_joint(&spec, theta).unwrap();
            let inv = dq_inverse(&dq).unwrap();
            let p = Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let back = dq_apply(&inv, dq_apply(&dq, p).unwrap()).unwrap();
            assert!((back - p).norm() < 1e-10);
            // compose(dq, inv) = identity
            let comp = dq.mul(inv);
            assert!((comp.real.values()[0] - 1.0).abs() < 1e-10);
            assert!(comp.dual.values().iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn inverse_of_translation() {
        let t = DualQuat::from_rotation_translation(Quat::IDENTITY, [1.0, -2.0, 3.0]);
        let inv = dq_inverse(&t).unwrap();
        let tr = inv.translation();
        assert!((tr[0] + 1.0).abs() < 1e-12);
        assert!((tr[1] - 2.0).abs() < 1e-12);
        assert!((tr[2] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn apply_consistent_with_rigid() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..200 {
            let (spec, theta) = rand_joint(&mut rng);
            let dq = dq_from_joint(&spec, theta).unwrap();
            let t = dq_to_rigid(&dq).unwrap();
            let p = Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            assert!((dq_apply(&dq, p).unwrap() - t.apply(p)).norm() < 1e-12);
        }
    }

    #[test]
    fn non_normalized_rejected() {
        let mut dq = DualQuat::identity_like(0.0f64);
        dq.real.w = 2.0;
        assert!(dq_to_rigid(&dq).is_err());
        assert!(dq_apply(&dq, Vector3::zeros()).is_err());
        assert!(dq_inverse(&dq).is_err());
    }

    #[test]
    fn oriented_apply() {
        // identity
        let id = RigidTransform::identity();
        let (p, q) = rigid_apply_oriented(&id, &Quat::IDENTITY, Vector3::new(1.0, 2.0, 3.0), &Quat::IDENTITY);
        assert!((p - Vector3::new(1.0, 2.0, 3.0)).norm() < 1e-15);
        assert!((q.values()[0] - 1.0).abs() < 1e-15);

        // 90° z-rotation about origin
        let rot = Quat::from_axis_angle(Vector3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let t = RigidTransform {
            rotation: rot.to_rotation_matrix(),
            translation: Vector3::zeros(),
        };
        let (p, q) = rigid_apply_oriented(&t, &rot, Vector3::new(1.0, 0.0, 0.0), &Quat::IDENTITY);
        assert!((p - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        let expect = rot.values();
        let got = q.values();
        for i in 0..4 {
            assert!((got[i] - expect[i]).abs() < 1e-12);
        }

        // random case vs matrix/quaternion oracle
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..100 {
            let (spec, theta) = rand_joint(&mut rng);
            let dq = dq_from_joint(&spec, theta).unwrap();
            let tr = dq_to_rigid(&dq).unwrap();
            let mu = Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let r = Quat::from_axis_angle(rand_unit(&mut rng), rng.gen_range(-3.0..3.0));
            let (p, q) = rigid_apply_oriented(&tr, &dq.real, mu, &r);
            assert!((p - (tr.rotation * mu + tr.translation)).norm() < 1e-9);
            let qm = q.to_rotation_matrix();
            let oracle = dq.real.to_rotation_matrix() * r.to_rotation_matrix();
            assert!((qm - oracle).norm() < 1e-9);
        }
    }
}
