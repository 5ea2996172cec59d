//! End-to-end acceptance gate. Each test prints one `PASS`/`FAIL` line
//! (run with `--nocapture` to see them); tolerances are pinned here and
//! intentionally not configurable.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use artic_core::cluster::{cluster_purity, cluster_tracks, FilterConfig};
use artic_core::eval::evaluate_field;
use artic_core::field::{DeformationField, FieldConfig};
use artic_core::geom::{dq_from_joint, JointKind, JointSpec};
use artic_core::motion::{
    analyze_track, fit_circle_3d, fit_line_ransac, AnalysisThresholds, MotionClass,
};
use artic_core::pipeline::analyze_all;
use artic_core::tracks::{
    add_noise_detailed, load_tracks, save_tracks, scenes, synth_generate, GroundTruth,
    PartConfig, SceneConfig, ScheduleWindow, TrackSet,
};
use artic_core::train::{
    grad_check, init_from_motion, loss_c2o, loss_o2o, train_field, AblationFlags, TrainConfig,
};
use artic_core::ArtError;

fn verdict(name: &str, pass: bool, detail: String) {
    println!("{} criterion {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {name} failed: {detail}");
}

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

fn rodrigues(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = Matrix3::new(
        0.0, -axis.z, axis.y, //
        axis.z, 0.0, -axis.x, //
        -axis.y, axis.x, 0.0,
    );
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Homogeneous-matrix action of a joint at state `theta`, written without
/// any quaternion machinery.
fn matrix_action(spec: &JointSpec, theta: f64, p: Vector3<f64>) -> Vector3<f64> {
    match spec.kind {
        JointKind::Prismatic => p + spec.axis_dir * theta,
        JointKind::Revolute => {
            let r = rodrigues(spec.axis_dir, theta);
            r * (p - spec.axis_origin) + spec.axis_origin
        }
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> (JointSpec, f64) {
    let kind = if rng.gen_bool(0.5) {
        JointKind::Prismatic
    } else {
        JointKind::Revolute
    };
    let spec = JointSpec {
        kind,
        axis_dir: rand_unit(rng),
        axis_origin: Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ),
    };
    let theta = rng.gen_range(-3.0..3.0);
    (spec, theta)
}

#[test]
fn criterion_1_kinematics_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut max_action = 0.0f64;
    let mut max_comp = 0.0f64;
    let mut max_fixed = 0.0f64;
    for _ in 0..1000 {
        let (spec, theta) = random_spec(&mut rng);
        let dq = dq_from_joint(&spec, theta).unwrap();
        let p = Vector3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        );
        let got = dq.apply([p.x, p.y, p.z]);
        let want = matrix_action(&spec, theta, p);
        max_action = max_action.max((Vector3::new(got[0], got[1], got[2]) - want).norm());

        // composition: dq(a)·dq(b) acting on p equals sequential matrix maps
        let (spec2, theta2) = random_spec(&mut rng);
        let dq2 = dq_from_joint(&spec2, theta2).unwrap();
        let got2 = dq.mul(dq2).apply([p.x, p.y, p.z]);
        let want2 = matrix_action(&spec, theta, matrix_action(&spec2, theta2, p));
        max_comp = max_comp.max((Vector3::new(got2[0], got2[1], got2[2]) - want2).norm());

        if spec.kind == JointKind::Revolute {
            let q = spec.axis_origin + spec.axis_dir * rng.gen_range(-2.0..2.0);
            let moved = dq.apply([q.x, q.y, q.z]);
            max_fixed =
                max_fixed.max((Vector3::new(moved[0], moved[1], moved[2]) - q).norm());
        }
    }
    let pass = max_action <= 1e-9 && max_comp <= 1e-9 && max_fixed <= 1e-10;
    let elapsed = t0.elapsed().as_secs_f64();
    verdict(
        "1 (kinematics oracle)",
        pass && elapsed < 5.0,
        format!(
            "action {max_action:.2e} (≤1e-9), composition {max_comp:.2e} (≤1e-9), \
             axis fixed {max_fixed:.2e} (≤1e-10), {elapsed:.1}s (<5s)"
        ),
    );
}

#[test]
fn criterion_2_fit_correctness() {
    let t0 = Instant::now();
    // constructed circle
    let center = Vector3::new(1.0, 2.0, 3.0);
    let r = 2.0;
    let pts: Vec<Vector3<f64>> = (0..40)
        .map(|i| {
            let a = i as f64 * 0.15;
            center + Vector3::new(r * a.cos(), r * a.sin(), 0.0)
        })
        .collect();
    let fit = fit_circle_3d(&pts).unwrap();
    let circle_ok = (fit.center - center).norm() <= 1e-9
        && (fit.radius - r).abs() <= 1e-9
        && fit.normal.cross(&Vector3::z()).norm() <= 1e-9;

    // RANSAC line with 20% outliers over 100 seeds
    let th = AnalysisThresholds::default();
    let dir = Vector3::new(1.0, 2.0, -0.5).normalize();
    let mut worst_angle = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vector3<f64>> = (0..50)
            .map(|i| {
                if i % 5 == 0 {
                    Vector3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                } else {
                    dir * (i as f64 * 0.02) + Vector3::new(0.3, -0.1, 0.2)
                }
            })
            .collect();
        let fit = fit_line_ransac(&pts, &th, 1.0, &mut rng).unwrap();
        let angle = fit.direction.dot(&dir).abs().clamp(-1.0, 1.0).acos().to_degrees();
        worst_angle = worst_angle.max(angle);
    }
    let line_ok = worst_angle <= 0.5;

    // collinear input must be flagged degenerate by the circle fit
    let collinear: Vec<Vector3<f64>> =
        (0..20).map(|i| Vector3::new(i as f64 * 0.1, 0.0, 0.0)).collect();
    let degenerate_ok = matches!(fit_circle_3d(&collinear), Err(ArtError::DegenerateFit(_)));

    let elapsed = t0.elapsed().as_secs_f64();
    verdict(
        "2 (fit correctness)",
        circle_ok && line_ok && degenerate_ok && elapsed < 30.0,
        format!(
            "circle {circle_ok}, ransac worst {worst_angle:.3}° (≤0.5°), \
             degenerate flagged {degenerate_ok}, {elapsed:.1}s (<30s)"
        ),
    );
}

/// Movable parts spread on a ring around a static hub, each with a joint
/// direction distinct from every other part's. Distinct directions matter
/// because feature dimensions that agree across all parts carry no signal
/// yet get amplified to unit variance by the z-score standardization, which
/// lets per-track fit noise drive the clustering. Drawer slides get a
/// per-part azimuth/elevation twist and door hinges tilt outward so the
/// swing radius grows with height (arcs stay decisively non-straight).
fn ring_scene(
    movable: usize,
    n_doors: usize,
    points: usize,
    frames: usize,
    seed: u64,
) -> SceneConfig {
    let prefix = (frames / 6).max(2);
    let mut parts = vec![PartConfig {
        point_count: points * 2,
        box_min: [-0.3, -0.3, 0.0],
        box_max: [0.3, 0.3, 0.3],
        joint: None,
        schedule: vec![],
    }];
    let denom = (movable - 1).max(1) as f64;
    // doors at maximally separated ring slots: two merged doors cost more
    // k-means inertia than one stray track, so strays cannot steal a centroid
    let door_slots: Vec<usize> = (0..n_doors).map(|j| j * movable / n_doors.max(1)).collect();
    let mut drawer_rank = 0usize;
    for i in 0..movable {
        let phi =
            2.0 * std::f64::consts::PI * i as f64 / movable as f64 + 0.37 * seed as f64;
        let (c, s) = (phi.cos(), phi.sin());
        let cx = 1.5 * c;
        let cy = 1.5 * s;
        let cz = 0.45 + 0.25 * (i % 3) as f64;
        let (joint, theta_end) = if !door_slots.contains(&i) {
            let alpha = (-40.0 + 80.0 * i as f64 / denom).to_radians();
            let gamma = 0.45 * ((i % 3) as f64 - 1.0);
            let (gc, gs) = ((phi + gamma).cos(), (phi + gamma).sin());
            let dir = Vector3::new(alpha.cos() * gc, alpha.cos() * gs, alpha.sin());
            drawer_rank += 1;
            // travel long enough that a straight chord's least-squares circle
            // has a swept angle under the revolute/prismatic tie-break
            (JointSpec::prismatic(dir), 1.0 + 0.08 * (drawer_rank - 1) as f64)
        } else {
            let hx = cx - 0.5 * c;
            let hy = cy - 0.5 * s;
            let tilt = 18f64.to_radians();
            let axis = Vector3::new(-tilt.sin() * c, -tilt.sin() * s, tilt.cos());
            (
                JointSpec::revolute(axis, Vector3::new(hx, hy, 0.0)),
                (1.8 + 0.15 * i as f64) * if i % 2 == 0 { 1.0 } else { -1.0 },
            )
        };
        parts.push(PartConfig {
            point_count: points,
            box_min: [cx - 0.1, cy - 0.1, cz - 0.1],
            box_max: [cx + 0.1, cy + 0.1, cz + 0.1],
            joint: Some(joint),
            schedule: vec![ScheduleWindow {
                start_frame: prefix,
                end_frame: frames,
                theta_start: 0.0,
                theta_end,
            }],
        });
    }
    SceneConfig { parts, num_frames: frames, static_prefix: prefix, seed }
}

/// Scene whose movable geometry keeps every sampled point well away from
/// the rotation axes, so each clean track's class is unambiguous.
fn classification_scene(seed: u64) -> SceneConfig {
    let frames = 40;
    SceneConfig {
        parts: vec![
            PartConfig {
                point_count: 25,
                box_min: [-0.6, -0.1, 0.0],
                box_max: [-0.5, 0.1, 1.0],
                joint: None,
                schedule: vec![],
            },
            // door leaf offset 0.1 m from its hinge: swept chords stay large
            PartConfig {
                point_count: 25,
                box_min: [-0.35, -0.02, 0.05],
                box_max: [0.45, 0.02, 0.95],
                joint: Some(JointSpec::revolute(
                    Vector3::new(0.0, 0.0, 1.0),
                    Vector3::new(-0.45, 0.0, 0.0),
                )),
                schedule: vec![ScheduleWindow {
                    start_frame: frames / 5,
                    end_frame: frames,
                    theta_start: 0.0,
                    theta_end: 1.2,
                }],
            },
            PartConfig {
                point_count: 25,
                box_min: [-0.35, 0.1, 1.05],
                box_max: [0.35, 0.5, 1.3],
                joint: Some(JointSpec::prismatic(Vector3::new(0.0, 1.0, 0.0))),
                schedule: vec![ScheduleWindow {
                    start_frame: frames / 5,
                    end_frame: frames,
                    theta_start: 0.0,
                    theta_end: 0.4,
                }],
            },
        ],
        num_frames: frames,
        static_prefix: frames / 5,
        seed,
    }
}

#[test]
fn criterion_3_classification_suite() {
    let t0 = Instant::now();
    // the static test compares the max displacement against eps_s; i.i.d.
    // noise at sigma = 0.3% puts that max near 1.3% of scale, so the
    // threshold must sit above the noise floor
    let th = AnalysisThresholds { eps_s: 0.025, ..Default::default() };
    let mut clean_total = 0usize;
    let mut clean_correct = 0usize;
    let mut walk_total = 0usize;
    let mut walk_noise = 0usize;
    for seed in 0..20u64 {
        let scene = classification_scene(seed);
        let (clean, gt) = synth_generate(&scene).unwrap();
        // σ = 0.3% of scene scale plus 15% random-walk replacements
        let (ts, outliers) = add_noise_detailed(&clean, 0.003, 0.15, seed ^ 0xA5A5);
        for (i, tr) in ts.tracks.iter().enumerate() {
            let m = analyze_track(tr, ts.canonical_frame, &th, ts.scene_scale, seed).unwrap();
            if outliers[i] {
                walk_total += 1;
                if m.class == MotionClass::Noise {
                    walk_noise += 1;
                }
            } else {
                clean_total += 1;
                let want = match gt.labels[i] {
                    0 => MotionClass::Static,
                    2 => MotionClass::Prismatic,
                    _ => MotionClass::Revolute,
                };
                if m.class == want {
                    clean_correct += 1;
                }
            }
        }
    }
    let clean_frac = clean_correct as f64 / clean_total as f64;
    let walk_frac = walk_noise as f64 / walk_total as f64;
    let elapsed = t0.elapsed().as_secs_f64();
    verdict(
        "3 (classification suite)",
        clean_frac == 1.0 && walk_frac >= 0.95 && elapsed < 120.0,
        format!(
            "clean {clean_correct}/{clean_total} (=100%), \
             walks {walk_noise}/{walk_total} = {:.1}% (≥95%), {elapsed:.1}s (<2min)",
            100.0 * walk_frac
        ),
    );
}

fn gt_label_map(ts: &TrackSet, gt: &GroundTruth) -> HashMap<u64, usize> {
    ts.tracks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id, gt.labels[i]))
        .collect()
}

#[test]
fn criterion_4_clustering_recovery() {
    let t0 = Instant::now();
    let th = AnalysisThresholds::default();
    let filter = FilterConfig::default();
    let mut clean_min = 1.0f64;
    let mut noisy_min = 1.0f64;
    for seed in 0..20u64 {
        // 2..=9 movable parts, cycling drawer/door mixes
        let movable = 2 + (seed as usize) % 8;
        let n_doors = [0usize, 2, 3][(seed as usize / 4) % 3].min(movable - 1);
        let scene = ring_scene(movable, n_doors, 15, 30, seed);
        let (clean, gt) = synth_generate(&scene).unwrap();
        let motions = analyze_all(&clean, &th, seed).unwrap();
        let (kp, kr) = (movable - n_doors, n_doors);
        let res = cluster_tracks(
            &clean.tracks, &motions, kp, kr, &filter, th.eps_s, clean.scene_scale, seed,
        )
        .unwrap();
        clean_min = clean_min.min(cluster_purity(&res, &gt_label_map(&clean, &gt)));

        let (noisy, outliers) =
            add_noise_detailed(&clean, 0.005, 0.10, seed ^ 0x0157);
        // sigma = 0.5% pushes the max-displacement noise floor to ~3% of
        // scale, so the static gate must clear it; line/circle rms gates
        // widen to ~4 sigma so genuine fits are not rejected, with the
        // circle gate kept tighter so random-walk blobs fail it
        let th_n = AnalysisThresholds {
            eps_s: 0.04,
            eps_l: 0.02,
            eps_c: 0.015,
            downsample_target: 40,
            ..Default::default()
        };
        let motions_n = analyze_all(&noisy, &th_n, seed).unwrap();
        let res_n = cluster_tracks(
            &noisy.tracks, &motions_n, kp, kr, &filter, th_n.eps_s, noisy.scene_scale, seed,
        )
        .unwrap();
        // purity over genuine tracks only; injected walks have no part label
        let map: HashMap<u64, usize> = noisy
            .tracks
            .iter()
            .enumerate()
            .filter(|(i, _)| !outliers[*i])
            .map(|(i, t)| (t.id, gt.labels[i]))
            .collect();
        noisy_min = noisy_min.min(cluster_purity(&res_n, &map));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    verdict(
        "4 (clustering recovery)",
        clean_min == 1.0 && noisy_min >= 0.95 && elapsed < 300.0,
        format!(
            "clean min purity {clean_min:.4} (=1.0), noisy min purity {noisy_min:.4} (≥0.95), \
             {elapsed:.1}s (<5min)"
        ),
    );
}

#[test]
fn criterion_5_gradient_verification() {
    let t0 = Instant::now();
    let scene = scenes::cabinet(1, 1, 8, 24, 5);
    let (ts, _) = synth_generate(&scene).unwrap();
    let th = AnalysisThresholds::default();
    let motions = analyze_all(&ts, &th, 5).unwrap();
    let res = cluster_tracks(
        &ts.tracks, &motions, 1, 1, &FilterConfig::default(), th.eps_s, ts.scene_scale, 5,
    )
    .unwrap();
    let mut cfg = TrainConfig::default();
    cfg.seed = 5;
    cfg.pretrain_steps = 100;
    let field = init_from_motion(&res.clusters, &ts, &motions, &cfg).unwrap();
    let batch: Vec<(usize, usize)> = (0..8).map(|i| (i * 3, 4 + i * 2)).collect();
    let pairs: Vec<(usize, usize, usize)> = (0..8).map(|i| (i * 3, 3 + i, 10 + i)).collect();
    let rep = grad_check(&field, &ts, &batch, &pairs, 1e-5, 5).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    verdict(
        "5 (gradient verification)",
        rep.max_rel_error <= 1e-4 && elapsed < 120.0,
        format!(
            "max relative error {:.2e} (≤1e-4) over {} blocks, {elapsed:.1}s (<2min)",
            rep.max_rel_error,
            rep.per_block.len()
        ),
    );
}

/// Single-movable-part scene with the movable box far from the static
/// base, so a sharp Gaussian part-center plus a constant static logit is
/// an exactly one-hot assignment.
fn separated_scene(kind: JointKind, seed: u64) -> SceneConfig {
    let frames = 25;
    let joint = match kind {
        JointKind::Revolute => JointSpec::revolute(
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(-0.3, 0.0, 0.0),
        ),
        JointKind::Prismatic => JointSpec::prismatic(Vector3::new(0.0, 1.0, 0.0)),
    };
    let magnitude = match kind {
        JointKind::Revolute => 1.0,
        JointKind::Prismatic => 0.5,
    };
    SceneConfig {
        parts: vec![
            PartConfig {
                point_count: 20,
                box_min: [2.8, -0.2, 0.3],
                box_max: [3.2, 0.2, 0.7],
                joint: None,
                schedule: vec![],
            },
            PartConfig {
                point_count: 20,
                box_min: [-0.2, -0.2, 0.3],
                box_max: [0.2, 0.2, 0.7],
                joint: Some(joint),
                schedule: vec![ScheduleWindow {
                    start_frame: frames / 5,
                    end_frame: frames,
                    theta_start: 0.0,
                    theta_end: magnitude,
                }],
            },
        ],
        num_frames: frames,
        static_prefix: frames / 5,
        seed,
    }
}

/// Field that encodes the generator's articulation exactly: axes and
/// origins copied from the spec, a sharp part center inside the movable
/// box, a constant static logit between the two parts' score ranges, and
/// a state net whose final layer is solved by least squares to
/// interpolate the true schedule at every frame time.
fn exact_field(ts: &TrackSet, gt: &GroundTruth) -> DeformationField {
    use artic_core::field::{
        B_AXIS_DIR, B_AXIS_ORIGIN, B_CENTER_LOGLAM, B_CENTER_P, B_GRID, B_LOGIT_NET,
        B_STATE_NETS,
    };
    let spec = &gt.joints[0];
    let (lo, hi) = ts.bounding_box_at(ts.canonical_frame);
    let config = FieldConfig::for_bbox(Vector3::from(lo), Vector3::from(hi));
    let mut field = DeformationField::new(config.clone(), vec![spec.kind], 6).unwrap();
    field.blocks[B_AXIS_DIR] = vec![spec.axis_dir.x, spec.axis_dir.y, spec.axis_dir.z];
    field.blocks[B_AXIS_ORIGIN] =
        vec![spec.axis_origin.x, spec.axis_origin.y, spec.axis_origin.z];
    field.blocks[B_CENTER_P] = vec![0.0, 0.0, 0.5]; // movable box center
    field.blocks[B_CENTER_LOGLAM] = vec![0.15f64.ln(); 3];
    for v in field.blocks[B_GRID].iter_mut() {
        *v = 0.0;
    }
    for v in field.blocks[B_LOGIT_NET].iter_mut() {
        *v = 0.0;
    }
    let last = field.blocks[B_LOGIT_NET].len() - 1;
    field.blocks[B_LOGIT_NET][last] = -45.0;

    // final-layer least squares: tanh features of the (fixed random)
    // hidden layer interpolate the schedule over all frame times
    let h = config.hidden;
    let input = 2 * config.fourier_bands + 1;
    let frames = ts.num_frames;
    let net = field.blocks[B_STATE_NETS].clone();
    let (w1, rest) = net.split_at(h * input);
    let (b1, _) = rest.split_at(h);
    let mut a = nalgebra::DMatrix::<f64>::zeros(frames, h + 1);
    let mut y = nalgebra::DVector::<f64>::zeros(frames);
    for f in 0..frames {
        let t = f as f64 / (frames - 1) as f64;
        let e = artic_core::field::fourier_embed(config.fourier_bands, t);
        for i in 0..h {
            let mut z = b1[i];
            for j in 0..input {
                z += w1[i * input + j] * e[j];
            }
            a[(f, i)] = z.tanh();
        }
        a[(f, h)] = 1.0;
        y[f] = gt.thetas[0][f];
    }
    let sol = a.svd(true, true).solve(&y, 1e-14).unwrap();
    let dst = &mut field.blocks[B_STATE_NETS];
    for i in 0..h {
        dst[h * input + h + i] = sol[i];
    }
    dst[h * input + 2 * h] = sol[h];
    field
}

#[test]
fn criterion_6_loss_at_truth() {
    let mut worst_c2o = 0.0f64;
    let mut worst_o2o = 0.0f64;
    for kind in [JointKind::Revolute, JointKind::Prismatic] {
        let (ts, gt) = synth_generate(&separated_scene(kind, 3)).unwrap();
        let field = exact_field(&ts, &gt);
        let batch: Vec<(usize, usize)> = (0..ts.tracks.len())
            .flat_map(|i| (0..ts.num_frames).step_by(3).map(move |t| (i, t)))
            .collect();
        let (lc, _) = loss_c2o(&field, &ts, &batch).unwrap();
        let pairs: Vec<(usize, usize, usize)> = (0..ts.tracks.len())
            .map(|i| (i, 2, ts.num_frames - 1))
            .collect();
        let (lo, _) = loss_o2o(&field, &ts, &pairs, true).unwrap();
        worst_c2o = worst_c2o.max(lc);
        worst_o2o = worst_o2o.max(lo);
    }
    verdict(
        "6 (loss at truth)",
        worst_c2o <= 1e-12 && worst_o2o <= 1e-10,
        format!("L_c2o {worst_c2o:.2e} (≤1e-12), L_o2o {worst_o2o:.2e} (≤1e-10)"),
    );
}

struct SuiteScene {
    name: &'static str,
    scene: fn(u64) -> SceneConfig,
    k_prismatic: usize,
    k_revolute: usize,
}

fn suite() -> Vec<SuiteScene> {
    vec![
        SuiteScene { name: "door", scene: |s| scenes::door(15, 30, s), k_prismatic: 0, k_revolute: 1 },
        SuiteScene { name: "drawer", scene: |s| scenes::drawer(15, 30, s), k_prismatic: 1, k_revolute: 0 },
        SuiteScene { name: "cab11", scene: |s| scenes::cabinet(1, 1, 15, 30, s), k_prismatic: 1, k_revolute: 1 },
        SuiteScene { name: "cab20", scene: |s| scenes::cabinet(2, 0, 15, 30, s), k_prismatic: 2, k_revolute: 0 },
        SuiteScene { name: "cab21", scene: |s| scenes::cabinet(2, 1, 15, 30, s), k_prismatic: 2, k_revolute: 1 },
        SuiteScene { name: "cab12", scene: |s| scenes::cabinet(1, 2, 15, 30, s), k_prismatic: 1, k_revolute: 2 },
    ]
}

fn fit_and_eval(
    ts: &TrackSet,
    gt: &GroundTruth,
    kp: usize,
    kr: usize,
    seed: u64,
    steps: usize,
    th: &AnalysisThresholds,
) -> artic_core::eval::EvalReport {
    let th = *th;
    let motions = analyze_all(ts, &th, seed).unwrap();
    let res = cluster_tracks(
        &ts.tracks, &motions, kp, kr, &FilterConfig::default(), th.eps_s, ts.scene_scale, seed,
    )
    .unwrap();
    let purity = cluster_purity(&res, &gt_label_map(ts, gt));
    let mut cfg = TrainConfig::default();
    cfg.seed = seed;
    cfg.steps_init = steps;
    cfg.batch_tracks = 64;
    cfg.pretrain_steps = 800;
    let mut field = init_from_motion(&res.clusters, ts, &motions, &cfg).unwrap();
    train_field(&mut field, ts, &cfg).unwrap();
    evaluate_field(&field, ts, gt, &motions, purity).unwrap()
}

#[test]
fn criterion_7_end_to_end_recovery() {
    let t0 = Instant::now();
    let mut clean_axis = Vec::new();
    let mut clean_pos = Vec::new();
    let mut clean_state = Vec::new();
    let mut noisy_axis = Vec::new();
    let mut noisy_pos = Vec::new();
    let mut max_scene_secs = 0.0f64;
    for sc in suite() {
        let ts0 = Instant::now();
        for seed in 0..5u64 {
            let (ts, gt) = synth_generate(&(sc.scene)(seed)).unwrap();
            let rep = fit_and_eval(&ts, &gt, sc.k_prismatic, sc.k_revolute, seed, 2500, &AnalysisThresholds::default());
            clean_axis.push(rep.mean_axis_error_deg);
            if let Some(p) = rep.mean_position_error_cm {
                clean_pos.push(p);
            }
            clean_state.push(rep.mean_state_error);
        }
        // one noisy run per scene keeps the suite inside its runtime budget
        let (clean, gt) = synth_generate(&(sc.scene)(100)).unwrap();
        let (noisy, _) = add_noise_detailed(&clean, 0.005, 0.10, 0xBAD);
        let th_n = AnalysisThresholds { eps_s: 0.04, ..Default::default() };
        let rep = fit_and_eval(&noisy, &gt, sc.k_prismatic, sc.k_revolute, 100, 2500, &th_n);
        noisy_axis.push(rep.mean_axis_error_deg);
        if let Some(p) = rep.mean_position_error_cm {
            noisy_pos.push(p);
        }
        max_scene_secs = max_scene_secs.max(ts0.elapsed().as_secs_f64());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let (ca, cp, cs) = (mean(&clean_axis), mean(&clean_pos), mean(&clean_state));
    let (na, np) = (mean(&noisy_axis), mean(&noisy_pos));
    let pass = ca <= 0.1 && cp <= 0.1 && cs <= 0.2 && na <= 1.0 && np <= 1.0;
    verdict(
        "7 (end-to-end recovery)",
        pass,
        format!(
            "clean: axis {ca:.4}° (≤0.1), position {cp:.4} cm (≤0.1), state {cs:.4} (≤0.2); \
             noisy: axis {na:.4}° (≤1.0), position {np:.4} cm (≤1.0); \
             worst scene {max_scene_secs:.0}s, total {:.0}s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_8_ablation_ordering() {
    let seed = 2u64;
    let scene = scenes::cabinet(2, 1, 12, 24, seed);
    let (ts, gt) = synth_generate(&scene).unwrap();
    let th = AnalysisThresholds::default();
    let motions = analyze_all(&ts, &th, seed).unwrap();
    let res = cluster_tracks(
        &ts.tracks, &motions, 2, 1, &FilterConfig::default(), th.eps_s, ts.scene_scale, seed,
    )
    .unwrap();
    let purity = cluster_purity(&res, &gt_label_map(&ts, &gt));

    let run = |flags: AblationFlags| -> (f64, f64) {
        let mut cfg = TrainConfig::default();
        cfg.seed = seed;
        cfg.steps_init = 1200;
        cfg.batch_tracks = 64;
        cfg.pretrain_steps = 500;
        cfg.flags = flags;
        let mut field = init_from_motion(&res.clusters, &ts, &motions, &cfg).unwrap();
        train_field(&mut field, &ts, &cfg).unwrap();
        let rep = evaluate_field(&field, &ts, &gt, &motions, purity).unwrap();
        (rep.mean_axis_error_deg, rep.mean_state_error)
    };

    let full = run(AblationFlags::default());
    let wo_axis = run(AblationFlags { no_axis_init: true, ..Default::default() });
    let wo_deform = run(AblationFlags { no_deform_init: true, ..Default::default() });
    let wo_center = run(AblationFlags { no_center_init: true, ..Default::default() });
    let wo_prior = run(AblationFlags {
        no_axis_init: true,
        no_center_init: true,
        no_deform_init: true,
        ..Default::default()
    });
    let wo_o2o = run(AblationFlags { no_o2o: true, ..Default::default() });
    let wo_c2o = run(AblationFlags { no_c2o: true, ..Default::default() });

    let order_ok = full.0 < wo_axis.0
        && wo_axis.0 < wo_deform.0
        && wo_deform.0 < wo_center.0
        && wo_center.0 <= wo_prior.0;
    let loss_ok = wo_o2o.0 > wo_c2o.0;
    verdict(
        "8 (ablation ordering)",
        order_ok && loss_ok,
        format!(
            "axis° full {:.3} < wo_axis {:.3} < wo_deform {:.3} < wo_center {:.3} ≤ wo_prior {:.3}; \
             wo_o2o {:.3} > wo_c2o {:.3}",
            full.0, wo_axis.0, wo_deform.0, wo_center.0, wo_prior.0, wo_o2o.0, wo_c2o.0
        ),
    );
}

#[test]
fn criterion_9_determinism() {
    use artic_core::pipeline::{history_csv, run_pipeline, InputSource, PipelineConfig};
    let scene = scenes::cabinet(1, 1, 10, 20, 9);
    let mut cfg = PipelineConfig {
        input: InputSource::Scene { scene, noise_sigma: 0.002, outlier_frac: 0.05 },
        thresholds: AnalysisThresholds::default(),
        filter: FilterConfig::default(),
        k_prismatic: 1,
        k_revolute: 1,
        train: TrainConfig::default(),
        out_dir: None,
    };
    cfg.train.steps_init = 300;
    cfg.train.pretrain_steps = 200;
    cfg.train.seed = 9;
    let a = run_pipeline(&cfg).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    let ja = a.to_json().unwrap();
    let jb = b.to_json().unwrap();
    // loss histories are not part of the report; compare via a rerun of the
    // training stage embedded in the pipeline artifacts instead
    let same_reports = ja == jb;
    let hist_same = {
        let th = AnalysisThresholds::default();
        let (ts, _gt) = synth_generate(&scenes::door(8, 20, 9)).unwrap();
        let motions = analyze_all(&ts, &th, 9).unwrap();
        let res = cluster_tracks(
            &ts.tracks, &motions, 0, 1, &FilterConfig::default(), th.eps_s, ts.scene_scale, 9,
        )
        .unwrap();
        let mut tc = TrainConfig::default();
        tc.seed = 9;
        tc.steps_init = 200;
        tc.pretrain_steps = 100;
        let mut f1 = init_from_motion(&res.clusters, &ts, &motions, &tc).unwrap();
        let r1 = train_field(&mut f1, &ts, &tc).unwrap();
        let mut f2 = init_from_motion(&res.clusters, &ts, &motions, &tc).unwrap();
        let r2 = train_field(&mut f2, &ts, &tc).unwrap();
        history_csv(&r1.history) == history_csv(&r2.history)
            && f1.to_json().unwrap() == f2.to_json().unwrap()
    };
    verdict(
        "9 (determinism)",
        same_reports && hist_same,
        format!("reports byte-identical {same_reports}, histories and checkpoints byte-identical {hist_same}"),
    );
}

#[test]
fn criterion_10_round_trip() {
    // one-hot forward/inverse round trip
    let spec = JointSpec::revolute(Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.4, -0.2, 0.0));
    let bbox = (Vector3::new(-2.0, -2.0, -2.0), Vector3::new(2.0, 2.0, 2.0));
    let config = FieldConfig::for_bbox(bbox.0, bbox.1);
    let mut field = DeformationField::new(config, vec![spec.kind], 77).unwrap();
    field.blocks[artic_core::field::B_AXIS_DIR] = vec![0.0, 0.0, 1.0];
    field.blocks[artic_core::field::B_AXIS_ORIGIN] = vec![0.4, -0.2, 0.0];
    field.blocks[artic_core::field::B_CENTER_P] = vec![1.2, 0.3, 0.1];
    for v in field.blocks[artic_core::field::B_LOGIT_NET].iter_mut() {
        *v = 0.0;
    }
    // push the static logit far down so the movable part wins outright
    let b2 = field.blocks[artic_core::field::B_LOGIT_NET].len() - 1;
    field.blocks[artic_core::field::B_LOGIT_NET][b2] = -60.0;
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x = Vector3::new(
            1.2 + rng.gen_range(-0.3..0.3),
            0.3 + rng.gen_range(-0.3..0.3),
            0.1 + rng.gen_range(-0.3..0.3),
        );
        let t = rng.gen_range(0.0..1.0);
        let (y, _) = field.forward(x, None, t).unwrap();
        let back = field.inverse(y, t).unwrap();
        worst = worst.max((back - x).norm());
    }
    let round_ok = worst <= 1e-6;

    // checkpoint save/load bit-exact
    let dir = std::env::temp_dir().join(format!("artic-acc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let ck = dir.join("field.json");
    field.save(&ck).unwrap();
    let loaded = DeformationField::load(&ck).unwrap();
    let ck_ok = loaded.to_json().unwrap() == field.to_json().unwrap();

    // track file save/load bit-exact
    let (ts, _) = synth_generate(&scenes::door(10, 20, 1)).unwrap();
    let tp = dir.join("tracks.bin");
    save_tracks(&ts, &tp).unwrap();
    let ts2 = load_tracks(&tp).unwrap();
    let tracks_ok = ts == ts2;
    std::fs::remove_dir_all(&dir).ok();

    verdict(
        "10 (round trip)",
        round_ok && ck_ok && tracks_ok,
        format!(
            "forward/inverse worst {worst:.2e} (≤1e-6), checkpoint bit-exact {ck_ok}, \
             tracks bit-exact {tracks_ok}"
        ),
    );
}
