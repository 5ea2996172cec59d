use artic_core::cluster::{cluster_purity, cluster_tracks, FilterConfig};
use artic_core::geom::JointSpec;
use artic_core::motion::AnalysisThresholds;
use artic_core::pipeline::analyze_all;
use artic_core::tracks::{add_noise_detailed, synth_generate, PartConfig, SceneConfig, ScheduleWindow};
use nalgebra::Vector3;
use std::collections::HashMap;

fn radial_scene(movable: usize, n_doors: usize, points: usize, frames: usize, seed: u64) -> SceneConfig {
    let prefix = (frames / 6).max(2);
    let span = frames - prefix;
    let window = (span / movable).max(2);
    let mut parts = vec![PartConfig {
        point_count: points * 2,
        box_min: [-0.3, -0.3, 0.0],
        box_max: [0.3, 0.3, 0.3],
        joint: None,
        schedule: vec![],
    }];
    let denom = (movable - 1).max(1) as f64;
    let door_slots: Vec<usize> = (0..n_doors).map(|j| j * movable / n_doors.max(1)).collect();
    let mut drawer_rank = 0usize;
    for i in 0..movable {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / movable as f64 + 0.37 * seed as f64;
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
        let start = prefix;
        parts.push(PartConfig {
            point_count: points,
            box_min: [cx - 0.1, cy - 0.1, cz - 0.1],
            box_max: [cx + 0.1, cy + 0.1, cz + 0.1],
            joint: Some(joint),
            schedule: vec![ScheduleWindow {
                start_frame: start,
                end_frame: frames,
                theta_start: 0.0,
                theta_end,
            }],
        });
    }
    SceneConfig { parts, num_frames: frames, static_prefix: prefix, seed }
}

fn main() {
    for seed in 0..20u64 {
        let movable = 2 + (seed as usize) % 8;
        let n_doors = [0usize, 2, 3][(seed as usize / 4) % 3].min(movable - 1);
        let kp = movable - n_doors;
        let scene = radial_scene(movable, n_doors, 15, 30, seed);
        let (clean, gt) = synth_generate(&scene).unwrap();
        let th = AnalysisThresholds::default();
        let motions = analyze_all(&clean, &th, seed).unwrap();
        let res = cluster_tracks(&clean.tracks, &motions, kp, n_doors, &FilterConfig::default(), th.eps_s, clean.scene_scale, seed).unwrap();
        let map: HashMap<u64, usize> = clean.tracks.iter().enumerate().map(|(i, t)| (t.id, gt.labels[i])).collect();
        let p = cluster_purity(&res, &map);

        let (noisy, outl) = add_noise_detailed(&clean, 0.005, 0.10, seed ^ 0x0157);
        let th_n = AnalysisThresholds { eps_s: 0.04, eps_l: 0.02, eps_c: 0.015, downsample_target: 40, ..Default::default() };
        let motions_n = analyze_all(&noisy, &th_n, seed).unwrap();
        let res_n = cluster_tracks(&noisy.tracks, &motions_n, kp, n_doors, &FilterConfig::default(), th_n.eps_s, noisy.scene_scale, seed).unwrap();
        let map_n: HashMap<u64, usize> = noisy.tracks.iter().enumerate().filter(|(i, _)| !outl[*i]).map(|(i, t)| (t.id, gt.labels[i])).collect();
        let pn = cluster_purity(&res_n, &map_n);
        println!("seed {seed}: m {movable} doors {n_doors} clean {p:.4} noisy {pn:.4}");
        if pn < 0.95 {
            for (ci, cl) in res_n.clusters.iter().enumerate() {
                let mut comp: HashMap<usize, usize> = HashMap::new();
                let mut walks = 0usize;
                for (tid, c) in &res_n.assignments {
                    if *c == ci {
                        match map_n.get(tid) {
                            Some(&l) => *comp.entry(l).or_default() += 1,
                            None => walks += 1,
                        }
                    }
                }
                let mut v: Vec<_> = comp.into_iter().collect();
                v.sort();
                println!("  noisy cluster {ci} {:?}: {v:?} walks {walks}", cl.kind);
            }
            let mut cbl: HashMap<(usize, String), usize> = HashMap::new();
            for (i, m) in motions_n.iter().enumerate() {
                let lbl = if outl[i] { 99 } else { gt.labels[i] };
                *cbl.entry((lbl, format!("{:?}", m.class))).or_default() += 1;
            }
            let mut v: Vec<_> = cbl.into_iter().collect();
            v.sort();
            println!("  noisy classes: {v:?}");
            if false {
                let (mut pf, _rf2) = artic_core::cluster::build_features(&noisy.tracks, &motions_n, th_n.eps_s, noisy.scene_scale);
                let mut rows: Vec<Vec<f64>> = pf.iter().map(|f| f.values.clone()).collect();
                artic_core::cluster::standardize(&mut rows);
                for (f, r) in pf.iter_mut().zip(rows.iter()) {
                    let lbl = map_n.get(&f.track_id).copied().unwrap_or(99);
                    let fm: Vec<String> = r.iter().map(|x| format!("{x:6.2}")).collect();
                    println!("    part {lbl} id {:3}: [{}]", f.track_id, fm.join(" "));
                }
            }
        }
        if false {
            for (ci, cl) in res.clusters.iter().enumerate() {
                let mut comp: HashMap<usize, usize> = HashMap::new();
                for (tid, c) in &res.assignments {
                    if *c == ci {
                        if let Some(&l) = map.get(tid) { *comp.entry(l).or_default() += 1; }
                    }
                }
                let mut v: Vec<_> = comp.into_iter().collect();
                v.sort();
                println!("  clean cluster {ci} {:?}: {v:?}", cl.kind);
            }
            let mut class_by_label: HashMap<(usize, String), usize> = HashMap::new();
            for (i, m) in motions.iter().enumerate() {
                *class_by_label.entry((gt.labels[i], format!("{:?}", m.class))).or_default() += 1;
            }
            let mut v: Vec<_> = class_by_label.into_iter().collect();
            v.sort();
            println!("  classes: {v:?}");
        }
    }
}
