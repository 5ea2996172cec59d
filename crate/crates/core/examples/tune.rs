use std::time::Instant;

use artic_core::cluster::{cluster_tracks, FilterConfig};
use artic_core::eval::evaluate_field;
use artic_core::field::FieldConfig;
use artic_core::motion::AnalysisThresholds;
use artic_core::pipeline::analyze_all;
use artic_core::tracks::{scenes, synth_generate};
use artic_core::train::{init_from_motion, train_field, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1500);
    let batch: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(64);
    let levels: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(4);
    let points: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(20);
    let frames: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(30);

    for (name, scene, kp, kr) in [
        ("door", scenes::door(points, frames, 7), 0usize, 1usize),
        ("drawer", scenes::drawer(points, frames, 7), 1, 0),
        ("cab21", scenes::cabinet(2, 1, points, frames, 7), 2, 1),
    ] {
        let t0 = Instant::now();
        let (ts, gt) = synth_generate(&scene).unwrap();
        let th = AnalysisThresholds::default();
        let motions = analyze_all(&ts, &th, 7).unwrap();
        let cl = cluster_tracks(&ts.tracks, &motions, kp, kr, &FilterConfig::default(),
                                th.eps_s, ts.scene_scale, 7).unwrap();
        let mut cfg = TrainConfig::default();
        cfg.steps_init = steps;
        cfg.batch_tracks = batch;
        cfg.pretrain_steps = 800;
        cfg.seed = 7;
        let mut field = init_from_motion(&cl.clusters, &ts, &motions, &cfg).unwrap();
        let all_levels = [8usize, 16, 32, 64];
        field = {
            let mut fc = field.config.clone();
            fc.grid_levels = all_levels[..levels].to_vec();
            let kinds = field.kinds.clone();
            let mut f2 = artic_core::field::DeformationField::new(fc, kinds, 7).unwrap();
            // keep motion-derived blocks, reinit only grid-dependent ones
            for b in [0usize, 1, 2, 3, 4, 8] {
                f2.blocks[b] = field.blocks[b].clone();
            }
            f2
        };
        train_field(&mut field, &ts, &cfg).unwrap();
        let gt_map: std::collections::HashMap<u64, usize> = ts
            .tracks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id, gt.labels[i]))
            .collect();
        let pur = artic_core::cluster::cluster_purity(&cl, &gt_map);
        let rep = evaluate_field(&field, &ts, &gt, &motions, pur).unwrap();
        println!(
            "{name:6} steps={steps} batch={batch} L={levels} pts={points} fr={frames}: axis {:.4} deg, pos {:.4} cm, state {:.4}, {:.1}s",
            rep.mean_axis_error_deg,
            rep.mean_position_error_cm.unwrap_or(f64::NAN),
            rep.mean_state_error,
            t0.elapsed().as_secs_f64()
        );
        for (j, pj) in rep.per_joint.iter().enumerate() {
            println!("  joint {j}: {:?} matched={:?} axis {:.4} pos {:?} state {:.4}",
                     pj.kind, pj.matched_pred, pj.axis_error_deg, pj.position_error_cm, pj.state_error);
        }
    }
}
