use artic_core::cluster::{cluster_purity, cluster_tracks, FilterConfig};
use artic_core::motion::AnalysisThresholds;
use artic_core::pipeline::analyze_all;
use artic_core::tracks::{add_noise_detailed, scenes, synth_generate, GroundTruth, TrackSet};
use artic_core::train::{init_from_motion, train_field, TrainConfig};
use std::collections::HashMap;
use std::time::Instant;

fn fit_and_eval(
    ts: &TrackSet,
    gt: &GroundTruth,
    kp: usize,
    kr: usize,
    seed: u64,
    steps: usize,
    th: &AnalysisThresholds,
) -> artic_core::eval::EvalReport {
    let motions = analyze_all(ts, th, seed).unwrap();
    let res = cluster_tracks(
        &ts.tracks, &motions, kp, kr, &FilterConfig::default(), th.eps_s, ts.scene_scale, seed,
    )
    .unwrap();
    let map: HashMap<u64, usize> = ts
        .tracks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id, gt.labels[i]))
        .collect();
    let purity = cluster_purity(&res, &map);
    let mut cfg = TrainConfig::default();
    cfg.seed = seed;
    cfg.steps_init = steps;
    cfg.batch_tracks = 64;
    cfg.pretrain_steps = 800;
    cfg.grid_levels = vec![8, 16];
    let mut field = init_from_motion(&res.clusters, ts, &motions, &cfg).unwrap();
    train_field(&mut field, ts, &cfg).unwrap();
    artic_core::eval::evaluate_field(&field, ts, gt, &motions, purity).unwrap()
}

fn main() {
    type SceneFn = fn(u64) -> artic_core::tracks::SceneConfig;
    let suite: Vec<(&str, SceneFn, usize, usize)> = vec![
        ("door", (|s| scenes::door(15, 30, s)) as SceneFn, 0, 1),
        ("drawer", |s| scenes::drawer(15, 30, s), 1, 0),
        ("cab11", |s| scenes::cabinet(1, 1, 15, 30, s), 1, 1),
        ("cab20", |s| scenes::cabinet(2, 0, 15, 30, s), 2, 0),
        ("cab21", |s| scenes::cabinet(2, 1, 15, 30, s), 2, 1),
        ("cab12", |s| scenes::cabinet(1, 2, 15, 30, s), 1, 2),
    ];
    for (name, scene, kp, kr) in suite {
        for seed in 0..5u64 {
            let t0 = Instant::now();
            let (ts, gt) = synth_generate(&scene(seed)).unwrap();
            let rep = fit_and_eval(&ts, &gt, kp, kr, seed, 2500, &AnalysisThresholds::default());
            println!(
                "{name} seed {seed}: axis {:.4} pos {:?} state {:.4} {:.1}s",
                rep.mean_axis_error_deg,
                rep.mean_position_error_cm,
                rep.mean_state_error,
                t0.elapsed().as_secs_f64()
            );
        }
        let t0 = Instant::now();
        let (clean, gt) = synth_generate(&scene(100)).unwrap();
        let (noisy, _) = add_noise_detailed(&clean, 0.005, 0.10, 0xBAD);
        let th_n = AnalysisThresholds { eps_s: 0.04, ..Default::default() };
        let rep = fit_and_eval(&noisy, &gt, kp, kr, 100, 2500, &th_n);
        println!(
            "{name} noisy: axis {:.4} pos {:?} state {:.4} {:.1}s",
            rep.mean_axis_error_deg,
            rep.mean_position_error_cm,
            rep.mean_state_error,
            t0.elapsed().as_secs_f64()
        );
    }
}
