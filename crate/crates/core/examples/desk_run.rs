//! End-to-end run on the synthetic scene with a printed CMD/KS history.
//!
//! `cargo run --release --example desk_run -- <W> <B> <iterations> <single|multi> <augment 0|1> <seed> <trajectories> [checkpoint]`
//!
//! `DROPOUT`, `LR_G`, `LR_D` and `PATCH` override the model defaults.

use std::time::Instant;

use rssgan::cgan::{train, GanBundle, GanConfig, GanMode};
use rssgan::dataset::{build_dataset, DatasetConfig};
use rssgan::metrics::{evaluate, CmdEvaluator, EvaluateConfig};
use rssgan::scene::{build_scene, compute_power_map, SceneConfig};
use rssgan::trajectories::{generate_trajectories, TrajectoryConfig};

fn main() {
    let a: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| a.get(i).cloned().unwrap_or_else(|| d.to_string());
    let w: usize = arg(0, "64").parse().unwrap();
    let b: usize = arg(1, "32").parse().unwrap();
    let iters: u64 = arg(2, "1000").parse().unwrap();
    let multi = arg(3, "single") == "multi";
    let augment = arg(4, "1") == "1";
    let seed: u64 = arg(5, "0").parse().unwrap();
    let n_traj: usize = arg(6, "200").parse().unwrap();

    let t0 = Instant::now();
    let scene = build_scene(&SceneConfig::default(), seed).unwrap();
    let maps: Vec<_> = (0..scene.n_gnbs())
        .map(|g| compute_power_map(&scene, g, 2.0, 30.0, seed).unwrap())
        .collect();
    let trajs = generate_trajectories(&scene, &TrajectoryConfig::default(), n_traj, seed).unwrap();
    let ds = build_dataset(
        &scene,
        &maps,
        &trajs,
        &DatasetConfig {
            window_w: w,
            stride: w / 2,
            augment,
            gnb_ids: if multi { vec![] } else { vec![0] },
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    println!("data ready in {:.1}s: {:?}", t0.elapsed().as_secs_f64(), ds.summary());
    let cfg = GanConfig {
        window_w: w,
        batch_size: b,
        n_iterations: iters,
        n_classes: ds.n_classes(),
        mode: if multi { GanMode::MultiGnb } else { GanMode::SingleGnb },
        eval_interval: (iters / 10).max(1),
        ..Default::default()
    };
    let env = |k: &str| std::env::var(k).ok().map(|v| v.parse::<f64>().unwrap());
    let cfg = GanConfig {
        dropout: env("DROPOUT").unwrap_or(cfg.dropout),
        lr_g: env("LR_G").unwrap_or(cfg.lr_g),
        lr_d: env("LR_D").unwrap_or(cfg.lr_d),
        patch_size: env("PATCH").map_or(cfg.patch_size, |v| v as usize),
        ..cfg
    };
    let mut bundle = GanBundle::new(cfg, seed).unwrap();
    let mut hook = CmdEvaluator {
        dataset: &ds,
        seed: 1,
        max_rows: Some(256),
    };
    let t1 = Instant::now();
    train(&mut bundle, &ds, Some(&mut hook)).unwrap();
    for h in &bundle.history {
        let e = h.eval.as_ref().unwrap();
        println!(
            "it {:6} d_ls {:.4} d_ce {:.4} g_ls {:.4} g_ce {:.4} cmd {:.4} ks {:?}",
            h.iteration,
            h.losses.d_ls,
            h.losses.d_ce,
            h.losses.g_ls,
            h.losses.g_ce,
            e.cmd_mean,
            e.ks_per_gnb
                .iter()
                .map(|x| (x.1 * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        );
    }
    println!("trained in {:.1}s", t1.elapsed().as_secs_f64());
    if let Some(path) = a.get(7) {
        rssgan::cgan::checkpoint::save_checkpoint(std::path::Path::new(path), &bundle).unwrap();
    }
    let rep = evaluate(&bundle, &ds, &EvaluateConfig::default()).unwrap();
    for g in &rep.per_gnb {
        println!(
            "gnb {} cmd {:.4} ks {:.4} n_real {:.3} n_gen {:.3}",
            g.label, g.cmd, g.ks_distance, g.trend_real.exponent, g.trend_gen.exponent
        );
    }
}
