mod common;

use common::{small_dataset, tiny_config};
use proptest::prelude::*;
use rssgan::cgan::{train, GanBundle, GanConfig, GanMode};
use rssgan::scene::{build_scene, SceneConfig};
use rssgan::syseval::{
    db_to_lin, handover_stats, select_cells, simulate_links, sinr_trace, write_simulation, SysevalConfig,
};
use rssgan::trajectories::TrajectoryConfig;

fn trained(gnb_ids: Vec<usize>) -> GanBundle {
    let ds = small_dataset(16, gnb_ids, false);
    let n = ds.n_classes();
    let cfg = GanConfig {
        n_iterations: 3,
        n_classes: n,
        mode: if n == 1 { GanMode::SingleGnb } else { GanMode::MultiGnb },
        ..tiny_config()
    };
    let mut b = GanBundle::new(cfg, 1).unwrap();
    train(&mut b, &ds, None).unwrap();
    b
}

fn sim_config() -> SysevalConfig {
    SysevalConfig {
        n_trajectories: 4,
        trajectory: TrajectoryConfig {
            n_steps_min: 100,
            n_steps_max: 140,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn one_cell_never_hands_over_and_sinr_is_snr() {
    let scene = build_scene(&SceneConfig::default(), 5).unwrap();
    let bundle = trained(vec![2]);
    let traces = simulate_links(&scene, &bundle, &sim_config()).unwrap();
    assert_eq!(traces.len(), 4);
    for t in &traces {
        assert_eq!(t.gnb_ids, vec![2]);
        assert!(t.handovers.is_empty());
        assert_eq!(t.sinr_db, t.snr_db);
        for (s, r) in t.snr_db.iter().zip(&t.rss_dbm[0]) {
            assert_eq!(*s, r - sim_config().noise_dbm);
        }
    }
}

#[test]
fn simulated_traces_are_reproducible_and_pairwise_monotone_in_hysteresis() {
    let scene = build_scene(&SceneConfig::default(), 5).unwrap();
    let bundle = trained(vec![]);
    let cfg = sim_config();
    let a = simulate_links(&scene, &bundle, &cfg).unwrap();
    let b = simulate_links(&scene, &bundle, &cfg).unwrap();
    assert_eq!(a, b);
    for t in &a {
        assert_eq!(t.rss_dbm.len(), 3);
        assert!(t.sinr_db.iter().zip(&t.snr_db).all(|(s, n)| s <= n));
        assert!(handover_stats(t, 10.0).count <= handover_stats(t, 0.0).count);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let pair = [t.rss_dbm[i].clone(), t.rss_dbm[j].clone()];
            let counts: Vec<usize> = [0.0, 1.0, 3.0, 6.0, 10.0]
                .iter()
                .map(|&h| select_cells(&pair, h).1.len())
                .collect();
            assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let files = write_simulation(dir.path(), &a, &cfg).unwrap();
    assert_eq!(files.len(), a.len() + 1);
}

#[test]
fn untrained_model_is_refused() {
    let scene = build_scene(&SceneConfig::default(), 5).unwrap();
    let bundle = GanBundle::new(tiny_config(), 0).unwrap();
    assert!(simulate_links(&scene, &bundle, &sim_config()).is_err());
}

#[test]
fn equal_cells_closed_form() {
    let r = -80.0;
    let noise = -94.0;
    let rss = vec![vec![r; 3]; 3];
    let (serving, _) = select_cells(&rss, 3.0);
    let (sinr, _) = sinr_trace(&rss, &serving, noise);
    let expected = r - 10.0 * (2.0 * db_to_lin(r) + db_to_lin(noise)).log10();
    for s in sinr {
        assert!((s - expected).abs() < 1e-12);
    }
}

#[test]
fn three_cells_can_hand_over_more_with_more_hysteresis() {
    // h=1 jumps straight to C; h=3 waits, then stops at B on the way
    let a = vec![0.0; 4];
    let b = vec![-10.0, 1.2, 3.2, 3.2];
    let c = vec![-10.0, 1.5, 3.0, 6.5];
    let rss = vec![a, b, c];
    let (s1, h1) = select_cells(&rss, 1.0);
    let (s3, h3) = select_cells(&rss, 3.0);
    assert_eq!((s1, h1), (vec![0, 2, 2, 2], vec![1]));
    assert_eq!((s3, h3), (vec![0, 0, 1, 2], vec![2, 3]));
}

proptest! {
    #[test]
    fn two_cell_handovers_never_increase_with_hysteresis(
        a in prop::collection::vec(-120.0f64..-60.0, 2..80),
        seed_b in prop::collection::vec(-120.0f64..-60.0, 80),
        h1 in 0.0f64..10.0,
        dh in 0.0f64..10.0,
    ) {
        let b = seed_b[..a.len()].to_vec();
        let rss = vec![a, b];
        let lo = select_cells(&rss, h1).1.len();
        let hi = select_cells(&rss, h1 + dh).1.len();
        prop_assert!(hi <= lo);
    }

    #[test]
    fn sinr_never_exceeds_snr(rss in prop::collection::vec(prop::collection::vec(-130.0f64..-50.0, 20), 1..5), h in 0.0f64..6.0) {
        let (serving, handovers) = select_cells(&rss, h);
        prop_assert_eq!(serving.len(), 20);
        for &k in &handovers {
            prop_assert_ne!(serving[k], serving[k - 1]);
        }
        let (sinr, snr) = sinr_trace(&rss, &serving, -94.0);
        for (s, n) in sinr.iter().zip(&snr) {
            prop_assert!(s <= n);
        }
        if rss.len() == 1 {
            prop_assert!(handovers.is_empty());
            prop_assert_eq!(sinr, snr);
        }
    }
}
