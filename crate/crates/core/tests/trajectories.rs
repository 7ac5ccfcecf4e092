use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rssgan::geometry::Point3;
use rssgan::scene::{build_scene, SceneConfig};
use rssgan::trajectories::{distance_sequence, generate_trajectories, walk_from, Heading, TrajectoryConfig};

#[test]
fn straight_walk_in_an_empty_city() {
    let cfg = SceneConfig {
        n_buildings: 0,
        n_gnbs: 1,
        ..Default::default()
    };
    let scene = build_scene(&cfg, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let t = walk_from(
        &scene,
        Point3::new(0.0, 0.0, 30.0),
        Heading::East,
        10,
        2.0,
        1.0,
        0,
        &mut rng,
    )
    .unwrap();
    assert_eq!(t.len(), 11);
    for (k, p) in t.waypoints.iter().enumerate() {
        assert_eq!((p.x, p.y, p.z), (2.0 * k as f64, 0.0, 30.0));
    }
}

#[test]
fn turn_rate_follows_persistence() {
    let scene = build_scene(&SceneConfig::default(), 0).unwrap();
    let cfg = TrajectoryConfig::default();
    let trajs = generate_trajectories(&scene, &cfg, 1000, 3).unwrap();
    let turns: usize = trajs.iter().map(|t| t.turn_count()).sum();
    let opportunities: usize = trajs.iter().map(|t| t.len() - 2).sum();
    let rate = turns as f64 / opportunities as f64;
    let expected = 1.0 - cfg.p_straight;
    assert!((rate - expected).abs() <= 0.1 * expected, "turn rate {rate}");
}

#[test]
fn hovering_and_pythagoras() {
    let t = rssgan::trajectories::Trajectory {
        id: 0,
        waypoints: vec![Point3::new(100.0, 0.0, 30.0); 5],
        step_m: 2.0,
        height_m: 30.0,
    };
    assert_eq!(distance_sequence(&t, &Point3::new(0.0, 0.0, 30.0)), vec![100.0; 5]);
    let t = rssgan::trajectories::Trajectory {
        waypoints: vec![Point3::new(3.0, 4.0, 30.0)],
        ..t
    };
    assert_eq!(distance_sequence(&t, &Point3::new(0.0, 0.0, 30.0)), vec![5.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn walks_are_regular_and_in_bounds(scene_seed in 0u64..50, seed in any::<u64>()) {
        let scene = build_scene(&SceneConfig::default(), scene_seed).unwrap();
        let cfg = TrajectoryConfig { n_steps_min: 50, n_steps_max: 300, ..Default::default() };
        let trajs = generate_trajectories(&scene, &cfg, 3, seed).unwrap();
        for t in &trajs {
            prop_assert!((50..=300).contains(&t.len()));
            for p in &t.waypoints {
                prop_assert!(scene.contains_xy(p.x, p.y));
                prop_assert_eq!(p.z, cfg.height_m);
            }
            for w in t.waypoints.windows(2) {
                let gap = ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt();
                prop_assert_eq!(gap, cfg.step_m);
            }
            let g = &scene.gnbs[0].position;
            let d = distance_sequence(t, g);
            for (p, &dv) in t.waypoints.iter().zip(&d) {
                let brute = ((p.x - g.x) * (p.x - g.x) + (p.y - g.y) * (p.y - g.y) + (p.z - g.z) * (p.z - g.z)).sqrt();
                prop_assert!((dv - brute).abs() <= 1e-9 * brute.max(1.0));
            }
        }
        prop_assert_eq!(&trajs, &generate_trajectories(&scene, &cfg, 3, seed).unwrap());
    }
}
