use proptest::prelude::*;
use rssgan::geometry::Point3;
use rssgan::scene::{build_scene, compute_power_map, deterministic_rss, is_los, PropagationParams, SceneConfig};

#[test]
fn same_seed_same_scene_and_maps() {
    let cfg = SceneConfig::default();
    let a = build_scene(&cfg, 7).unwrap();
    let b = build_scene(&cfg, 7).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.hash(), b.hash());
    let c = build_scene(&cfg, 8).unwrap();
    assert_ne!(a.buildings, c.buildings);
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn noiseless_empty_city_map_is_minus_path_loss() {
    let cfg = SceneConfig {
        n_buildings: 0,
        n_gnbs: 1,
        propagation: PropagationParams {
            shadowing_std_db: 0.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let scene = build_scene(&cfg, 0).unwrap();
    let g = &scene.gnbs[0];
    let map = compute_power_map(&scene, 0, 10.0, 30.0, 0).unwrap();
    let mut by_distance = Vec::new();
    for r in 0..map.rows {
        for c in 0..map.cols {
            let q = map.node(r, c);
            let d = g.position.distance(&q);
            let expected = scene.propagation.tx_power_dbm - scene.propagation.path_loss_db(d, true);
            assert_eq!(map.at(r, c), expected);
            by_distance.push((d, map.at(r, c)));
        }
    }
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(by_distance.windows(2).all(|w| w[1].1 <= w[0].1));
}

#[test]
fn shadowing_spread_matches_configuration() {
    let scene = build_scene(&SceneConfig::default(), 1).unwrap();
    let map = compute_power_map(&scene, 1, 2.0, 30.0, 1).unwrap();
    assert_eq!((map.rows, map.cols), (280, 300));
    let g = &scene.gnbs[1];
    let resid: Vec<f64> = (0..map.rows)
        .flat_map(|r| (0..map.cols).map(move |c| (r, c)))
        .map(|(r, c)| map.at(r, c) - deterministic_rss(&scene, g, &map.node(r, c)))
        .collect();
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    let std = (resid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let target = scene.propagation.shadowing_std_db;
    assert!((std - target).abs() <= 0.15 * target, "std {std}");
}

#[test]
fn tall_building_between_points_blocks() {
    let cfg = SceneConfig {
        n_buildings: 0,
        n_gnbs: 1,
        ..Default::default()
    };
    let mut scene = build_scene(&cfg, 0).unwrap();
    let a = Point3::new(100.0, 100.0, 30.0);
    let b = Point3::new(200.0, 100.0, 30.0);
    assert!(is_los(&scene, &a, &b));
    scene.buildings.push(rssgan::geometry::Building {
        x_min: 140.0,
        y_min: 90.0,
        x_max: 160.0,
        y_max: 110.0,
        height: 50.0,
    });
    assert!(!is_los(&scene, &a, &b));
    assert!(!is_los(&scene, &b, &a));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn los_is_symmetric(seed in 0u64..20, pts in prop::array::uniform4(0.0f64..560.0), z1 in 1.0f64..80.0, z2 in 1.0f64..80.0) {
        let scene = build_scene(&SceneConfig::default(), seed).unwrap();
        let p = Point3::new(pts[0], pts[1], z1);
        let q = Point3::new(pts[2], pts[3], z2);
        prop_assert_eq!(is_los(&scene, &p, &q), is_los(&scene, &q, &p));
    }

    #[test]
    fn path_loss_grows_with_distance(d1 in 1.0f64..5000.0, d2 in 1.0f64..5000.0, los: bool) {
        let p = PropagationParams::default();
        let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(p.path_loss_db(near, los) <= p.path_loss_db(far, los));
        prop_assert!(p.path_loss_db(near, false) >= p.path_loss_db(near, true));
    }

    #[test]
    fn gnbs_stay_inside_any_scene(seed in 0u64..200) {
        let scene = build_scene(&SceneConfig::default(), seed).unwrap();
        prop_assert_eq!(scene.gnbs.len(), 3);
        for g in &scene.gnbs {
            prop_assert!(scene.contains_xy(g.position.x, g.position.y));
        }
        prop_assert!(scene.validate().is_ok());
    }
}
