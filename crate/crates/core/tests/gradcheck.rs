mod common;

use common::{gradient_check, gradient_check_with_dropout, tiny_config, LossComponent};

#[test]
fn every_loss_component_matches_central_differences() {
    let cfg = tiny_config();
    for comp in LossComponent::ALL {
        let r = gradient_check(&cfg, comp, 11, None, 1e-3);
        assert_eq!(r.failed, 0, "{r:?}");
        assert!(r.checked > 100);
    }
}

#[test]
fn single_layer_default_init() {
    let cfg = rssgan::cgan::GanConfig {
        n_layers: 1,
        weight_init: rssgan::cgan::WeightInit::FanIn,
        init_std: 0.02,
        ..tiny_config()
    };
    for comp in LossComponent::ALL {
        let r = gradient_check(&cfg, comp, 3, Some(400), 1e-3);
        assert_eq!(r.failed, 0, "{r:?}");
    }
}

#[test]
fn dropout_masks_are_differentiated_through() {
    let cfg = tiny_config();
    assert!(cfg.dropout > 0.0);
    for comp in LossComponent::ALL {
        let r = gradient_check_with_dropout(&cfg, comp, 5, None, 1e-3, Some(21));
        assert_eq!(r.failed, 0, "{r:?}");
    }
}
