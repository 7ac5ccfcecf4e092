#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rssgan::cgan::discriminator::DiscriminatorNet;
use rssgan::cgan::generator::GeneratorNet;
use rssgan::cgan::loss::{ce_loss_with_grad, half_mse_grad, ls_loss_discriminator, ls_loss_generator};
use rssgan::cgan::params::Params;
use rssgan::cgan::{GanConfig, GanMode, WeightInit};

pub fn tiny_config() -> GanConfig {
    GanConfig {
        latent_dim: 6,
        embed_dim: 4,
        n_layers: 2,
        n_heads: 2,
        patch_size: 4,
        window_w: 16,
        batch_size: 2,
        n_classes: 3,
        label_embed_dim: 3,
        mlp_ratio: 2,
        // large enough that the nonlinearities are away from their linear regime
        weight_init: WeightInit::Normal,
        init_std: 0.3,
        mode: GanMode::MultiGnb,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossComponent {
    DiscriminatorLs,
    DiscriminatorCe,
    GeneratorLs,
    GeneratorCe,
}

impl LossComponent {
    pub const ALL: [LossComponent; 4] = [
        LossComponent::DiscriminatorLs,
        LossComponent::DiscriminatorCe,
        LossComponent::GeneratorLs,
        LossComponent::GeneratorCe,
    ];
}

#[derive(Debug, Clone)]
pub struct GradReport {
    pub component: LossComponent,
    pub checked: usize,
    pub failed: usize,
    pub worst_rel: f64,
}

struct Problem {
    g: GeneratorNet,
    gp: Params<f64>,
    d: DiscriminatorNet,
    dp: Params<f64>,
    x: Vec<f64>,
    u: Vec<f64>,
    z: Vec<f64>,
    c: Vec<usize>,
    n_classes: usize,
    dropout_seed: Option<u64>,
}

impl Problem {
    fn new(cfg: &GanConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, gp) = GeneratorNet::build::<f64, _>(cfg, &mut rng);
        let (d, dp) = DiscriminatorNet::build::<f64, _>(cfg, &mut rng);
        let b = cfg.batch_size;
        let w = cfg.window_w;
        let mut normal = || rng.random_range(-1.5..1.5);
        let x = (0..b * w).map(|_| normal()).collect();
        let u = (0..b * w).map(|_| normal()).collect();
        let z = (0..b * cfg.latent_dim).map(|_| normal()).collect();
        let c = (0..b).map(|i| i % cfg.n_classes).collect();
        Problem {
            g,
            gp,
            d,
            dp,
            x,
            u,
            z,
            c,
            n_classes: cfg.n_classes,
            dropout_seed: None,
        }
    }

    /// Same masks on every call: each evaluation replays one seeded stream.
    fn masks(&self) -> Option<ChaCha8Rng> {
        self.dropout_seed.map(ChaCha8Rng::seed_from_u64)
    }

    fn loss(&self, comp: LossComponent, gv: &[f64], dv: &[f64]) -> f64 {
        let mut m = self.masks();
        match comp {
            LossComponent::DiscriminatorLs => {
                let (fake, _) = self.g.forward(gv, &self.z, &self.u, &self.c, m.as_mut()).unwrap();
                let (r, _) = self.d.forward(dv, &self.x, &self.u, m.as_mut()).unwrap();
                let (f, _) = self.d.forward(dv, &fake, &self.u, m.as_mut()).unwrap();
                ls_loss_discriminator(&r.adv, &f.adv, 1.0, 0.0)
            }
            LossComponent::DiscriminatorCe => {
                let (r, _) = self.d.forward(dv, &self.x, &self.u, m.as_mut()).unwrap();
                ce_loss_with_grad(&r.logits, &self.c, self.n_classes).unwrap().0
            }
            LossComponent::GeneratorLs | LossComponent::GeneratorCe => {
                let (fake, _) = self.g.forward(gv, &self.z, &self.u, &self.c, m.as_mut()).unwrap();
                let (f, _) = self.d.forward(dv, &fake, &self.u, m.as_mut()).unwrap();
                if comp == LossComponent::GeneratorLs {
                    ls_loss_generator(&f.adv, 1.0)
                } else {
                    ce_loss_with_grad(&f.logits, &self.c, self.n_classes).unwrap().0
                }
            }
        }
    }

    /// Analytic gradient with respect to the parameters the component updates
    /// (discriminator for D losses, generator for G losses).
    fn analytic(&mut self, comp: LossComponent) -> Vec<f64> {
        let gv = self.gp.values.clone();
        let dv = self.dp.values.clone();
        let mut m = self.masks();
        match comp {
            LossComponent::DiscriminatorLs => {
                let (fake, _) = self.g.forward(&gv, &self.z, &self.u, &self.c, m.as_mut()).unwrap();
                let (r, rc) = self.d.forward(&dv, &self.x, &self.u, m.as_mut()).unwrap();
                let (f, fc) = self.d.forward(&dv, &fake, &self.u, m.as_mut()).unwrap();
                let mut grads = vec![0.0; dv.len()];
                self.d
                    .backward(&dv, &mut grads, &rc, &half_mse_grad(&r.adv, 1.0), None, false);
                self.d
                    .backward(&dv, &mut grads, &fc, &half_mse_grad(&f.adv, 0.0), None, false);
                grads
            }
            LossComponent::DiscriminatorCe => {
                let (r, rc) = self.d.forward(&dv, &self.x, &self.u, m.as_mut()).unwrap();
                let (_, dl) = ce_loss_with_grad(&r.logits, &self.c, self.n_classes).unwrap();
                let mut grads = vec![0.0; dv.len()];
                let zero = vec![0.0; r.adv.len()];
                self.d.backward(&dv, &mut grads, &rc, &zero, Some(&dl), false);
                grads
            }
            LossComponent::GeneratorLs | LossComponent::GeneratorCe => {
                let (fake, gc) = self.g.forward(&gv, &self.z, &self.u, &self.c, m.as_mut()).unwrap();
                let (f, fc) = self.d.forward(&dv, &fake, &self.u, m.as_mut()).unwrap();
                let (dadv, dl) = if comp == LossComponent::GeneratorLs {
                    (half_mse_grad(&f.adv, 1.0), None)
                } else {
                    let (_, dl) = ce_loss_with_grad(&f.logits, &self.c, self.n_classes).unwrap();
                    (vec![0.0; f.adv.len()], Some(dl))
                };
                let mut scratch = vec![0.0; dv.len()];
                let dx = self
                    .d
                    .backward(&dv, &mut scratch, &fc, &dadv, dl.as_deref(), true)
                    .unwrap();
                let mut grads = vec![0.0; gv.len()];
                self.g.backward(&gv, &mut grads, &gc, &dx);
                grads
            }
        }
    }
}

/// Compares analytic gradients with central differences on `n_samples`
/// parameters (all of them when `None`).
pub fn gradient_check(
    cfg: &GanConfig,
    comp: LossComponent,
    seed: u64,
    n_samples: Option<usize>,
    tol: f64,
) -> GradReport {
    gradient_check_with_dropout(cfg, comp, seed, n_samples, tol, None)
}

/// As `gradient_check`, with dropout active under masks drawn from
/// `dropout_seed` (identical for every loss evaluation).
pub fn gradient_check_with_dropout(
    cfg: &GanConfig,
    comp: LossComponent,
    seed: u64,
    n_samples: Option<usize>,
    tol: f64,
    dropout_seed: Option<u64>,
) -> GradReport {
    let mut p = Problem::new(cfg, seed);
    p.dropout_seed = dropout_seed;
    let analytic = p.analytic(comp);
    let on_d = matches!(comp, LossComponent::DiscriminatorLs | LossComponent::DiscriminatorCe);
    let n = analytic.len();
    let idx: Vec<usize> = match n_samples {
        Some(k) if k < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            rand::seq::index::sample(&mut rng, n, k).into_vec()
        }
        _ => (0..n).collect(),
    };
    let h = 1e-6;
    let mut failed = 0;
    let mut worst: f64 = 0.0;
    for &i in &idx {
        let mut gv = p.gp.values.clone();
        let mut dv = p.dp.values.clone();
        let target = if on_d { &mut dv } else { &mut gv };
        let orig = target[i];
        target[i] = orig + h;
        let lp = p.loss(comp, &gv, &dv);
        let target = if on_d { &mut dv } else { &mut gv };
        target[i] = orig - h;
        let lm = p.loss(comp, &gv, &dv);
        let numeric = (lp - lm) / (2.0 * h);
        let a = analytic[i];
        // central differences carry ~1e-10 of round-off, so gradients below
        // the floor are compared in absolute terms
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
        if rel > tol {
            failed += 1;
        }
    }
    GradReport {
        component: comp,
        checked: idx.len(),
        failed,
        worst_rel: worst,
    }
}

use rssgan::dataset::{build_dataset, DatasetConfig, SequenceDataset};
use rssgan::scene::{build_scene, compute_power_map, SceneConfig};
use rssgan::trajectories::{generate_trajectories, TrajectoryConfig};

/// Small real dataset: default scene, coarse maps, short trajectories.
pub fn small_dataset(window_w: usize, gnb_ids: Vec<usize>, augment: bool) -> SequenceDataset {
    let scene = build_scene(&SceneConfig::default(), 5).unwrap();
    let maps: Vec<_> = (0..scene.n_gnbs())
        .map(|g| compute_power_map(&scene, g, 8.0, 30.0, 5).unwrap())
        .collect();
    let tcfg = TrajectoryConfig {
        n_steps_min: 120,
        n_steps_max: 160,
        ..Default::default()
    };
    let trajs = generate_trajectories(&scene, &tcfg, 12, 5).unwrap();
    let cfg = DatasetConfig {
        window_w,
        stride: window_w / 2,
        gnb_ids,
        augment,
        kernel_size: 4,
        ..Default::default()
    };
    build_dataset(&scene, &maps, &trajs, &cfg).unwrap()
}

use rssgan::pipeline::PipelineConfig;

/// End-to-end configuration small enough for unit-test budgets.
pub fn tiny_pipeline(out: &std::path::Path) -> PipelineConfig {
    let text = format!(
        r#"
name = "tiny"
seed = 3
output_dir = "{}"

[power_map]
spacing_m = 4.0

[trajectories]
count = 10
walk = {{ n_steps_min = 100, n_steps_max = 130 }}

[dataset]
window_w = 16
stride = 8
augment = true
kernel_size = 4

[gan]
latent_dim = 6
embed_dim = 4
n_heads = 2
n_layers = 1
patch_size = 4
window_w = 16
batch_size = 8
n_iterations = 12
eval_interval = 6
label_embed_dim = 3
mlp_ratio = 2

[metrics]
hook_max_rows = 32

[syseval]
n_trajectories = 2
trajectory = {{ n_steps_min = 60, n_steps_max = 70 }}
"#,
        out.display().to_string().replace('\\', "/")
    );
    PipelineConfig::from_toml_str(&text).unwrap()
}
