use serde::{Deserialize, Serialize};

use super::layers::LinearInit;
use super::GanError;

/// Which loss terms drive training.
///
/// `SingleGnb` trains on the adversarial least-squares game alone;
/// `MultiGnb` adds the auxiliary cross-entropy terms for the gNB label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanMode {
    SingleGnb,
    MultiGnb,
}

impl GanMode {
    pub fn uses_classifier(self) -> bool {
        matches!(self, GanMode::MultiGnb)
    }
}

/// Initialization of linear-layer weights.
///
/// `FanIn` scales each layer by its input width; `Normal` draws every
/// weight from `N(0, init_std)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    FanIn,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub embed_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub dropout: f64,
    pub patch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub n_iterations: u64,
    pub t_real: f64,
    pub t_fake: f64,
    pub n_classes: usize,
    pub window_w: usize,
    pub mode: GanMode,
    /// Width of the gNB label embedding fed to the generator.
    pub label_embed_dim: usize,
    /// Hidden width of the transformer MLP as a multiple of `embed_dim`.
    pub mlp_ratio: usize,
    pub weight_init: WeightInit,
    /// Std of `Normal` weights and of the positional and class tokens.
    pub init_std: f64,
    /// Iterations between evaluation hooks; 0 disables periodic hooks.
    pub eval_interval: u64,
    /// Record an evaluation before the first step of a `train` call.
    pub eval_at_start: bool,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 100,
            embed_dim: 50,
            n_layers: 3,
            n_heads: 5,
            dropout: 0.5,
            patch_size: 16,
            lr_g: 3e-4,
            lr_d: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            n_iterations: 20_000,
            t_real: 1.0,
            t_fake: 0.0,
            n_classes: 3,
            window_w: 128,
            mode: GanMode::MultiGnb,
            label_embed_dim: 10,
            mlp_ratio: 4,
            weight_init: WeightInit::FanIn,
            init_std: 0.02,
            eval_interval: 1000,
            eval_at_start: true,
        }
    }
}

impl GanConfig {
    pub fn linear_init(&self) -> LinearInit {
        match self.weight_init {
            WeightInit::FanIn => LinearInit::FanIn,
            WeightInit::Normal => LinearInit::Normal(self.init_std),
        }
    }

    pub fn n_patches(&self) -> usize {
        self.window_w / self.patch_size
    }

    pub fn validate(&self) -> Result<(), GanError> {
        let bad = |msg: String| Err(GanError::Config(msg));
        if self.window_w == 0 || self.patch_size == 0 || self.window_w % self.patch_size != 0 {
            return bad(format!(
                "window_w {} must be a positive multiple of patch_size {}",
                self.window_w, self.patch_size
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.t_real == self.t_fake {
            return bad("t_real and t_fake must differ".into());
        }
        if self.n_heads == 0 || self.embed_dim % self.n_heads != 0 {
            return bad(format!(
                "n_heads {} must divide embed_dim {}",
                self.n_heads, self.embed_dim
            ));
        }
        if self.n_classes == 0 {
            return bad("n_classes must be at least 1".into());
        }
        if self.mode == GanMode::MultiGnb && self.n_classes < 2 {
            return bad("multi_gnb mode needs at least 2 classes".into());
        }
        if self.latent_dim == 0 || self.embed_dim == 0 || self.batch_size == 0 {
            return bad("latent_dim, embed_dim and batch_size must be positive".into());
        }
        if self.mlp_ratio == 0 || self.label_embed_dim == 0 {
            return bad("mlp_ratio and label_embed_dim must be positive".into());
        }
        if !(self.lr_g > 0.0 && self.lr_d > 0.0) {
            return bad("learning rates must be positive".into());
        }
        Ok(())
    }
}
