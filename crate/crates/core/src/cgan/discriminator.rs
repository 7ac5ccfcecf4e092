//! Patch-embedding transformer discriminator with an adversarial head and an
//! auxiliary gNB classification head.
//!
//! The RSS window and the encoded distance window are stacked as two channels
//! of a `(2, 1, W)` image, cut into `W / P` patches, linearly embedded, and
//! prefixed with a learned class token. Learned positional encodings are added
//! to every token. After the encoder layers the class token feeds both heads.

use rand::Rng;

use super::config::GanConfig;
use super::layers::{leaky_relu, leaky_relu_backward, EncoderBlock, EncoderCache, LayerNorm, LayerNormCache, Linear};
use super::params::{Init, ParamId, Params};
use super::real::Real;
use super::GanError;

pub const INPUT_CHANNELS: usize = 2;

#[derive(Debug, Clone)]
pub struct DiscriminatorNet {
    pub window: usize,
    pub patch: usize,
    pub embed_dim: usize,
    pub n_classes: usize,
    pub dist_encoder: Linear,
    pub patch_embed: Linear,
    pub cls_token: ParamId,
    pub pos_embed: ParamId,
    pub blocks: Vec<EncoderBlock>,
    pub norm: LayerNorm,
    pub adv_head: Linear,
    pub cls_head: Linear,
}

pub struct DiscriminatorCache<T> {
    batch: usize,
    u: Vec<T>,
    enc: Vec<T>,
    patches: Vec<T>,
    blocks: Vec<EncoderCache<T>>,
    norm: LayerNormCache<T>,
    cls_feat: Vec<T>,
}

/// Outputs of one discriminator pass.
pub struct DiscriminatorOutput<T> {
    /// `batch` adversarial scores.
    pub adv: Vec<T>,
    /// `batch x n_classes` class logits.
    pub logits: Vec<T>,
}

impl DiscriminatorNet {
    pub fn build<T: Real, R: Rng + ?Sized>(cfg: &GanConfig, rng: &mut R) -> (Self, Params<T>) {
        let mut p = Params::new();
        let w = cfg.window_w;
        let e = cfg.embed_dim;
        let std = cfg.init_std;
        let init = cfg.linear_init();
        let dist_encoder = Linear::new(&mut p, "dist_encoder", w, w, init, rng);
        let patch_embed = Linear::new(&mut p, "patch_embed", INPUT_CHANNELS * cfg.patch_size, e, init, rng);
        let cls_token = p.add("cls_token", &[e], Init::Normal(std), rng);
        let pos_embed = p.add("pos_embed", &[cfg.n_patches() + 1, e], Init::Normal(std), rng);
        let blocks = (0..cfg.n_layers)
            .map(|i| {
                EncoderBlock::new(
                    &mut p,
                    &format!("blocks.{i}"),
                    e,
                    cfg.n_heads,
                    cfg.mlp_ratio,
                    cfg.dropout,
                    init,
                    rng,
                )
            })
            .collect();
        let norm = LayerNorm::new(&mut p, "norm", e, rng);
        let adv_head = Linear::new(&mut p, "adv_head", e, 1, init, rng);
        let cls_head = Linear::new(&mut p, "cls_head", e, cfg.n_classes, init, rng);
        (
            Self {
                window: w,
                patch: cfg.patch_size,
                embed_dim: e,
                n_classes: cfg.n_classes,
                dist_encoder,
                patch_embed,
                cls_token,
                pos_embed,
                blocks,
                norm,
                adv_head,
                cls_head,
            },
            p,
        )
    }

    pub fn n_tokens(&self) -> usize {
        self.window / self.patch + 1
    }

    /// Parameter index ranges of the classification head.
    pub fn cls_head_ranges(&self) -> [std::ops::Range<usize>; 2] {
        [self.cls_head.w.range(), self.cls_head.b.range()]
    }

    pub fn forward<T: Real, R: Rng + ?Sized>(
        &self,
        vals: &[T],
        x: &[T],
        u: &[T],
        mut rng: Option<&mut R>,
    ) -> Result<(DiscriminatorOutput<T>, DiscriminatorCache<T>), GanError> {
        let w = self.window;
        if x.len() % w != 0 || x.len() != u.len() {
            return Err(GanError::Shape(format!(
                "discriminator expects x and u of shape Bx{w}, got {} and {} values",
                x.len(),
                u.len()
            )));
        }
        let b = x.len() / w;
        let e = self.embed_dim;
        let p = self.patch;
        let np = w / p;
        let mut enc = self.dist_encoder.forward(vals, u, b);
        leaky_relu(&mut enc);

        // Patch rows laid out channel-major: [rss[pP..pP+P], enc[pP..pP+P]].
        let pin = INPUT_CHANNELS * p;
        let mut patches = Vec::with_capacity(b * np * pin);
        for i in 0..b {
            for k in 0..np {
                patches.extend_from_slice(&x[i * w + k * p..i * w + (k + 1) * p]);
                patches.extend_from_slice(&enc[i * w + k * p..i * w + (k + 1) * p]);
            }
        }
        let emb = self.patch_embed.forward(vals, &patches, b * np);

        let len = np + 1;
        let cls = &vals[self.cls_token.range()];
        let pos = &vals[self.pos_embed.range()];
        let mut tokens = Vec::with_capacity(b * len * e);
        for i in 0..b {
            for t in 0..len {
                let src: &[T] = if t == 0 {
                    cls
                } else {
                    &emb[(i * np + t - 1) * e..(i * np + t) * e]
                };
                tokens.extend(src.iter().zip(&pos[t * e..(t + 1) * e]).map(|(&a, &q)| a + q));
            }
        }

        let mut caches = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let (y, cache) = blk.forward(vals, &tokens, b, len, rng.as_deref_mut());
            caches.push(cache);
            tokens = y;
        }

        let mut cls_rows = Vec::with_capacity(b * e);
        for i in 0..b {
            cls_rows.extend_from_slice(&tokens[i * len * e..i * len * e + e]);
        }
        let (cls_feat, norm) = self.norm.forward(vals, &cls_rows);
        let adv = self.adv_head.forward(vals, &cls_feat, b);
        let logits = self.cls_head.forward(vals, &cls_feat, b);
        Ok((
            DiscriminatorOutput { adv, logits },
            DiscriminatorCache {
                batch: b,
                u: u.to_vec(),
                enc,
                patches,
                blocks: caches,
                norm,
                cls_feat,
            },
        ))
    }

    /// Backpropagates the head gradients. `dlogits = None` leaves the
    /// classification head untouched. Returns the gradient with respect to
    /// the RSS input when `need_dx` is set.
    pub fn backward<T: Real>(
        &self,
        vals: &[T],
        grads: &mut [T],
        cache: &DiscriminatorCache<T>,
        dadv: &[T],
        dlogits: Option<&[T]>,
        need_dx: bool,
    ) -> Option<Vec<T>> {
        let b = cache.batch;
        let w = self.window;
        let e = self.embed_dim;
        let p = self.patch;
        let np = w / p;
        let len = np + 1;

        let mut dfeat = self
            .adv_head
            .backward(vals, grads, &cache.cls_feat, dadv, b, true)
            .expect("dx requested");
        if let Some(dl) = dlogits {
            let d2 = self
                .cls_head
                .backward(vals, grads, &cache.cls_feat, dl, b, true)
                .expect("dx requested");
            for (a, v) in dfeat.iter_mut().zip(d2) {
                *a += v;
            }
        }
        let dcls_rows = self.norm.backward(vals, grads, &cache.norm, &dfeat);
        let mut dtok = vec![T::ZERO; b * len * e];
        for i in 0..b {
            dtok[i * len * e..i * len * e + e].copy_from_slice(&dcls_rows[i * e..(i + 1) * e]);
        }
        for (blk, bc) in self.blocks.iter().zip(&cache.blocks).rev() {
            dtok = blk.backward(vals, grads, bc, &dtok, b, len);
        }

        let mut demb = vec![T::ZERO; b * np * e];
        {
            let gpos = self.pos_embed.range();
            let gcls = self.cls_token.range();
            for i in 0..b {
                for t in 0..len {
                    let d = &dtok[(i * len + t) * e..(i * len + t + 1) * e];
                    for (g, &v) in grads[gpos.start + t * e..gpos.start + (t + 1) * e].iter_mut().zip(d) {
                        *g += v;
                    }
                    if t == 0 {
                        for (g, &v) in grads[gcls.clone()].iter_mut().zip(d) {
                            *g += v;
                        }
                    } else {
                        demb[(i * np + t - 1) * e..(i * np + t) * e].copy_from_slice(d);
                    }
                }
            }
        }
        let dpatch = self
            .patch_embed
            .backward(vals, grads, &cache.patches, &demb, b * np, true)
            .expect("dx requested");

        let pin = super::discriminator::INPUT_CHANNELS * p;
        let mut dx = vec![T::ZERO; b * w];
        let mut denc = vec![T::ZERO; b * w];
        for i in 0..b {
            for k in 0..np {
                let row = &dpatch[(i * np + k) * pin..(i * np + k + 1) * pin];
                dx[i * w + k * p..i * w + (k + 1) * p].copy_from_slice(&row[..p]);
                denc[i * w + k * p..i * w + (k + 1) * p].copy_from_slice(&row[p..]);
            }
        }
        leaky_relu_backward(&cache.enc, &mut denc);
        self.dist_encoder.backward(vals, grads, &cache.u, &denc, b, false);
        need_dx.then_some(dx)
    }
}
