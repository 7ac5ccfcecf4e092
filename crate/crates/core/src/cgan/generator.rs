//! Conditional generator `x = f(z, u, c)`.
//!
//! The gNB label is embedded, the distance window passes through a
//! Linear + LeakyReLU encoder, and both are concatenated with the latent
//! vector. A dense map lifts the concatenation to a `W x embed_dim` token
//! sequence, which runs through pre-norm encoder layers and is reduced to one
//! channel by a 1x1 convolution.

use rand::Rng;

use super::config::GanConfig;
use super::layers::{leaky_relu, leaky_relu_backward, EncoderBlock, EncoderCache, Linear};
use super::params::{Init, ParamId, Params};
use super::real::Real;
use super::GanError;

/// Parameter layout of the generator. Independent of the scalar type.
#[derive(Debug, Clone)]
pub struct GeneratorNet {
    pub latent_dim: usize,
    pub window: usize,
    pub embed_dim: usize,
    pub n_classes: usize,
    pub label_dim: usize,
    pub dist_encoder: Linear,
    pub label_embedding: ParamId,
    pub map: Linear,
    pub blocks: Vec<EncoderBlock>,
    pub reduce: Linear,
}

pub struct GeneratorCache<T> {
    batch: usize,
    u: Vec<T>,
    enc: Vec<T>,
    concat: Vec<T>,
    labels: Vec<usize>,
    blocks: Vec<EncoderCache<T>>,
    last: Vec<T>,
}

impl GeneratorNet {
    pub fn build<T: Real, R: Rng + ?Sized>(cfg: &GanConfig, rng: &mut R) -> (Self, Params<T>) {
        let mut p = Params::new();
        let w = cfg.window_w;
        let e = cfg.embed_dim;
        let init = cfg.linear_init();
        let dist_encoder = Linear::new(&mut p, "dist_encoder", w, w, init, rng);
        let label_embedding = p.add(
            "label_embedding",
            &[cfg.n_classes, cfg.label_embed_dim],
            Init::Normal(1.0),
            rng,
        );
        let map = Linear::new(
            &mut p,
            "embedding",
            cfg.latent_dim + w + cfg.label_embed_dim,
            w * e,
            init,
            rng,
        );
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
        let reduce = Linear::new(&mut p, "channel_reduction", e, 1, init, rng);
        (
            Self {
                latent_dim: cfg.latent_dim,
                window: w,
                embed_dim: e,
                n_classes: cfg.n_classes,
                label_dim: cfg.label_embed_dim,
                dist_encoder,
                label_embedding,
                map,
                blocks,
                reduce,
            },
            p,
        )
    }

    fn check_shapes(&self, zl: usize, ul: usize, labels: &[usize]) -> Result<usize, GanError> {
        let b = labels.len();
        if zl != b * self.latent_dim || ul != b * self.window {
            return Err(GanError::Shape(format!(
                "generator expects z {}x{} and u {}x{}, got {} and {} values",
                b, self.latent_dim, b, self.window, zl, ul
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= self.n_classes) {
            return Err(GanError::Label {
                label: bad,
                n_classes: self.n_classes,
            });
        }
        Ok(b)
    }

    /// Output is `batch x W` (the single reduced channel, flattened).
    pub fn forward<T: Real, R: Rng + ?Sized>(
        &self,
        vals: &[T],
        z: &[T],
        u: &[T],
        labels: &[usize],
        mut rng: Option<&mut R>,
    ) -> Result<(Vec<T>, GeneratorCache<T>), GanError> {
        let b = self.check_shapes(z.len(), u.len(), labels)?;
        let w = self.window;
        let mut enc = self.dist_encoder.forward(vals, u, b);
        leaky_relu(&mut enc);
        let emb = &vals[self.label_embedding.range()];
        let in_dim = self.latent_dim + w + self.label_dim;
        let mut concat = Vec::with_capacity(b * in_dim);
        for i in 0..b {
            concat.extend_from_slice(&z[i * self.latent_dim..(i + 1) * self.latent_dim]);
            concat.extend_from_slice(&enc[i * w..(i + 1) * w]);
            let c = labels[i];
            concat.extend_from_slice(&emb[c * self.label_dim..(c + 1) * self.label_dim]);
        }
        // (b, W*E) is bit-identical to (b*W, E) row-major.
        let mut x = self.map.forward(vals, &concat, b);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let (y, cache) = blk.forward(vals, &x, b, w, rng.as_deref_mut());
            caches.push(cache);
            x = y;
        }
        let out = self.reduce.forward(vals, &x, b * w);
        Ok((
            out,
            GeneratorCache {
                batch: b,
                u: u.to_vec(),
                enc,
                concat,
                labels: labels.to_vec(),
                blocks: caches,
                last: x,
            },
        ))
    }

    pub fn backward<T: Real>(&self, vals: &[T], grads: &mut [T], cache: &GeneratorCache<T>, dout: &[T]) {
        let b = cache.batch;
        let w = self.window;
        let mut dx = self
            .reduce
            .backward(vals, grads, &cache.last, dout, b * w, true)
            .expect("dx requested");
        for (blk, bc) in self.blocks.iter().zip(&cache.blocks).rev() {
            dx = blk.backward(vals, grads, bc, &dx, b, w);
        }
        let dconcat = self
            .map
            .backward(vals, grads, &cache.concat, &dx, b, true)
            .expect("dx requested");
        let in_dim = self.latent_dim + w + self.label_dim;
        let mut denc = vec![T::ZERO; b * w];
        {
            let gemb = &mut grads[self.label_embedding.range()];
            for i in 0..b {
                let row = &dconcat[i * in_dim..(i + 1) * in_dim];
                denc[i * w..(i + 1) * w].copy_from_slice(&row[self.latent_dim..self.latent_dim + w]);
                let c = cache.labels[i];
                for (g, &d) in gemb[c * self.label_dim..(c + 1) * self.label_dim]
                    .iter_mut()
                    .zip(&row[self.latent_dim + w..])
                {
                    *g += d;
                }
            }
        }
        leaky_relu_backward(&cache.enc, &mut denc);
        self.dist_encoder.backward(vals, grads, &cache.u, &denc, b, false);
    }
}
