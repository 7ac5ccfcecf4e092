//! Generator/discriminator state, the alternating update step, the training
//! loop and post-training sequence generation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::GanConfig;
use super::discriminator::DiscriminatorNet;
use super::generator::GeneratorNet;
use super::loss::{ce_loss_with_grad, half_mse_grad, ls_loss_discriminator, ls_loss_generator};
use super::params::Params;
use super::rng::{stream, RngStreams, STREAM_INIT_D, STREAM_INIT_G};
use super::GanError;
use crate::dataset::{NormStats, SequenceDataset, Split};

#[derive(Debug, Clone)]
pub struct Generator {
    pub net: GeneratorNet,
    pub params: Params<f32>,
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    pub net: DiscriminatorNet,
    pub params: Params<f32>,
}

pub fn init_generator(cfg: &GanConfig, seed: u64) -> Result<Generator, GanError> {
    cfg.validate()?;
    let mut rng = stream(seed, STREAM_INIT_G);
    let (net, params) = GeneratorNet::build(cfg, &mut rng);
    Ok(Generator { net, params })
}

pub fn init_discriminator(cfg: &GanConfig, seed: u64) -> Result<Discriminator, GanError> {
    cfg.validate()?;
    let mut rng = stream(seed, STREAM_INIT_D);
    let (net, params) = DiscriminatorNet::build(cfg, &mut rng);
    Ok(Discriminator { net, params })
}

impl Generator {
    /// `z`: `B x latent_dim`, `u`: `B x W` normalized distances. Returns
    /// `B x W` normalized RSS. `dropout = None` is eval mode.
    pub fn forward(
        &self,
        z: &[f32],
        u: &[f32],
        labels: &[usize],
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<f32>, GanError> {
        Ok(self.net.forward(&self.params.values, z, u, labels, dropout)?.0)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

impl Discriminator {
    /// Returns `(adversarial scores, class logits)`.
    pub fn forward(
        &self,
        x: &[f32],
        u: &[f32],
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(Vec<f32>, Vec<f32>), GanError> {
        let (out, _) = self.net.forward(&self.params.values, x, u, dropout)?;
        Ok((out.adv, out.logits))
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

/// One minibatch of normalized training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Vec<f32>,
    pub u: Vec<f32>,
    pub c: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn from_rows(ds: &SequenceDataset, rows: &[usize]) -> Self {
        let w = ds.window_w;
        let mut x = Vec::with_capacity(rows.len() * w);
        let mut u = Vec::with_capacity(rows.len() * w);
        let mut c = Vec::with_capacity(rows.len());
        for &r in rows {
            x.extend_from_slice(ds.x_row(r));
            u.extend_from_slice(ds.u_row(r));
            c.push(ds.c[r] as usize);
        }
        Self { x, u, c }
    }
}

/// Loss components of one update (or their mean over a reporting window).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub d_ls: f64,
    pub d_ce: f64,
    pub g_ls: f64,
    pub g_ce: f64,
}

impl StepMetrics {
    pub fn d_total(&self) -> f64 {
        self.d_ls + self.d_ce
    }

    pub fn g_total(&self) -> f64 {
        self.g_ls + self.g_ce
    }

    fn accumulate(&mut self, o: &StepMetrics) {
        self.d_ls += o.d_ls;
        self.d_ce += o.d_ce;
        self.g_ls += o.g_ls;
        self.g_ce += o.g_ce;
    }

    fn scaled(&self, k: f64) -> StepMetrics {
        StepMetrics {
            d_ls: self.d_ls * k,
            d_ce: self.d_ce * k,
            g_ls: self.g_ls * k,
            g_ce: self.g_ce * k,
        }
    }
}

/// Result of an evaluation hook.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// `(gnb label, CMD)` on the test split.
    pub cmd_per_gnb: Vec<(usize, f64)>,
    pub cmd_mean: f64,
    /// `(gnb label, KS distance)` of the marginal RSS distribution.
    pub ks_per_gnb: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// Iteration counter after which the record was taken.
    pub iteration: u64,
    /// Mean losses over the steps since the previous record.
    pub losses: StepMetrics,
    pub steps_averaged: u64,
    pub eval: Option<EvalRecord>,
}

/// Everything needed to resume training or generate sequences.
#[derive(Debug, Clone)]
pub struct GanBundle {
    pub config: GanConfig,
    pub seed: u64,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub opt_g: Adam,
    pub opt_d: Adam,
    pub iteration: u64,
    pub history: Vec<HistoryRecord>,
    pub norm_stats: Option<NormStats>,
    /// Scene gNB id of every class label (set from the training dataset).
    pub gnb_ids: Vec<usize>,
    pub rng: RngStreams,
}

impl GanBundle {
    pub fn new(config: GanConfig, seed: u64) -> Result<Self, GanError> {
        let generator = init_generator(&config, seed)?;
        let discriminator = init_discriminator(&config, seed)?;
        let opt_g = Adam::new(
            generator.params.len(),
            config.lr_g,
            config.adam_beta1,
            config.adam_beta2,
            config.adam_eps,
        );
        let opt_d = Adam::new(
            discriminator.params.len(),
            config.lr_d,
            config.adam_beta1,
            config.adam_beta2,
            config.adam_eps,
        );
        Ok(Self {
            config,
            seed,
            generator,
            discriminator,
            opt_g,
            opt_d,
            iteration: 0,
            history: Vec::new(),
            norm_stats: None,
            gnb_ids: Vec::new(),
            rng: RngStreams::new(seed),
        })
    }

    pub fn with_norm_stats(mut self, stats: NormStats) -> Self {
        self.norm_stats = Some(stats);
        self
    }
}

fn sample_latent(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
}

fn check_finite(v: f64, iteration: u64, component: &'static str) -> Result<(), GanError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(GanError::NonFinite { iteration, component })
    }
}

fn check_batch(cfg: &GanConfig, batch: &Batch) -> Result<(), GanError> {
    let b = batch.len();
    let w = cfg.window_w;
    if batch.x.len() != b * w || batch.u.len() != b * w {
        return Err(GanError::Shape(format!(
            "batch of {b} rows must hold {b}x{w} RSS and distance values"
        )));
    }
    Ok(())
}

/// One discriminator update followed by one generator update.
pub fn train_step(bundle: &mut GanBundle, batch: &Batch) -> Result<StepMetrics, GanError> {
    let (d_ls, d_ce) = discriminator_step(bundle, batch)?;
    let (g_ls, g_ce) = generator_step(bundle, batch)?;
    bundle.iteration += 1;
    Ok(StepMetrics { d_ls, d_ce, g_ls, g_ce })
}

/// Discriminator update on real and detached generated rows. Returns the
/// least-squares and cross-entropy losses; generator parameters are untouched.
pub fn discriminator_step(bundle: &mut GanBundle, batch: &Batch) -> Result<(f64, f64), GanError> {
    let cfg = &bundle.config;
    check_batch(cfg, batch)?;
    let b = batch.len();
    let it = bundle.iteration + 1;
    let classify = cfg.mode.uses_classifier();
    let n_classes = cfg.n_classes;
    let (t_real, t_fake) = (cfg.t_real, cfg.t_fake);
    let mut m = StepMetrics::default();

    let z = sample_latent(&mut bundle.rng.latent, b * cfg.latent_dim);
    let (fake, _) = bundle.generator.net.forward(
        &bundle.generator.params.values,
        &z,
        &batch.u,
        &batch.c,
        Some(&mut bundle.rng.dropout_g),
    )?;
    {
        let d = &mut bundle.discriminator;
        let (real_out, real_cache) =
            d.net
                .forward(&d.params.values, &batch.x, &batch.u, Some(&mut bundle.rng.dropout_d))?;
        let (fake_out, fake_cache) =
            d.net
                .forward(&d.params.values, &fake, &batch.u, Some(&mut bundle.rng.dropout_d))?;
        m.d_ls = ls_loss_discriminator(&real_out.adv, &fake_out.adv, t_real, t_fake);
        check_finite(m.d_ls, it, "discriminator least-squares")?;
        let dlogits = if classify {
            let (ce, g) = ce_loss_with_grad(&real_out.logits, &batch.c, n_classes)?;
            m.d_ce = ce;
            check_finite(ce, it, "discriminator cross-entropy")?;
            Some(g)
        } else {
            None
        };
        // each half-MSE term carries its own 1/2 factor
        let dreal = half_mse_grad(&real_out.adv, t_real);
        let dfake = half_mse_grad(&fake_out.adv, t_fake);
        d.params.zero_grad();
        let vals = &d.params.values;
        let grads = &mut d.params.grads;
        d.net
            .backward(vals, grads, &real_cache, &dreal, dlogits.as_deref(), false);
        d.net.backward(vals, grads, &fake_cache, &dfake, None, false);
        bundle.opt_d.update(&mut d.params.values, &d.params.grads);
    }
    Ok((m.d_ls, m.d_ce))
}

/// Generator update through the current discriminator, whose parameters
/// and optimizer state are untouched.
pub fn generator_step(bundle: &mut GanBundle, batch: &Batch) -> Result<(f64, f64), GanError> {
    let cfg = &bundle.config;
    check_batch(cfg, batch)?;
    let b = batch.len();
    let it = bundle.iteration + 1;
    let classify = cfg.mode.uses_classifier();
    let n_classes = cfg.n_classes;
    let t_real = cfg.t_real;
    let mut m = StepMetrics::default();

    let z = sample_latent(&mut bundle.rng.latent, b * cfg.latent_dim);
    let g = &mut bundle.generator;
    let (fake, g_cache) = g.net.forward(
        &g.params.values,
        &z,
        &batch.u,
        &batch.c,
        Some(&mut bundle.rng.dropout_g),
    )?;
    let d = &bundle.discriminator;
    let (out, d_cache) = d
        .net
        .forward(&d.params.values, &fake, &batch.u, Some(&mut bundle.rng.dropout_d))?;
    m.g_ls = ls_loss_generator(&out.adv, t_real);
    check_finite(m.g_ls, it, "generator least-squares")?;
    let dlogits = if classify {
        let (ce, gr) = ce_loss_with_grad(&out.logits, &batch.c, n_classes)?;
        m.g_ce = ce;
        check_finite(ce, it, "generator cross-entropy")?;
        Some(gr)
    } else {
        None
    };
    let dadv = half_mse_grad(&out.adv, t_real);
    let mut scratch = vec![0.0f32; d.params.len()];
    let dx = d
        .net
        .backward(
            &d.params.values,
            &mut scratch,
            &d_cache,
            &dadv,
            dlogits.as_deref(),
            true,
        )
        .expect("dx requested");
    g.params.zero_grad();
    g.net.backward(&g.params.values, &mut g.params.grads, &g_cache, &dx);
    bundle.opt_g.update(&mut g.params.values, &g.params.grads);
    Ok((m.g_ls, m.g_ce))
}

/// Called at every evaluation point of [`train`].
pub trait TrainHook {
    fn evaluate(&mut self, bundle: &GanBundle) -> Result<Option<EvalRecord>, GanError>;
}

impl<F> TrainHook for F
where
    F: FnMut(&GanBundle) -> Result<Option<EvalRecord>, GanError>,
{
    fn evaluate(&mut self, bundle: &GanBundle) -> Result<Option<EvalRecord>, GanError> {
        self(bundle)
    }
}

/// Runs `config.n_iterations` updates over random train-split minibatches.
///
/// A history record (mean losses plus the hook's evaluation) is taken every
/// `eval_interval` iterations, optionally once before the first step, and once
/// at the end when the last iteration is not already recorded.
pub fn train(
    bundle: &mut GanBundle,
    dataset: &SequenceDataset,
    hook: Option<&mut dyn TrainHook>,
) -> Result<(), GanError> {
    let n = bundle.config.n_iterations;
    train_for(bundle, dataset, n, hook)
}

pub fn train_for(
    bundle: &mut GanBundle,
    dataset: &SequenceDataset,
    n_iterations: u64,
    mut hook: Option<&mut dyn TrainHook>,
) -> Result<(), GanError> {
    let rows: Vec<usize> = dataset.rows_in(Split::Train);
    if rows.is_empty() {
        return Err(GanError::EmptySplit("train"));
    }
    if dataset.window_w != bundle.config.window_w {
        return Err(GanError::Shape(format!(
            "dataset window {} does not match model window {}",
            dataset.window_w, bundle.config.window_w
        )));
    }
    if bundle.norm_stats.is_none() {
        bundle.norm_stats = dataset.norm_stats;
    }
    if bundle.gnb_ids.is_empty() {
        bundle.gnb_ids = dataset.gnb_ids.clone();
    }
    let bsz = bundle.config.batch_size.min(rows.len());
    let interval = bundle.config.eval_interval;
    let mut acc = StepMetrics::default();
    let mut acc_n = 0u64;

    let record = |bundle: &mut GanBundle,
                  acc: &mut StepMetrics,
                  acc_n: &mut u64,
                  hook: &mut Option<&mut dyn TrainHook>|
     -> Result<(), GanError> {
        if bundle.history.last().is_some_and(|h| h.iteration >= bundle.iteration) {
            return Ok(());
        }
        let eval = match hook.as_deref_mut() {
            Some(h) => h.evaluate(bundle)?,
            None => None,
        };
        let losses = if *acc_n > 0 {
            acc.scaled(1.0 / *acc_n as f64)
        } else {
            StepMetrics::default()
        };
        bundle.history.push(HistoryRecord {
            iteration: bundle.iteration,
            losses,
            steps_averaged: *acc_n,
            eval,
        });
        *acc = StepMetrics::default();
        *acc_n = 0;
        Ok(())
    };

    if bundle.config.eval_at_start && n_iterations > 0 {
        record(bundle, &mut acc, &mut acc_n, &mut hook)?;
    }
    for _ in 0..n_iterations {
        let picks = rand::seq::index::sample(&mut bundle.rng.batches, rows.len(), bsz);
        let batch_rows: Vec<usize> = picks.iter().map(|i| rows[i]).collect();
        let batch = Batch::from_rows(dataset, &batch_rows);
        let m = train_step(bundle, &batch)?;
        acc.accumulate(&m);
        acc_n += 1;
        if interval > 0 && bundle.iteration % interval == 0 {
            record(bundle, &mut acc, &mut acc_n, &mut hook)?;
        }
    }
    record(bundle, &mut acc, &mut acc_n, &mut hook)
}

/// Generates normalized RSS (`M x W`) for normalized distance windows in
/// eval mode. The latent draws come from `seed` alone, so equal inputs give
/// equal outputs.
pub fn generate_normalized(bundle: &GanBundle, u: &[f32], labels: &[usize], seed: u64) -> Result<Vec<f32>, GanError> {
    let w = bundle.config.window_w;
    let m = labels.len();
    if u.len() != m * w {
        return Err(GanError::Shape(format!(
            "expected {m}x{w} distances, got {} values",
            u.len()
        )));
    }
    let mut rng = stream(seed, 0);
    let mut out = Vec::with_capacity(m * w);
    // chunks keep attention buffers bounded
    const CHUNK: usize = 64;
    for (uc, lc) in u.chunks(CHUNK * w).zip(labels.chunks(CHUNK)) {
        let z = sample_latent(&mut rng, lc.len() * bundle.config.latent_dim);
        out.extend(bundle.generator.forward(&z, uc, lc, None)?);
    }
    Ok(out)
}

/// Generates RSS in dBm for physical distance windows `u` (`M x W`).
pub fn generate_sequences(bundle: &GanBundle, u: &[f64], labels: &[usize], seed: u64) -> Result<Vec<f64>, GanError> {
    let stats = bundle.norm_stats.ok_or(GanError::MissingNormStats)?;
    let un: Vec<f32> = u.iter().map(|&d| stats.normalize_dist(d) as f32).collect();
    Ok(generate_normalized(bundle, &un, labels, seed)?
        .into_iter()
        .map(|v| stats.denormalize_rss(v as f64))
        .collect())
}
