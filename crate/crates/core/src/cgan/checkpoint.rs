//! Binary checkpoint container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "RSSGANCK" | u32 version | u64 header_len | header JSON
//! | f32 arrays: G params, D params, Adam G (m, v), Adam D (m, v)
//! | 32-byte SHA-256 of everything before it
//! ```
//!
//! The header carries the configuration, seed, iteration, history,
//! normalization statistics, Adam scalars, RNG stream positions and the
//! parameter layout, so a loaded bundle resumes bit-identically.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::Adam;
use super::config::GanConfig;
use super::model::{init_discriminator, init_generator, GanBundle, HistoryRecord};
use super::params::{ParamSpec, Params};
use super::rng::{RngState, RngStreams};
use super::GanError;
use crate::dataset::NormStats;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RSSGANCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct AdamScalars {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

impl AdamScalars {
    fn of(a: &Adam) -> Self {
        Self {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            step: a.step,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: GanConfig,
    seed: u64,
    iteration: u64,
    history: Vec<HistoryRecord>,
    norm_stats: Option<NormStats>,
    gnb_ids: Vec<usize>,
    rng: [RngState; 4],
    opt_g: AdamScalars,
    opt_d: AdamScalars,
    generator_layout: Vec<ParamSpec>,
    discriminator_layout: Vec<ParamSpec>,
}

fn push_f32(buf: &mut Vec<u8>, v: &[f32]) {
    buf.reserve(v.len() * 4);
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn to_bytes(bundle: &GanBundle) -> Vec<u8> {
    let header = Header {
        config: bundle.config.clone(),
        seed: bundle.seed,
        iteration: bundle.iteration,
        history: bundle.history.clone(),
        norm_stats: bundle.norm_stats,
        gnb_ids: bundle.gnb_ids.clone(),
        rng: bundle.rng.snapshot(),
        opt_g: AdamScalars::of(&bundle.opt_g),
        opt_d: AdamScalars::of(&bundle.opt_d),
        generator_layout: bundle.generator.params.specs.clone(),
        discriminator_layout: bundle.discriminator.params.specs.clone(),
    };
    let json = serde_json::to_vec(&header).expect("serializable header");
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    push_f32(&mut buf, &bundle.generator.params.values);
    push_f32(&mut buf, &bundle.discriminator.params.values);
    push_f32(&mut buf, &bundle.opt_g.m);
    push_f32(&mut buf, &bundle.opt_g.v);
    push_f32(&mut buf, &bundle.opt_d.m);
    push_f32(&mut buf, &bundle.opt_d.v);
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GanError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| GanError::Corrupt("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, GanError> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

fn restore_adam(s: AdamScalars, m: Vec<f32>, v: Vec<f32>) -> Adam {
    Adam {
        lr: s.lr,
        beta1: s.beta1,
        beta2: s.beta2,
        eps: s.eps,
        step: s.step,
        m,
        v,
    }
}

fn restore_params(
    target: &mut Params<f32>,
    layout: &[ParamSpec],
    values: Vec<f32>,
    what: &str,
) -> Result<(), GanError> {
    if target.specs != layout {
        return Err(GanError::Corrupt(format!(
            "{what} layout does not match its configuration"
        )));
    }
    target.values = values;
    target.zero_grad();
    Ok(())
}

pub fn from_bytes(bytes: &[u8]) -> Result<GanBundle, GanError> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 4 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(GanError::Corrupt("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(GanError::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    if bytes.len() < 12 + 8 + 32 {
        return Err(GanError::Corrupt("truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(GanError::Corrupt("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 12 };
    let hlen = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
    let header: Header =
        serde_json::from_slice(r.take(hlen)?).map_err(|e| GanError::Corrupt(format!("header: {e}")))?;

    let mut generator = init_generator(&header.config, header.seed)?;
    let mut discriminator = init_discriminator(&header.config, header.seed)?;
    let ng = generator.params.len();
    let nd = discriminator.params.len();
    restore_params(
        &mut generator.params,
        &header.generator_layout,
        r.f32s(ng)?,
        "generator",
    )?;
    restore_params(
        &mut discriminator.params,
        &header.discriminator_layout,
        r.f32s(nd)?,
        "discriminator",
    )?;
    let opt_g = restore_adam(header.opt_g, r.f32s(ng)?, r.f32s(ng)?);
    let opt_d = restore_adam(header.opt_d, r.f32s(nd)?, r.f32s(nd)?);
    if r.pos != body.len() {
        return Err(GanError::Corrupt(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(GanBundle {
        config: header.config,
        seed: header.seed,
        generator,
        discriminator,
        opt_g,
        opt_d,
        iteration: header.iteration,
        history: header.history,
        norm_stats: header.norm_stats,
        gnb_ids: header.gnb_ids,
        rng: RngStreams::restore(&header.rng),
    })
}

pub fn save_checkpoint(path: &Path, bundle: &GanBundle) -> Result<(), GanError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    // write-then-rename so an interrupted save never leaves a torn file
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, to_bytes(bundle))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<GanBundle, GanError> {
    from_bytes(&fs::read(path)?)
}
