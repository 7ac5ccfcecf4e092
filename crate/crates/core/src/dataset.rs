//! Training corpus `(X, U, c)`: RSS windows, distance windows and gNB labels.
//!
//! Full-trajectory sequences are read off the power maps, cut into fixed
//! windows, split by source trajectory, optionally augmented with smoothed
//! copies (train split only), and normalized with train-split statistics.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point3;
use crate::io::{read_f32, write_f32, write_json};
use crate::scene::{PowerMap, Scene};
use crate::trajectories::{distance_sequence, Trajectory};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("waypoint {index} at ({x:.2}, {y:.2}) lies outside the power-map grid")]
    OutsideGrid { index: usize, x: f64, y: f64 },
    #[error("kernel size {kernel} invalid for a sequence of length {len}")]
    Kernel { kernel: usize, len: usize },
    #[error("test fraction {0} outside (0, 1)")]
    TestFraction(f64),
    #[error("need at least 2 source trajectories to split, got {0}")]
    TooFewTrajectories(usize),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("no power map for gNB {0}")]
    MissingMap(usize),
    #[error("invalid dataset configuration: {0}")]
    Config(String),
    #[error("dataset bundle format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("dataset bundle inconsistent: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Bilinear,
    Nearest,
}

/// RSS and distance sequences along one trajectory for one gNB.
pub fn extract_sequences(
    trajectory: &Trajectory,
    map: &PowerMap,
    gnb_position: &Point3,
    sampling: Sampling,
) -> Result<(Vec<f64>, Vec<f64>), DatasetError> {
    let rss = trajectory
        .waypoints
        .iter()
        .enumerate()
        .map(|(i, p)| {
            sample_map(map, p.x, p.y, sampling).ok_or(DatasetError::OutsideGrid {
                index: i,
                x: p.x,
                y: p.y,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((rss, distance_sequence(trajectory, gnb_position)))
}

/// Map value at `(x, y)`, or `None` outside the area the map covers.
///
/// Nodes sit at cell centres, so points in the outer half cell take the value
/// of the nearest edge of the lattice.
pub fn sample_map(map: &PowerMap, x: f64, y: f64, sampling: Sampling) -> Option<f64> {
    let fc = (x - map.origin.0) / map.spacing_m;
    let fr = (y - map.origin.1) / map.spacing_m;
    let max_c = (map.cols - 1) as f64;
    let max_r = (map.rows - 1) as f64;
    const TOL: f64 = 0.5 + 1e-9;
    if !(fc >= -TOL && fc <= max_c + TOL && fr >= -TOL && fr <= max_r + TOL) {
        return None;
    }
    let fc = fc.clamp(0.0, max_c);
    let fr = fr.clamp(0.0, max_r);
    match sampling {
        Sampling::Nearest => Some(map.at(fr.round() as usize, fc.round() as usize)),
        Sampling::Bilinear => {
            let c0 = (fc.floor() as usize).min(map.cols.saturating_sub(2));
            let r0 = (fr.floor() as usize).min(map.rows.saturating_sub(2));
            let c1 = (c0 + 1).min(map.cols - 1);
            let r1 = (r0 + 1).min(map.rows - 1);
            let tx = fc - c0 as f64;
            let ty = fr - r0 as f64;
            let top = map.at(r0, c0) * (1.0 - tx) + map.at(r0, c1) * tx;
            let bot = map.at(r1, c0) * (1.0 - tx) + map.at(r1, c1) * tx;
            Some(top * (1.0 - ty) + bot * ty)
        }
    }
}

/// Start offsets of the windows `[i, i + w)` for `i = 0, stride, ...`.
pub fn window_starts(len: usize, w: usize, stride: usize) -> Vec<usize> {
    if len < w || w == 0 || stride == 0 {
        return Vec::new();
    }
    (0..=(len - w) / stride).map(|k| k * stride).collect()
}

/// Sliding windows of `x` and `u`; trailing partial windows are dropped.
pub fn window_sequences(x: &[f64], u: &[f64], w: usize, stride: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    window_starts(x.len().min(u.len()), w, stride)
        .into_iter()
        .map(|i| (x[i..i + w].to_vec(), u[i..i + w].to_vec()))
        .collect()
}

/// Flat-kernel moving average with symmetric (edge-repeating) reflection so
/// the output keeps the input length.
///
/// Output `i` averages inputs `i - k/2 ..= i + k - 1 - k/2`.
pub fn augment_convolve(x: &[f64], kernel_size: usize) -> Result<Vec<f64>, DatasetError> {
    let n = x.len();
    if kernel_size == 0 || kernel_size > n {
        return Err(DatasetError::Kernel {
            kernel: kernel_size,
            len: n,
        });
    }
    let left = kernel_size / 2;
    let at = |j: isize| -> f64 {
        let n = n as isize;
        let m = j.rem_euclid(2 * n);
        x[if m < n { m } else { 2 * n - 1 - m } as usize]
    };
    let inv = 1.0 / kernel_size as f64;
    Ok((0..n as isize)
        .map(|i| {
            let start = i - left as isize;
            (start..start + kernel_size as isize).map(at).sum::<f64>() * inv
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Trajectory ids assigned to the test split: `round(fraction * n)` of them,
/// at least one and at most `n - 1`.
pub fn split_dataset(trajectory_ids: &[u32], test_fraction: f64, seed: u64) -> Result<BTreeSet<u32>, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::TestFraction(test_fraction));
    }
    let mut ids: Vec<u32> = trajectory_ids
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ids.len() < 2 {
        return Err(DatasetError::TooFewTrajectories(ids.len()));
    }
    let n_test = ((test_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    Ok(ids.into_iter().take(n_test).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub rss_mean: f64,
    pub rss_std: f64,
    pub dist_mean: f64,
    pub dist_std: f64,
}

impl NormStats {
    pub fn normalize_rss(&self, v: f64) -> f64 {
        (v - self.rss_mean) / self.rss_std
    }
    pub fn denormalize_rss(&self, v: f64) -> f64 {
        v * self.rss_std + self.rss_mean
    }
    pub fn normalize_dist(&self, v: f64) -> f64 {
        (v - self.dist_mean) / self.dist_std
    }
    pub fn denormalize_dist(&self, v: f64) -> f64 {
        v * self.dist_std + self.dist_mean
    }
}

/// Physical value recovered from a normalized one.
pub fn denormalize(values: &[f64], mean: f64, std: f64) -> Vec<f64> {
    values.iter().map(|v| v * std + mean).collect()
}

/// Provenance of one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub trajectory: u32,
    pub offset: u32,
    pub split: Split,
    pub augmented: bool,
}

/// Windows in physical units (dBm, m), before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWindows {
    pub window_w: usize,
    /// Scene gNB id of every class label.
    pub gnb_ids: Vec<usize>,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub c: Vec<u8>,
    pub meta: Vec<RowMeta>,
}

impl RawWindows {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn x_row(&self, k: usize) -> &[f64] {
        &self.x[k * self.window_w..(k + 1) * self.window_w]
    }

    pub fn u_row(&self, k: usize) -> &[f64] {
        &self.u[k * self.window_w..(k + 1) * self.window_w]
    }

    fn push(&mut self, x: &[f64], u: &[f64], c: u8, meta: RowMeta) {
        self.x.extend_from_slice(x);
        self.u.extend_from_slice(u);
        self.c.push(c);
        self.meta.push(meta);
    }
}

/// Appends a smoothed copy of every non-augmented train row.
pub fn augment_train(raw: &mut RawWindows, kernel_size: usize) -> Result<usize, DatasetError> {
    let originals: Vec<usize> = (0..raw.len())
        .filter(|&k| raw.meta[k].split == Split::Train && !raw.meta[k].augmented)
        .collect();
    for &k in &originals {
        let xs = augment_convolve(raw.x_row(k), kernel_size)?;
        let u = raw.u_row(k).to_vec();
        let meta = RowMeta {
            augmented: true,
            ..raw.meta[k]
        };
        let c = raw.c[k];
        raw.push(&xs, &u, c, meta);
    }
    Ok(originals.len())
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Normalized dataset ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub window_w: usize,
    pub gnb_ids: Vec<usize>,
    /// `K x W` normalized RSS.
    pub x: Vec<f32>,
    /// `K x W` normalized distances.
    pub u: Vec<f32>,
    pub c: Vec<u8>,
    pub meta: Vec<RowMeta>,
    pub norm_stats: Option<NormStats>,
    pub scene_hash: String,
    /// Source sequences shorter than one window (no rows produced).
    pub short_sequences: usize,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.gnb_ids.len()
    }

    pub fn x_row(&self, k: usize) -> &[f32] {
        &self.x[k * self.window_w..(k + 1) * self.window_w]
    }

    pub fn u_row(&self, k: usize) -> &[f32] {
        &self.u[k * self.window_w..(k + 1) * self.window_w]
    }

    pub fn rows_in(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.meta[k].split == split).collect()
    }

    /// Test rows (never augmented) of one class.
    pub fn test_rows_of(&self, label: u8) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.meta[k].split == Split::Test && !self.meta[k].augmented && self.c[k] == label)
            .collect()
    }

    fn stats(&self) -> NormStats {
        self.norm_stats.unwrap_or(NormStats {
            rss_mean: 0.0,
            rss_std: 1.0,
            dist_mean: 0.0,
            dist_std: 1.0,
        })
    }

    /// RSS rows in dBm.
    pub fn physical_x(&self, rows: &[usize]) -> Vec<f64> {
        let s = self.stats();
        rows.iter()
            .flat_map(|&k| self.x_row(k).iter().map(move |&v| s.denormalize_rss(v as f64)))
            .collect()
    }

    /// Distance rows in metres.
    pub fn physical_u(&self, rows: &[usize]) -> Vec<f64> {
        let s = self.stats();
        rows.iter()
            .flat_map(|&k| self.u_row(k).iter().map(move |&v| s.denormalize_dist(v as f64)))
            .collect()
    }

    pub fn to_raw(&self) -> RawWindows {
        let all: Vec<usize> = (0..self.len()).collect();
        RawWindows {
            window_w: self.window_w,
            gnb_ids: self.gnb_ids.clone(),
            x: self.physical_x(&all),
            u: self.physical_u(&all),
            c: self.c.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn summary(&self) -> DatasetSummary {
        let count = |split: Split, aug: bool| {
            self.meta
                .iter()
                .filter(|m| m.split == split && m.augmented == aug)
                .count()
        };
        let trajs = |split: Split| {
            self.meta
                .iter()
                .filter(|m| m.split == split)
                .map(|m| m.trajectory)
                .collect::<BTreeSet<_>>()
                .len()
        };
        DatasetSummary {
            rows: self.len(),
            window_w: self.window_w,
            n_classes: self.n_classes(),
            gnb_ids: self.gnb_ids.clone(),
            train_rows: count(Split::Train, false),
            train_augmented_rows: count(Split::Train, true),
            test_rows: count(Split::Test, false),
            train_trajectories: trajs(Split::Train),
            test_trajectories: trajs(Split::Test),
            rows_per_class: (0..self.n_classes())
                .map(|c| self.c.iter().filter(|&&v| v as usize == c).count())
                .collect(),
            short_sequences: self.short_sequences,
            norm_stats: self.norm_stats,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub window_w: usize,
    pub n_classes: usize,
    pub gnb_ids: Vec<usize>,
    pub train_rows: usize,
    pub train_augmented_rows: usize,
    pub test_rows: usize,
    pub train_trajectories: usize,
    pub test_trajectories: usize,
    pub rows_per_class: Vec<usize>,
    pub short_sequences: usize,
    pub norm_stats: Option<NormStats>,
}

/// Affine normalization with statistics of the train split only.
pub fn normalize(raw: &RawWindows, scene_hash: &str) -> Result<SequenceDataset, DatasetError> {
    let w = raw.window_w;
    let train: Vec<usize> = (0..raw.len()).filter(|&k| raw.meta[k].split == Split::Train).collect();
    if train.is_empty() {
        return Err(DatasetError::EmptySplit("train"));
    }
    let (rss_mean, rss_std) = mean_std(train.iter().flat_map(|&k| raw.x[k * w..(k + 1) * w].iter().copied()));
    let (dist_mean, dist_std) = mean_std(train.iter().flat_map(|&k| raw.u[k * w..(k + 1) * w].iter().copied()));
    if !(rss_std > 0.0) {
        return Err(DatasetError::ZeroVariance("RSS"));
    }
    if !(dist_std > 0.0) {
        return Err(DatasetError::ZeroVariance("distance"));
    }
    let stats = NormStats {
        rss_mean,
        rss_std,
        dist_mean,
        dist_std,
    };
    Ok(SequenceDataset {
        window_w: w,
        gnb_ids: raw.gnb_ids.clone(),
        x: raw.x.iter().map(|&v| stats.normalize_rss(v) as f32).collect(),
        u: raw.u.iter().map(|&v| stats.normalize_dist(v) as f32).collect(),
        c: raw.c.clone(),
        meta: raw.meta.clone(),
        norm_stats: Some(stats),
        scene_hash: scene_hash.to_string(),
        short_sequences: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub window_w: usize,
    pub stride: usize,
    pub test_fraction: f64,
    pub augment: bool,
    pub kernel_size: usize,
    /// Scene gNBs to include, in label order. Empty means all.
    pub gnb_ids: Vec<usize>,
    pub sampling: Sampling,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            window_w: 128,
            stride: 64,
            test_fraction: 0.2,
            augment: false,
            kernel_size: 20,
            gnb_ids: Vec::new(),
            sampling: Sampling::Bilinear,
            seed: 0,
        }
    }
}

/// Unnormalized windows for every (trajectory, gNB) pair, split by trajectory.
pub fn build_windows(
    scene: &Scene,
    maps: &[PowerMap],
    trajectories: &[Trajectory],
    config: &DatasetConfig,
) -> Result<(RawWindows, usize), DatasetError> {
    if config.window_w == 0 || config.stride == 0 {
        return Err(DatasetError::Config("window and stride must be positive".into()));
    }
    let gnb_ids: Vec<usize> = if config.gnb_ids.is_empty() {
        (0..scene.n_gnbs()).collect()
    } else {
        config.gnb_ids.clone()
    };
    if gnb_ids.len() > u8::MAX as usize + 1 {
        return Err(DatasetError::Config("at most 256 gNB classes".into()));
    }
    let ids: Vec<u32> = trajectories.iter().map(|t| t.id).collect();
    let test = split_dataset(&ids, config.test_fraction, config.seed)?;
    let mut raw = RawWindows {
        window_w: config.window_w,
        gnb_ids: gnb_ids.clone(),
        x: Vec::new(),
        u: Vec::new(),
        c: Vec::new(),
        meta: Vec::new(),
    };
    let mut short = 0;
    for t in trajectories {
        let split = if test.contains(&t.id) {
            Split::Test
        } else {
            Split::Train
        };
        for (label, &g) in gnb_ids.iter().enumerate() {
            let gnb = scene.gnbs.get(g).ok_or(DatasetError::MissingMap(g))?;
            let map = maps.iter().find(|m| m.gnb_id == g).ok_or(DatasetError::MissingMap(g))?;
            let (x, u) = extract_sequences(t, map, &gnb.position, config.sampling)?;
            let starts = window_starts(x.len(), config.window_w, config.stride);
            if starts.is_empty() {
                short += 1;
            }
            for s in starts {
                raw.push(
                    &x[s..s + config.window_w],
                    &u[s..s + config.window_w],
                    label as u8,
                    RowMeta {
                        trajectory: t.id,
                        offset: s as u32,
                        split,
                        augmented: false,
                    },
                );
            }
        }
    }
    if config.augment {
        augment_train(&mut raw, config.kernel_size)?;
    }
    Ok((raw, short))
}

pub fn build_dataset(
    scene: &Scene,
    maps: &[PowerMap],
    trajectories: &[Trajectory],
    config: &DatasetConfig,
) -> Result<SequenceDataset, DatasetError> {
    let (raw, short) = build_windows(scene, maps, trajectories, config)?;
    let mut ds = normalize(&raw, &scene.hash())?;
    ds.short_sequences = short;
    Ok(ds)
}

/// Adds smoothed train copies to an already normalized dataset and
/// renormalizes with the enlarged train split.
pub fn augment_dataset(ds: &SequenceDataset, kernel_size: usize) -> Result<SequenceDataset, DatasetError> {
    let mut raw = ds.to_raw();
    augment_train(&mut raw, kernel_size)?;
    let mut out = normalize(&raw, &ds.scene_hash)?;
    out.short_sequences = ds.short_sequences;
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    format_version: u32,
    k: usize,
    window_w: usize,
    n_classes: usize,
    gnb_ids: Vec<usize>,
    norm_stats: Option<NormStats>,
    source_scene_hash: String,
    short_sequences: usize,
    rows: Vec<RowMeta>,
    files: BundleFiles,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleFiles {
    x: String,
    u: String,
    c: String,
}

pub fn save_dataset(dir: &Path, ds: &SequenceDataset) -> Result<(), DatasetError> {
    fs::create_dir_all(dir)?;
    write_f32(&dir.join("X.f32"), ds.x.iter().copied())?;
    write_f32(&dir.join("U.f32"), ds.u.iter().copied())?;
    fs::write(dir.join("c.u8"), &ds.c)?;
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        k: ds.len(),
        window_w: ds.window_w,
        n_classes: ds.n_classes(),
        gnb_ids: ds.gnb_ids.clone(),
        norm_stats: ds.norm_stats,
        source_scene_hash: ds.scene_hash.clone(),
        short_sequences: ds.short_sequences,
        rows: ds.meta.clone(),
        files: BundleFiles {
            x: "X.f32".into(),
            u: "U.f32".into(),
            c: "c.u8".into(),
        },
    };
    write_json(&dir.join("dataset.json"), &manifest)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<SequenceDataset, DatasetError> {
    let m: DatasetManifest = serde_json::from_str(&fs::read_to_string(dir.join("dataset.json"))?)?;
    if m.format_version != DATASET_FORMAT_VERSION {
        return Err(DatasetError::Version {
            found: m.format_version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    if m.rows.len() != m.k || m.gnb_ids.len() != m.n_classes {
        return Err(DatasetError::Corrupt("row or class counts disagree".into()));
    }
    let n = m.k * m.window_w;
    let x = read_f32(&dir.join(&m.files.x), n).map_err(|e| DatasetError::Corrupt(e.to_string()))?;
    let u = read_f32(&dir.join(&m.files.u), n).map_err(|e| DatasetError::Corrupt(e.to_string()))?;
    let c = fs::read(dir.join(&m.files.c))?;
    if c.len() != m.k {
        return Err(DatasetError::Corrupt(format!("{} labels for {} rows", c.len(), m.k)));
    }
    if let Some(&bad) = c.iter().find(|&&v| v as usize >= m.n_classes) {
        return Err(DatasetError::Corrupt(format!("label {bad} >= {} classes", m.n_classes)));
    }
    Ok(SequenceDataset {
        window_w: m.window_w,
        gnb_ids: m.gnb_ids,
        x,
        u,
        c,
        meta: m.rows,
        norm_stats: m.norm_stats,
        scene_hash: m.source_scene_hash,
        short_sequences: m.short_sequences,
    })
}
