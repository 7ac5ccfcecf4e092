//! System-level use of a trained generator: RSS for the serving and
//! interfering gNBs along sampled UAV trajectories, SINR traces and
//! hysteresis-based cell reselection.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cgan::{generate_sequences, GanBundle, GanError};
use crate::dataset::window_starts;
use crate::io::write_json;
use crate::scene::Scene;
use crate::trajectories::{distance_sequence, generate_trajectories, Trajectory, TrajectoryConfig, TrajectoryError};

#[derive(Debug, thiserror::Error)]
pub enum SysevalError {
    #[error("bundle has not been trained")]
    Untrained,
    #[error("no gNBs to simulate")]
    NoGnbs,
    #[error("bundle label {label} refers to gNB {gnb}, absent from the scene")]
    UnknownGnb { label: usize, gnb: usize },
    #[error("trajectory {id} has {len} waypoints, shorter than the window {window}")]
    ShortTrajectory { id: u32, len: usize, window: usize },
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// SINR to throughput mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMapping {
    /// `bandwidth * log2(1 + SINR)`.
    Shannon { bandwidth_hz: f64 },
    /// Step table of `(min SINR dB, rate)` sorted by threshold; below the
    /// first threshold the rate is 0.
    Table { steps: Vec<(f64, f64)> },
}

impl Default for RateMapping {
    fn default() -> Self {
        RateMapping::Shannon { bandwidth_hz: 1.0 }
    }
}

impl RateMapping {
    pub fn rate(&self, sinr_db: f64) -> f64 {
        match self {
            RateMapping::Shannon { bandwidth_hz } => bandwidth_hz * (1.0 + db_to_lin(sinr_db)).log2(),
            RateMapping::Table { steps } => steps
                .iter()
                .take_while(|(th, _)| sinr_db >= *th)
                .last()
                .map_or(0.0, |&(_, r)| r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SysevalConfig {
    pub n_trajectories: usize,
    pub noise_dbm: f64,
    pub hysteresis_db: f64,
    /// Window stride for stitching; 0 means half a window.
    pub stride: usize,
    pub seed: u64,
    pub trajectory: TrajectoryConfig,
    pub rate: RateMapping,
}

impl Default for SysevalConfig {
    fn default() -> Self {
        Self {
            n_trajectories: 100,
            noise_dbm: -94.0,
            hysteresis_db: 3.0,
            stride: 0,
            seed: 0,
            trajectory: TrajectoryConfig::default(),
            rate: RateMapping::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSetTrace {
    pub trajectory_id: u32,
    pub gnb_ids: Vec<usize>,
    /// Per-label RSS over the whole trajectory (dBm).
    pub rss_dbm: Vec<Vec<f64>>,
    pub serving: Vec<usize>,
    pub sinr_db: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub rate: Vec<f64>,
    pub handovers: Vec<usize>,
    pub step_m: f64,
}

impl LinkSetTrace {
    pub fn len(&self) -> usize {
        self.serving.len()
    }

    pub fn is_empty(&self) -> bool {
        self.serving.is_empty()
    }

    pub fn path_length_m(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.step_m
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step");
        for g in &self.gnb_ids {
            let _ = write!(s, ",rss_gnb{g}");
        }
        s.push_str(",serving_gnb,sinr_db,snr_db,rate\n");
        for n in 0..self.len() {
            let _ = write!(s, "{n}");
            for r in &self.rss_dbm {
                let _ = write!(s, ",{}", r[n]);
            }
            let _ = writeln!(
                s,
                ",{},{},{},{}",
                self.gnb_ids[self.serving[n]], self.sinr_db[n], self.snr_db[n], self.rate[n]
            );
        }
        s
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Window offsets covering `len` steps: regular strides plus a final window
/// aligned to the end when the strides leave a tail.
pub fn cover_starts(len: usize, w: usize, stride: usize) -> Vec<usize> {
    let mut s = window_starts(len, w, stride);
    if let Some(&last) = s.last() {
        if last + w < len {
            s.push(len - w);
        }
    }
    s
}

/// Mean of overlapping window values at every step.
pub fn stitch(len: usize, w: usize, starts: &[usize], windows: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; len];
    let mut cnt = vec![0u32; len];
    for (k, &s) in starts.iter().enumerate() {
        for i in 0..w {
            sum[s + i] += windows[k * w + i];
            cnt[s + i] += 1;
        }
    }
    sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect()
}

/// Strongest-cell selection with hysteresis.
///
/// The first serving cell is the strongest at step 0 (lowest label on ties).
/// At later steps the serving cell switches to the strongest competitor iff
/// that competitor is strictly stronger and leads by at least `hysteresis_db`.
/// Returns the serving label per step and the handover steps.
pub fn select_cells(rss: &[Vec<f64>], hysteresis_db: f64) -> (Vec<usize>, Vec<usize>) {
    let c = rss.len();
    let n = rss.first().map_or(0, Vec::len);
    if c == 0 || n == 0 {
        return (Vec::new(), Vec::new());
    }
    let best_excluding = |step: usize, skip: Option<usize>| -> Option<usize> {
        (0..c)
            .filter(|&i| Some(i) != skip)
            .fold(None, |acc: Option<usize>, i| match acc {
                Some(j) if rss[j][step] >= rss[i][step] => Some(j),
                _ => Some(i),
            })
    };
    let mut serving = Vec::with_capacity(n);
    let mut handovers = Vec::new();
    let mut s = best_excluding(0, None).unwrap();
    serving.push(s);
    for step in 1..n {
        if let Some(j) = best_excluding(step, Some(s)) {
            let lead = rss[j][step] - rss[s][step];
            if lead > 0.0 && lead >= hysteresis_db {
                s = j;
                handovers.push(step);
            }
        }
        serving.push(s);
    }
    (serving, handovers)
}

/// SINR of the serving cell against all others plus noise, and the SNR.
///
/// `SINR <= SNR` holds exactly: the interference-plus-noise level is never
/// below the noise level.
pub fn sinr_trace(rss: &[Vec<f64>], serving: &[usize], noise_dbm: f64) -> (Vec<f64>, Vec<f64>) {
    let n0 = db_to_lin(noise_dbm);
    serving
        .iter()
        .enumerate()
        .map(|(step, &s)| {
            let interference: f64 = rss
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != s)
                .map(|(_, r)| db_to_lin(r[step]))
                .sum();
            let floor = if interference > 0.0 {
                lin_to_db(interference + n0).max(noise_dbm)
            } else {
                noise_dbm
            };
            let sig = rss[s][step];
            (sig - floor, sig - noise_dbm)
        })
        .unzip()
}

/// Builds a trace from per-label RSS sequences.
pub fn link_trace(
    trajectory_id: u32,
    gnb_ids: Vec<usize>,
    rss_dbm: Vec<Vec<f64>>,
    step_m: f64,
    cfg: &SysevalConfig,
) -> LinkSetTrace {
    let (serving, handovers) = select_cells(&rss_dbm, cfg.hysteresis_db);
    let (sinr_db, snr_db) = sinr_trace(&rss_dbm, &serving, cfg.noise_dbm);
    let rate = sinr_db.iter().map(|&s| cfg.rate.rate(s)).collect();
    LinkSetTrace {
        trajectory_id,
        gnb_ids,
        rss_dbm,
        serving,
        sinr_db,
        snr_db,
        rate,
        handovers,
        step_m,
    }
}

/// Generated RSS of one label along a full trajectory.
pub fn generate_along(
    bundle: &GanBundle,
    distances: &[f64],
    label: usize,
    stride: usize,
    seed: u64,
) -> Result<Vec<f64>, GanError> {
    let w = bundle.config.window_w;
    let starts = cover_starts(distances.len(), w, stride.max(1));
    let u: Vec<f64> = starts
        .iter()
        .flat_map(|&s| distances[s..s + w].iter().copied())
        .collect();
    let labels = vec![label; starts.len()];
    let x = generate_sequences(bundle, &u, &labels, seed)?;
    Ok(stitch(distances.len(), w, &starts, &x))
}

/// Simulates every trajectory against every gNB the bundle was trained on.
pub fn simulate_trajectories(
    scene: &Scene,
    bundle: &GanBundle,
    trajectories: &[Trajectory],
    cfg: &SysevalConfig,
) -> Result<Vec<LinkSetTrace>, SysevalError> {
    if bundle.iteration == 0 {
        return Err(SysevalError::Untrained);
    }
    let n_classes = bundle.config.n_classes;
    if n_classes == 0 {
        return Err(SysevalError::NoGnbs);
    }
    let gnb_ids: Vec<usize> = if bundle.gnb_ids.is_empty() {
        (0..n_classes).collect()
    } else {
        bundle.gnb_ids.clone()
    };
    let mut positions = Vec::with_capacity(gnb_ids.len());
    for (label, &g) in gnb_ids.iter().enumerate() {
        let gnb = scene.gnbs.get(g).ok_or(SysevalError::UnknownGnb { label, gnb: g })?;
        positions.push(gnb.position);
    }
    let w = bundle.config.window_w;
    let stride = if cfg.stride == 0 { (w / 2).max(1) } else { cfg.stride };
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    seeds.set_stream(7);
    let mut traces = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        if t.len() < w {
            return Err(SysevalError::ShortTrajectory {
                id: t.id,
                len: t.len(),
                window: w,
            });
        }
        let mut rss = Vec::with_capacity(positions.len());
        for (label, pos) in positions.iter().enumerate() {
            let d = distance_sequence(t, pos);
            rss.push(generate_along(bundle, &d, label, stride, seeds.random())?);
        }
        traces.push(link_trace(t.id, gnb_ids.clone(), rss, t.step_m, cfg));
    }
    Ok(traces)
}

/// Samples `cfg.n_trajectories` trajectories and simulates them.
pub fn simulate_links(
    scene: &Scene,
    bundle: &GanBundle,
    cfg: &SysevalConfig,
) -> Result<Vec<LinkSetTrace>, SysevalError> {
    if bundle.iteration == 0 {
        return Err(SysevalError::Untrained);
    }
    let trajs = generate_trajectories(scene, &cfg.trajectory, cfg.n_trajectories, cfg.seed)?;
    simulate_trajectories(scene, bundle, &trajs, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverStats {
    pub count: usize,
    /// Mean number of steps between consecutive handovers.
    pub mean_steps_between: Option<f64>,
    /// Fraction of steps served by each label.
    pub occupancy: Vec<f64>,
}

pub fn handover_stats(trace: &LinkSetTrace, hysteresis_db: f64) -> HandoverStats {
    let (serving, handovers) = select_cells(&trace.rss_dbm, hysteresis_db);
    let mut occ = vec![0.0; trace.rss_dbm.len()];
    for &s in &serving {
        occ[s] += 1.0;
    }
    let n = serving.len().max(1) as f64;
    occ.iter_mut().for_each(|o| *o /= n);
    let mean_steps_between = (handovers.len() >= 2).then(|| {
        let gaps: Vec<f64> = handovers.windows(2).map(|p| (p[1] - p[0]) as f64).collect();
        gaps.iter().sum::<f64>() / gaps.len() as f64
    });
    HandoverStats {
        count: handovers.len(),
        mean_steps_between,
        occupancy: occ,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n_traces: usize,
    pub hysteresis_db: f64,
    pub noise_dbm: f64,
    pub total_handovers: usize,
    pub total_length_km: f64,
    pub handovers_per_km: f64,
    pub sinr_p5_db: f64,
    pub sinr_p50_db: f64,
    pub sinr_p95_db: f64,
    pub mean_rate: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

pub fn summarize(traces: &[LinkSetTrace], cfg: &SysevalConfig) -> SimulationSummary {
    let total_handovers: usize = traces.iter().map(|t| t.handovers.len()).sum();
    let total_length_km = traces.iter().map(LinkSetTrace::path_length_m).sum::<f64>() / 1000.0;
    let mut sinr: Vec<f64> = traces.iter().flat_map(|t| t.sinr_db.iter().copied()).collect();
    sinr.sort_by(f64::total_cmp);
    let n_steps: usize = traces.iter().map(LinkSetTrace::len).sum();
    let mean_rate = traces.iter().flat_map(|t| t.rate.iter()).sum::<f64>() / n_steps.max(1) as f64;
    SimulationSummary {
        n_traces: traces.len(),
        hysteresis_db: cfg.hysteresis_db,
        noise_dbm: cfg.noise_dbm,
        total_handovers,
        total_length_km,
        handovers_per_km: if total_length_km > 0.0 {
            total_handovers as f64 / total_length_km
        } else {
            0.0
        },
        sinr_p5_db: percentile(&sinr, 0.05),
        sinr_p50_db: percentile(&sinr, 0.5),
        sinr_p95_db: percentile(&sinr, 0.95),
        mean_rate,
    }
}

/// Writes one CSV per trace and `summary.json`; returns the file names.
pub fn write_simulation(dir: &Path, traces: &[LinkSetTrace], cfg: &SysevalConfig) -> Result<Vec<String>, SysevalError> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for t in traces {
        let name = format!("trace_{:04}.csv", t.trajectory_id);
        fs::write(dir.join(&name), t.to_csv())?;
        files.push(name);
    }
    write_json(&dir.join("summary.json"), &summarize(traces, cfg))?;
    files.push("summary.json".into());
    Ok(files)
}
