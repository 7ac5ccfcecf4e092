//! Validation statistics for generated RSS: correlation matrices and the
//! correlation matrix distance (CMD), marginal CDFs with the two-sample KS
//! distance, and binned log-distance trend fits.
//!
//! Everything here works on physical values (dBm, m). Correlation is affine
//! invariant, so only the CDFs depend on that choice.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cgan::{generate_normalized, EvalRecord, GanBundle, GanError, HistoryRecord, TrainHook};
use crate::dataset::SequenceDataset;
use crate::io::write_json;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("zero variance at sequence position {0}")]
    ZeroVariance(usize),
    #[error("need at least 2 realizations, got {0}")]
    TooFewRealizations(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix with zero Frobenius norm")]
    ZeroNorm,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("dataset has no test rows for label {0}")]
    MissingTestSplit(usize),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.data.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Sample correlation matrix of `b` realizations of `w` variables.
///
/// `sequences` is `b x w` row-major; each column is a random variable.
/// Covariance uses the unbiased `b - 1` denominator.
pub fn correlation_matrix(sequences: &[f64], b: usize, w: usize) -> Result<Matrix, MetricsError> {
    if sequences.len() != b * w {
        return Err(MetricsError::Shape(format!(
            "{} values for {b}x{w} sequences",
            sequences.len()
        )));
    }
    if b < 2 {
        return Err(MetricsError::TooFewRealizations(b));
    }
    let mut mean = vec![0.0; w];
    for row in sequences.chunks_exact(w) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= b as f64);
    let centered: Vec<f64> = sequences
        .chunks_exact(w)
        .flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m))
        .collect();
    let mut cov = vec![0.0; w * w];
    for row in centered.chunks_exact(w) {
        for i in 0..w {
            let ri = row[i];
            let dst = &mut cov[i * w..(i + 1) * w];
            for j in i..w {
                dst[j] += ri * row[j];
            }
        }
    }
    let denom = (b - 1) as f64;
    let sd: Vec<f64> = (0..w).map(|i| (cov[i * w + i] / denom).sqrt()).collect();
    if let Some(i) = sd.iter().position(|&s| !(s > 0.0)) {
        return Err(MetricsError::ZeroVariance(i));
    }
    let mut r = vec![0.0; w * w];
    for i in 0..w {
        r[i * w + i] = 1.0;
        for j in i + 1..w {
            let v = (cov[i * w + j] / denom) / (sd[i] * sd[j]);
            r[i * w + j] = v;
            r[j * w + i] = v;
        }
    }
    Ok(Matrix { n: w, data: r })
}

/// Correlation matrix distance `1 - tr(R1 R2) / (|R1|_F |R2|_F)`, clamped
/// to `[0, 1]`.
pub fn cmd(r1: &Matrix, r2: &Matrix) -> Result<f64, MetricsError> {
    if r1.n != r2.n || r1.data.len() != r2.data.len() {
        return Err(MetricsError::Shape(format!("{0}x{0} vs {1}x{1}", r1.n, r2.n)));
    }
    let n1 = r1.frobenius();
    let n2 = r2.frobenius();
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(MetricsError::ZeroNorm);
    }
    // tr(R1 R2) = sum_ij R1_ij R2_ji; the sum runs in a symmetric order so
    // that swapping the arguments gives the same bits
    let n = r1.n;
    let mut tr = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = r1.at(i, j) * r2.at(j, i);
            let b = r2.at(i, j) * r1.at(j, i);
            tr += 0.5 * (a + b);
        }
    }
    Ok((1.0 - tr / (n1 * n2)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// gNB label, `None` for an aggregate over labels.
    pub gnb: Option<usize>,
    pub r_real: Matrix,
    pub r_gen: Matrix,
    pub cmd: f64,
    pub b_used: usize,
}

pub fn correlation_report(
    real: &[f64],
    generated: &[f64],
    b: usize,
    w: usize,
    gnb: Option<usize>,
) -> Result<CorrelationReport, MetricsError> {
    let r_real = correlation_matrix(real, b, w)?;
    let r_gen = correlation_matrix(generated, b, w)?;
    let cmd = cmd(&r_real, &r_gen)?;
    Ok(CorrelationReport {
        gnb,
        r_real,
        r_gen,
        cmd,
        b_used: b,
    })
}

/// Empirical CDFs of two flattened samples on their merged support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfReport {
    /// Sorted distinct values of both samples.
    pub support: Vec<f64>,
    pub cdf_real: Vec<f64>,
    pub cdf_gen: Vec<f64>,
    pub n_real: usize,
    pub n_gen: usize,
    pub ks_distance: f64,
}

impl CdfReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rss_dbm,cdf_real,cdf_generated\n");
        for ((x, a), b) in self.support.iter().zip(&self.cdf_real).zip(&self.cdf_gen) {
            let _ = writeln!(s, "{x},{a},{b}");
        }
        s
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn marginal_cdf_report(real: &[f64], generated: &[f64]) -> Result<CdfReport, MetricsError> {
    if real.is_empty() || generated.is_empty() {
        return Err(MetricsError::Shape("empty sample".into()));
    }
    let a = sorted(real);
    let b = sorted(generated);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut support = Vec::new();
    let mut cdf_real = Vec::new();
    let mut cdf_gen = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut ks = 0.0f64;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let fa = i as f64 / na;
        let fb = j as f64 / nb;
        ks = ks.max((fa - fb).abs());
        support.push(x);
        cdf_real.push(fa);
        cdf_gen.push(fb);
    }
    Ok(CdfReport {
        support,
        cdf_real,
        cdf_gen,
        n_real: a.len(),
        n_gen: b.len(),
        ks_distance: ks,
    })
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    Ok(marginal_cdf_report(a, b)?.ks_distance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendBin {
    pub lo_m: f64,
    pub hi_m: f64,
    pub count: usize,
    pub mean_dbm: f64,
    pub std_dbm: f64,
}

/// Binned RSS statistics and the fit `rss = a - 10 n log10(d / d_ref)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTrend {
    pub bins: Vec<TrendBin>,
    pub exponent: f64,
    /// RSS at the reference distance (dBm).
    pub ref_rss_dbm: f64,
    /// Midpoint of the observed distance range.
    pub d_ref_m: f64,
}

impl DistanceTrend {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo_m,bin_hi_m,count,mean_dbm,std_dbm\n");
        for b in &self.bins {
            let _ = writeln!(s, "{},{},{},{},{}", b.lo_m, b.hi_m, b.count, b.mean_dbm, b.std_dbm);
        }
        s
    }
}

pub fn distance_trend(rss: &[f64], dist: &[f64], n_bins: usize) -> Result<DistanceTrend, MetricsError> {
    if rss.len() != dist.len() {
        return Err(MetricsError::Shape(format!(
            "{} RSS values for {} distances",
            rss.len(),
            dist.len()
        )));
    }
    if n_bins == 0 {
        return Err(MetricsError::Degenerate("zero bins".into()));
    }
    if let Some(d) = dist.iter().find(|&&d| !(d > 0.0)) {
        return Err(MetricsError::Degenerate(format!("non-positive distance {d}")));
    }
    let lo = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(MetricsError::Degenerate("fewer than 2 distinct distances".into()));
    }
    let d_ref = 0.5 * (lo + hi);
    let n = rss.len() as f64;
    let t: Vec<f64> = dist.iter().map(|d| (d / d_ref).log10()).collect();
    let t_mean = t.iter().sum::<f64>() / n;
    let y_mean = rss.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (ti, yi) in t.iter().zip(rss) {
        stt += (ti - t_mean) * (ti - t_mean);
        sty += (ti - t_mean) * (yi - y_mean);
    }
    let slope = sty / stt;
    let a = y_mean - slope * t_mean;

    let width = (hi - lo) / n_bins as f64;
    let mut sum = vec![0.0; n_bins];
    let mut sq = vec![0.0; n_bins];
    let mut cnt = vec![0usize; n_bins];
    for (&d, &y) in dist.iter().zip(rss) {
        let k = (((d - lo) / width) as usize).min(n_bins - 1);
        sum[k] += y;
        sq[k] += y * y;
        cnt[k] += 1;
    }
    let bins = (0..n_bins)
        .map(|k| {
            let c = cnt[k] as f64;
            let mean = if cnt[k] > 0 { sum[k] / c } else { f64::NAN };
            let var = if cnt[k] > 0 {
                (sq[k] / c - mean * mean).max(0.0)
            } else {
                f64::NAN
            };
            TrendBin {
                lo_m: lo + k as f64 * width,
                hi_m: lo + (k + 1) as f64 * width,
                count: cnt[k],
                mean_dbm: mean,
                std_dbm: var.sqrt(),
            }
        })
        .collect();
    Ok(DistanceTrend {
        bins,
        exponent: -slope / 10.0,
        ref_rss_dbm: a,
        d_ref_m: d_ref,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmdPoint {
    pub iteration: u64,
    pub per_gnb: Vec<(usize, f64)>,
    pub mean: f64,
}

/// CMD series from the evaluated history records.
pub fn cmd_curve(history: &[HistoryRecord]) -> Vec<CmdPoint> {
    history
        .iter()
        .filter_map(|h| {
            h.eval.as_ref().map(|e| CmdPoint {
                iteration: h.iteration,
                per_gnb: e.cmd_per_gnb.clone(),
                mean: e.cmd_mean,
            })
        })
        .collect()
}

pub fn cmd_curve_csv(curve: &[CmdPoint]) -> String {
    let labels: Vec<usize> = curve
        .first()
        .map(|p| p.per_gnb.iter().map(|&(g, _)| g).collect())
        .unwrap_or_default();
    let mut s = String::from("iteration");
    for g in &labels {
        let _ = write!(s, ",cmd_gnb{g}");
    }
    s.push_str(",cmd_mean\n");
    for p in curve {
        let _ = write!(s, "{}", p.iteration);
        for (_, v) in &p.per_gnb {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{}", p.mean);
    }
    s
}

/// Real and generated test-split windows of one label, in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub label: usize,
    pub rows: usize,
    pub window_w: usize,
    pub real_dbm: Vec<f64>,
    pub gen_dbm: Vec<f64>,
    pub dist_m: Vec<f64>,
}

/// Generates one sequence per test window of `label` with the window's own
/// distance conditioning. `max_rows` caps the number of windows used.
pub fn test_set(
    bundle: &GanBundle,
    ds: &SequenceDataset,
    label: usize,
    seed: u64,
    max_rows: Option<usize>,
) -> Result<TestSet, MetricsError> {
    let mut rows = ds.test_rows_of(label as u8);
    if let Some(m) = max_rows {
        rows.truncate(m);
    }
    if rows.is_empty() {
        return Err(MetricsError::MissingTestSplit(label));
    }
    let stats = bundle.norm_stats.ok_or(GanError::MissingNormStats)?;
    let w = ds.window_w;
    let u: Vec<f32> = rows.iter().flat_map(|&k| ds.u_row(k).iter().copied()).collect();
    let labels = vec![label; rows.len()];
    let gen = generate_normalized(bundle, &u, &labels, seed)?;
    Ok(TestSet {
        label,
        rows: rows.len(),
        window_w: w,
        real_dbm: ds.physical_x(&rows),
        gen_dbm: gen.iter().map(|&v| stats.denormalize_rss(v as f64)).collect(),
        dist_m: ds.physical_u(&rows),
    })
}

/// Per-label CMD and KS on the test split; usable as a training hook.
#[derive(Debug, Clone)]
pub struct CmdEvaluator<'a> {
    pub dataset: &'a SequenceDataset,
    pub seed: u64,
    pub max_rows: Option<usize>,
}

impl CmdEvaluator<'_> {
    pub fn evaluate_bundle(&self, bundle: &GanBundle) -> Result<EvalRecord, MetricsError> {
        let mut rec = EvalRecord::default();
        for label in 0..self.dataset.n_classes() {
            let t = test_set(bundle, self.dataset, label, self.seed, self.max_rows)?;
            let c = correlation_report(&t.real_dbm, &t.gen_dbm, t.rows, t.window_w, Some(label))?;
            rec.cmd_per_gnb.push((label, c.cmd));
            rec.ks_per_gnb.push((label, ks_distance(&t.real_dbm, &t.gen_dbm)?));
        }
        rec.cmd_mean = rec.cmd_per_gnb.iter().map(|&(_, v)| v).sum::<f64>() / rec.cmd_per_gnb.len() as f64;
        Ok(rec)
    }
}

impl TrainHook for CmdEvaluator<'_> {
    fn evaluate(&mut self, bundle: &GanBundle) -> Result<Option<EvalRecord>, GanError> {
        match self.evaluate_bundle(bundle) {
            Ok(r) => Ok(Some(r)),
            Err(MetricsError::Gan(e)) => Err(e),
            // a generator that collapses to a constant has no correlation
            // structure; score it as maximally distant rather than aborting
            Err(MetricsError::ZeroVariance(_)) => Ok(Some(EvalRecord {
                cmd_per_gnb: (0..self.dataset.n_classes()).map(|g| (g, 1.0)).collect(),
                cmd_mean: 1.0,
                ks_per_gnb: Vec::new(),
            })),
            Err(e) => Err(GanError::Hook(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbEvaluation {
    pub label: usize,
    pub gnb_id: usize,
    pub rows: usize,
    pub cmd: f64,
    pub ks_distance: f64,
    pub trend_real: DistanceTrend,
    pub trend_gen: DistanceTrend,
    #[serde(skip)]
    pub correlation: Option<CorrelationReport>,
    #[serde(skip)]
    pub cdf: Option<CdfReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub iteration: u64,
    pub per_gnb: Vec<GnbEvaluation>,
    pub cmd_mean: f64,
    pub cmd_curve: Vec<CmdPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub seed: u64,
    pub n_bins: usize,
    pub max_rows: Option<usize>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_bins: 20,
            max_rows: None,
        }
    }
}

/// Full test-split evaluation of a trained bundle.
pub fn evaluate(
    bundle: &GanBundle,
    ds: &SequenceDataset,
    cfg: &EvaluateConfig,
) -> Result<EvaluationReport, MetricsError> {
    let mut per_gnb = Vec::new();
    for label in 0..ds.n_classes() {
        let t = test_set(bundle, ds, label, cfg.seed, cfg.max_rows)?;
        let corr = correlation_report(&t.real_dbm, &t.gen_dbm, t.rows, t.window_w, Some(label))?;
        let cdf = marginal_cdf_report(&t.real_dbm, &t.gen_dbm)?;
        per_gnb.push(GnbEvaluation {
            label,
            gnb_id: ds.gnb_ids[label],
            rows: t.rows,
            cmd: corr.cmd,
            ks_distance: cdf.ks_distance,
            trend_real: distance_trend(&t.real_dbm, &t.dist_m, cfg.n_bins)?,
            trend_gen: distance_trend(&t.gen_dbm, &t.dist_m, cfg.n_bins)?,
            correlation: Some(corr),
            cdf: Some(cdf),
        });
    }
    let cmd_mean = per_gnb.iter().map(|g| g.cmd).sum::<f64>() / per_gnb.len() as f64;
    Ok(EvaluationReport {
        iteration: bundle.iteration,
        per_gnb,
        cmd_mean,
        cmd_curve: cmd_curve(&bundle.history),
    })
}

/// Writes CSV tables and `summary.json`; returns the written file names.
pub fn write_report(dir: &Path, report: &EvaluationReport) -> Result<Vec<String>, MetricsError> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), MetricsError> {
        fs::write(dir.join(&name), body)?;
        files.push(name);
        Ok(())
    };
    for g in &report.per_gnb {
        let l = g.label;
        if let Some(c) = &g.cdf {
            put(format!("cdf_gnb{l}.csv"), c.to_csv())?;
        }
        if let Some(c) = &g.correlation {
            put(format!("corr_real_gnb{l}.csv"), c.r_real.to_csv())?;
            put(format!("corr_gen_gnb{l}.csv"), c.r_gen.to_csv())?;
        }
        put(format!("trend_real_gnb{l}.csv"), g.trend_real.to_csv())?;
        put(format!("trend_gen_gnb{l}.csv"), g.trend_gen.to_csv())?;
    }
    put("cmd_history.csv".into(), cmd_curve_csv(&report.cmd_curve))?;
    let mut s = String::from("label,gnb_id,rows,cmd,ks_distance,exponent_real,exponent_gen\n");
    for g in &report.per_gnb {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            g.label, g.gnb_id, g.rows, g.cmd, g.ks_distance, g.trend_real.exponent, g.trend_gen.exponent
        );
    }
    put("metrics.csv".into(), s)?;
    write_json(&dir.join("summary.json"), report)?;
    files.push("summary.json".into());
    Ok(files)
}
