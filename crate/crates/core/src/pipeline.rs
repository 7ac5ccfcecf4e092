//! Configuration-driven pipeline: scene, trajectories, dataset, train,
//! evaluate, simulate.
//!
//! Every stage writes into its own directory under the output root together
//! with a `stage.json` stamp. The stamp holds the stage key (a hash of the
//! stage's effective configuration and its upstream keys) and the content
//! hash of every file it wrote. A rerun skips stages whose stamp matches;
//! `strict` turns a mismatch into an error instead of a recomputation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cgan::checkpoint::{load_checkpoint, save_checkpoint};
use crate::cgan::{train, GanBundle, GanConfig, GanError, HistoryRecord};
use crate::dataset::{build_dataset, load_dataset, save_dataset, DatasetConfig, DatasetError};
use crate::io::{json_hash, sha256_file, write_json};
use crate::metrics::{evaluate, write_report, CmdEvaluator, EvaluateConfig, MetricsError};
use crate::scene::{build_scene, compute_power_map, load_scene_bundle, save_scene_bundle, SceneConfig, SceneError};
use crate::syseval::{simulate_links, write_simulation, SysevalConfig, SysevalError};
use crate::trajectories::{generate_trajectories, write_csv, Trajectory, TrajectoryConfig, TrajectoryError};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "RSSGAN_OUTPUT_ROOT";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` needs the `{upstream}` artifact, which is neither produced nor present")]
    MissingArtifact {
        stage: &'static str,
        upstream: &'static str,
    },
    #[error("stage `{stage}`: {reason} (strict mode)")]
    HashMismatch { stage: &'static str, reason: String },
    #[error("override `{0}`: expected `dotted.path=value`")]
    Override(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Syseval(#[from] SysevalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub scene: bool,
    pub trajectories: bool,
    pub dataset: bool,
    pub train: bool,
    pub evaluate: bool,
    pub simulate: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self {
            scene: true,
            trajectories: true,
            dataset: true,
            train: true,
            evaluate: true,
            simulate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerMapConfig {
    pub spacing_m: f64,
    pub height_m: f64,
}

impl Default for PowerMapConfig {
    fn default() -> Self {
        Self {
            spacing_m: 2.0,
            height_m: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryStageConfig {
    pub count: usize,
    pub walk: TrajectoryConfig,
}

impl Default for TrajectoryStageConfig {
    fn default() -> Self {
        Self {
            count: 200,
            walk: TrajectoryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsStageConfig {
    pub evaluate: EvaluateConfig,
    /// Test windows per label used by the in-training CMD hook.
    pub hook_max_rows: Option<usize>,
}

impl Default for MetricsStageConfig {
    fn default() -> Self {
        Self {
            evaluate: EvaluateConfig::default(),
            hook_max_rows: Some(512),
        }
    }
}

/// Existing artifacts used in place of disabled stages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageInputs {
    pub scene: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub name: String,
    /// Root of every random stream; the per-section `seed` fields are
    /// derived from it.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub stages: StageToggles,
    pub inputs: StageInputs,
    pub scene: SceneConfig,
    pub power_map: PowerMapConfig,
    pub trajectories: TrajectoryStageConfig,
    pub dataset: DatasetConfig,
    pub gan: GanConfig,
    pub metrics: MetricsStageConfig,
    pub syseval: SysevalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            seed: 0,
            output_dir: None,
            stages: StageToggles::default(),
            inputs: StageInputs::default(),
            scene: SceneConfig::default(),
            power_map: PowerMapConfig::default(),
            trajectories: TrajectoryStageConfig::default(),
            dataset: DatasetConfig::default(),
            gan: GanConfig::default(),
            metrics: MetricsStageConfig::default(),
            syseval: SysevalConfig::default(),
        }
    }
}

// Offsets separating the per-stage seeds derived from the global one.
const SEED_SCENE: u64 = 0;
const SEED_TRAJECTORIES: u64 = 1;
const SEED_DATASET: u64 = 2;
const SEED_GAN: u64 = 3;
const SEED_EVALUATE: u64 = 4;
const SEED_SYSEVAL: u64 = 5;

fn derive_seed(seed: u64, stage: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stage)
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, PipelineError> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml_string(&self) -> Result<String, PipelineError> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)?;
        let mut table: toml::Table = toml::from_str(&text)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Ok(table.try_into()?)
    }

    pub fn hash(&self) -> String {
        json_hash(self)
    }

    /// Output directory: explicit setting, else `$RSSGAN_OUTPUT_ROOT/<name>`,
    /// else `runs/<name>`.
    pub fn resolve_output_dir(&self) -> PathBuf {
        if let Some(d) = &self.output_dir {
            return d.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(&self.name)
    }

    /// Per-stage configuration with seeds derived from the global seed.
    pub fn effective(&self) -> PipelineConfig {
        let mut c = self.clone();
        c.dataset.seed = derive_seed(self.seed, SEED_DATASET);
        c.metrics.evaluate.seed = derive_seed(self.seed, SEED_EVALUATE);
        c.syseval.seed = derive_seed(self.seed, SEED_SYSEVAL);
        c
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.scene.propagation.validate()?;
        self.trajectories.walk.validate()?;
        self.syseval.trajectory.validate()?;
        if self.trajectories.count < 2 {
            return Err(PipelineError::Config("need at least 2 trajectories to split".into()));
        }
        if !(self.power_map.spacing_m > 0.0) {
            return Err(PipelineError::Config("power-map spacing must be positive".into()));
        }
        if self.dataset.window_w != self.gan.window_w {
            return Err(PipelineError::Config(format!(
                "dataset.window_w = {} but gan.window_w = {}",
                self.dataset.window_w, self.gan.window_w
            )));
        }
        if self.dataset.augment && !(1..=self.dataset.window_w).contains(&self.dataset.kernel_size) {
            return Err(PipelineError::Config(format!(
                "dataset.kernel_size = {} must lie in 1..={} (the window)",
                self.dataset.kernel_size, self.dataset.window_w
            )));
        }
        let n_classes = if self.dataset.gnb_ids.is_empty() {
            self.scene.n_gnbs
        } else {
            self.dataset.gnb_ids.len()
        };
        if n_classes != self.gan.n_classes {
            return Err(PipelineError::Config(format!(
                "dataset selects {n_classes} gNBs but gan.n_classes = {}",
                self.gan.n_classes
            )));
        }
        self.gan.validate()?;
        Ok(())
    }
}

/// Sets `a.b.c = value` in a TOML table. The value is parsed as a TOML
/// literal when possible and taken as a string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), PipelineError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| PipelineError::Override(assignment.to_string()))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(PipelineError::Override(assignment.to_string()));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        cur = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| PipelineError::Override(assignment.to_string()))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
    /// Disabled stage whose existing artifact was used.
    Reused,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub status: StageStatus,
    pub upstream: Vec<String>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub format_version: u32,
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

impl PipelineManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Recompute enabled stages even when their stamps match.
    pub force: bool,
    /// Error out instead of recomputing when a stamp does not match.
    pub strict: bool,
}

const STAMP: &str = "stage.json";

#[derive(Serialize)]
struct KeyInput<'a, C: Serialize> {
    stage: &'a str,
    config: &'a C,
    upstream: &'a [String],
    format: u32,
}

fn stage_key<C: Serialize>(stage: &str, config: &C, upstream: &[String]) -> String {
    json_hash(&KeyInput {
        stage,
        config,
        upstream,
        format: MANIFEST_VERSION,
    })
}

fn list_files(root: &Path, dir: &Path) -> Result<Vec<FileEntry>, PipelineError> {
    let mut out = Vec::new();
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    names.sort();
    for p in names {
        if p.is_dir() {
            out.extend(list_files(root, &p)?);
        } else if p.file_name().is_some_and(|n| n != STAMP) {
            let rel = p.strip_prefix(root).unwrap_or(&p);
            out.push(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: sha256_file(&p)?,
            });
        }
    }
    Ok(out)
}

fn read_stamp(dir: &Path) -> Option<StageRecord> {
    let text = fs::read_to_string(dir.join(STAMP)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Why an existing stamp cannot be reused, or `None` if it can.
fn stamp_problem(root: &Path, stamp: &StageRecord, key: &str) -> Option<String> {
    if stamp.key != key {
        return Some("configuration or upstream artifacts changed".into());
    }
    for f in &stamp.files {
        match sha256_file(&root.join(&f.path)) {
            Ok(h) if h == f.sha256 => {}
            Ok(_) => return Some(format!("{} was modified", f.path)),
            Err(_) => return Some(format!("{} is missing", f.path)),
        }
    }
    None
}

struct Runner {
    root: PathBuf,
    opts: RunOptions,
    stages: Vec<StageRecord>,
}

impl Runner {
    fn dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    /// Runs or skips one stage and returns its key.
    fn stage<C: Serialize>(
        &mut self,
        name: &'static str,
        enabled: bool,
        config: &C,
        upstream: Vec<String>,
        run: impl FnOnce(&Path) -> Result<(), PipelineError>,
    ) -> Result<Option<String>, PipelineError> {
        let dir = self.dir(name);
        let key = stage_key(name, config, &upstream);
        let stamp = read_stamp(&dir);
        if !enabled {
            // a disabled stage contributes its previous artifact, if any
            return Ok(stamp.map(|s| {
                let k = s.key.clone();
                self.stages.push(StageRecord {
                    status: StageStatus::Reused,
                    ..s
                });
                k
            }));
        }
        if !self.opts.force {
            if let Some(s) = &stamp {
                match stamp_problem(&self.root, s, &key) {
                    None => {
                        self.stages.push(StageRecord {
                            status: StageStatus::Skipped,
                            ..s.clone()
                        });
                        return Ok(Some(key));
                    }
                    Some(reason) if self.opts.strict => {
                        return Err(PipelineError::HashMismatch { stage: name, reason })
                    }
                    Some(_) => {}
                }
            }
        }
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        run(&dir)?;
        let record = StageRecord {
            name: name.to_string(),
            key: key.clone(),
            status: StageStatus::Ran,
            upstream,
            files: list_files(&self.root, &dir)?,
        };
        write_json(&dir.join(STAMP), &record)?;
        self.stages.push(record);
        Ok(Some(key))
    }
}

fn require(key: Option<String>, stage: &'static str, upstream: &'static str) -> Result<String, PipelineError> {
    key.ok_or(PipelineError::MissingArtifact { stage, upstream })
}

/// Upstream key of a disabled stage supplied through `inputs`.
fn input_key(path: &Option<PathBuf>) -> Result<Option<(String, PathBuf)>, PipelineError> {
    let Some(p) = path else { return Ok(None) };
    let key = if p.is_dir() {
        json_hash(&list_files(p, p)?)
    } else {
        sha256_file(p)?
    };
    Ok(Some((key, p.clone())))
}

pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>, PipelineError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn history_csv(history: &[HistoryRecord]) -> String {
    let mut s = String::from("iteration,steps,d_ls,d_ce,g_ls,g_ce,cmd_mean\n");
    for h in history {
        let cmd = h.eval.as_ref().map_or(String::new(), |e| e.cmd_mean.to_string());
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            h.iteration, h.steps_averaged, h.losses.d_ls, h.losses.d_ce, h.losses.g_ls, h.losses.g_ce, cmd
        ));
    }
    s
}

/// Executes the enabled stages in order and writes `manifest.json`.
pub fn run_pipeline(config: &PipelineConfig, opts: RunOptions) -> Result<PipelineManifest, PipelineError> {
    config.validate()?;
    let cfg = config.effective();
    let root = config.resolve_output_dir();
    fs::create_dir_all(&root)?;
    let mut r = Runner {
        root: root.clone(),
        opts,
        stages: Vec::new(),
    };
    let st = cfg.stages;

    // scene
    let scene_seed = derive_seed(cfg.seed, SEED_SCENE);
    let scene_cfg = (&cfg.scene, &cfg.power_map, scene_seed);
    let mut scene_key = r.stage("scene", st.scene, &scene_cfg, vec![], |dir| {
        let scene = build_scene(&cfg.scene, scene_seed)?;
        let maps = (0..scene.n_gnbs())
            .map(|g| compute_power_map(&scene, g, cfg.power_map.spacing_m, cfg.power_map.height_m, scene_seed))
            .collect::<Result<Vec<_>, _>>()?;
        save_scene_bundle(dir, &scene, &maps)?;
        Ok(())
    })?;
    let mut scene_dir = r.dir("scene");
    if !st.scene {
        if let Some((k, p)) = input_key(&cfg.inputs.scene)? {
            scene_key = Some(k);
            scene_dir = p;
        }
    }

    // trajectories
    let traj_seed = derive_seed(cfg.seed, SEED_TRAJECTORIES);
    let traj_cfg = (&cfg.trajectories, traj_seed);
    let mut traj_key = if st.trajectories {
        let up = require(scene_key.clone(), "trajectories", "scene")?;
        let sd = scene_dir.clone();
        r.stage("trajectories", true, &traj_cfg, vec![up], |dir| {
            let (scene, _) = load_scene_bundle(&sd)?;
            let t = generate_trajectories(&scene, &cfg.trajectories.walk, cfg.trajectories.count, traj_seed)?;
            write_json(&dir.join("trajectories.json"), &t)?;
            write_csv(&dir.join("trajectories.csv"), &t)?;
            Ok(())
        })?
    } else {
        r.stage("trajectories", false, &traj_cfg, vec![], |_| Ok(()))?
    };
    let mut traj_file = r.dir("trajectories").join("trajectories.json");
    if !st.trajectories {
        if let Some((k, p)) = input_key(&cfg.inputs.trajectories)? {
            traj_key = Some(k);
            traj_file = p;
        }
    }

    // dataset
    let mut ds_key = if st.dataset {
        let up = vec![
            require(scene_key.clone(), "dataset", "scene")?,
            require(traj_key.clone(), "dataset", "trajectories")?,
        ];
        let (sd, tf) = (scene_dir.clone(), traj_file.clone());
        r.stage("dataset", true, &cfg.dataset, up, |dir| {
            let (scene, maps) = load_scene_bundle(&sd)?;
            let trajs = load_trajectories(&tf)?;
            let ds = build_dataset(&scene, &maps, &trajs, &cfg.dataset)?;
            save_dataset(dir, &ds)?;
            write_json(&dir.join("summary.json"), &ds.summary())?;
            Ok(())
        })?
    } else {
        r.stage("dataset", false, &cfg.dataset, vec![], |_| Ok(()))?
    };
    let mut ds_dir = r.dir("dataset");
    if !st.dataset {
        if let Some((k, p)) = input_key(&cfg.inputs.dataset)? {
            ds_key = Some(k);
            ds_dir = p;
        }
    }

    // train
    let gan_seed = derive_seed(cfg.seed, SEED_GAN);
    let train_cfg = (&cfg.gan, gan_seed, cfg.metrics.hook_max_rows, cfg.metrics.evaluate.seed);
    let mut ckpt_key = if st.train {
        let up = vec![require(ds_key.clone(), "train", "dataset")?];
        let dd = ds_dir.clone();
        r.stage("train", true, &train_cfg, up, |dir| {
            let ds = load_dataset(&dd)?;
            let mut bundle = GanBundle::new(cfg.gan.clone(), gan_seed)?;
            let mut hook = CmdEvaluator {
                dataset: &ds,
                seed: cfg.metrics.evaluate.seed,
                max_rows: cfg.metrics.hook_max_rows,
            };
            train(&mut bundle, &ds, Some(&mut hook))?;
            save_checkpoint(&dir.join("checkpoint.bin"), &bundle)?;
            fs::write(dir.join("history.csv"), history_csv(&bundle.history))?;
            Ok(())
        })?
    } else {
        r.stage("train", false, &train_cfg, vec![], |_| Ok(()))?
    };
    let mut ckpt = r.dir("train").join("checkpoint.bin");
    if !st.train {
        if let Some((k, p)) = input_key(&cfg.inputs.checkpoint)? {
            ckpt_key = Some(k);
            ckpt = p;
        }
    }

    // evaluate
    if st.evaluate {
        let up = vec![
            require(ckpt_key.clone(), "evaluate", "train")?,
            require(ds_key.clone(), "evaluate", "dataset")?,
        ];
        let (cp, dd) = (ckpt.clone(), ds_dir.clone());
        r.stage("evaluate", true, &cfg.metrics.evaluate, up, |dir| {
            let bundle = load_checkpoint(&cp)?;
            let ds = load_dataset(&dd)?;
            let report = evaluate(&bundle, &ds, &cfg.metrics.evaluate)?;
            write_report(dir, &report)?;
            Ok(())
        })?;
    } else {
        r.stage("evaluate", false, &cfg.metrics.evaluate, vec![], |_| Ok(()))?;
    }

    // simulate
    if st.simulate {
        let up = vec![
            require(ckpt_key.clone(), "simulate", "train")?,
            require(scene_key.clone(), "simulate", "scene")?,
        ];
        let (cp, sd) = (ckpt.clone(), scene_dir.clone());
        r.stage("simulate", true, &cfg.syseval, up, |dir| {
            let bundle = load_checkpoint(&cp)?;
            let (scene, _) = load_scene_bundle(&sd)?;
            let traces = simulate_links(&scene, &bundle, &cfg.syseval)?;
            write_simulation(dir, &traces, &cfg.syseval)?;
            Ok(())
        })?;
    } else {
        r.stage("simulate", false, &cfg.syseval, vec![], |_| Ok(()))?;
    }

    let manifest = PipelineManifest {
        format_version: MANIFEST_VERSION,
        name: cfg.name.clone(),
        config_hash: config.hash(),
        seed: cfg.seed,
        stages: r.stages,
    };
    fs::write(root.join("config.toml"), config.to_toml_string()?)?;
    write_json(&root.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Content hashes of every file listed in a manifest, keyed by path.
pub fn manifest_files(manifest: &PipelineManifest) -> BTreeMap<String, String> {
    manifest
        .stages
        .iter()
        .flat_map(|s| s.files.iter().map(|f| (f.path.clone(), f.sha256.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_literals_and_paths() {
        let mut t: toml::Table = toml::from_str("[gan]\nlr_g = 0.1\n").unwrap();
        apply_override(&mut t, "gan.lr_g=0.5").unwrap();
        apply_override(&mut t, "gan.mode = single_gnb").unwrap();
        apply_override(&mut t, "seed=7").unwrap();
        let c: PipelineConfig = t.try_into().unwrap();
        assert_eq!(c.gan.lr_g, 0.5);
        assert_eq!(c.gan.mode, crate::cgan::GanMode::SingleGnb);
        assert_eq!(c.seed, 7);
        let mut t = toml::Table::new();
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
    }

    #[test]
    fn default_config_round_trips() {
        let c = PipelineConfig::default();
        let s = c.to_toml_string().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&s).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("[gan]\nlearning_rate = 1\n").is_err());
    }
}
