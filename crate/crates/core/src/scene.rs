//! Synthetic urban deployment and ground-truth RSS power maps.
//!
//! Buildings are axis-aligned boxes on flat ground; gNBs sit on rooftops. The
//! RSS of a gNB at a grid node is
//!
//! ```text
//! RSS = tx_power - (L0 + 10 n log10(d)) - X_shadow - [NLOS] penalty
//! ```
//!
//! with `d` the 3-D distance in metres (clamped below at 1 m), `n` the LOS or
//! NLOS exponent, and `X_shadow` a zero-mean separable exponential-correlation
//! field realized by two first-order autoregressive sweeps.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{Building, Point3};
use crate::io::{json_hash, read_f32, write_f32, write_json};

pub const SCENE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("placement failed: {0}")]
    Placement(String),
    #[error("invalid scene configuration: {0}")]
    Config(String),
    #[error("gNB id {id} out of range (scene has {count} gNBs)")]
    InvalidGnb { id: usize, count: usize },
    #[error("scene bundle format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("scene bundle inconsistent: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationParams {
    pub tx_power_dbm: f64,
    pub pathloss_exponent_los: f64,
    pub pathloss_exponent_nlos: f64,
    /// Loss at the 1 m reference distance (dB).
    pub reference_loss_db: f64,
    pub shadowing_std_db: f64,
    pub shadowing_decorrelation_m: f64,
    pub nlos_penalty_db: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 0.0,
            pathloss_exponent_los: 2.4,
            pathloss_exponent_nlos: 3.2,
            // free-space loss at 1 m and 28 GHz
            reference_loss_db: 61.4,
            shadowing_std_db: 6.0,
            shadowing_decorrelation_m: 25.0,
            nlos_penalty_db: 15.0,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.pathloss_exponent_los > 0.0 && self.pathloss_exponent_nlos > 0.0) {
            return Err(SceneError::Config("path-loss exponents must be positive".into()));
        }
        if !(self.shadowing_std_db >= 0.0) {
            return Err(SceneError::Config("shadowing std must be non-negative".into()));
        }
        if !(self.shadowing_decorrelation_m > 0.0) {
            return Err(SceneError::Config("decorrelation distance must be positive".into()));
        }
        Ok(())
    }

    /// Log-distance path loss (dB) for a 3-D distance in metres.
    pub fn path_loss_db(&self, distance_m: f64, los: bool) -> f64 {
        let n = if los {
            self.pathloss_exponent_los
        } else {
            self.pathloss_exponent_nlos
        };
        self.reference_loss_db + 10.0 * n * distance_m.max(1.0).log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub area_width_m: f64,
    pub area_depth_m: f64,
    pub n_buildings: usize,
    pub building_size_min_m: f64,
    pub building_size_max_m: f64,
    pub building_height_min_m: f64,
    pub building_height_max_m: f64,
    /// Minimum clearance between footprints and to the area border.
    pub street_width_m: f64,
    pub n_gnbs: usize,
    pub gnb_height_m: f64,
    pub max_placement_attempts: usize,
    pub propagation: PropagationParams,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            area_width_m: 600.0,
            area_depth_m: 560.0,
            n_buildings: 40,
            building_size_min_m: 20.0,
            building_size_max_m: 50.0,
            building_height_min_m: 10.0,
            building_height_max_m: 60.0,
            street_width_m: 10.0,
            n_gnbs: 3,
            gnb_height_m: 30.0,
            max_placement_attempts: 20_000,
            propagation: PropagationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gnb {
    pub id: usize,
    pub position: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub area_width_m: f64,
    pub area_depth_m: f64,
    pub buildings: Vec<Building>,
    pub gnbs: Vec<Gnb>,
    pub seed: u64,
    pub propagation: PropagationParams,
}

impl Scene {
    pub fn n_gnbs(&self) -> usize {
        self.gnbs.len()
    }

    pub fn gnb(&self, id: usize) -> Result<&Gnb, SceneError> {
        self.gnbs.get(id).ok_or(SceneError::InvalidGnb {
            id,
            count: self.gnbs.len(),
        })
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (0.0..=self.area_width_m).contains(&x) && (0.0..=self.area_depth_m).contains(&y)
    }

    /// Content hash of the scene description.
    pub fn hash(&self) -> String {
        json_hash(self)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.propagation.validate()?;
        for (i, g) in self.gnbs.iter().enumerate() {
            if g.id != i {
                return Err(SceneError::Corrupt(format!(
                    "gNB ids must be 0..C-1, found {} at {i}",
                    g.id
                )));
            }
            if !self.contains_xy(g.position.x, g.position.y) {
                return Err(SceneError::Corrupt(format!("gNB {i} outside the area")));
            }
        }
        for b in &self.buildings {
            if !(b.height > 0.0)
                || b.x_min < 0.0
                || b.y_min < 0.0
                || b.x_max > self.area_width_m
                || b.y_max > self.area_depth_m
                || b.x_min >= b.x_max
                || b.y_min >= b.y_max
            {
                return Err(SceneError::Corrupt(format!("invalid building {b:?}")));
            }
        }
        Ok(())
    }
}

/// Deterministic scene for `(config, seed)`.
pub fn build_scene(config: &SceneConfig, seed: u64) -> Result<Scene, SceneError> {
    config.propagation.validate()?;
    if config.n_gnbs == 0 {
        return Err(SceneError::Config("at least one gNB is required".into()));
    }
    if !(config.area_width_m > 0.0 && config.area_depth_m > 0.0) {
        return Err(SceneError::Config("area dimensions must be positive".into()));
    }
    if config.n_buildings > 0
        && !(config.building_size_min_m > 0.0
            && config.building_size_max_m >= config.building_size_min_m
            && config.building_height_min_m > 0.0
            && config.building_height_max_m >= config.building_height_min_m)
    {
        return Err(SceneError::Config("building size/height ranges are invalid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = config.street_width_m;
    let mut buildings: Vec<Building> = Vec::with_capacity(config.n_buildings);
    for k in 0..config.n_buildings {
        let mut placed = false;
        for _ in 0..config.max_placement_attempts {
            let sx = rng.random_range(config.building_size_min_m..=config.building_size_max_m);
            let sy = rng.random_range(config.building_size_min_m..=config.building_size_max_m);
            let free_x = config.area_width_m - 2.0 * gap - sx;
            let free_y = config.area_depth_m - 2.0 * gap - sy;
            if free_x < 0.0 || free_y < 0.0 {
                continue;
            }
            let x0 = gap + rng.random::<f64>() * free_x;
            let y0 = gap + rng.random::<f64>() * free_y;
            let cand = Building {
                x_min: x0,
                y_min: y0,
                x_max: x0 + sx,
                y_max: y0 + sy,
                height: rng.random_range(config.building_height_min_m..=config.building_height_max_m),
            };
            let clear = buildings.iter().all(|b| {
                cand.x_min >= b.x_max + gap
                    || b.x_min >= cand.x_max + gap
                    || cand.y_min >= b.y_max + gap
                    || b.y_min >= cand.y_max + gap
            });
            if clear {
                buildings.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SceneError::Placement(format!(
                "could not place building {} of {} with {} m street clearance in a {}x{} m area",
                k + 1,
                config.n_buildings,
                gap,
                config.area_width_m,
                config.area_depth_m
            )));
        }
    }

    let h = config.gnb_height_m;
    let gnbs = if buildings.is_empty() {
        free_standing_gnbs(config, &mut rng)
    } else {
        let eligible: Vec<usize> = (0..buildings.len()).filter(|&i| buildings[i].height <= h).collect();
        if eligible.len() < config.n_gnbs {
            return Err(SceneError::Placement(format!(
                "{} gNBs requested but only {} rooftops are at or below the {h} m mast height",
                config.n_gnbs,
                eligible.len()
            )));
        }
        // Farthest-point choice spreads sites across the area.
        let mut chosen = vec![eligible[rng.random_range(0..eligible.len())]];
        while chosen.len() < config.n_gnbs {
            let next = eligible
                .iter()
                .copied()
                .filter(|i| !chosen.contains(i))
                .max_by(|&a, &b| {
                    let da = min_center_distance(&buildings, a, &chosen);
                    let db = min_center_distance(&buildings, b, &chosen);
                    da.total_cmp(&db)
                })
                .expect("enough eligible rooftops");
            chosen.push(next);
        }
        chosen
            .iter()
            .enumerate()
            .map(|(id, &bi)| {
                let (x, y) = buildings[bi].center();
                Gnb {
                    id,
                    position: Point3::new(x, y, h),
                }
            })
            .collect()
    };

    let scene = Scene {
        area_width_m: config.area_width_m,
        area_depth_m: config.area_depth_m,
        buildings,
        gnbs,
        seed,
        propagation: config.propagation.clone(),
    };
    scene.validate()?;
    Ok(scene)
}

fn min_center_distance(buildings: &[Building], i: usize, chosen: &[usize]) -> f64 {
    let (x, y) = buildings[i].center();
    chosen
        .iter()
        .map(|&j| {
            let (cx, cy) = buildings[j].center();
            (x - cx).hypot(y - cy)
        })
        .fold(f64::INFINITY, f64::min)
}

fn free_standing_gnbs(config: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<Gnb> {
    let (w, d, h) = (config.area_width_m, config.area_depth_m, config.gnb_height_m);
    if config.n_gnbs == 1 {
        return vec![Gnb {
            id: 0,
            position: Point3::new(0.5 * w, 0.5 * d, h),
        }];
    }
    (0..config.n_gnbs)
        .map(|id| Gnb {
            id,
            position: Point3::new(
                w * (0.1 + 0.8 * rng.random::<f64>()),
                d * (0.1 + 0.8 * rng.random::<f64>()),
                h,
            ),
        })
        .collect()
}

/// Line-of-sight predicate: the segment crosses no building interior.
///
/// Touching a footprint edge or running along a face counts as LOS. The
/// endpoints are put in a canonical order first so the result is exactly
/// symmetric.
pub fn is_los(scene: &Scene, p1: &Point3, p2: &Point3) -> bool {
    let (a, b) = if (p1.x, p1.y, p1.z) <= (p2.x, p2.y, p2.z) {
        (p1, p2)
    } else {
        (p2, p1)
    };
    !scene.buildings.iter().any(|bld| bld.segment_intersects(a, b))
}

/// Ground-truth RSS grid of one gNB at a fixed height.
///
/// Node `(row, col)` sits at `origin + (col, row) * spacing_m`; the origin is
/// the centre of the first `spacing x spacing` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMap {
    pub gnb_id: usize,
    pub origin: (f64, f64),
    pub spacing_m: f64,
    pub height_m: f64,
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`, dBm.
    #[serde(skip)]
    pub rss_dbm: Vec<f64>,
}

impl PowerMap {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.rss_dbm[row * self.cols + col]
    }

    pub fn node(&self, row: usize, col: usize) -> Point3 {
        Point3::new(
            self.origin.0 + col as f64 * self.spacing_m,
            self.origin.1 + row as f64 * self.spacing_m,
            self.height_m,
        )
    }
}

/// Grid dimensions `(rows, cols)` covering the scene at the given spacing.
pub fn grid_shape(scene: &Scene, spacing_m: f64) -> (usize, usize) {
    (
        (scene.area_depth_m / spacing_m).round() as usize,
        (scene.area_width_m / spacing_m).round() as usize,
    )
}

/// Zero-mean, unit-variance field with correlation
/// `exp(-|dx|/L) * exp(-|dy|/L)` sampled on a `rows x cols` grid.
pub fn unit_shadow_field(
    rows: usize,
    cols: usize,
    spacing_m: f64,
    decorrelation_m: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let a = (-spacing_m / decorrelation_m).exp();
    let s = (1.0 - a * a).sqrt();
    let mut f = vec![0.0; rows * cols];
    for r in 0..rows {
        let row = &mut f[r * cols..(r + 1) * cols];
        let mut prev: f64 = rng.sample(StandardNormal);
        row[0] = prev;
        for v in row.iter_mut().skip(1) {
            let e: f64 = rng.sample(StandardNormal);
            prev = a * prev + s * e;
            *v = prev;
        }
    }
    for r in 1..rows {
        let (done, rest) = f.split_at_mut(r * cols);
        let above = &done[(r - 1) * cols..];
        for (v, &p) in rest[..cols].iter_mut().zip(above) {
            *v = a * p + s * *v;
        }
    }
    f
}

fn shadow_rng(seed: u64, gnb_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5eed_0000 + gnb_id as u64);
    rng
}

/// Large-scale RSS without shadowing at a point.
pub fn deterministic_rss(scene: &Scene, gnb: &Gnb, q: &Point3) -> f64 {
    let p = &scene.propagation;
    let los = is_los(scene, &gnb.position, q);
    let d = gnb.position.distance(q);
    let mut rss = p.tx_power_dbm - p.path_loss_db(d, los);
    if !los {
        rss -= p.nlos_penalty_db;
    }
    rss
}

pub fn compute_power_map(
    scene: &Scene,
    gnb_id: usize,
    spacing_m: f64,
    height_m: f64,
    seed: u64,
) -> Result<PowerMap, SceneError> {
    let gnb = scene.gnb(gnb_id)?;
    if !(spacing_m > 0.0) {
        return Err(SceneError::Config(format!("spacing {spacing_m} must be positive")));
    }
    let (rows, cols) = grid_shape(scene, spacing_m);
    let origin = (0.5 * spacing_m, 0.5 * spacing_m);
    let p = &scene.propagation;
    let shadow = if p.shadowing_std_db > 0.0 {
        let mut rng = shadow_rng(seed, gnb_id);
        unit_shadow_field(rows, cols, spacing_m, p.shadowing_decorrelation_m, &mut rng)
    } else {
        vec![0.0; rows * cols]
    };
    let mut map = PowerMap {
        gnb_id,
        origin,
        spacing_m,
        height_m,
        rows,
        cols,
        rss_dbm: Vec::with_capacity(rows * cols),
    };
    for r in 0..rows {
        for c in 0..cols {
            let q = map.node(r, c);
            let v = deterministic_rss(scene, gnb, &q) - p.shadowing_std_db * shadow[r * cols + c];
            map.rss_dbm.push(v);
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MapEntry {
    file: String,
    #[serde(flatten)]
    map: PowerMap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneManifest {
    format_version: u32,
    scene_hash: String,
    scene: Scene,
    power_maps: Vec<MapEntry>,
}

/// Writes `scene.json` plus one `powermap_<gnb>.f32` per map into `dir`.
pub fn save_scene_bundle(dir: &Path, scene: &Scene, maps: &[PowerMap]) -> Result<(), SceneError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(maps.len());
    for m in maps {
        let file = format!("powermap_{}.f32", m.gnb_id);
        write_f32(&dir.join(&file), m.rss_dbm.iter().map(|&v| v as f32))?;
        entries.push(MapEntry { file, map: m.clone() });
    }
    let manifest = SceneManifest {
        format_version: SCENE_FORMAT_VERSION,
        scene_hash: scene.hash(),
        scene: scene.clone(),
        power_maps: entries,
    };
    write_json(&dir.join("scene.json"), &manifest)?;
    Ok(())
}

pub fn load_scene_bundle(dir: &Path) -> Result<(Scene, Vec<PowerMap>), SceneError> {
    let text = fs::read_to_string(dir.join("scene.json"))?;
    let manifest: SceneManifest = serde_json::from_str(&text)?;
    if manifest.format_version != SCENE_FORMAT_VERSION {
        return Err(SceneError::Version {
            found: manifest.format_version,
            expected: SCENE_FORMAT_VERSION,
        });
    }
    let scene = manifest.scene;
    scene.validate()?;
    let mut maps = Vec::with_capacity(manifest.power_maps.len());
    for e in manifest.power_maps {
        let mut m = e.map;
        if grid_shape(&scene, m.spacing_m) != (m.rows, m.cols) {
            return Err(SceneError::Corrupt(format!(
                "map {} shape {}x{} does not match the area at {} m spacing",
                m.gnb_id, m.rows, m.cols, m.spacing_m
            )));
        }
        m.rss_dbm = read_f32(&dir.join(&e.file), m.rows * m.cols)
            .map_err(|err| SceneError::Corrupt(err.to_string()))?
            .into_iter()
            .map(f64::from)
            .collect();
        maps.push(m);
    }
    Ok((scene, maps))
}
