//! Street-following random UAV trajectories at constant height.
//!
//! The walker moves on an axis-aligned lattice with a fixed step. At every
//! step it keeps its heading with probability `p_straight` and otherwise
//! turns left or right. Moves that leave the area or cut through a building
//! taller than the flight height are replaced by the next feasible
//! alternative (other turn, straight, reverse).

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point3;
use crate::scene::Scene;

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("no valid start position found after {0} attempts")]
    NoStart(usize),
    #[error("walker trapped at step {step} ({x:.1}, {y:.1})")]
    Trapped { step: usize, x: f64, y: f64 },
    #[error("invalid trajectory configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub n_steps_min: usize,
    pub n_steps_max: usize,
    pub step_m: f64,
    pub height_m: f64,
    pub p_straight: f64,
    pub max_start_attempts: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            n_steps_min: 600,
            n_steps_max: 800,
            step_m: 2.0,
            height_m: 30.0,
            p_straight: 0.8,
            max_start_attempts: 10_000,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.n_steps_min < 2 || self.n_steps_max < self.n_steps_min {
            return Err(TrajectoryError::Config(format!(
                "step range [{}, {}] must satisfy 2 <= min <= max",
                self.n_steps_min, self.n_steps_max
            )));
        }
        if !(self.step_m > 0.0) {
            return Err(TrajectoryError::Config("step_m must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.p_straight) {
            return Err(TrajectoryError::Config("p_straight must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Unit heading on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heading {
    East,
    North,
    West,
    South,
}

impl Heading {
    const ALL: [Heading; 4] = [Heading::East, Heading::North, Heading::West, Heading::South];

    pub fn delta(self) -> (f64, f64) {
        match self {
            Heading::East => (1.0, 0.0),
            Heading::North => (0.0, 1.0),
            Heading::West => (-1.0, 0.0),
            Heading::South => (0.0, -1.0),
        }
    }

    fn left(self) -> Heading {
        Heading::ALL[(self as usize + 1) % 4]
    }

    fn right(self) -> Heading {
        Heading::ALL[(self as usize + 3) % 4]
    }

    fn reverse(self) -> Heading {
        Heading::ALL[(self as usize + 2) % 4]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: u32,
    pub waypoints: Vec<Point3>,
    pub step_m: f64,
    pub height_m: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Number of heading changes along the path.
    pub fn turn_count(&self) -> usize {
        let dirs: Vec<(i64, i64)> = self
            .waypoints
            .windows(2)
            .map(|w| ((w[1].x - w[0].x).round() as i64, (w[1].y - w[0].y).round() as i64))
            .collect();
        dirs.windows(2).filter(|d| d[0] != d[1]).count()
    }
}

fn can_move(scene: &Scene, from: &Point3, to: &Point3) -> bool {
    if !scene.contains_xy(to.x, to.y) {
        return false;
    }
    // Only buildings taller than the flight height obstruct; the segment test
    // treats lower roofs as overflown.
    !scene.buildings.iter().any(|b| b.segment_intersects(from, to))
}

/// Walks `n_steps` moves from an explicit start and heading.
pub fn walk_from(
    scene: &Scene,
    start: Point3,
    heading: Heading,
    n_steps: usize,
    step_m: f64,
    p_straight: f64,
    id: u32,
    rng: &mut impl Rng,
) -> Result<Trajectory, TrajectoryError> {
    let mut pos = start;
    let mut heading = heading;
    let mut waypoints = Vec::with_capacity(n_steps + 1);
    waypoints.push(pos);
    for step in 0..n_steps {
        let keep = rng.random::<f64>() < p_straight;
        let (a, b) = if rng.random::<bool>() {
            (heading.left(), heading.right())
        } else {
            (heading.right(), heading.left())
        };
        let order = if keep {
            [heading, a, b, heading.reverse()]
        } else {
            [a, b, heading, heading.reverse()]
        };
        let next = order.iter().find_map(|&h| {
            let (dx, dy) = h.delta();
            let q = Point3::new(pos.x + dx * step_m, pos.y + dy * step_m, pos.z);
            can_move(scene, &pos, &q).then_some((h, q))
        });
        match next {
            Some((h, q)) => {
                heading = h;
                pos = q;
                waypoints.push(q);
            }
            None => {
                return Err(TrajectoryError::Trapped {
                    step,
                    x: pos.x,
                    y: pos.y,
                })
            }
        }
    }
    Ok(Trajectory {
        id,
        waypoints,
        step_m,
        height_m: start.z,
    })
}

/// Random trajectory with a uniformly drawn length in the configured range.
///
/// Starts are drawn on the lattice `step/2 + k * step`, which coincides with
/// the power-map nodes when the map spacing equals the step.
pub fn generate_trajectory(
    scene: &Scene,
    config: &TrajectoryConfig,
    id: u32,
    seed: u64,
) -> Result<Trajectory, TrajectoryError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    let s = config.step_m;
    let nx = ((scene.area_width_m / s).round() as usize).max(1);
    let ny = ((scene.area_depth_m / s).round() as usize).max(1);
    let n_moves = rng.random_range(config.n_steps_min..=config.n_steps_max) - 1;
    for _ in 0..config.max_start_attempts {
        let x = s * (0.5 + rng.random_range(0..nx) as f64);
        let y = s * (0.5 + rng.random_range(0..ny) as f64);
        let blocked = scene
            .buildings
            .iter()
            .any(|b| b.height > config.height_m && b.footprint_contains(x, y));
        if blocked || !scene.contains_xy(x, y) {
            continue;
        }
        let heading = Heading::ALL[rng.random_range(0..4)];
        let start = Point3::new(x, y, config.height_m);
        return walk_from(scene, start, heading, n_moves, s, config.p_straight, id, &mut rng);
    }
    Err(TrajectoryError::NoStart(config.max_start_attempts))
}

/// `count` trajectories with ids `0..count`.
pub fn generate_trajectories(
    scene: &Scene,
    config: &TrajectoryConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, TrajectoryError> {
    (0..count as u32)
        .map(|id| generate_trajectory(scene, config, id, seed))
        .collect()
}

/// 3-D distance from every waypoint to `gnb`.
pub fn distance_sequence(trajectory: &Trajectory, gnb: &Point3) -> Vec<f64> {
    trajectory.waypoints.iter().map(|w| w.distance(gnb)).collect()
}

/// CSV with columns `id,step,x,y,z`.
pub fn write_csv(path: &Path, trajectories: &[Trajectory]) -> Result<(), TrajectoryError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "id,step,x,y,z")?;
    for t in trajectories {
        for (i, p) in t.waypoints.iter().enumerate() {
            writeln!(f, "{},{},{},{},{}", t.id, i, p.x, p.y, p.z)?;
        }
    }
    f.flush()?;
    Ok(())
}
