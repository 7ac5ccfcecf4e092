use serde::{Deserialize, Serialize};

/// Point in scene coordinates (m). `z` is height above flat ground.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned building: rectangular footprint extruded from the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub height: f64,
}

impl Building {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    /// Strict interior test of the footprint.
    pub fn footprint_contains(&self, x: f64, y: f64) -> bool {
        x > self.x_min && x < self.x_max && y > self.y_min && y < self.y_max
    }

    /// True when the closed segment `a`-`b` passes through the open interior
    /// of the building volume. Touching a face, edge or the roof is not an
    /// intersection.
    pub fn segment_intersects(&self, a: &Point3, b: &Point3) -> bool {
        let mut t_lo = 0.0f64;
        let mut t_hi = 1.0f64;
        let slabs = [
            (a.x, b.x - a.x, self.x_min, self.x_max),
            (a.y, b.y - a.y, self.y_min, self.y_max),
            (a.z, b.z - a.z, 0.0, self.height),
        ];
        for (p, d, lo, hi) in slabs {
            if d == 0.0 {
                if !(p > lo && p < hi) {
                    return false;
                }
            } else {
                let t1 = (lo - p) / d;
                let t2 = (hi - p) / d;
                let (e, x) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                t_lo = t_lo.max(e);
                t_hi = t_hi.min(x);
                if t_lo >= t_hi {
                    return false;
                }
            }
        }
        t_lo < t_hi
    }
}
