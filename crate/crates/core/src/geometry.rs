//! Tiling of the video cube and FoV visibility.
//!
//! The cube is centered at the origin with `z` up. Yaw turns about `z`
//! starting from `+x`, positive pitch looks up. A tile is visible when its
//! center lies inside the square view frustum in front of the viewer; roll
//! only spins the frustum about its axis and is ignored by the test.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MIN_DISTANCE;

/// Wraps an angle in degrees to `[-180, 180)`.
pub fn normalize_angle(deg: f64) -> f64 {
    let r = (deg + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r >= 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Viewer pose at one frame. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose6DoF {
    pub frame_index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Pose6DoF {
    pub fn new(frame_index: usize, pos: [f64; 3], yaw: f64, pitch: f64, roll: f64) -> Self {
        Pose6DoF {
            frame_index,
            x: pos[0],
            y: pos[1],
            z: pos[2],
            yaw: normalize_angle(yaw),
            pitch: normalize_angle(pitch),
            roll: normalize_angle(roll),
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// The six degrees of freedom in `x, y, z, yaw, pitch, roll` order.
    pub fn dofs(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.yaw, self.pitch, self.roll]
    }

    pub fn from_dofs(frame_index: usize, v: [f64; 6]) -> Self {
        Pose6DoF::new(frame_index, [v[0], v[1], v[2]], v[3], v[4], v[5])
    }

    /// Pose looking from `pos` toward `target`, with zero roll.
    pub fn looking_at(frame_index: usize, pos: [f64; 3], target: [f64; 3]) -> Self {
        let d = sub(target, pos);
        let yaw = d[1].atan2(d[0]).to_degrees();
        let pitch = d[2].atan2(d[0].hypot(d[1])).to_degrees();
        Pose6DoF::new(frame_index, pos, yaw, pitch, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TilingConfig {
    /// Side of the video cube in meters.
    pub cube_height: f64,
    /// Octree level at which tiles are rooted.
    pub tile_level: u32,
    pub lod_count: usize,
    /// Deepest octree level carried by a tile's base layer.
    pub base_layer_level: u32,
    /// Full opening angle of the FoV along each axis, degrees.
    pub fov_span_deg: f64,
}

impl Default for TilingConfig {
    fn default() -> Self {
        TilingConfig {
            cube_height: 1.8,
            tile_level: 4,
            lod_count: 6,
            base_layer_level: 5,
            fov_span_deg: 90.0,
        }
    }
}

impl TilingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tile_level < 1 || self.tile_level > 10 {
            return Err(Error::Config(format!("tile level {} outside 1..=10", self.tile_level)));
        }
        if self.lod_count < 1 {
            return Err(Error::Config("lod_count must be at least 1".into()));
        }
        if !(self.fov_span_deg > 0.0 && self.fov_span_deg < 180.0) {
            return Err(Error::Config(format!(
                "FoV span {} outside (0, 180)",
                self.fov_span_deg
            )));
        }
        if !(self.cube_height > 0.0) {
            return Err(Error::Config("cube height must be positive".into()));
        }
        Ok(())
    }

    /// Cells per axis at the tile level.
    pub fn cells_per_axis(&self) -> usize {
        1 << self.tile_level
    }

    /// Side length of one tile.
    pub fn tile_width(&self) -> f64 {
        self.cube_height / self.cells_per_axis() as f64
    }

    pub fn cell_center(&self, id: [u16; 3]) -> [f64; 3] {
        let w = self.tile_width();
        let h = self.cube_height / 2.0;
        id.map(|i| -h + (i as f64 + 0.5) * w)
    }
}

/// Position of a tile within the cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileSlot {
    pub tile_id: [u16; 3],
    pub center: [f64; 3],
    pub wid: f64,
}

/// Lists the occupied cells at the tile level.
///
/// `occupancy` is indexed `x + n * (y + n * z)` with `n` cells per axis.
pub fn enumerate_tiles(cfg: &TilingConfig, occupancy: &[bool]) -> Result<Vec<TileSlot>> {
    cfg.validate()?;
    let n = cfg.cells_per_axis();
    if occupancy.len() != n * n * n {
        return Err(Error::Config(format!(
            "occupancy grid has {} cells, tile level {} needs {}",
            occupancy.len(),
            cfg.tile_level,
            n * n * n
        )));
    }
    let wid = cfg.tile_width();
    Ok(occupancy
        .iter()
        .enumerate()
        .filter(|(_, &occ)| occ)
        .map(|(idx, _)| {
            let id = [(idx % n) as u16, ((idx / n) % n) as u16, (idx / (n * n)) as u16];
            TileSlot {
                tile_id: id,
                center: cfg.cell_center(id),
                wid,
            }
        })
        .collect())
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Square view frustum of a pose, precomputed for repeated point tests.
#[derive(Debug, Clone, Copy)]
pub struct Frustum {
    origin: [f64; 3],
    forward: [f64; 3],
    right: [f64; 3],
    up: [f64; 3],
    tan_half: f64,
}

impl Frustum {
    pub fn new(pose: &Pose6DoF, fov_span_deg: f64) -> Self {
        let (sy, cy) = pose.yaw.to_radians().sin_cos();
        let (sp, cp) = pose.pitch.to_radians().sin_cos();
        Frustum {
            origin: pose.position(),
            forward: [cp * cy, cp * sy, sp],
            right: [sy, -cy, 0.0],
            up: [-sp * cy, -sp * sy, cp],
            tan_half: (fov_span_deg / 2.0).to_radians().tan(),
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let v = sub(p, self.origin);
        let depth = dot(v, self.forward);
        if depth <= 0.0 {
            return false;
        }
        let lim = depth * self.tan_half;
        dot(v, self.right).abs() <= lim && dot(v, self.up).abs() <= lim
    }
}

/// Indices of the tiles whose centers fall in the pose's frustum.
pub fn visible_tiles(pose: &Pose6DoF, tiles: &[TileSlot], cfg: &TilingConfig) -> Vec<usize> {
    let fr = Frustum::new(pose, cfg.fov_span_deg);
    tiles
        .iter()
        .enumerate()
        .filter(|(_, t)| fr.contains(t.center))
        .map(|(i, _)| i)
        .collect()
}

/// Viewer-to-tile-center distance, clamped to [`MIN_DISTANCE`].
pub fn tile_distance(pose: &Pose6DoF, center: [f64; 3]) -> f64 {
    let v = sub(center, pose.position());
    dot(v, v).sqrt().max(MIN_DISTANCE)
}

/// How the view likelihood of a tile is derived from a predicted pose.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViewProbability {
    /// 1 inside the predicted frustum, 0 outside.
    #[default]
    Binary,
    /// Fraction of `samples` perturbed poses that see the tile. Perturbations
    /// are Gaussian with the predictor's per-DoF residual deviation.
    Ensemble { samples: usize },
}

/// View likelihood of every tile under `mode`.
pub fn view_probabilities<R: Rng + ?Sized>(
    mode: ViewProbability,
    pose: &Pose6DoF,
    residual_std: &[f64; 6],
    tiles: &[TileSlot],
    cfg: &TilingConfig,
    rng: &mut R,
) -> Vec<f64> {
    match mode {
        ViewProbability::Binary => {
            let fr = Frustum::new(pose, cfg.fov_span_deg);
            tiles
                .iter()
                .map(|t| if fr.contains(t.center) { 1.0 } else { 0.0 })
                .collect()
        }
        ViewProbability::Ensemble { samples } => {
            let samples = samples.max(1);
            let mut hits = vec![0usize; tiles.len()];
            let base = pose.dofs();
            for _ in 0..samples {
                let mut v = base;
                for (x, s) in v.iter_mut().zip(residual_std) {
                    let n: f64 = StandardNormal.sample(rng);
                    *x += s * n;
                }
                let fr = Frustum::new(&Pose6DoF::from_dofs(pose.frame_index, v), cfg.fov_span_deg);
                for (h, t) in hits.iter_mut().zip(tiles) {
                    if fr.contains(t.center) {
                        *h += 1;
                    }
                }
            }
            hits.into_iter().map(|h| h as f64 / samples as f64).collect()
        }
    }
}
