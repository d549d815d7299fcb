use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{read_records, write_file};
use crate::error::{Error, Result};
use crate::geometry::{enumerate_tiles, TilingConfig};
use crate::model::{lod_to_rate, TileMeta};

const MAGIC: &str = "pcvstream-tiles";

/// Tile metadata of a point cloud video. Playback loops over the frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Video {
    pub tiling: TilingConfig,
    pub frames: Vec<Vec<TileMeta>>,
}

impl Video {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Tiles shown at playback frame `frame`.
    pub fn tiles(&self, frame: usize) -> &[TileMeta] {
        &self.frames[frame % self.frames.len()]
    }

    pub fn validate(&self) -> Result<()> {
        self.tiling.validate()?;
        if self.frames.is_empty() {
            return Err(Error::Input("video has no frames".into()));
        }
        for (f, tiles) in self.frames.iter().enumerate() {
            for t in tiles {
                t.validate()?;
                if t.frame_index != f {
                    return Err(Error::Input(format!(
                        "tile of frame {} stored at frame {f}",
                        t.frame_index
                    )));
                }
                if t.lod_count() != self.tiling.lod_count {
                    return Err(Error::Input(format!(
                        "tile {:?} of frame {f} has {} LoDs, expected {}",
                        t.tile_id,
                        t.lod_count(),
                        self.tiling.lod_count
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parameters of a synthetic video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticVideoSpec {
    pub frames: usize,
    /// Fraction of tile-level cells that hold points.
    pub occupancy_density: f64,
    pub a_range: (f64, f64),
    /// Per-byte coefficient range.
    pub b_range: (f64, f64),
    /// Relative frame-to-frame wobble of each tile's coefficients.
    pub jitter: f64,
    /// Confine the points to a vertical column of this radius (meters)
    /// around the cube axis, like a standing figure. The density then
    /// applies to the cells inside the column.
    pub column_radius: Option<f64>,
    pub tiling: TilingConfig,
    pub seed: u64,
}

impl Default for SyntheticVideoSpec {
    fn default() -> Self {
        SyntheticVideoSpec {
            frames: 300,
            occupancy_density: 0.08,
            a_range: (0.65, 0.85),
            b_range: (0.3, 1.2),
            jitter: 0.05,
            column_radius: None,
            tiling: TilingConfig::default(),
            seed: 0,
        }
    }
}

impl SyntheticVideoSpec {
    pub fn validate(&self) -> Result<()> {
        self.tiling.validate()?;
        let range_ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if self.frames == 0 {
            return Err(Error::Config("video needs at least one frame".into()));
        }
        if !(self.occupancy_density > 0.0 && self.occupancy_density <= 1.0) {
            return Err(Error::Config(format!(
                "occupancy density {} outside (0, 1]",
                self.occupancy_density
            )));
        }
        if !range_ok(self.a_range) || !range_ok(self.b_range) {
            return Err(Error::Config("coefficient ranges must be positive and ordered".into()));
        }
        if self.column_radius.is_some_and(|r| !(r > 0.0)) {
            return Err(Error::Config("column radius must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config("jitter must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Builds tile metadata whose LoD tables invert `H = a ln(b r + 1)` at
/// integer LoDs. The occupied cells are drawn once and shared by all frames;
/// each tile's `(a, b)` wobbles by `jitter` around a per-tile base value.
pub fn generate_video(spec: &SyntheticVideoSpec) -> Result<Video> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.tiling.cells_per_axis();
    let inside = |idx: usize| {
        let c = spec
            .tiling
            .cell_center([(idx % n) as u16, ((idx / n) % n) as u16, (idx / (n * n)) as u16]);
        spec.column_radius.is_none_or(|r| c[0].hypot(c[1]) <= r)
    };
    let candidates: Vec<usize> = (0..n * n * n).filter(|&i| inside(i)).collect();
    if candidates.is_empty() {
        return Err(Error::Config("column radius leaves no cells".into()));
    }
    let mut occupancy = vec![false; n * n * n];
    for &i in &candidates {
        occupancy[i] = rng.random_bool(spec.occupancy_density);
    }
    if !occupancy.iter().any(|&o| o) {
        occupancy[candidates[rng.random_range(0..candidates.len())]] = true;
    }
    let slots = enumerate_tiles(&spec.tiling, &occupancy)?;
    let sample = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let base: Vec<(f64, f64)> = slots
        .iter()
        .map(|_| (sample(&mut rng, spec.a_range), sample(&mut rng, spec.b_range)))
        .collect();

    let mut frames = Vec::with_capacity(spec.frames);
    for f in 0..spec.frames {
        let tiles = slots
            .iter()
            .zip(&base)
            .map(|(slot, &(a0, b0))| {
                let mut wobble = |x: f64, (lo, hi): (f64, f64)| {
                    let j = if spec.jitter > 0.0 {
                        rng.random_range(-spec.jitter..spec.jitter)
                    } else {
                        0.0
                    };
                    (x * (1.0 + j)).clamp(lo, hi)
                };
                let a = wobble(a0, spec.a_range);
                let b = wobble(b0, spec.b_range);
                let lod_sizes: Vec<f64> = (1..=spec.tiling.lod_count)
                    .map(|h| lod_to_rate(h as f64, a, b))
                    .collect();
                TileMeta {
                    frame_index: f,
                    tile_id: slot.tile_id,
                    a,
                    b,
                    max_rate: *lod_sizes.last().unwrap(),
                    lod_sizes,
                    center: slot.center,
                    wid: slot.wid,
                }
            })
            .collect();
        frames.push(tiles);
    }
    Ok(Video {
        tiling: spec.tiling,
        frames,
    })
}

fn header_value<T: std::str::FromStr>(args: &str, key: &str) -> Option<T> {
    args.split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == key)
        .and_then(|(_, v)| v.parse().ok())
}

pub fn load_video(path: &Path) -> Result<Video> {
    let name = path.display().to_string();
    let (args, records) = read_records(path, MAGIC)?;
    let missing = |k: &str| Error::parse(&name, 1, format!("header lacks `{k}=`"));
    let tiling = TilingConfig {
        cube_height: header_value(&args, "cube_height").ok_or_else(|| missing("cube_height"))?,
        tile_level: header_value(&args, "tile_level").ok_or_else(|| missing("tile_level"))?,
        lod_count: header_value(&args, "lod_count").ok_or_else(|| missing("lod_count"))?,
        ..TilingConfig::default()
    };
    let tiling = TilingConfig {
        base_layer_level: header_value(&args, "base_layer_level").unwrap_or(tiling.tile_level + 1),
        ..tiling
    };
    tiling.validate()?;
    let n = tiling.cells_per_axis();
    let lods = tiling.lod_count;

    let mut frames: Vec<Vec<TileMeta>> = Vec::new();
    for (line, text) in &records {
        let err = |msg: String| Error::parse(&name, *line, msg);
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 6 + lods {
            return Err(err(format!("expected {} fields, found {}", 6 + lods, toks.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad integer `{s}`")));
        let num = |s: &str| match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(err(format!("bad number `{s}`"))),
        };
        let frame = int(toks[0])?;
        let mut id = [0u16; 3];
        for k in 0..3 {
            let c = int(toks[1 + k])?;
            if c >= n {
                return Err(err(format!("cell coordinate {c} outside 0..{n}")));
            }
            id[k] = c as u16;
        }
        let a = num(toks[4])?;
        let b = num(toks[5])?;
        let lod_sizes = toks[6..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        if frame == frames.len() {
            frames.push(Vec::new());
        } else if frame + 1 != frames.len() {
            return Err(err(format!("frame {frame} out of order")));
        }
        let tile = TileMeta {
            frame_index: frame,
            tile_id: id,
            a,
            b,
            max_rate: *lod_sizes.last().unwrap(),
            lod_sizes,
            center: tiling.cell_center(id),
            wid: tiling.tile_width(),
        };
        tile.validate().map_err(|e| err(e.to_string()))?;
        frames[frame].push(tile);
    }
    let video = Video { tiling, frames };
    video.validate()?;
    Ok(video)
}

pub fn save_video(path: &Path, video: &Video) -> Result<()> {
    let t = &video.tiling;
    let mut s = format!(
        "# {MAGIC} v1 cube_height={} tile_level={} lod_count={} base_layer_level={}\n# frame tx ty tz a b lod_sizes...\n",
        t.cube_height, t.tile_level, t.lod_count, t.base_layer_level
    );
    for tiles in &video.frames {
        for tile in tiles {
            let [x, y, z] = tile.tile_id;
            write!(s, "{} {x} {y} {z} {} {}", tile.frame_index, tile.a, tile.b).unwrap();
            for l in &tile.lod_sizes {
                write!(s, " {l}").unwrap();
            }
            s.push('\n');
        }
    }
    write_file(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fit_rate_lod;

    fn small_spec() -> SyntheticVideoSpec {
        SyntheticVideoSpec {
            frames: 4,
            occupancy_density: 1.0,
            tiling: TilingConfig {
                tile_level: 2,
                ..TilingConfig::default()
            },
            seed: 7,
            ..SyntheticVideoSpec::default()
        }
    }

    #[test]
    fn full_density_level_two() {
        let v = generate_video(&small_spec()).unwrap();
        assert_eq!(v.frames.len(), 4);
        assert!(v.frames.iter().all(|f| f.len() == 64));
        v.validate().unwrap();
        for t in v.frames.iter().flatten() {
            assert!(t.lod_sizes.windows(2).all(|w| w[1] > w[0]));
            assert!(t.lod_sizes[0] > 0.0);
        }
    }

    #[test]
    fn fit_recovers_generated_coefficients() {
        let v = generate_video(&small_spec()).unwrap();
        for t in v.frames[0].iter().take(10) {
            let samples: Vec<(f64, f64)> = std::iter::once((0.0, 0.0))
                .chain(t.lod_sizes.iter().enumerate().map(|(h, &r)| (r, (h + 1) as f64)))
                .collect();
            let fit = fit_rate_lod(&samples).unwrap();
            assert!((fit.a - t.a).abs() < 0.01 * t.a, "{fit:?} vs a={}", t.a);
            assert!((fit.b - t.b).abs() < 0.01 * t.b, "{fit:?} vs b={}", t.b);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            generate_video(&small_spec()).unwrap(),
            generate_video(&small_spec()).unwrap()
        );
        let other = SyntheticVideoSpec {
            seed: 8,
            ..small_spec()
        };
        assert_ne!(generate_video(&small_spec()).unwrap(), generate_video(&other).unwrap());
    }

    #[test]
    fn rejects_bad_spec() {
        let bad = SyntheticVideoSpec {
            occupancy_density: 0.0,
            ..small_spec()
        };
        assert!(generate_video(&bad).is_err());
        let bad = SyntheticVideoSpec {
            a_range: (2.0, 1.0),
            ..small_spec()
        };
        assert!(generate_video(&bad).is_err());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiles.txt");
        let v = generate_video(&SyntheticVideoSpec {
            occupancy_density: 0.3,
            ..small_spec()
        })
        .unwrap();
        save_video(&path, &v).unwrap();
        assert_eq!(load_video(&path).unwrap(), v);
    }

    #[test]
    fn looping_playback() {
        let v = generate_video(&small_spec()).unwrap();
        assert_eq!(v.tiles(5), v.frames[1].as_slice());
    }
}
