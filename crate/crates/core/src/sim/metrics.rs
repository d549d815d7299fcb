//! Playback-side quality accounting and the per-frame metrics file.
//!
//! Metrics file layout (whitespace separated, one line per frame):
//!
//! ```text
//! # pcvstream-metrics v1 policy=<name>
//! # frame mean_angular_resolution per_degree_quality visible_bytes wasted_bytes fov_tiles empty_fov overlap_ratios
//! 0 12.613600 -0.531234 20480.000000 512.000000 37 0 0.810811,0.864865,...
//! ...
//! # summary <metric> <mean> <variance>
//! ```
//!
//! `overlap_ratios` lists, comma separated and oldest first, the fraction of
//! the frame's actual-FoV tiles that each round's prediction also saw; `-`
//! when the frame was never predicted. Summary rows cover
//! `mean_angular_resolution`, `per_degree_quality` (non-empty frames only),
//! `visible_bytes` and `wasted_bytes` (all frames).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tile_distance, Frustum, Pose6DoF};
use crate::model::{angular_resolution, per_degree_quality, rate_to_lod, TileMeta, UtilityConstants};
use crate::traces::{parse_records, write_file};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame_index: usize,
    /// Points per degree over the tiles in the actual FoV, averaged per
    /// degree of view (each tile weighted by its angular span).
    pub mean_angular_resolution: f64,
    /// `ln(c * f_ang)` averaged the same way: the frame's total quality
    /// divided by the degrees its visible tiles cover.
    pub per_degree_quality: f64,
    /// Bytes spent on tiles inside the actual FoV.
    pub visible_bytes: f64,
    /// Bytes spent on tiles outside it.
    pub wasted_bytes: f64,
    pub fov_tiles: usize,
    /// Set when no tile was in the actual FoV; quality fields are then zero.
    pub empty_fov: bool,
    /// Overlap ratio of each round's prediction, oldest first.
    pub fov_overlap: Vec<f64>,
}

/// Scores one frame at playback against the viewer's true pose.
///
/// `rates` are the buffered bytes per tile; with `round_to_lod` each is cut
/// down to the last complete LoD before conversion.
pub fn evaluate_frame(
    frame: usize,
    tiles: &[TileMeta],
    rates: &[f64],
    true_pose: &Pose6DoF,
    fov_span_deg: f64,
    round_to_lod: bool,
) -> Result<FrameMetrics> {
    if tiles.len() != rates.len() {
        return Err(Error::Input(format!(
            "frame {frame}: {} rates for {} tiles",
            rates.len(),
            tiles.len()
        )));
    }
    let fr = Frustum::new(true_pose, fov_span_deg);
    let (mut visible, mut wasted) = (0.0, 0.0);
    let (mut res_sum, mut q_sum, mut span_sum, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (tile, &r) in tiles.iter().zip(rates) {
        if !fr.contains(tile.center) {
            wasted += r;
            continue;
        }
        visible += r;
        n += 1;
        let delivered = if round_to_lod { tile.floor_to_lod(r) } else { r };
        let lod = rate_to_lod(delivered, tile.a, tile.b)?;
        let d = tile_distance(true_pose, tile.center);
        let f = angular_resolution(lod, d, tile.wid)?;
        let consts = UtilityConstants::for_tile_width(tile.wid);
        let span = consts.span_deg(d);
        res_sum += span * f;
        q_sum += span * per_degree_quality(f, consts.c);
        span_sum += span;
    }
    let (res, q) = if n > 0 {
        (res_sum / span_sum, q_sum / span_sum)
    } else {
        (0.0, 0.0)
    };
    Ok(FrameMetrics {
        frame_index: frame,
        mean_angular_resolution: res,
        per_degree_quality: q,
        visible_bytes: visible,
        wasted_bytes: wasted,
        fov_tiles: n,
        empty_fov: n == 0,
        fov_overlap: Vec::new(),
    })
}

/// Mean and population variance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub variance: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Stat::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let variance = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, variance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean_angular_resolution: Stat,
    pub per_degree_quality: Stat,
    pub visible_bytes: Stat,
    pub wasted_bytes: Stat,
    pub frames: usize,
    pub empty_frames: usize,
}

impl Summary {
    pub fn of(frames: &[FrameMetrics]) -> Summary {
        let shown = || frames.iter().filter(|m| !m.empty_fov);
        Summary {
            mean_angular_resolution: Stat::of(shown().map(|m| m.mean_angular_resolution)),
            per_degree_quality: Stat::of(shown().map(|m| m.per_degree_quality)),
            visible_bytes: Stat::of(frames.iter().map(|m| m.visible_bytes)),
            wasted_bytes: Stat::of(frames.iter().map(|m| m.wasted_bytes)),
            frames: frames.len(),
            empty_frames: frames.len() - shown().count(),
        }
    }

    pub fn rows(&self) -> [(&'static str, Stat); 4] {
        [
            ("mean_angular_resolution", self.mean_angular_resolution),
            ("per_degree_quality", self.per_degree_quality),
            ("visible_bytes", self.visible_bytes),
            ("wasted_bytes", self.wasted_bytes),
        ]
    }
}

/// Pearson correlation coefficient. Zero when either series is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Input(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Input("correlation needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Correlation between how much a frame's FoV prediction improved while it
/// sat in the buffer (last minus first overlap ratio, taken from the
/// progressive run) and how much the progressive run beat the sequential one
/// on that frame's per-degree quality.
///
/// Frames with an empty FoV in either run, or never predicted, are skipped.
pub fn correlation_report(progressive: &[FrameMetrics], nonprogressive: &[FrameMetrics]) -> Result<f64> {
    if progressive.len() != nonprogressive.len() {
        return Err(Error::Input(format!(
            "metric series lengths differ: {} vs {}",
            progressive.len(),
            nonprogressive.len()
        )));
    }
    let (mut gaps, mut gains) = (Vec::new(), Vec::new());
    for (p, s) in progressive.iter().zip(nonprogressive) {
        if p.frame_index != s.frame_index {
            return Err(Error::Input(format!(
                "frame {} paired with {}",
                p.frame_index, s.frame_index
            )));
        }
        let (Some(first), Some(last)) = (p.fov_overlap.first(), p.fov_overlap.last()) else {
            continue;
        };
        if p.empty_fov || s.empty_fov {
            continue;
        }
        gaps.push(last - first);
        gains.push(p.per_degree_quality - s.per_degree_quality);
    }
    pearson(&gaps, &gains)
}

const MAGIC: &str = "pcvstream-metrics";

pub fn format_metrics(policy: &str, frames: &[FrameMetrics]) -> String {
    let mut s = format!(
        "# {MAGIC} v1 policy={policy}\n# frame mean_angular_resolution per_degree_quality visible_bytes wasted_bytes fov_tiles empty_fov overlap_ratios\n"
    );
    for m in frames {
        let overlap = if m.fov_overlap.is_empty() {
            "-".to_string()
        } else {
            m.fov_overlap
                .iter()
                .map(|o| format!("{o:.6}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(
            s,
            "{} {:.6} {:.6} {:.3} {:.3} {} {} {}",
            m.frame_index,
            m.mean_angular_resolution,
            m.per_degree_quality,
            m.visible_bytes,
            m.wasted_bytes,
            m.fov_tiles,
            u8::from(m.empty_fov),
            overlap
        )
        .unwrap();
    }
    s.push_str("# summary metric mean variance\n");
    let summary = Summary::of(frames);
    for (name, st) in summary.rows() {
        writeln!(s, "# summary {name} {:.6} {:.6}", st.mean, st.variance).unwrap();
    }
    writeln!(s, "# summary frames {} empty {}", summary.frames, summary.empty_frames).unwrap();
    s
}

pub fn save_metrics(path: &Path, policy: &str, frames: &[FrameMetrics]) -> Result<()> {
    write_file(path, &format_metrics(policy, frames))
}

/// Reads a metrics file back; returns the policy name and the frames.
pub fn load_metrics(path: &Path) -> Result<(String, Vec<FrameMetrics>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let (args, records) = parse_records(&name, &text, MAGIC)?;
    let policy = args
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("policy="))
        .unwrap_or("unknown")
        .to_string();
    let mut frames = Vec::with_capacity(records.len());
    for (line, text) in &records {
        let err = |msg: &str| Error::parse(&name, *line, msg);
        let t: Vec<&str> = text.split_whitespace().collect();
        if t.len() != 8 {
            return Err(err("expected 8 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| err("bad integer"));
        let fov_overlap = if t[7] == "-" {
            Vec::new()
        } else {
            t[7].split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        frames.push(FrameMetrics {
            frame_index: int(t[0])?,
            mean_angular_resolution: num(t[1])?,
            per_degree_quality: num(t[2])?,
            visible_bytes: num(t[3])?,
            wasted_bytes: num(t[4])?,
            fov_tiles: int(t[5])?,
            empty_fov: int(t[6])? != 0,
            fov_overlap,
        });
    }
    Ok((policy, frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::lod_to_rate;
    use std::f64::consts::PI;

    fn tile_at(center: [f64; 3]) -> TileMeta {
        let (a, b) = (0.75, 0.5);
        let lod_sizes: Vec<f64> = (1..=6).map(|h| lod_to_rate(h as f64, a, b)).collect();
        TileMeta {
            frame_index: 0,
            tile_id: [0, 0, 0],
            a,
            b,
            max_rate: lod_sizes[5],
            lod_sizes,
            center,
            wid: 0.1125,
        }
    }

    #[test]
    fn empty_fov_is_flagged() {
        let pose = Pose6DoF::new(0, [0.0; 3], 0.0, 0.0, 0.0);
        let tiles = [tile_at([-1.0, 0.0, 0.0])];
        let m = evaluate_frame(0, &tiles, &[100.0], &pose, 90.0, false).unwrap();
        assert!(m.empty_fov);
        assert_eq!(m.per_degree_quality, 0.0);
        assert_eq!(m.mean_angular_resolution, 0.0);
        assert_eq!(m.wasted_bytes, 100.0);
    }

    #[test]
    fn acuity_limit_gives_unit_quality() {
        let t = tile_at([0.0; 3]);
        // pick the rate for LoD 5 and the distance where that LoD shows 60 pts/deg
        let rate = lod_to_rate(5.0, t.a, t.b);
        let d = 60.0 * t.wid * 180.0 / (PI * 32.0);
        let pose = Pose6DoF::new(0, [-d, 0.0, 0.0], 0.0, 0.0, 0.0);
        let m = evaluate_frame(0, &[t], &[rate], &pose, 90.0, false).unwrap();
        assert!((m.mean_angular_resolution - 60.0).abs() < 1e-9);
        assert!((m.per_degree_quality - 1.0).abs() < 1e-9);
    }

    #[test]
    fn visible_plus_wasted_is_total() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let tiles: Vec<TileMeta> = (0..200)
            .map(|_| {
                tile_at([
                    rng.random_range(-0.9..0.9),
                    rng.random_range(-0.9..0.9),
                    rng.random_range(-0.9..0.9),
                ])
            })
            .collect();
        let rates: Vec<f64> = tiles.iter().map(|t| rng.random_range(0.0..t.max_rate)).collect();
        let pose = Pose6DoF::new(0, [-1.3, 0.2, 0.0], 15.0, -5.0, 0.0);
        let m = evaluate_frame(0, &tiles, &rates, &pose, 90.0, false).unwrap();
        let total: f64 = rates.iter().sum();
        assert!((m.visible_bytes + m.wasted_bytes - total).abs() < 1e-9 * total);
        assert!(m.fov_tiles > 0 && m.fov_tiles < 200);
        let rounded = evaluate_frame(0, &tiles, &rates, &pose, 90.0, true).unwrap();
        assert!(rounded.per_degree_quality <= m.per_degree_quality);
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let y = [8.0, 6.0, 4.0, 2.0];
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&x, &y[..3]).is_err());
    }

    #[test]
    fn independent_series_are_uncorrelated() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let x: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        assert!(pearson(&x, &y).unwrap().abs() < 0.2);
    }

    #[test]
    fn metrics_file_round_trip() {
        let frames = vec![
            FrameMetrics {
                frame_index: 0,
                mean_angular_resolution: 12.5,
                per_degree_quality: -0.25,
                visible_bytes: 1000.0,
                wasted_bytes: 20.0,
                fov_tiles: 3,
                empty_fov: false,
                fov_overlap: vec![0.5, 0.75],
            },
            FrameMetrics {
                frame_index: 1,
                mean_angular_resolution: 0.0,
                per_degree_quality: 0.0,
                visible_bytes: 0.0,
                wasted_bytes: 0.0,
                fov_tiles: 0,
                empty_fov: true,
                fov_overlap: vec![],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        save_metrics(&path, "kkt_exp", &frames).unwrap();
        let (policy, back) = load_metrics(&path).unwrap();
        assert_eq!(policy, "kkt_exp");
        assert_eq!(back, frames);
        let s = Summary::of(&frames);
        assert_eq!(s.empty_frames, 1);
        assert_eq!(s.per_degree_quality.mean, -0.25);
        assert_eq!(s.wasted_bytes.mean, 10.0);
    }
}
