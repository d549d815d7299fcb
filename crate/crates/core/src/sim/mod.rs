//! Sliding-window streaming engine.
//!
//! Time advances in rounds of `round_interval_s`. A segment holds the
//! `S = fps * round_interval_s` frames that play during one round. Segment
//! `s` enters the download window in round `s`, may be patched during rounds
//! `s..s + window`, and plays during round `s + window`; the first `window`
//! rounds are therefore a prefill phase.
//!
//! With `steady_state` (the default) the scored span sits inside a longer
//! stream: `window - 1` lead-in segments come before it and the window keeps
//! admitting lead-out segments after it (the video loops). Every scored
//! segment then shares each of its rounds with a full window, so all
//! policies spend the same bandwidth on it. Without it the stream is exactly
//! the scored span: `n` segments over `n + window - 1` rounds, with the
//! window shrinking at both ends. Bytes on unscored segments are reported
//! separately.
//!
//! Each round the engine
//! 1. budgets bytes from the bandwidth observed in earlier rounds (round 0
//!    probes the link and uses its true throughput),
//! 2. fits the FoV predictor on the poses of frames already played (the
//!    starting pose is always known) and predicts every frame in the window,
//! 3. builds and solves the policy's allocation problem,
//! 4. downloads the plan with the round's actual throughput,
//! 5. scores the segment whose download window just closed.
//!
//! Bandwidth sample `k` of the trace is the throughput of round `k`.

mod buffer;
mod download;
pub mod metrics;
mod scenario;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocate::{
    build_problem, solve_equal_split, solve_kkt, solve_nonprogressive, solve_ruma, FramePrediction, ItemKey,
    WeightScheme, DEFAULT_RUMA_QUANTUM,
};
use crate::error::{Error, Result};
use crate::geometry::{view_probabilities, Frustum, Pose6DoF, TileSlot, ViewProbability};
use crate::predict::{BandwidthPredictor, FovPredictor};
use crate::traces::{BandwidthSample, Video};

pub use buffer::BufferState;
pub use download::download_with_actual_bandwidth;
pub use metrics::{
    correlation_report, evaluate_frame, format_metrics, load_metrics, pearson, save_metrics, FrameMetrics, Stat,
    Summary,
};
pub use scenario::{Inputs, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Progressive KKT allocation, equal weight for every frame in the window.
    KktConst,
    /// Progressive KKT allocation, weights decaying with the horizon.
    KktExp,
    /// KKT allocation over the segment entering the window only.
    Nonprogressive,
    /// Progressive, budget split evenly over predicted-visible tiles.
    EqualSplit,
    /// Progressive greedy allocation by finite-difference utility gain.
    Ruma,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::KktExp,
        Policy::KktConst,
        Policy::Nonprogressive,
        Policy::EqualSplit,
        Policy::Ruma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::KktConst => "kkt_const",
            Policy::KktExp => "kkt_exp",
            Policy::Nonprogressive => "nonprogressive",
            Policy::EqualSplit => "equal_split",
            Policy::Ruma => "ruma",
        }
    }

    pub fn is_progressive(self) -> bool {
        self != Policy::Nonprogressive
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub round_interval_s: f64,
    pub fps: f64,
    /// Rounds a segment spends in the download window.
    pub window: usize,
    /// Length of the scored playback, seconds.
    pub video_length_s: f64,
    pub policy: Policy,
    /// Decay of the `kkt_exp` weights.
    pub gamma: f64,
    /// Replaces the weights of `kkt_const` and `kkt_exp` when set.
    pub weights: Option<WeightScheme>,
    pub view_probability: ViewProbability,
    /// Poses fed to the FoV regression; half the window's frames if unset.
    pub fov_history: Option<usize>,
    pub bandwidth_predictor: BandwidthPredictor,
    /// Feed the true poses to the allocator instead of predictions.
    pub oracle_fov: bool,
    /// Budget each round with its true throughput.
    pub oracle_bandwidth: bool,
    pub ruma_quantum: f64,
    /// Score tiles at the last complete LoD instead of the continuous rate.
    pub round_to_lod: bool,
    /// Surround the scored span with unscored lead-in and lead-out segments.
    pub steady_state: bool,
    /// Seeds the view-likelihood sampler.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            round_interval_s: 1.0,
            fps: 30.0,
            window: 20,
            video_length_s: 30.0,
            policy: Policy::KktExp,
            gamma: 0.8,
            weights: None,
            view_probability: ViewProbability::Binary,
            fov_history: None,
            bandwidth_predictor: BandwidthPredictor::default(),
            oracle_fov: false,
            oracle_bandwidth: false,
            ruma_quantum: DEFAULT_RUMA_QUANTUM,
            round_to_lod: false,
            steady_state: true,
            seed: 0,
        }
    }
}

fn whole(x: f64, what: &str) -> Result<usize> {
    let r = x.round();
    if !(r >= 1.0 && (x - r).abs() <= 1e-9 * r.max(1.0)) {
        return Err(Error::Config(format!(
            "{what} must be a positive whole number, got {x}"
        )));
    }
    Ok(r as usize)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.round_interval_s > 0.0 && self.round_interval_s.is_finite()) {
            return Err(Error::Config("round interval must be positive".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config("fps must be positive".into()));
        }
        whole(
            self.fps * self.round_interval_s,
            "frames per segment (fps * round interval)",
        )?;
        whole(
            self.video_length_s / self.round_interval_s,
            "segment count (video length / round interval)",
        )?;
        if self.window == 0 {
            return Err(Error::Config("window must be at least one round".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if let Some(w) = &self.weights {
            if !(w.gamma > 0.0 && w.gamma <= 1.0) {
                return Err(Error::Config(format!("gamma {} outside (0, 1]", w.gamma)));
            }
        }
        if self.fov_history.is_some_and(|h| h < 2) {
            return Err(Error::Config("FoV history must hold at least 2 poses".into()));
        }
        if self.bandwidth_predictor.history_len == 0 {
            return Err(Error::Config("bandwidth history must hold at least one round".into()));
        }
        if !(self.ruma_quantum > 0.0) {
            return Err(Error::Config("RUMA quantum must be positive".into()));
        }
        if let ViewProbability::Ensemble { samples: 0 } = self.view_probability {
            return Err(Error::Config("ensemble needs at least one sample".into()));
        }
        Ok(())
    }

    /// Frames per segment.
    pub fn segment_frames(&self) -> usize {
        (self.fps * self.round_interval_s).round() as usize
    }

    /// Scored segments.
    pub fn segments(&self) -> usize {
        (self.video_length_s / self.round_interval_s).round() as usize
    }

    /// Scored frames.
    pub fn frames(&self) -> usize {
        self.segments() * self.segment_frames()
    }

    /// Unscored segments streamed before the scored span.
    pub fn lead_in(&self) -> usize {
        if self.steady_state {
            self.window - 1
        } else {
            0
        }
    }

    /// Index of the first scored frame in the stream.
    pub fn first_scored_frame(&self) -> usize {
        self.lead_in() * self.segment_frames()
    }

    /// Download rounds of a full run; the bandwidth trace must cover them.
    pub fn rounds(&self) -> usize {
        self.lead_in() + self.segments() + self.window - 1
    }

    fn streamed_segments(&self) -> usize {
        if self.steady_state {
            self.rounds()
        } else {
            self.segments()
        }
    }

    /// Frames that pass through the download window, scored or not. The FoV
    /// trace must cover them.
    pub fn streamed_frames(&self) -> usize {
        self.streamed_segments() * self.segment_frames()
    }

    /// FoV predictor over the configured history, horizon one full window.
    pub fn fov_predictor(&self) -> Result<FovPredictor> {
        let window_frames = self.window * self.segment_frames();
        FovPredictor::new(self.fov_history.unwrap_or(window_frames / 2).max(2), window_frames)
    }

    fn weight_scheme(&self) -> WeightScheme {
        match self.policy {
            Policy::KktConst => self.weights.unwrap_or_else(WeightScheme::constant),
            Policy::KktExp => self.weights.unwrap_or_else(|| WeightScheme::exponential(self.gamma)),
            _ => WeightScheme::constant(),
        }
    }
}

/// Bookkeeping of one download round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    /// Bytes the allocator was told it could spend.
    pub budget: f64,
    /// Bytes the link carried.
    pub capacity: f64,
    pub planned: f64,
    pub applied: f64,
    pub items: usize,
    pub lambda_star: f64,
    /// Frames that received bytes, as an inclusive range.
    pub frames_touched: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub policy: Policy,
    pub frames: Vec<FrameMetrics>,
    pub summary: Summary,
    pub rounds: Vec<RoundLog>,
    /// Bytes spent on segments outside the scored span.
    pub unscored_bytes: f64,
}

struct Prediction {
    horizon: usize,
    seen: Vec<bool>,
}

fn slots_of(video: &Video) -> Vec<Vec<TileSlot>> {
    video
        .frames
        .iter()
        .map(|tiles| {
            tiles
                .iter()
                .map(|t| TileSlot {
                    tile_id: t.tile_id,
                    center: t.center,
                    wid: t.wid,
                })
                .collect()
        })
        .collect()
}

fn overlap(predicted: &[bool], actual: &[bool]) -> f64 {
    let total = actual.iter().filter(|&&a| a).count();
    if total == 0 {
        return 1.0;
    }
    let hit = predicted.iter().zip(actual).filter(|(&p, &a)| p && a).count();
    hit as f64 / total as f64
}

/// Runs one policy over the video and traces.
pub fn run_simulation(
    cfg: &SimConfig,
    video: &Video,
    fov_trace: &[Pose6DoF],
    bandwidth: &[BandwidthSample],
) -> Result<SimOutput> {
    cfg.validate()?;
    video.validate()?;
    let seg = cfg.segment_frames();
    let window = cfg.window;
    let nframes = cfg.frames();
    let fov_span = video.tiling.fov_span_deg;
    let slots = slots_of(video);
    let scheme = cfg.weight_scheme();
    let predictor = cfg.fov_predictor()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let streamed = cfg.streamed_frames();
    let mut buffer = BufferState::new((0..streamed).map(|f| video.tiles(f).len()));
    let mut predictions: Vec<Vec<Prediction>> = (0..streamed).map(|_| Vec::new()).collect();
    let mut accuracy_sum = vec![(0.0f64, 0usize); window];
    let mut observed: Vec<f64> = Vec::new();
    let mut frames_out = Vec::with_capacity(nframes);
    let mut rounds = Vec::with_capacity(cfg.rounds());

    let pose_at = |f: usize, round: usize| {
        fov_trace.get(f).copied().ok_or_else(|| Error::TraceUnderrun {
            round,
            what: format!("FoV trace has {} frames, frame {f} needed", fov_trace.len()),
        })
    };

    for tau in 0..cfg.rounds() {
        let actual = *bandwidth.get(tau).ok_or_else(|| Error::TraceUnderrun {
            round: tau,
            what: format!("bandwidth trace has {} rounds", bandwidth.len()),
        })?;
        let budget = if cfg.oracle_bandwidth || tau == 0 {
            actual.bytes(cfg.round_interval_s)
        } else {
            match cfg.bandwidth_predictor.predict_bandwidth(&observed) {
                Ok(mbps) => mbps * 1e6 / 8.0 * cfg.round_interval_s,
                // nothing got through lately: send nothing
                Err(_) => 0.0,
            }
        };

        // frames already played when this round starts
        let known = (tau.saturating_sub(window) * seg).max(1);
        let model = if cfg.oracle_fov {
            None
        } else {
            pose_at(known - 1, tau)?;
            let start = known.saturating_sub(predictor.history_window);
            Some(predictor.fit(&fov_trace[start..known])?)
        };

        let std = model.map(|m| m.residual_std).unwrap_or([0.0; 6]);
        let first_seg = (tau + 1).saturating_sub(window);
        let last_seg = tau.min(cfg.streamed_segments() - 1);
        let mut preds = Vec::new();
        for s in first_seg..=last_seg {
            let horizon = s + window - tau;
            for f in s * seg..(s + 1) * seg {
                let pose = match &model {
                    Some(m) => m.predict_at(f),
                    None => pose_at(f, tau)?,
                };
                let tile_slots = &slots[f % slots.len()];
                let view_prob =
                    view_probabilities(cfg.view_probability, &pose, &std, tile_slots, &video.tiling, &mut rng);
                predictions[f].push(Prediction {
                    horizon,
                    seen: view_prob.iter().map(|&p| p >= 0.5).collect(),
                });
                preds.push(FramePrediction {
                    frame: f,
                    horizon,
                    pose,
                    view_prob,
                });
            }
        }

        let accuracy: Vec<Option<f64>> = accuracy_sum
            .iter()
            .map(|&(s, n)| (n > 0).then(|| s / n as f64))
            .collect();
        let weights = scheme.weights(window, &accuracy);
        let (problem, result) = if cfg.policy == Policy::Nonprogressive {
            preds.retain(|p| p.frame / seg == tau);
            let problem = build_problem(video, &preds, &buffer, &weights, budget)?;
            let result = solve_nonprogressive(&problem)?;
            (problem, result)
        } else {
            let problem = build_problem(video, &preds, &buffer, &weights, budget)?;
            let result = match cfg.policy {
                Policy::EqualSplit => solve_equal_split(&problem)?,
                Policy::Ruma => solve_ruma(&problem, cfg.ruma_quantum)?,
                _ => solve_kkt(&problem)?,
            };
            (problem, result)
        };
        let plan = result.deltas(&problem);
        let carried = download_with_actual_bandwidth(&plan, actual.bytes(cfg.round_interval_s));
        let r_max = |key: ItemKey| video.tiles(key.frame)[key.tile].max_rate;
        for &(key, delta) in &carried {
            buffer.apply(key, delta, r_max(key), tau)?;
        }
        rounds.push(RoundLog {
            round: tau,
            budget,
            capacity: actual.bytes(cfg.round_interval_s),
            planned: result.spent,
            applied: carried.iter().map(|d| d.1).sum(),
            items: problem.items.len(),
            lambda_star: result.lambda_star,
            frames_touched: carried.iter().map(|d| d.0.frame).fold(None, |acc, f| match acc {
                None => Some((f, f)),
                Some((lo, hi)) => Some((lo.min(f), hi.max(f))),
            }),
        });
        observed.push(actual.mbps);

        // the oldest segment's window just closed: play it
        let scored = cfg.lead_in()..cfg.lead_in() + cfg.segments();
        if let Some(s) = (tau + 1).checked_sub(window).filter(|s| scored.contains(s)) {
            for f in s * seg..(s + 1) * seg {
                let pose = pose_at(f, tau)?;
                let tiles = video.tiles(f);
                let mut m = evaluate_frame(f, tiles, buffer.frame_rates(f), &pose, fov_span, cfg.round_to_lod)?;
                let fr = Frustum::new(&pose, fov_span);
                let actual_seen: Vec<bool> = tiles.iter().map(|t| fr.contains(t.center)).collect();
                for p in std::mem::take(&mut predictions[f]) {
                    let o = overlap(&p.seen, &actual_seen);
                    m.fov_overlap.push(o);
                    let acc = &mut accuracy_sum[p.horizon - 1];
                    acc.0 += o;
                    acc.1 += 1;
                }
                frames_out.push(m);
            }
        }
    }

    let scored_frames = cfg.first_scored_frame()..cfg.first_scored_frame() + nframes;
    let unscored_bytes = (0..streamed)
        .filter(|f| !scored_frames.contains(f))
        .map(|f| buffer.total(f))
        .sum();
    let summary = Summary::of(&frames_out);
    Ok(SimOutput {
        policy: cfg.policy,
        frames: frames_out,
        summary,
        rounds,
        unscored_bytes,
    })
}
