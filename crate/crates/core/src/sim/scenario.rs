use serde::{Deserialize, Serialize};

use super::{run_simulation, Policy, SimConfig, SimOutput};
use crate::error::Result;
use crate::geometry::{Pose6DoF, TilingConfig};
use crate::traces::{
    generate_bandwidth, generate_fov_trace, generate_video, BandwidthModel, BandwidthSample, FovTraceModel,
    FovTraceSpec, RandomWalkParams, SyntheticVideoSpec, Video,
};

/// A fully synthetic experiment: engine settings plus the generators of its
/// three inputs. One seed drives all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub sim: SimConfig,
    /// Its `seed` is replaced by the run seed.
    pub video: SyntheticVideoSpec,
    pub fov: FovTraceModel,
    pub bandwidth: BandwidthModel,
}

/// Generated inputs of one seed.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub video: Video,
    pub fov: Vec<Pose6DoF>,
    pub bandwidth: Vec<BandwidthSample>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::benchmark()
    }
}

impl Scenario {
    /// The reference benchmark: a viewer drifting around a sparse object at
    /// about 1.3 m, 10 fps, 20-round window, fluctuating 5-25 Mbps link.
    pub fn benchmark() -> Self {
        Scenario {
            sim: SimConfig {
                fps: 10.0,
                ..SimConfig::default()
            },
            video: SyntheticVideoSpec {
                frames: 60,
                tiling: TilingConfig {
                    fov_span_deg: 75.0,
                    ..TilingConfig::default()
                },
                ..SyntheticVideoSpec::default()
            },
            fov: FovTraceModel::RandomWalk(RandomWalkParams {
                correlation_s: 20.0,
                gaze_std: 15.0,
                azimuth_speed_std: 10.0,
                ..RandomWalkParams::default()
            }),
            bandwidth: BandwidthModel::Markov {
                min_mbps: 5.0,
                max_mbps: 25.0,
                states: 8,
                switch_prob: 0.3,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.video.validate()?;
        self.bandwidth.validate()
    }

    pub fn inputs(&self, seed: u64) -> Result<Inputs> {
        self.validate()?;
        let video = generate_video(&SyntheticVideoSpec {
            seed,
            ..self.video.clone()
        })?;
        let fov = generate_fov_trace(&FovTraceSpec {
            model: self.fov.clone(),
            frames: self.sim.streamed_frames(),
            fps: self.sim.fps,
            seed,
        })?;
        let bandwidth = generate_bandwidth(&self.bandwidth, self.sim.rounds(), self.sim.round_interval_s, seed)?;
        Ok(Inputs { video, fov, bandwidth })
    }

    /// Runs `policy` on pre-generated inputs of `seed`.
    pub fn run_on(&self, inputs: &Inputs, policy: Policy, seed: u64) -> Result<SimOutput> {
        let cfg = SimConfig {
            policy,
            seed,
            ..self.sim.clone()
        };
        run_simulation(&cfg, &inputs.video, &inputs.fov, &inputs.bandwidth)
    }

    pub fn run(&self, policy: Policy, seed: u64) -> Result<SimOutput> {
        self.run_on(&self.inputs(seed)?, policy, seed)
    }
}
