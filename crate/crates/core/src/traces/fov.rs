use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{parse_fields, read_records, write_file};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose6DoF};

const MAGIC: &str = "pcvstream-fov";

/// Viewer wandering around the object.
///
/// The viewer's azimuth around the vertical axis drifts with a smoothly
/// varying angular velocity; distance and height wobble around their means;
/// the gaze looks at the object center plus a wandering yaw/pitch offset.
/// Every component is an Ornstein-Uhlenbeck process, parameterized in
/// seconds so the motion does not depend on the frame rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomWalkParams {
    /// Mean viewing distance from the cube center, meters.
    pub radius: f64,
    /// Stationary deviation of the distance, meters.
    pub radius_std: f64,
    /// Stationary deviation of the eye height around the center, meters.
    pub height_std: f64,
    /// Stationary deviation of the azimuth angular velocity, degrees/s.
    pub azimuth_speed_std: f64,
    /// Stationary deviation of the gaze offset, degrees.
    pub gaze_std: f64,
    /// Correlation time of every process, seconds.
    pub correlation_s: f64,
}

impl Default for RandomWalkParams {
    fn default() -> Self {
        RandomWalkParams {
            radius: 1.3,
            radius_std: 0.25,
            height_std: 0.25,
            azimuth_speed_std: 12.0,
            gaze_std: 30.0,
            correlation_s: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FovTraceModel {
    /// Fixed pose looking at `target`.
    Static {
        position: [f64; 3],
        target: [f64; 3],
    },
    /// Circle of `radius` in the horizontal plane through the cube center,
    /// looking at the center, one lap every `period_s` seconds.
    Orbit {
        radius: f64,
        period_s: f64,
    },
    RandomWalk(RandomWalkParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FovTraceSpec {
    pub model: FovTraceModel,
    pub frames: usize,
    pub fps: f64,
    pub seed: u64,
}

/// Deterministic for a fixed spec.
pub fn generate_fov_trace(spec: &FovTraceSpec) -> Result<Vec<Pose6DoF>> {
    if !(spec.fps > 0.0) {
        return Err(Error::Config("fps must be positive".into()));
    }
    let dt = 1.0 / spec.fps;
    let origin = [0.0; 3];
    match &spec.model {
        FovTraceModel::Static { position, target } => Ok((0..spec.frames)
            .map(|f| Pose6DoF::looking_at(f, *position, *target))
            .collect()),
        FovTraceModel::Orbit { radius, period_s } => {
            if !(*radius > 0.0 && *period_s > 0.0) {
                return Err(Error::Config("orbit radius and period must be positive".into()));
            }
            Ok((0..spec.frames)
                .map(|f| {
                    let phi = std::f64::consts::TAU * f as f64 * dt / period_s;
                    let pos = [radius * phi.cos(), radius * phi.sin(), 0.0];
                    Pose6DoF::looking_at(f, pos, origin)
                })
                .collect())
        }
        FovTraceModel::RandomWalk(p) => {
            if !(p.radius > 0.0 && p.correlation_s > 0.0) {
                return Err(Error::Config(
                    "random walk radius and correlation time must be positive".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
            let decay = dt / p.correlation_s;
            let kick = (2.0 * decay).sqrt();
            let mut azimuth = 180.0f64;
            let mut omega = 0.0f64;
            let (mut dr, mut h) = (0.0f64, 0.0f64);
            let (mut gyaw, mut gpitch) = (0.0f64, 0.0f64);
            let mut out = Vec::with_capacity(spec.frames);
            for f in 0..spec.frames {
                let r = (p.radius + dr).max(0.1);
                let a = azimuth.to_radians();
                let pos = [r * a.cos(), r * a.sin(), h];
                let look = Pose6DoF::looking_at(f, pos, origin);
                let pitch = (look.pitch + gpitch).clamp(-89.0, 89.0);
                out.push(Pose6DoF::new(f, pos, look.yaw + gyaw, pitch, 0.0));

                omega += -omega * decay + p.azimuth_speed_std * kick * normal();
                azimuth = normalize_angle(azimuth + omega * dt);
                dr += -dr * decay + p.radius_std * kick * normal();
                h += -h * decay + p.height_std * kick * normal();
                gyaw += -gyaw * decay + p.gaze_std * kick * normal();
                gpitch += -gpitch * decay + 0.5 * p.gaze_std * kick * normal();
            }
            Ok(out)
        }
    }
}

pub fn load_fov_trace(path: &Path) -> Result<Vec<Pose6DoF>> {
    let name = path.display().to_string();
    let (_, records) = read_records(path, MAGIC)?;
    let mut out: Vec<Pose6DoF> = Vec::with_capacity(records.len());
    for (line, text) in &records {
        let v = parse_fields::<7>(&name, *line, text)?;
        if v[0] < 0.0 || v[0].fract() != 0.0 {
            return Err(Error::parse(&name, *line, "frame index must be a nonnegative integer"));
        }
        let frame = v[0] as usize;
        if frame != out.len() {
            return Err(Error::parse(
                &name,
                *line,
                format!("expected frame {}, found {frame}", out.len()),
            ));
        }
        out.push(Pose6DoF::new(frame, [v[1], v[2], v[3]], v[4], v[5], v[6]));
    }
    Ok(out)
}

pub fn save_fov_trace(path: &Path, trace: &[Pose6DoF]) -> Result<()> {
    let mut s = format!("# {MAGIC} v1\n# frame x y z yaw pitch roll\n");
    for p in trace {
        writeln!(
            s,
            "{} {} {} {} {} {} {}",
            p.frame_index, p.x, p.y, p.z, p.yaw, p.pitch, p.roll
        )
        .unwrap();
    }
    write_file(path, &s)
}
