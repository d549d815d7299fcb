//! FoV and bandwidth prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose6DoF};

/// Per-DoF linear regression over recent poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovPredictor {
    /// Number of most recent poses used for the fit.
    pub history_window: usize,
    /// Default number of future frames produced by [`FovPredictor::predict_fov`].
    pub horizon: usize,
}

impl Default for FovPredictor {
    fn default() -> Self {
        // 20 s window at 30 fps, fitted on half of it
        FovPredictor {
            history_window: 300,
            horizon: 600,
        }
    }
}

/// Fitted per-DoF lines, evaluated by frame index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovModel {
    slope: [f64; 6],
    /// Value of each line at `t_ref`.
    level: [f64; 6],
    t_ref: f64,
    last_frame: usize,
    /// Standard deviation of the fit residuals per DoF.
    pub residual_std: [f64; 6],
}

impl FovModel {
    /// Predicted pose for `frame`, angles wrapped back to `[-180, 180)`.
    pub fn predict_at(&self, frame: usize) -> Pose6DoF {
        let dt = frame as f64 - self.t_ref;
        let v = std::array::from_fn(|k| self.level[k] + self.slope[k] * dt);
        Pose6DoF::from_dofs(frame, v)
    }

    pub fn last_frame(&self) -> usize {
        self.last_frame
    }
}

/// Shifts each angle by a multiple of 360 so consecutive samples differ by
/// less than half a turn.
fn unwrap_angles(values: &mut [f64]) {
    for i in 1..values.len() {
        let prev = values[i - 1];
        values[i] = prev + normalize_angle(values[i] - prev);
    }
}

impl FovPredictor {
    pub fn new(history_window: usize, horizon: usize) -> Result<Self> {
        if history_window < 2 {
            return Err(Error::Config("FoV history window must be at least 2".into()));
        }
        Ok(FovPredictor {
            history_window,
            horizon,
        })
    }

    /// Fits one least-squares line per DoF to the last `history_window`
    /// poses. With a single pose the model holds it constant.
    pub fn fit(&self, history: &[Pose6DoF]) -> Result<FovModel> {
        let Some(last) = history.last() else {
            return Err(Error::Input("FoV prediction needs at least one pose".into()));
        };
        if history.windows(2).any(|w| w[1].frame_index <= w[0].frame_index) {
            return Err(Error::Input("FoV history must have increasing frame indices".into()));
        }
        let start = history.len().saturating_sub(self.history_window.max(2));
        let hist = &history[start..];
        if hist.len() < 2 {
            return Ok(FovModel {
                slope: [0.0; 6],
                level: last.dofs(),
                t_ref: last.frame_index as f64,
                last_frame: last.frame_index,
                residual_std: [0.0; 6],
            });
        }

        let n = hist.len() as f64;
        let ts: Vec<f64> = hist.iter().map(|p| p.frame_index as f64).collect();
        let t_mean = ts.iter().sum::<f64>() / n;
        let stt: f64 = ts.iter().map(|t| (t - t_mean).powi(2)).sum();

        let mut model = FovModel {
            slope: [0.0; 6],
            level: [0.0; 6],
            t_ref: t_mean,
            last_frame: last.frame_index,
            residual_std: [0.0; 6],
        };
        let mut series = vec![0.0; hist.len()];
        for k in 0..6 {
            for (s, p) in series.iter_mut().zip(hist) {
                *s = p.dofs()[k];
            }
            if k >= 3 {
                unwrap_angles(&mut series);
            }
            let y_mean = series.iter().sum::<f64>() / n;
            let sty: f64 = ts.iter().zip(&series).map(|(t, y)| (t - t_mean) * (y - y_mean)).sum();
            let slope = sty / stt;
            let sse: f64 = ts
                .iter()
                .zip(&series)
                .map(|(t, y)| (y - y_mean - slope * (t - t_mean)).powi(2))
                .sum();
            model.slope[k] = slope;
            model.level[k] = y_mean;
            model.residual_std[k] = (sse / n).sqrt();
        }
        Ok(model)
    }

    /// Predicted poses for the `horizon` frames following the last pose.
    pub fn predict_fov(&self, history: &[Pose6DoF], horizon: usize) -> Result<Vec<Pose6DoF>> {
        let model = self.fit(history)?;
        let last = model.last_frame;
        Ok((1..=horizon).map(|h| model.predict_at(last + h)).collect())
    }
}

/// Harmonic mean of recent per-round throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPredictor {
    pub history_len: usize,
}

impl Default for BandwidthPredictor {
    fn default() -> Self {
        BandwidthPredictor { history_len: 5 }
    }
}

impl BandwidthPredictor {
    /// Harmonic mean over the positive values among the last `history_len`
    /// observations.
    pub fn predict_bandwidth(&self, observed: &[f64]) -> Result<f64> {
        let start = observed.len().saturating_sub(self.history_len.max(1));
        let (n, inv) = observed[start..]
            .iter()
            .filter(|&&b| b > 0.0 && b.is_finite())
            .fold((0usize, 0.0), |(n, s), b| (n + 1, s + 1.0 / b));
        if n == 0 {
            return Err(Error::Input("no positive bandwidth observations".into()));
        }
        Ok(n as f64 / inv)
    }
}
