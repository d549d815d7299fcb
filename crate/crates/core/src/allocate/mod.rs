//! Per-round tile rate allocation.
//!
//! Every round the downloader holds a set of candidate tiles, each with some
//! bytes already buffered (`r0`), a ceiling (`r_max`) and a weighted utility
//! `z * ln(b * r + 1)` (plus a constant that does not affect the optimum).
//! The solvers split a byte budget across them.

mod baselines;
mod kkt;
mod problem;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baselines::{solve_equal_split, solve_nonprogressive, solve_ruma, DEFAULT_RUMA_QUANTUM};
pub use kkt::solve_kkt;
pub use problem::{build_problem, FramePrediction};

/// Identifies a tile of a frame: `(frame index, tile index within the frame)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemKey {
    pub frame: usize,
    pub tile: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationItem {
    pub key: ItemKey,
    /// Weighted marginal coefficient `w * p * a * theta * ln 2`.
    pub z: f64,
    pub b: f64,
    /// Bytes already buffered.
    pub r0: f64,
    pub r_max: f64,
}

impl AllocationItem {
    /// Weighted utility at `rate`, up to an additive constant.
    pub fn utility(&self, rate: f64) -> f64 {
        self.z * (self.b * rate).ln_1p()
    }

    /// `z / (r + 1/b)`.
    pub fn marginal(&self, rate: f64) -> f64 {
        self.z / (rate + 1.0 / self.b)
    }

    /// Water level at or above which the item receives nothing.
    pub fn floor_threshold(&self) -> f64 {
        self.marginal(self.r0)
    }

    /// Water level at or below which the item is saturated.
    pub fn ceiling_threshold(&self) -> f64 {
        self.marginal(self.r_max)
    }

    /// Rate the item takes at water level `lambda`.
    pub fn rate_at(&self, lambda: f64) -> f64 {
        if self.z <= 0.0 {
            return self.r0;
        }
        if lambda <= 0.0 {
            return self.r_max;
        }
        (self.z / lambda - 1.0 / self.b).clamp(self.r0, self.r_max)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub items: Vec<AllocationItem>,
    /// Bytes available this round.
    pub budget: f64,
}

impl AllocationProblem {
    pub fn new(items: Vec<AllocationItem>, budget: f64) -> Self {
        AllocationProblem { items, budget }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget.is_nan() || self.budget < 0.0 {
            return Err(Error::Input(format!("budget must be nonnegative, got {}", self.budget)));
        }
        for it in &self.items {
            let ok = it.z.is_finite()
                && it.z >= 0.0
                && it.b.is_finite()
                && it.b > 0.0
                && it.r0.is_finite()
                && it.r_max.is_finite()
                && 0.0 <= it.r0
                && it.r0 <= it.r_max;
            if !ok {
                return Err(Error::Input(format!("invalid allocation item {it:?}")));
            }
        }
        Ok(())
    }

    /// Bytes needed to saturate every item.
    pub fn capacity(&self) -> f64 {
        self.items.iter().map(|it| it.r_max - it.r0).sum()
    }

    /// Objective value of a rate vector aligned with `items`.
    pub fn utility(&self, rates: &[f64]) -> f64 {
        self.items.iter().zip(rates).map(|(it, &r)| it.utility(r)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    /// Final rate of each item, aligned with the problem's items.
    pub rates: Vec<f64>,
    /// Water level; only meaningful for [`solve_kkt`], zero otherwise.
    pub lambda_star: f64,
    /// Bytes added this round.
    pub spent: f64,
}

impl AllocationResult {
    pub(crate) fn from_rates(problem: &AllocationProblem, rates: Vec<f64>, lambda_star: f64) -> Self {
        let spent = problem.items.iter().zip(&rates).map(|(it, r)| r - it.r0).sum();
        AllocationResult {
            rates,
            lambda_star,
            spent,
        }
    }

    /// Nonzero byte increments per item, in item order.
    pub fn deltas(&self, problem: &AllocationProblem) -> Vec<(ItemKey, f64)> {
        problem
            .items
            .iter()
            .zip(&self.rates)
            .filter_map(|(it, &r)| {
                let d = r - it.r0;
                (d > 0.0).then_some((it.key, d))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Constant,
    Exponential,
    Linear,
    /// Mean historical FoV overlap observed at each horizon.
    AccuracyBased,
}

/// How frame weights decay with the prediction horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub kind: WeightKind,
    /// Per-round decay of exponential weights.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    0.8
}

/// Smallest weight handed out, keeping every weight positive.
const MIN_WEIGHT: f64 = 1e-3;

impl WeightScheme {
    pub fn constant() -> Self {
        WeightScheme {
            kind: WeightKind::Constant,
            gamma: default_gamma(),
        }
    }

    pub fn exponential(gamma: f64) -> Self {
        WeightScheme {
            kind: WeightKind::Exponential,
            gamma,
        }
    }

    pub fn linear() -> Self {
        WeightScheme {
            kind: WeightKind::Linear,
            gamma: default_gamma(),
        }
    }

    pub fn accuracy_based() -> Self {
        WeightScheme {
            kind: WeightKind::AccuracyBased,
            gamma: default_gamma(),
        }
    }

    /// Weights for horizons `1..=window` (index 0 is the next frame to
    /// play). `accuracy[i]` is the mean overlap ratio seen so far at horizon
    /// `i + 1`, if any; only the accuracy-based scheme reads it.
    ///
    /// The result is positive and nonincreasing.
    pub fn weights(&self, window: usize, accuracy: &[Option<f64>]) -> Vec<f64> {
        let mut w: Vec<f64> = match self.kind {
            WeightKind::Constant => vec![1.0; window],
            WeightKind::Exponential => (0..window).map(|i| self.gamma.powi(i as i32)).collect(),
            WeightKind::Linear => (0..window).map(|i| (window - i) as f64 / window as f64).collect(),
            WeightKind::AccuracyBased => (0..window)
                .map(|i| accuracy.get(i).copied().flatten().unwrap_or(1.0))
                .collect(),
        };
        let mut running = f64::INFINITY;
        for x in &mut w {
            running = running.min(x.max(MIN_WEIGHT));
            *x = running;
        }
        w
    }
}
