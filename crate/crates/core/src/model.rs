//! Tile utility model.
//!
//! A tile is a sub-octree of the video cube. Delivering its nodes down to
//! depth `H` places `2^H` points across the tile's side, so a viewer at
//! distance `d` sees an angular resolution of `d * 2^H * pi / (wid * 180)`
//! points per degree. The level of detail reachable with `r` bytes follows a
//! fitted logarithmic curve `H(r) = a * ln(b * r + 1)`, and the perceived
//! quality of a tile spanning `theta` degrees is `theta * ln(c * f_ang)`.
//!
//! All logarithms are natural. The rate-dependent term keeps an explicit
//! `ln 2` factor, which is where the `2^H` of the angular resolution ends up
//! after substitution.

use std::f64::consts::{E, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances below this are clamped before evaluating utilities, so a pose
/// sitting inside a tile does not blow up `M / d`.
pub const MIN_DISTANCE: f64 = 0.05;

/// Finest angular resolution (points per degree) the eye can resolve.
pub const ACUITY_LIMIT: f64 = 60.0;

/// Static description of one tile of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileMeta {
    pub frame_index: usize,
    /// Octree cell coordinates at the tile level.
    pub tile_id: [u16; 3],
    /// Rate/LoD fit coefficient, dimensionless.
    pub a: f64,
    /// Rate/LoD fit coefficient, per byte.
    pub b: f64,
    /// Bytes needed to deliver every LoD of the tile.
    pub max_rate: f64,
    /// Cumulative bytes needed to reach LoD 1, 2, ..., `lod_count`.
    pub lod_sizes: Vec<f64>,
    /// Tile center in meters.
    pub center: [f64; 3],
    /// Side length of the tile in meters.
    pub wid: f64,
}

impl TileMeta {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| {
            Err(Error::Input(format!(
                "tile {:?} of frame {}: {msg}",
                self.tile_id, self.frame_index
            )))
        };
        if !(self.a > 0.0 && self.a.is_finite()) {
            return bad("a must be positive");
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad("b must be positive");
        }
        if !(self.wid > 0.0) {
            return bad("side length must be positive");
        }
        if self.lod_sizes.is_empty() {
            return bad("empty LoD table");
        }
        if self.lod_sizes[0] < 0.0 || self.lod_sizes.windows(2).any(|w| w[1] < w[0]) {
            return bad("LoD sizes must be nonnegative and nondecreasing");
        }
        if self.lod_sizes[self.lod_sizes.len() - 1] != self.max_rate {
            return bad("last LoD size must equal the max rate");
        }
        Ok(())
    }

    pub fn lod_count(&self) -> usize {
        self.lod_sizes.len()
    }

    /// Bytes needed for a (possibly fractional) LoD, interpolating the LoD
    /// table linearly with LoD 0 costing nothing.
    pub fn rate_for_lod(&self, lod: f64) -> f64 {
        if lod <= 0.0 {
            return 0.0;
        }
        let top = self.lod_sizes.len() as f64;
        if lod >= top {
            return self.max_rate;
        }
        let lo = lod.floor() as usize;
        let frac = lod - lo as f64;
        let lo_rate = if lo == 0 { 0.0 } else { self.lod_sizes[lo - 1] };
        lo_rate + frac * (self.lod_sizes[lo] - lo_rate)
    }

    /// Rate rounded down to the largest complete LoD it pays for.
    pub fn floor_to_lod(&self, rate: f64) -> f64 {
        self.lod_sizes
            .iter()
            .rev()
            .find(|&&s| s <= rate)
            .copied()
            .unwrap_or(0.0)
    }
}

/// Constants of the utility model for one tile size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityConstants {
    /// `wid * 180 / pi`: the tile's angular span in degrees times distance.
    pub m: f64,
    /// Saturation constant; `ln(c * f_ang) = 1` exactly at the acuity limit.
    pub c: f64,
    pub acuity_limit: f64,
}

impl UtilityConstants {
    pub fn for_tile_width(wid: f64) -> Self {
        Self::with_acuity(wid, ACUITY_LIMIT)
    }

    pub fn with_acuity(wid: f64, acuity_limit: f64) -> Self {
        UtilityConstants {
            m: wid * 180.0 / PI,
            c: E / acuity_limit,
            acuity_limit,
        }
    }

    /// Degrees spanned by the tile from distance `d`.
    pub fn span_deg(&self, d: f64) -> f64 {
        self.m / d
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Points per degree for LoD `lod` seen from `d` meters on a tile `wid` wide.
pub fn angular_resolution(lod: f64, d: f64, wid: f64) -> Result<f64> {
    check_positive("distance", d)?;
    check_positive("tile width", wid)?;
    if lod.is_nan() || lod < 0.0 {
        return Err(Error::Domain(format!("LoD must be nonnegative, got {lod}")));
    }
    Ok(d * lod.exp2() * PI / (wid * 180.0))
}

/// Fractional LoD reachable with `rate` bytes.
pub fn rate_to_lod(rate: f64, a: f64, b: f64) -> Result<f64> {
    if rate.is_nan() || rate < 0.0 {
        return Err(Error::Domain(format!("rate must be nonnegative, got {rate}")));
    }
    Ok(a * (b * rate).ln_1p())
}

/// Inverse of [`rate_to_lod`].
pub fn lod_to_rate(lod: f64, a: f64, b: f64) -> f64 {
    (lod / a).exp_m1() / b
}

/// `ln(c * f_ang)`: quality contributed by each degree the tile covers.
pub fn per_degree_quality(f_ang: f64, c: f64) -> f64 {
    (c * f_ang).ln()
}

/// Utility of a tile delivered at `rate` bytes and viewed from `d` meters:
/// `(M/d) * (a ln2 ln(b r + 1) + ln(c d / M))`.
///
/// Concave and nondecreasing in `rate`. Not clamped at zero rate, where the
/// value may be negative.
pub fn tile_utility(rate: f64, d: f64, tile: &TileMeta, consts: &UtilityConstants) -> Result<f64> {
    check_positive("distance", d)?;
    if rate.is_nan() || rate < 0.0 {
        return Err(Error::Domain(format!("rate must be nonnegative, got {rate}")));
    }
    let span = consts.span_deg(d);
    Ok(span * (tile.a * LN_2 * (tile.b * rate).ln_1p() + (consts.c * d / consts.m).ln()))
}

/// `dQ/dr = (M/d) a ln2 b / (b r + 1)`.
pub fn marginal_utility(rate: f64, d: f64, tile: &TileMeta, consts: &UtilityConstants) -> f64 {
    consts.span_deg(d) * tile.a * LN_2 * tile.b / (tile.b * rate + 1.0)
}

/// Result of fitting `H = a ln(b r + 1)` to rate/LoD samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLodFit {
    pub a: f64,
    pub b: f64,
    /// Root-mean-square LoD residual.
    pub rms: f64,
}

/// Least-squares fit of `H = a ln(b r + 1)`.
///
/// `a` enters linearly, so for each `b` it has a closed form. `b` is found by
/// a log-spaced grid scan followed by golden-section refinement around the
/// best grid cell.
pub fn fit_rate_lod(samples: &[(f64, f64)]) -> Result<RateLodFit> {
    if samples.len() < 2 {
        return Err(Error::Fit("need at least two samples".into()));
    }
    for &(r, h) in samples {
        if !(r.is_finite() && h.is_finite()) || r < 0.0 {
            return Err(Error::Fit(format!("invalid sample ({r}, {h})")));
        }
        if r == 0.0 && h != 0.0 {
            return Err(Error::Fit(format!("zero rate must map to LoD 0, got {h}")));
        }
    }
    let positive = samples.iter().map(|s| s.0).filter(|&r| r > 0.0);
    let r_min = positive.clone().fold(f64::INFINITY, f64::min);
    let r_max = positive.fold(0.0, f64::max);
    let distinct = samples.iter().any(|s| s.0 != samples[0].0);
    if !distinct || !(r_max > 0.0) {
        return Err(Error::Fit("degenerate samples: fewer than two distinct rates".into()));
    }

    // For fixed b the best a is <H,g>/<g,g> with g = ln(b r + 1).
    let solve_a = |log_b: f64| -> (f64, f64) {
        let b = log_b.exp();
        let (mut hg, mut gg) = (0.0, 0.0);
        for &(r, h) in samples {
            let g = (b * r).ln_1p();
            hg += h * g;
            gg += g * g;
        }
        let a = hg / gg;
        let sse = samples
            .iter()
            .map(|&(r, h)| {
                let e = h - a * (b * r).ln_1p();
                e * e
            })
            .sum::<f64>();
        (a, sse)
    };

    let lo = (1e-6 / r_max).ln();
    let hi = (1e6 / r_min).ln();
    const GRID: usize = 600;
    let step = (hi - lo) / GRID as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=GRID {
        let (_, sse) = solve_a(lo + step * i as f64);
        if sse < best.1 {
            best = (i, sse);
        }
    }

    let mut left = lo + step * best.0.saturating_sub(1) as f64;
    let mut right = lo + step * (best.0 + 1).min(GRID) as f64;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = right - inv_phi * (right - left);
    let mut x2 = left + inv_phi * (right - left);
    let mut f1 = solve_a(x1).1;
    let mut f2 = solve_a(x2).1;
    for _ in 0..200 {
        if right - left <= 1e-15 * right.abs().max(1.0) {
            break;
        }
        if f1 <= f2 {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - inv_phi * (right - left);
            f1 = solve_a(x1).1;
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + inv_phi * (right - left);
            f2 = solve_a(x2).1;
        }
    }
    let log_b = if f1 <= f2 { x1 } else { x2 };
    let (a, sse) = solve_a(log_b);
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Fit(format!("fitted a = {a} is not positive")));
    }
    Ok(RateLodFit {
        a,
        b: log_b.exp(),
        rms: (sse / samples.len() as f64).sqrt(),
    })
}

#[cfg(test)]
// Oracle values spell out their constants instead of reusing the library's.
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    fn tile(a: f64, b: f64, wid: f64) -> TileMeta {
        let lod_sizes: Vec<f64> = (1..=6).map(|h| lod_to_rate(h as f64, a, b)).collect();
        TileMeta {
            frame_index: 0,
            tile_id: [0, 0, 0],
            a,
            b,
            max_rate: lod_sizes[5],
            lod_sizes,
            center: [0.0; 3],
            wid,
        }
    }

    #[test]
    fn one_point_per_degree_at_lod_zero() {
        let wid = 0.1125;
        // theta = wid*180/(pi*d) = 1 degree
        let d = wid * 180.0 / PI;
        assert!((angular_resolution(0.0, d, wid).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angular_resolution_at_reference_tile_size() {
        let wid = 1.8 / 16.0;
        let expected = 1.27 * 64.0 * 3.141592653589793 / (0.1125 * 180.0);
        let got = angular_resolution(6.0, 1.27, wid).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got - 12.609_81).abs() < 1e-4);
    }

    #[test]
    fn angular_resolution_doubles_per_level() {
        for h in 0..8 {
            let f0 = angular_resolution(h as f64, 0.7, 0.2).unwrap();
            let f1 = angular_resolution(h as f64 + 1.0, 0.7, 0.2).unwrap();
            assert!((f1 - 2.0 * f0).abs() < 1e-12 * f1);
        }
    }

    #[test]
    fn angular_resolution_rejects_bad_geometry() {
        assert!(matches!(angular_resolution(1.0, 0.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(angular_resolution(1.0, 1.0, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn rate_to_lod_basics() {
        assert_eq!(rate_to_lod(0.0, 1.7, 0.3).unwrap(), 0.0);
        let b = 0.004;
        let r = (E - 1.0) / b;
        assert!((rate_to_lod(r, 1.0, b).unwrap() - 1.0).abs() < 1e-12);
        assert!(rate_to_lod(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rate_to_lod_matches_bisection_inverse() {
        // Invert lod -> rate by bisection on the forward map.
        let invert = |h: f64, a: f64, b: f64| {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while a * (b * hi + 1.0).ln() < h {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if a * (b * mid + 1.0).ln() < h {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        for &(a, b, r) in &[(0.8, 0.02, 1234.0), (1.5, 1e-4, 9e4), (2.2, 0.3, 7.5)] {
            let h = rate_to_lod(r, a, b).unwrap();
            let back = invert(h, a, b);
            assert!((back - r).abs() < 1e-9 * r, "{back} vs {r}");
            assert!((lod_to_rate(h, a, b) - r).abs() < 1e-9 * r);
        }
    }

    #[test]
    fn utility_at_acuity_limit_equals_span() {
        let t = tile(1.3, 0.01, 0.1125);
        let k = UtilityConstants::for_tile_width(t.wid);
        let r = 5000.0;
        let h = rate_to_lod(r, t.a, t.b).unwrap();
        // solve d for f_ang = 60
        let d = 60.0 * t.wid * 180.0 / (PI * h.exp2());
        let f = angular_resolution(h, d, t.wid).unwrap();
        assert!((f - 60.0).abs() < 1e-9);
        assert!((per_degree_quality(f, k.c) - 1.0).abs() < 1e-12);
        let q = tile_utility(r, d, &t, &k).unwrap();
        assert!((q - k.m / d).abs() < 1e-9 * q.abs());
    }

    #[test]
    fn utility_matches_longhand() {
        let t = tile(1.1, 0.02, 0.1125);
        let k = UtilityConstants::for_tile_width(t.wid);
        // hand-evaluated: M = 0.1125*180/pi = 6.445775195...
        let m = 6.445_775_195_221_945;
        assert!((k.m - m).abs() < 1e-12);
        let c = 2.718_281_828_459_045 / 60.0;
        for &(r, d) in &[(0.0, 1.27), (250.0, 0.49), (40_000.0, 3.1)] {
            let expected = (m / d) * (1.1 * 0.693_147_180_559_945_3 * (0.02 * r + 1.0f64).ln() + (c * d / m).ln());
            let got = tile_utility(r, d, &t, &k).unwrap();
            assert!(
                (got - expected).abs() < 1e-10 * expected.abs().max(1.0),
                "{got} vs {expected}"
            );
        }
    }

    #[test]
    fn utility_may_be_negative_at_zero_rate() {
        let t = tile(1.1, 0.02, 0.1125);
        let k = UtilityConstants::for_tile_width(t.wid);
        assert!(tile_utility(0.0, 1.0, &t, &k).unwrap() < 0.0);
        assert!(tile_utility(1.0, 0.0, &t, &k).is_err());
    }

    #[test]
    fn rate_for_lod_interpolates_table() {
        let t = tile(1.0, 0.1, 0.1);
        assert_eq!(t.rate_for_lod(0.0), 0.0);
        assert_eq!(t.rate_for_lod(6.0), t.max_rate);
        assert!((t.rate_for_lod(2.0) - t.lod_sizes[1]).abs() < 1e-12);
        let mid = t.rate_for_lod(2.5);
        assert!((mid - 0.5 * (t.lod_sizes[1] + t.lod_sizes[2])).abs() < 1e-9);
        assert_eq!(t.floor_to_lod(t.lod_sizes[2] + 1.0), t.lod_sizes[2]);
        assert_eq!(t.floor_to_lod(t.lod_sizes[0] * 0.5), 0.0);
        t.validate().unwrap();
    }

    #[test]
    fn validate_catches_bad_tables() {
        let mut t = tile(1.0, 0.1, 0.1);
        t.lod_sizes.swap(1, 2);
        assert!(t.validate().is_err());
        let mut t = tile(1.0, 0.1, 0.1);
        t.max_rate += 1.0;
        assert!(t.validate().is_err());
        let mut t = tile(1.0, 0.1, 0.1);
        t.a = 0.0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn fit_recovers_exact_coefficients() {
        let samples: Vec<(f64, f64)> = std::iter::once((0.0, 0.0))
            .chain((1..=6).map(|h| (lod_to_rate(h as f64, 2.0, 0.01), h as f64)))
            .collect();
        let fit = fit_rate_lod(&samples).unwrap();
        assert!((fit.a - 2.0).abs() < 0.02, "{fit:?}");
        assert!((fit.b - 0.01).abs() < 1e-4, "{fit:?}");
        assert!(fit.rms < 1e-6);
    }

    #[test]
    fn fit_interpolates_two_points() {
        // ratio of LoDs 1/2.5 lies strictly between r1/r2 = 0.1 and 1
        let samples = [(100.0, 1.0), (1000.0, 2.5)];
        let fit = fit_rate_lod(&samples).unwrap();
        assert!(fit.rms < 1e-9, "{fit:?}");
    }

    #[test]
    fn fit_rejects_degenerate_samples() {
        assert!(matches!(fit_rate_lod(&[(5.0, 1.0), (5.0, 1.0)]), Err(Error::Fit(_))));
        assert!(matches!(fit_rate_lod(&[(5.0, 1.0)]), Err(Error::Fit(_))));
        assert!(matches!(fit_rate_lod(&[(0.0, 1.0), (5.0, 1.0)]), Err(Error::Fit(_))));
    }

    #[test]
    fn fit_with_noise_stays_near_noise_floor() {
        use rand::{Rng, SeedableRng};
        use rand_distr::{Distribution, Normal};
        let sigma = 0.05;
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let a = rng.random_range(0.8..2.5);
            let b = rng.random_range(1e-3..1e-1);
            let samples: Vec<(f64, f64)> = (1..=12)
                .map(|i| {
                    let h = i as f64 * 0.5;
                    (lod_to_rate(h, a, b), h + noise.sample(&mut rng))
                })
                .collect();
            let fit = fit_rate_lod(&samples).unwrap();
            worst = worst.max(fit.rms);
        }
        assert!(worst <= 2.0 * sigma, "worst rms {worst}");
    }
}
