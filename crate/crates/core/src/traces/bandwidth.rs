use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{parse_fields, read_records, write_file};
use crate::error::{Error, Result};

const MAGIC: &str = "pcvstream-bandwidth";

/// Throughput observed over one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSample {
    pub t_seconds: f64,
    pub mbps: f64,
}

impl BandwidthSample {
    /// Bytes deliverable in `interval_s` seconds at this throughput.
    pub fn bytes(&self, interval_s: f64) -> f64 {
        self.mbps * 1e6 / 8.0 * interval_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BandwidthModel {
    Constant {
        mbps: f64,
    },
    /// Cycles through `levels`, holding each for `period_rounds` rounds.
    Step {
        levels: Vec<f64>,
        period_rounds: usize,
    },
    /// Random walk over `states` evenly spaced levels in `[min, max]`; each
    /// round it moves to a neighboring level with probability `switch_prob`.
    Markov {
        min_mbps: f64,
        max_mbps: f64,
        states: usize,
        switch_prob: f64,
    },
}

impl BandwidthModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            BandwidthModel::Constant { mbps } => *mbps >= 0.0 && mbps.is_finite(),
            BandwidthModel::Step { levels, period_rounds } => {
                !levels.is_empty() && *period_rounds > 0 && levels.iter().all(|l| *l >= 0.0 && l.is_finite())
            }
            BandwidthModel::Markov {
                min_mbps,
                max_mbps,
                states,
                switch_prob,
            } => *min_mbps >= 0.0 && max_mbps >= min_mbps && *states >= 1 && (0.0..=1.0).contains(switch_prob),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid bandwidth model {self:?}")))
        }
    }
}

/// One sample per round, starting at `t = 0`.
pub fn generate_bandwidth(
    model: &BandwidthModel,
    rounds: usize,
    interval_s: f64,
    seed: u64,
) -> Result<Vec<BandwidthSample>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(rounds);
    let mut state = 0usize;
    if let BandwidthModel::Markov { states, .. } = model {
        state = rng.random_range(0..*states);
    }
    for k in 0..rounds {
        let mbps = match model {
            BandwidthModel::Constant { mbps } => *mbps,
            BandwidthModel::Step { levels, period_rounds } => levels[(k / period_rounds) % levels.len()],
            BandwidthModel::Markov {
                min_mbps,
                max_mbps,
                states,
                switch_prob,
            } => {
                if k > 0 && *states > 1 && rng.random_bool(*switch_prob) {
                    let up = match state {
                        0 => true,
                        s if s == states - 1 => false,
                        _ => rng.random_bool(0.5),
                    };
                    state = if up { state + 1 } else { state - 1 };
                }
                if *states == 1 {
                    *min_mbps
                } else {
                    min_mbps + (max_mbps - min_mbps) * state as f64 / (*states - 1) as f64
                }
            }
        };
        out.push(BandwidthSample {
            t_seconds: k as f64 * interval_s,
            mbps,
        });
    }
    Ok(out)
}

pub fn load_bandwidth_trace(path: &Path) -> Result<Vec<BandwidthSample>> {
    let name = path.display().to_string();
    let (_, records) = read_records(path, MAGIC)?;
    records
        .iter()
        .map(|(line, text)| {
            let [t_seconds, mbps] = parse_fields::<2>(&name, *line, text)?;
            if mbps < 0.0 {
                return Err(Error::parse(&name, *line, "negative bandwidth"));
            }
            Ok(BandwidthSample { t_seconds, mbps })
        })
        .collect()
}

pub fn save_bandwidth_trace(path: &Path, trace: &[BandwidthSample]) -> Result<()> {
    let mut s = format!("# {MAGIC} v1\n# t_seconds mbps\n");
    for b in trace {
        writeln!(s, "{} {}", b.t_seconds, b.mbps).unwrap();
    }
    write_file(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_step() {
        let c = generate_bandwidth(&BandwidthModel::Constant { mbps: 4.0 }, 10, 1.0, 0).unwrap();
        assert!(c.iter().all(|b| b.mbps == 4.0));
        assert_eq!(c[3].t_seconds, 3.0);
        assert_eq!(c[0].bytes(1.0), 500_000.0);
        let s = generate_bandwidth(
            &BandwidthModel::Step {
                levels: vec![1.0, 2.0],
                period_rounds: 2,
            },
            6,
            1.0,
            0,
        )
        .unwrap();
        let v: Vec<f64> = s.iter().map(|b| b.mbps).collect();
        assert_eq!(v, vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn markov_stays_in_range() {
        let m = BandwidthModel::Markov {
            min_mbps: 2.0,
            max_mbps: 9.0,
            states: 8,
            switch_prob: 0.4,
        };
        let s = generate_bandwidth(&m, 100_000, 1.0, 5).unwrap();
        assert!(s.iter().all(|b| (2.0..=9.0).contains(&b.mbps)));
        // it actually moves
        let lo = s.iter().map(|b| b.mbps).fold(f64::INFINITY, f64::min);
        let hi = s.iter().map(|b| b.mbps).fold(0.0, f64::max);
        assert_eq!((lo, hi), (2.0, 9.0));
        assert_eq!(s, generate_bandwidth(&m, 100_000, 1.0, 5).unwrap());
    }

    #[test]
    fn invalid_models() {
        assert!(generate_bandwidth(&BandwidthModel::Constant { mbps: -1.0 }, 3, 1.0, 0).is_err());
        let m = BandwidthModel::Markov {
            min_mbps: 5.0,
            max_mbps: 1.0,
            states: 3,
            switch_prob: 0.1,
        };
        assert!(generate_bandwidth(&m, 3, 1.0, 0).is_err());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bw.txt");
        let m = BandwidthModel::Markov {
            min_mbps: 1.15,
            max_mbps: 11.5,
            states: 5,
            switch_prob: 0.3,
        };
        let s = generate_bandwidth(&m, 50, 1.0, 9).unwrap();
        save_bandwidth_trace(&path, &s).unwrap();
        assert_eq!(load_bandwidth_trace(&path).unwrap(), s);
    }

    #[test]
    fn malformed_line_reports_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bw.txt");
        std::fs::write(&path, "# pcvstream-bandwidth v1\n0 1.0\n1 oops\n").unwrap();
        let err = load_bandwidth_trace(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }
}
