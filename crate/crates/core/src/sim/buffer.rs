use crate::allocate::ItemKey;
use crate::error::{Error, Result};

/// Bytes buffered so far for every tile of every playback frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferState {
    rates: Vec<Vec<f64>>,
    entry_round: Vec<Option<usize>>,
}

impl BufferState {
    /// Empty buffer for frames with the given tile counts.
    pub fn new(tiles_per_frame: impl IntoIterator<Item = usize>) -> Self {
        let rates: Vec<Vec<f64>> = tiles_per_frame.into_iter().map(|n| vec![0.0; n]).collect();
        let entry_round = vec![None; rates.len()];
        BufferState { rates, entry_round }
    }

    pub fn frame_count(&self) -> usize {
        self.rates.len()
    }

    pub fn rate(&self, frame: usize, tile: usize) -> f64 {
        self.rates[frame][tile]
    }

    pub fn frame_rates(&self, frame: usize) -> &[f64] {
        &self.rates[frame]
    }

    /// Round in which the frame first received bytes.
    pub fn entry_round(&self, frame: usize) -> Option<usize> {
        self.entry_round[frame]
    }

    /// Adds `delta` bytes to a tile, never exceeding `r_max`.
    pub fn apply(&mut self, key: ItemKey, delta: f64, r_max: f64, round: usize) -> Result<()> {
        if !(delta >= 0.0) {
            return Err(Error::Input(format!("negative download {delta} for {key:?}")));
        }
        let slot = self
            .rates
            .get_mut(key.frame)
            .and_then(|f| f.get_mut(key.tile))
            .ok_or_else(|| Error::Input(format!("{key:?} is outside the buffer")))?;
        *slot = (*slot + delta).min(r_max);
        self.entry_round[key.frame].get_or_insert(round);
        Ok(())
    }

    pub fn total(&self, frame: usize) -> f64 {
        self.rates[frame].iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_is_monotone_and_capped() {
        let mut b = BufferState::new([2, 3]);
        let key = ItemKey { frame: 1, tile: 2 };
        b.apply(key, 5.0, 8.0, 3).unwrap();
        b.apply(key, 5.0, 8.0, 4).unwrap();
        assert_eq!(b.rate(1, 2), 8.0);
        assert_eq!(b.entry_round(1), Some(3));
        assert_eq!(b.entry_round(0), None);
        assert!(b.apply(key, -1.0, 8.0, 5).is_err());
        assert!(b.apply(ItemKey { frame: 2, tile: 0 }, 1.0, 8.0, 5).is_err());
        assert_eq!(b.total(1), 8.0);
    }
}
