//! Reference allocation policies the water-filling solver is compared with.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{solve_kkt, AllocationItem, AllocationProblem, AllocationResult};
use crate::error::{Error, Result};

/// Grant size of the greedy finite-difference allocator, bytes.
pub const DEFAULT_RUMA_QUANTUM: f64 = 256.0;

/// Splits the budget evenly over all items, capping each at its ceiling and
/// sharing whatever the capped items leave among the others.
pub fn solve_equal_split(problem: &AllocationProblem) -> Result<AllocationResult> {
    problem.validate()?;
    let items = &problem.items;
    let mut order: Vec<usize> = (0..items.len()).collect();
    // Smallest headroom first: once an item fits under the running share,
    // every later one is capped by the share instead.
    order.sort_by(|&a, &b| {
        let ha = items[a].r_max - items[a].r0;
        let hb = items[b].r_max - items[b].r0;
        ha.partial_cmp(&hb)
            .unwrap_or(Ordering::Equal)
            .then(items[a].key.cmp(&items[b].key))
    });
    let mut rates: Vec<f64> = items.iter().map(|it| it.r0).collect();
    let mut remaining = problem.budget;
    let n = order.len();
    for (j, &i) in order.iter().enumerate() {
        if remaining <= 0.0 {
            break;
        }
        let share = remaining / (n - j) as f64;
        let give = share.min(items[i].r_max - items[i].r0);
        rates[i] += give;
        remaining -= give;
    }
    Ok(AllocationResult::from_rates(problem, rates, 0.0))
}

#[derive(Debug, PartialEq)]
struct Candidate {
    gain: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on gain, lower index first on ties
        self.gain.total_cmp(&other.gain).then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-byte utility gain of the next grant to `it` at `rate`.
fn step_gain(it: &AllocationItem, rate: f64, quantum: f64) -> Option<f64> {
    let step = quantum.min(it.r_max - rate);
    if step <= 0.0 || it.z <= 0.0 {
        return None;
    }
    // ln(b (r + s) + 1) - ln(b r + 1) without cancellation
    let gain = it.z * (it.b * step / (it.b * rate + 1.0)).ln_1p() / step;
    Some(gain)
}

/// Greedy allocator: hands out `quantum` bytes at a time to the item with
/// the largest finite-difference utility gain until the budget runs out or
/// every item is full. The final grant may be partial.
pub fn solve_ruma(problem: &AllocationProblem, quantum: f64) -> Result<AllocationResult> {
    problem.validate()?;
    if !(quantum > 0.0 && quantum.is_finite()) {
        return Err(Error::Input(format!("quantum must be positive, got {quantum}")));
    }
    let items = &problem.items;
    let mut rates: Vec<f64> = items.iter().map(|it| it.r0).collect();
    let mut heap: BinaryHeap<Candidate> = items
        .iter()
        .enumerate()
        .filter_map(|(index, it)| step_gain(it, it.r0, quantum).map(|gain| Candidate { gain, index }))
        .collect();
    let mut remaining = problem.budget;
    while remaining > 0.0 {
        let Some(Candidate { index, .. }) = heap.pop() else {
            break;
        };
        let it = &items[index];
        let grant = quantum.min(it.r_max - rates[index]).min(remaining);
        rates[index] = (rates[index] + grant).min(it.r_max);
        remaining -= grant;
        if let Some(gain) = step_gain(it, rates[index], quantum) {
            heap.push(Candidate { gain, index });
        }
    }
    Ok(AllocationResult::from_rates(problem, rates, 0.0))
}

/// Sequential baseline: only the segment entering the buffer is downloaded,
/// using the water-filling solver on that segment's items alone.
///
/// `newest` must already be restricted to the newest segment and built from
/// the single prediction made when it entered the window.
pub fn solve_nonprogressive(newest: &AllocationProblem) -> Result<AllocationResult> {
    solve_kkt(newest)
}
