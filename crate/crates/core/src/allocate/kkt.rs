use std::cmp::Ordering;

use super::{AllocationProblem, AllocationResult};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    /// Water level drops below the item's floor threshold: it starts filling.
    Enter,
    /// Water level drops below the ceiling threshold: it saturates.
    Saturate,
}

/// Exact water-filling solution of one round's allocation.
///
/// Every item takes `clamp(z / lambda - 1/b, r0, r_max)` for a common water
/// level `lambda`. Between two consecutive thresholds the set of items
/// strictly inside their bounds is fixed and the spend is `Z / lambda - K`
/// plus the saturated items' headroom, so the level is found by sweeping the
/// sorted thresholds downward and solving that expression in closed form.
///
/// With no budget the level sits at the highest floor threshold; when the
/// budget covers every item's headroom all items saturate and the level is 0.
pub fn solve_kkt(problem: &AllocationProblem) -> Result<AllocationResult> {
    problem.validate()?;
    let items = &problem.items;
    let budget = problem.budget;
    let live: Vec<usize> = (0..items.len())
        .filter(|&i| items[i].z > 0.0 && items[i].r_max > items[i].r0)
        .collect();

    let top = live.iter().map(|&i| items[i].floor_threshold()).fold(0.0, f64::max);
    if live.is_empty() || budget <= 0.0 {
        let rates = items.iter().map(|it| it.r0).collect();
        return Ok(AllocationResult::from_rates(problem, rates, top));
    }

    let capacity: f64 = live.iter().map(|&i| items[i].r_max - items[i].r0).sum();
    if capacity <= budget {
        let rates = items.iter().map(|it| it.rate_at(0.0)).collect();
        return Ok(AllocationResult::from_rates(problem, rates, 0.0));
    }

    let mut events: Vec<(f64, Event, usize)> = Vec::with_capacity(2 * live.len());
    for &i in &live {
        events.push((items[i].floor_threshold(), Event::Enter, i));
        events.push((items[i].ceiling_threshold(), Event::Saturate, i));
    }
    // Descending level; ties resolved by event kind then item order.
    events.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(items[a.2].key.cmp(&items[b.2].key))
    });

    // Interior items contribute z / lambda - (1/b + r0).
    let (mut z_sum, mut k_sum, mut saturated) = (0.0f64, 0.0f64, 0.0f64);
    let mut lambda = None;
    let mut prev_level = top;
    for &(level, kind, i) in &events {
        if z_sum > 0.0 {
            let spend = saturated + z_sum / level - k_sum;
            if spend >= budget {
                lambda = Some(z_sum / (budget - saturated + k_sum));
                break;
            }
        } else if saturated >= budget {
            lambda = Some(prev_level);
            break;
        }
        let it = &items[i];
        match kind {
            Event::Enter => {
                z_sum += it.z;
                k_sum += 1.0 / it.b + it.r0;
            }
            Event::Saturate => {
                z_sum -= it.z;
                k_sum -= 1.0 / it.b + it.r0;
                saturated += it.r_max - it.r0;
            }
        }
        prev_level = level;
    }
    let mut lambda = lambda.unwrap_or(prev_level);

    // Re-solve once with sums rebuilt from the final partition; the running
    // sums above accumulate cancellation error.
    let (mut z2, mut k2, mut s2) = (0.0, 0.0, 0.0);
    for &i in &live {
        let it = &items[i];
        let r = it.rate_at(lambda);
        if r >= it.r_max {
            s2 += it.r_max - it.r0;
        } else if r > it.r0 {
            z2 += it.z;
            k2 += 1.0 / it.b + it.r0;
        }
    }
    if z2 > 0.0 {
        let refined = z2 / (budget - s2 + k2);
        if refined.is_finite() && refined > 0.0 {
            lambda = refined;
        }
    }

    let spend_at = |lambda: f64| -> (Vec<f64>, f64) {
        let rates: Vec<f64> = items.iter().map(|it| it.rate_at(lambda)).collect();
        let spent = items.iter().zip(&rates).map(|(it, r)| r - it.r0).sum();
        (rates, spent)
    };
    let (mut rates, mut spent) = spend_at(lambda);
    let mut bump = f64::EPSILON;
    while spent > budget && bump < 1e-6 {
        lambda *= 1.0 + bump;
        bump *= 2.0;
        (rates, spent) = spend_at(lambda);
    }
    Ok(AllocationResult {
        rates,
        lambda_star: lambda,
        spent,
    })
}
