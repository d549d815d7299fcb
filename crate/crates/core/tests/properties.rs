use pcvstream::allocate::{solve_equal_split, solve_kkt, solve_ruma, AllocationItem, AllocationProblem, ItemKey};
use pcvstream::geometry::normalize_angle;
use pcvstream::model::{lod_to_rate, rate_to_lod};
use pcvstream::sim::download_with_actual_bandwidth;
use proptest::prelude::*;

fn item() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.0..10.0f64, -4.0..-1.0f64, 100.0..20_000.0f64, 0.0..1.0f64)
}

fn problem() -> impl Strategy<Value = AllocationProblem> {
    (prop::collection::vec(item(), 1..30), 0.0..1.2f64).prop_map(|(raw, frac)| {
        let items: Vec<AllocationItem> = raw
            .into_iter()
            .enumerate()
            .map(|(i, (z, lb, r_max, f0))| AllocationItem {
                key: ItemKey {
                    frame: i / 4,
                    tile: i % 4,
                },
                z,
                b: 10f64.powf(lb),
                r0: r_max * f0 * 0.5,
                r_max,
            })
            .collect();
        let cap: f64 = items.iter().map(|it| it.r_max - it.r0).sum();
        AllocationProblem::new(items, cap * frac)
    })
}

fn feasible(p: &AllocationProblem, rates: &[f64]) -> bool {
    let tol = 1e-9 * p.budget.max(1.0);
    let spent: f64 = p.items.iter().zip(rates).map(|(it, r)| r - it.r0).sum();
    spent <= p.budget + tol
        && p.items
            .iter()
            .zip(rates)
            .all(|(it, &r)| r >= it.r0 - 1e-9 * it.r_max && r <= it.r_max + 1e-9 * it.r_max)
}

proptest! {
    #[test]
    fn every_solver_is_feasible(p in problem()) {
        prop_assert!(feasible(&p, &solve_kkt(&p).unwrap().rates));
        prop_assert!(feasible(&p, &solve_equal_split(&p).unwrap().rates));
        prop_assert!(feasible(&p, &solve_ruma(&p, 256.0).unwrap().rates));
    }

    #[test]
    fn kkt_beats_the_baselines(p in problem()) {
        let best = p.utility(&solve_kkt(&p).unwrap().rates);
        let tol = 1e-9 * best.abs().max(1.0);
        prop_assert!(best >= p.utility(&solve_equal_split(&p).unwrap().rates) - tol);
        prop_assert!(best >= p.utility(&solve_ruma(&p, 256.0).unwrap().rates) - tol);
    }

    #[test]
    fn kkt_is_scale_invariant_in_z(p in problem(), k in 0.1..10.0f64) {
        let mut q = p.clone();
        for it in &mut q.items {
            it.z *= k;
        }
        let (a, b) = (solve_kkt(&p).unwrap(), solve_kkt(&q).unwrap());
        for (x, y) in a.rates.iter().zip(&b.rates) {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
        }
    }

    #[test]
    fn rate_lod_round_trip(a in 0.2..3.0f64, lb in -6.0..0.0f64, h in 0.0..12.0f64) {
        let b = 10f64.powf(lb);
        let r = lod_to_rate(h, a, b);
        prop_assert!((rate_to_lod(r, a, b).unwrap() - h).abs() < 1e-9 * h.max(1.0));
    }

    #[test]
    fn angles_wrap_into_range(x in -1e4..1e4f64) {
        let y = normalize_angle(x);
        prop_assert!((-180.0..180.0).contains(&y));
        let turns = (x - y) / 360.0;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn download_never_exceeds_the_link(
        plan in prop::collection::vec((0usize..50, 0usize..8, 0.0..1e5f64), 0..40),
        link in 0.0..2e6f64,
    ) {
        let plan: Vec<(ItemKey, f64)> = plan.into_iter().map(|(f, t, d)| (ItemKey { frame: f, tile: t }, d)).collect();
        let planned: f64 = plan.iter().map(|d| d.1).sum();
        let got = download_with_actual_bandwidth(&plan, link);
        let carried: f64 = got.iter().map(|d| d.1).sum();
        prop_assert!(carried <= link.max(0.0) + 1e-6);
        prop_assert!((carried - planned.min(link)).abs() <= 1e-6 * planned.max(1.0));
    }
}
