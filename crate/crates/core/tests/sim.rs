use pcvstream::geometry::{Pose6DoF, TilingConfig};
use pcvstream::model::{lod_to_rate, TileMeta};
use pcvstream::sim::{run_simulation, Policy, Scenario, SimConfig};
use pcvstream::traces::{BandwidthModel, BandwidthSample, FovTraceModel, Video};
use pcvstream::Error;

fn small() -> Scenario {
    let mut sc = Scenario::benchmark();
    sc.sim.fps = 5.0;
    sc.sim.window = 4;
    sc.sim.video_length_s = 6.0;
    sc.video.frames = 10;
    sc
}

fn flat(mbps: f64, n: usize) -> Vec<BandwidthSample> {
    (0..n)
        .map(|k| BandwidthSample {
            t_seconds: k as f64,
            mbps,
        })
        .collect()
}

#[test]
fn dead_link_streams_nothing() {
    let mut sc = small();
    sc.bandwidth = BandwidthModel::Constant { mbps: 0.0 };
    for p in Policy::ALL {
        let out = sc.run(p, 1).unwrap();
        assert!(out.rounds.iter().all(|r| r.applied == 0.0));
        assert_eq!(out.summary.visible_bytes.mean, 0.0);
        assert!(out.summary.per_degree_quality.mean.is_finite());
        assert_eq!(out.frames.len(), sc.sim.frames());
    }
}

#[test]
fn lone_tile_in_view_is_delivered_in_full() {
    let tiling = TilingConfig::default();
    let (a, b) = (0.7, 0.002);
    let sizes: Vec<f64> = (1..=tiling.lod_count).map(|h| lod_to_rate(h as f64, a, b)).collect();
    let center = tiling.cell_center([8, 8, 8]);
    let tile = |f| TileMeta {
        frame_index: f,
        tile_id: [8, 8, 8],
        a,
        b,
        max_rate: *sizes.last().unwrap(),
        lod_sizes: sizes.clone(),
        center,
        wid: tiling.tile_width(),
    };
    let video = Video {
        tiling,
        frames: (0..5).map(|f| vec![tile(f)]).collect(),
    };
    let cfg = SimConfig {
        fps: 5.0,
        window: 3,
        video_length_s: 4.0,
        ..SimConfig::default()
    };
    let eye = [center[0] + 1.3, center[1], center[2]];
    let fov: Vec<Pose6DoF> = (0..cfg.streamed_frames())
        .map(|f| Pose6DoF::looking_at(f, eye, center))
        .collect();
    let bw = flat(1000.0, cfg.rounds());
    for p in Policy::ALL {
        let out = run_simulation(
            &SimConfig {
                policy: p,
                ..cfg.clone()
            },
            &video,
            &fov,
            &bw,
        )
        .unwrap();
        for m in &out.frames {
            assert!((m.visible_bytes - sizes[sizes.len() - 1]).abs() < 1e-6, "{p}: {m:?}");
            assert_eq!(m.wasted_bytes, 0.0);
            assert_eq!(m.fov_tiles, 1);
        }
    }
}

#[test]
fn same_seed_same_output() {
    let sc = small();
    for p in Policy::ALL {
        assert_eq!(sc.run(p, 9).unwrap(), sc.run(p, 9).unwrap());
    }
}

#[test]
fn every_carried_byte_is_accounted_for() {
    let sc = small();
    for steady in [true, false] {
        let mut sc = sc.clone();
        sc.sim.steady_state = steady;
        for p in Policy::ALL {
            let out = sc.run(p, 2).unwrap();
            let carried: f64 = out.rounds.iter().map(|r| r.applied).sum();
            let scored: f64 = out.frames.iter().map(|m| m.visible_bytes + m.wasted_bytes).sum();
            let total = scored + out.unscored_bytes;
            assert!(
                (carried - total).abs() <= 1e-6 * carried.max(1.0),
                "{p}: {carried} vs {total}"
            );
            assert!(out.rounds.iter().all(|r| r.applied <= r.capacity + 1e-6));
            if !steady {
                assert_eq!(out.unscored_bytes, 0.0);
            }
        }
    }
}

#[test]
fn downloads_stay_inside_the_window() {
    let sc = small();
    let seg = sc.sim.segment_frames();
    let w = sc.sim.window;
    for p in Policy::ALL {
        let out = sc.run(p, 3).unwrap();
        assert_eq!(out.rounds.len(), sc.sim.rounds());
        for r in &out.rounds {
            let Some((lo, hi)) = r.frames_touched else { continue };
            let first = (r.round + 1).saturating_sub(w) * seg;
            assert!(
                lo >= first && hi < (r.round + 1) * seg,
                "{p} round {}: {lo}..={hi}",
                r.round
            );
            if p == Policy::Nonprogressive {
                assert!(lo >= r.round * seg, "nonprogressive patched an old segment");
            }
        }
    }
}

#[test]
fn literal_timing_scores_the_same_frames() {
    let mut sc = small();
    sc.sim.steady_state = false;
    assert_eq!(sc.sim.rounds(), sc.sim.segments() + sc.sim.window - 1);
    let out = sc.run(Policy::KktExp, 4).unwrap();
    assert_eq!(out.frames.len(), sc.sim.frames());
    assert_eq!(out.frames[0].frame_index, 0);
    // Every prediction made for a frame is scored, one per round it spent
    // in the window.
    assert!(out
        .frames
        .iter()
        .all(|m| !m.fov_overlap.is_empty() && m.fov_overlap.len() <= sc.sim.window));
}

#[test]
fn short_traces_underrun() {
    let sc = small();
    let inputs = sc.inputs(5).unwrap();
    let cfg = SimConfig {
        seed: 5,
        ..sc.sim.clone()
    };
    let short_bw = &inputs.bandwidth[..inputs.bandwidth.len() - 1];
    match run_simulation(&cfg, &inputs.video, &inputs.fov, short_bw) {
        Err(Error::TraceUnderrun { round, .. }) => assert_eq!(round, sc.sim.rounds() - 1),
        other => panic!("expected underrun, got {other:?}"),
    }
    // Predictions never need poses past the last scored frame.
    let short_fov = &inputs.fov[..cfg.first_scored_frame() + cfg.frames() - 1];
    assert!(matches!(
        run_simulation(&cfg, &inputs.video, short_fov, &inputs.bandwidth),
        Err(Error::TraceUnderrun { .. })
    ));
}

#[test]
fn oracle_predictions_see_every_visible_tile() {
    let mut sc = small();
    sc.sim.oracle_fov = true;
    sc.sim.oracle_bandwidth = true;
    sc.fov = FovTraceModel::Orbit {
        radius: 1.3,
        period_s: 20.0,
    };
    let out = sc.run(Policy::KktConst, 6).unwrap();
    for m in &out.frames {
        assert!(m.fov_overlap.iter().all(|&o| o == 1.0));
    }
}

#[test]
fn bad_config_is_rejected() {
    let mut sc = small();
    sc.sim.fps = 2.5;
    sc.sim.round_interval_s = 1.0;
    assert!(matches!(sc.run(Policy::KktExp, 0), Err(Error::Config(_))));
}
