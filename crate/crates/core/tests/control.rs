mod common;

use bioattn::cli::{closed_loop_config, RunConfig};
use bioattn::control::*;
use bioattn::proto::{saliency_from_events, ProtoConfig};
use bioattn::scenes::{slice_from_pixels, square_outline, Shape, World};
use bioattn::Geometry;
use proptest::prelude::*;

#[test]
fn single_linear_neuron_without_ridge_is_exact() {
    let cfg = ControllerConfig {
        neurons: 1,
        regularization: 0.0,
        model: NeuronModel::Linear,
        ..ControllerConfig::default()
    };
    let pop = Population::single(NeuronModel::Linear, 1.0, 2.0, 0.0, &cfg);
    let axis = solve_axis(&cfg, pop, 1.0).unwrap();
    // rate = 2 x and target = K * 64 x, so the decoder is 32.
    assert!((axis.weights[0] - 32.0).abs() < 1e-9);
    assert!(axis.rmse < 1e-9);
    assert!((axis.decode(40.0, cfg.radius) - 40.0).abs() < 1e-9);
}

#[test]
fn silent_population_is_a_config_error() {
    let cfg = ControllerConfig::default();
    let pop = Population::single(NeuronModel::Lif, 1.0, 0.0, 0.5, &cfg);
    assert!(matches!(solve_axis(&cfg, pop, 1.0), Err(bioattn::Error::Config(_))));
}

#[test]
fn centered_target_gives_small_command() {
    let ctl = solve_decoders(&ControllerConfig::default()).unwrap();
    let mut st = ControllerState::new(&ctl);
    let (p, t) = controller_step(&ctl, (64.0, 64.0), &mut st);
    assert!(p.abs() <= 2.0 && t.abs() <= 2.0, "{p} {t}");
}

#[test]
fn right_edge_target_commands_about_63() {
    let ctl = solve_decoders(&ControllerConfig::default()).unwrap();
    let mut st = ControllerState::new(&ctl);
    let (p, _) = controller_step(&ctl, (127.0, 64.0), &mut st);
    assert!((p - 63.0).abs() <= 0.05 * 63.0, "{p}");
}

#[test]
fn axes_are_independent() {
    let ctl = solve_decoders(&ControllerConfig::default()).unwrap();
    let (mut a, mut b) = (ControllerState::new(&ctl), ControllerState::new(&ctl));
    let (p1, t1) = controller_step(&ctl, (100.0, 30.0), &mut a);
    let (p2, t2) = controller_step(&ctl, (100.0, 110.0), &mut b);
    assert_eq!(p1, p2);
    assert_ne!(t1, t2);
}

#[test]
fn decoders_are_seed_deterministic() {
    let a = solve_decoders(&ControllerConfig::default()).unwrap();
    let b = solve_decoders(&ControllerConfig::default()).unwrap();
    assert_eq!(a, b);
    let c = solve_decoders(&ControllerConfig { seed: 9, ..ControllerConfig::default() }).unwrap();
    assert_ne!(a.pan.weights, c.pan.weights);
}

#[test]
fn field_of_view_and_limits() {
    let r = compute_ranges(&PanTiltModel::default()).unwrap();
    let want = 2.0 * (5.12f64 / 3.4).atan().to_degrees();
    assert!((r.fov_deg - want).abs() < 1e-12);
    assert_eq!(r.pan_limit, (want / (92.5714 / 3600.0)).floor() as i64 / 2);
}

#[test]
fn ptu_units_floor_toward_negative_infinity() {
    assert_eq!(to_ptu_units(100.0, 1.0, 0.02572, 1.0), 1944);
    assert_eq!(to_ptu_units(-0.1, 1.0, 0.05, 1.0), -1);
    assert_eq!(to_ptu_units(0.0, 1.0, 0.05, 1.0), 0);
}

#[test]
fn fixational_walk_mean_is_near_zero() {
    let r = compute_ranges(&PanTiltModel::default()).unwrap();
    let mut rng = common::rng(11);
    let s = 5i64;
    let n = 4000;
    let walk = fixational_walk(&GazeState::default(), n, s, &r, &mut rng);
    // Uniform integers on [-s, s]: variance s (s + 1) / 3.
    let sigma = ((s * (s + 1)) as f64 / 3.0).sqrt();
    let bound = 3.0 * sigma / (n as f64).sqrt();
    for axis in [0, 1] {
        let mean = walk.iter().map(|d| if axis == 0 { d.0 } else { d.1 } as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() <= bound, "axis {axis}: {mean} vs {bound}");
    }
}

proptest! {
    #[test]
    fn fixational_walk_stays_inside_limits(start in -2000i64..2000, scale in 0i64..50, seed in 0u64..100) {
        let r = compute_ranges(&PanTiltModel::default()).unwrap();
        let g = GazeState { pan: start.clamp(-r.pan_limit, r.pan_limit), tilt: -start.clamp(-r.tilt_limit, r.tilt_limit), history: vec![] };
        let walk = fixational_walk(&g, 200, scale, &r, &mut common::rng(seed));
        let (mut p, mut t) = (g.pan, g.tilt);
        for (dp, dt) in walk {
            prop_assert!(dp.abs() <= scale && dt.abs() <= scale);
            p += dp;
            t += dt;
            prop_assert!(p.abs() <= r.pan_limit && t.abs() <= r.tilt_limit);
        }
    }

    #[test]
    fn plant_never_leaves_limits(pan in -100_000i64..100_000, tilt in -100_000i64..100_000) {
        let mut plant = Plant::new(PanTiltModel::default(), 0).unwrap();
        plant.command(pan, tilt, 0);
        plant.tick();
        prop_assert!(plant.settled());
        prop_assert!(plant.gaze.pan.abs() <= plant.ranges.pan_limit);
        prop_assert!(plant.gaze.tilt.abs() <= plant.ranges.tilt_limit);
        let inside = pan.abs() <= plant.ranges.pan_limit && tilt.abs() <= plant.ranges.tilt_limit;
        prop_assert_eq!(plant.saturations, usize::from(!inside));
    }
}

#[test]
fn slow_plant_ramps_to_target() {
    let model = PanTiltModel { settle_steps: 4, ..PanTiltModel::default() };
    let mut plant = Plant::new(model, 0).unwrap();
    plant.command(100, -40, 0);
    let mut path = Vec::new();
    while !plant.settled() {
        plant.tick();
        path.push(plant.gaze.pan);
    }
    assert_eq!(path, vec![25, 50, 75, 100]);
}

#[test]
fn empty_scene_never_saccades() {
    let mut cfg = closed_loop_config(&RunConfig::default(), World::new(400.0, 400.0));
    cfg.iterations = 4;
    let log = closed_loop(&cfg).unwrap();
    assert!(log.saccades.is_empty());
    assert!(log.rows.iter().all(|r| r.saliency_max == 0.0 && r.u_pan == 0 && r.u_tilt == 0));
}

#[test]
fn closed_loop_is_deterministic() {
    let world = bioattn::cli::default_demo_world();
    let mut cfg = closed_loop_config(&RunConfig::default(), world);
    cfg.iterations = 3;
    let a = closed_loop(&cfg).unwrap();
    let b = closed_loop(&cfg).unwrap();
    let strip = |l: &ClosedLoopLog| l.rows.iter().map(|r| (r.p_x, r.p_y, r.u_pan, r.u_tilt, r.pan_pos, r.tilt_pos)).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn first_saccade_goes_to_size_matched_square() {
    // A 17 px square and a 61 px square; the smaller matches the proto radius.
    let world = World::new(400.0, 400.0)
        .with_blinking(Shape::Rect { x0: 150.0, y0: 150.0, w: 17.0, h: 17.0 }, 0.08)
        .with_blinking(Shape::Rect { x0: 200.0, y0: 190.0, w: 61.0, h: 61.0 }, 0.08);
    let mut cfg = closed_loop_config(&RunConfig::default(), world);
    cfg.iterations = 2;
    let log = closed_loop(&cfg).unwrap();
    let ranges = compute_ranges(&cfg.ptu).unwrap();
    let first = log.saccades[0];
    let row = &log.rows[first];
    let (sx, sy) = sensor_position(&cfg, &ranges, row.pan_pos, row.tilt_pos, (158.5, 158.5));
    let (bx, by) = sensor_position(&cfg, &ranges, row.pan_pos, row.tilt_pos, (230.5, 220.5));
    let ds = ((sx - 64.0).powi(2) + (sy - 64.0).powi(2)).sqrt();
    let db = ((bx - 64.0).powi(2) + (by - 64.0).powi(2)).sqrt();
    assert!(ds < db, "small {ds:.1} big {db:.1}");
}

#[test]
fn argmax_is_invariant_to_map_scale() {
    let g = Geometry::new(64, 64);
    let map = saliency_from_events(&ProtoConfig::default(), &slice_from_pixels(g, square_outline(20, 24, 17))).unwrap();
    for k in [1e-6, 0.5, 3.0, 1e6] {
        let scaled = bioattn::proto::SaliencyMap::from_map(map.map.map(|v| v * k));
        assert_eq!(scaled.peak, map.peak);
    }
}

#[test]
fn zero_gain_gives_zero_decoders() {
    let cfg = ControllerConfig { gain_pan: 0.0, gain_tilt: 0.0, ..ControllerConfig::default() };
    let ctl = solve_decoders(&cfg).unwrap();
    assert!(ctl.pan.weights.iter().chain(&ctl.tilt.weights).all(|w| *w == 0.0));
}
