mod common;

use std::fs;

use bioattn::bench::*;
use bioattn::events::{write_evst, Event};
use bioattn::oms::{OmsConfig, OmsState};
use bioattn::pgm::write_mask_pgm;
use bioattn::scenes::slices_of;
use bioattn::{Geometry, Mask};
use common::{random_mask, rng};
use proptest::prelude::*;
use rand::Rng;

fn mask_from_bits(g: Geometry, bits: &[bool]) -> Mask {
    Mask::from_vec(g, bits.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn metrics_are_mirror_invariant(a in prop::collection::vec(any::<bool>(), 144), b in prop::collection::vec(any::<bool>(), 144)) {
        let g = Geometry::new(12, 12);
        let (a, b) = (mask_from_bits(g, &a), mask_from_bits(g, &b));
        let (fa, fb) = (a.flip_horizontal(), b.flip_horizontal());
        prop_assert_eq!(iou(&a, &b).unwrap(), iou(&fa, &fb).unwrap());
        prop_assert!((mask_ssim(&a, &b).unwrap() - mask_ssim(&fa, &fb).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in prop::collection::vec(any::<bool>(), 64), b in prop::collection::vec(any::<bool>(), 64)) {
        let g = Geometry::new(8, 8);
        let (a, b) = (mask_from_bits(g, &a), mask_from_bits(g, &b));
        let v = iou(&a, &b).unwrap();
        prop_assert_eq!(v, iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_grows_with_box_size(seed in 0u64..500) {
        let mut r = rng(seed);
        let g = Geometry::new(24, 24);
        let points: Vec<(usize, usize)> = (0..10).map(|_| (r.random_range(0..24), r.random_range(0..24))).collect();
        let masks: Vec<Mask> = (0..10).map(|_| random_mask(&mut r, g, 0.01)).collect();
        let mut last = -1.0;
        for b in [1, 2, 4, 8, 16, 48] {
            let acc = detection_accuracy(&points, &masks, b).unwrap().unwrap();
            prop_assert!(acc >= last);
            last = acc;
        }
    }

    #[test]
    fn closing_is_extensive_and_idempotent(a in prop::collection::vec(any::<bool>(), 100)) {
        let m = mask_from_bits(Geometry::new(10, 10), &a);
        let c = closing(&m);
        prop_assert!(m.as_slice().iter().zip(c.as_slice()).all(|(x, y)| !*x || *y));
        prop_assert_eq!(closing(&c), c);
    }
}

#[test]
fn ssim_of_identical_images_is_one() {
    let g = Geometry::new(16, 16);
    let mut r = rng(1);
    let a = common::random_grid(&mut r, g);
    let b = common::random_grid(&mut r, g);
    assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    assert!(ssim(&a, &b).unwrap() < 0.5);
}

#[test]
fn ssim_rejects_tiny_images() {
    let g = Geometry::new(6, 9);
    let m = Mask::new(g);
    assert!(mask_ssim(&m, &m).is_err());
}

#[test]
fn box_convention_is_minus_four_to_plus_three() {
    let g = Geometry::new(20, 20);
    let mut m = Mask::new(g);
    m[(13, 10)] = true;
    assert!(box_hits((10, 10), &m, 8));
    m[(13, 10)] = false;
    m[(14, 10)] = true;
    assert!(!box_hits((10, 10), &m, 8));
    m[(14, 10)] = false;
    m[(6, 10)] = true;
    assert!(box_hits((10, 10), &m, 8));
    m[(6, 10)] = false;
    m[(5, 10)] = true;
    assert!(!box_hits((10, 10), &m, 8));
}

#[test]
fn accuracy_needs_matching_lengths() {
    let g = Geometry::new(8, 8);
    assert!(detection_accuracy(&[(0, 0)], &[], 8).is_err());
    assert_eq!(detection_accuracy(&[], &[], 8).unwrap(), None);
    assert_eq!(detection_accuracy(&[(0, 0)], &[Mask::new(g)], 8).unwrap(), Some(0.0));
}

#[test]
fn mean_std_is_population_form() {
    let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((s - 1.25f64.sqrt()).abs() < 1e-15);
    assert!(mean_std(&[]).0.is_nan());
}

fn scores(dataset: &str, iou: &[f64], hits: &[bool]) -> SequenceScores {
    SequenceScores {
        dataset: dataset.into(),
        name: "s".into(),
        iou: iou.to_vec(),
        ssim: iou.iter().map(|v| v / 2.0).collect(),
        hits: hits.to_vec(),
        ..SequenceScores::default()
    }
}

#[test]
fn aggregation_matches_hand_computation() {
    let s = vec![
        scores("wall", &[0.5, 1.0], &[true, false]),
        scores("box", &[0.2], &[true]),
        scores("wall", &[0.0], &[true, true, true, false]),
    ];
    let rows = aggregate(&s);
    assert_eq!(rows.iter().map(|r| r.dataset.as_str()).collect::<Vec<_>>(), ["wall", "box"]);
    let wall = &rows[0];
    assert_eq!(wall.sequences, 2);
    assert_eq!(wall.frames, 3);
    // Windows pooled for IoU: 50, 100, 0.
    assert!((wall.iou_mean - 50.0).abs() < 1e-12);
    assert!((wall.iou_std - (5000.0f64 / 3.0).sqrt()).abs() < 1e-9);
    assert!((wall.ssim_mean - 25.0).abs() < 1e-12);
    // Accuracy is averaged per sequence: 50 and 75.
    assert!((wall.accuracy_mean - 62.5).abs() < 1e-12);
    assert!((wall.accuracy_std - 12.5).abs() < 1e-12);
    assert_eq!(wall.closed_iou_mean, None);
    assert_eq!(rows[1].accuracy_mean, 100.0);
}

/// A bright square drifting right, one ON event per covered pixel every 2 ms.
fn drifting_square(g: Geometry, duration_us: u64) -> Vec<Event> {
    let mut ev = Vec::new();
    let mut t = 0;
    while t < duration_us {
        let x0 = 4 + (t / 4000) as usize;
        for y in 10..20 {
            for x in x0..(x0 + 10).min(g.width) {
                ev.push(Event::on(t, x as u16, y as u16));
            }
        }
        t += 2000;
    }
    ev
}

#[test]
fn oms_masks_as_ground_truth_score_perfectly() {
    let g = Geometry::new(40, 32);
    let oms = OmsConfig::default();
    let events = drifting_square(g, 200_000);
    let mut state = OmsState::new(oms, g).unwrap();
    let mut masks = Vec::new();
    for s in slices_of(&events, oms.update_interval_us, g).unwrap() {
        let m = state.step(&s).unwrap();
        masks.push((s.window_end, m.mask));
    }
    assert!(masks.iter().any(|(_, m)| m.count_ones() > 0));
    let seq = MaskedSequence::new("synthetic", "square", g, events, masks).unwrap();
    let sc = score_sequence(&seq, &BenchConfig { closing: true, ..BenchConfig::default() }).unwrap();
    assert_eq!(sc.iou.len(), seq.masks.len());
    assert!(sc.iou.iter().all(|v| *v == 1.0));
    assert!(sc.ssim.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert_eq!(sc.closed_iou.len(), sc.iou.len());
}

#[test]
fn masks_must_increase_in_time() {
    let g = Geometry::new(8, 8);
    let m = Mask::new(g);
    assert!(MaskedSequence::new("d", "s", g, vec![], vec![(10, m.clone()), (10, m)]).is_err());
}

#[test]
fn mask_alignment_picks_nearest_within_tolerance() {
    let g = Geometry::new(8, 8);
    let m = Mask::new(g);
    let seq = MaskedSequence::new("d", "s", g, vec![], vec![(100, m.clone()), (200, m.clone()), (300, m)]).unwrap();
    assert_eq!(seq.mask_near(140, 50), Some(0));
    assert_eq!(seq.mask_near(150, 50), Some(0));
    assert_eq!(seq.mask_near(160, 50), Some(1));
    assert_eq!(seq.mask_near(360, 50), None);
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Geometry::new(40, 32);
    let events = drifting_square(g, 100_000);
    let mut r = rng(5);
    for (sub, seqs) in [("wall", vec!["seq_a", "seq_b"]), ("box", vec!["seq_c"])] {
        for name in seqs {
            let d = dir.path().join(sub).join(name);
            fs::create_dir_all(&d).unwrap();
            write_evst(fs::File::create(d.join("events.evst")).unwrap(), g, &events).unwrap();
            let mut index = String::from("# t_us file\n");
            for k in 1..=5u64 {
                let f = format!("mask_{k}.pgm");
                write_mask_pgm(fs::File::create(d.join(&f)).unwrap(), &random_mask(&mut r, g, 0.2)).unwrap();
                index += &format!("{} {f}\n", k * 20_000);
            }
            fs::write(d.join("masks.txt"), index).unwrap();
        }
    }
    let broken = dir.path().join("box").join("seq_d");
    fs::create_dir_all(&broken).unwrap();
    fs::write(broken.join("masks.txt"), "oops\n").unwrap();

    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded.len(), 4);
    assert_eq!(loaded[0].0, "box");
    assert!(loaded[1].2.is_err());
    let seqs: Vec<MaskedSequence> = loaded.into_iter().filter_map(|(_, _, s)| s.ok()).collect();
    assert_eq!(seqs.len(), 3);
    assert_eq!(seqs[0].events, events);
    assert_eq!(seqs[0].masks.len(), 5);
    let report = run_benchmark(&seqs, &BenchConfig::default());
    assert!(report.failures.is_empty());
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[1].dataset, "wall");
    assert_eq!(report.rows[1].sequences, 2);
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}
