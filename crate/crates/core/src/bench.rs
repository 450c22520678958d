//! Segmentation and detection metrics, mask-annotated sequences and the
//! benchmark runner.
//!
//! Dataset layout on disk:
//!
//! ```text
//! root/<sub-dataset>/<sequence>/events.evst   (or events.csv)
//! root/<sub-dataset>/<sequence>/masks.txt     lines "t_us filename"
//! root/<sub-dataset>/<sequence>/<filename>    1-bit PGM masks
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::{read_events, Event, SliceBuilder};
use crate::grid::{Geometry, Grid, Mask};
use crate::oms::{OmsConfig, OmsState};
use crate::pgm::read_mask_pgm;
use crate::proto::{saliency, ProtoConfig, ProtoInput, ProtoKernels};
use crate::snn::{gaussian_weights, GaussianKernelSpec};

pub const SSIM_WINDOW: usize = 7;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

/// `|A ∩ B| / |A ∪ B|`; two empty masks score 1.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    a.geometry().ensure_same(b.geometry())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        inter += usize::from(*x && *y);
        union += usize::from(*x || *y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Mean SSIM over every fully contained 7x7 Gaussian window (σ = 1.5), L = 1.
pub fn ssim(a: &Grid<f64>, b: &Grid<f64>) -> Result<f64> {
    a.geometry().ensure_same(b.geometry())?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::KernelTooLarge {
            kw: SSIM_WINDOW,
            kh: SSIM_WINDOW,
            w,
            h,
        });
    }
    let g = gaussian_weights(&GaussianKernelSpec::new(SSIM_WINDOW, SSIM_SIGMA))?;
    let total: f64 = g.as_slice().iter().sum();
    let g = g.map(|v| v / total);
    let mut acc = 0.0;
    let mut n = 0usize;
    for y0 in 0..=h - SSIM_WINDOW {
        for x0 in 0..=w - SSIM_WINDOW {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 0..SSIM_WINDOW {
                for i in 0..SSIM_WINDOW {
                    let k = g[(i, j)];
                    let (va, vb) = (a[(x0 + i, y0 + j)], b[(x0 + i, y0 + j)]);
                    ma += k * va;
                    mb += k * vb;
                    saa += k * va * va;
                    sbb += k * vb * vb;
                    sab += k * va * vb;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            n += 1;
        }
    }
    Ok(acc / n as f64)
}

/// SSIM of two masks read as 0/1 intensities.
pub fn mask_ssim(a: &Mask, b: &Mask) -> Result<f64> {
    ssim(&a.to_f64(), &b.to_f64())
}

/// Whether the `box_size` square around `p` touches the mask. The box spans
/// `[p - box/2, p + box - 1 - box/2]` per axis, clipped at the borders.
pub fn box_hits(p: (usize, usize), mask: &Mask, box_size: usize) -> bool {
    if box_size == 0 {
        return false;
    }
    let half = (box_size / 2) as i64;
    let (px, py) = (p.0 as i64, p.1 as i64);
    let x0 = (px - half).max(0);
    let y0 = (py - half).max(0);
    let x1 = (px - half + box_size as i64 - 1).min(mask.width() as i64 - 1);
    let y1 = (py - half + box_size as i64 - 1).min(mask.height() as i64 - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if mask[(x as usize, y as usize)] {
                return true;
            }
        }
    }
    false
}

/// Percentage of aligned `(P, mask)` pairs whose box hits the mask; `None`
/// when there are no pairs.
pub fn detection_accuracy(points: &[(usize, usize)], masks: &[Mask], box_size: usize) -> Result<Option<f64>> {
    if points.len() != masks.len() {
        return Err(Error::invalid("points", "need one mask per salient point"));
    }
    if points.is_empty() {
        return Ok(None);
    }
    let hits = points.iter().zip(masks).filter(|(p, m)| box_hits(**p, m, box_size)).count();
    Ok(Some(100.0 * hits as f64 / points.len() as f64))
}

fn dilate(m: &Mask) -> Mask {
    Grid::from_fn(m.geometry(), |x, y| {
        (-1..=1).any(|dy| (-1..=1).any(|dx| m.get(x as i64 + dx, y as i64 + dy).copied().unwrap_or(false)))
    })
}

fn erode(m: &Mask) -> Mask {
    Grid::from_fn(m.geometry(), |x, y| {
        (-1..=1).all(|dy| (-1..=1).all(|dx| m.get(x as i64 + dx, y as i64 + dy).copied().unwrap_or(true)))
    })
}

/// 3x3 morphological closing (dilate, then erode).
pub fn closing(m: &Mask) -> Mask {
    erode(&dilate(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSequence {
    pub name: String,
    pub dataset: String,
    pub geometry: Geometry,
    pub events: Vec<Event>,
    /// Ground truth stamped at window ends, strictly increasing.
    pub masks: Vec<(u64, Mask)>,
}

impl MaskedSequence {
    pub fn new(dataset: &str, name: &str, geometry: Geometry, events: Vec<Event>, masks: Vec<(u64, Mask)>) -> Result<Self> {
        for (i, (t, m)) in masks.iter().enumerate() {
            geometry.ensure_same(m.geometry())?;
            if i > 0 && masks[i - 1].0 >= *t {
                return Err(Error::NonMonotonicTimestamp {
                    prev: masks[i - 1].0,
                    next: *t,
                });
            }
        }
        Ok(Self {
            name: name.to_string(),
            dataset: dataset.to_string(),
            geometry,
            events,
            masks,
        })
    }

    /// Reads one sequence directory.
    pub fn load(dir: &Path, dataset: &str) -> Result<Self> {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let evst = dir.join("events.evst");
        let path = if evst.exists() { evst } else { dir.join("events.csv") };
        let index = fs::read_to_string(dir.join("masks.txt"))?;
        let mut masks = Vec::new();
        for (n, line) in index.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (t, file) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::Format(format!("masks.txt line {}: expected \"t_us filename\"", n + 1)))?;
            let t: u64 = t
                .parse()
                .map_err(|_| Error::Format(format!("masks.txt line {}: bad timestamp {t:?}", n + 1)))?;
            let mask = read_mask_pgm(fs::File::open(dir.join(file.trim()))?)?;
            masks.push((t, mask));
        }
        let geometry = masks
            .first()
            .map(|(_, m)| m.geometry())
            .ok_or_else(|| Error::Format(format!("{}: no masks", dir.display())))?;
        let file = read_events(&path, Some(geometry))?;
        Self::new(dataset, &name, file.geometry, file.events, masks)
    }

    /// Index of the mask nearest to `t` within `tolerance`, earliest on ties.
    pub fn mask_near(&self, t: u64, tolerance: u64) -> Option<usize> {
        let i = self.masks.partition_point(|(m, _)| *m < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j < self.masks.len())
            .map(|j| (self.masks[j].0.abs_diff(t), j))
            .filter(|(d, _)| *d <= tolerance)
            .min()
            .map(|(_, j)| j)
    }
}

/// Every `<sub-dataset>/<sequence>` directory under `root`, sorted, with its
/// load result.
pub fn load_dataset(root: &Path) -> Result<Vec<(String, PathBuf, Result<MaskedSequence>)>> {
    let mut out = Vec::new();
    let mut subs: Vec<_> = fs::read_dir(root)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    subs.sort();
    for sub in subs {
        let dataset = sub.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let mut seqs: Vec<_> = fs::read_dir(&sub)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
        seqs.sort();
        for seq in seqs {
            let loaded = MaskedSequence::load(&seq, &dataset);
            out.push((dataset.clone(), seq, loaded));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub oms: OmsConfig,
    pub proto: ProtoConfig,
    pub box_size: usize,
    /// Also score morphologically closed OMS maps.
    pub closing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            oms: OmsConfig::default(),
            proto: ProtoConfig::default(),
            box_size: 8,
            closing: false,
        }
    }
}

/// Per-window scores of one sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SequenceScores {
    pub dataset: String,
    pub name: String,
    pub iou: Vec<f64>,
    pub ssim: Vec<f64>,
    pub closed_iou: Vec<f64>,
    pub closed_ssim: Vec<f64>,
    pub hits: Vec<bool>,
}

impl SequenceScores {
    pub fn accuracy(&self) -> Option<f64> {
        if self.hits.is_empty() {
            None
        } else {
            Some(100.0 * self.hits.iter().filter(|h| **h).count() as f64 / self.hits.len() as f64)
        }
    }
}

/// Runs OMS and the proto stage over one sequence and scores every window
/// that has a mask within half a window of its end.
pub fn score_sequence(seq: &MaskedSequence, config: &BenchConfig) -> Result<SequenceScores> {
    let window = config.oms.update_interval_us;
    let mut oms = OmsState::new(config.oms, seq.geometry)?;
    let kernels = ProtoKernels::new(&config.proto)?;
    let mut builder = SliceBuilder::new(window, seq.geometry)?;
    let mut scores = SequenceScores {
        dataset: seq.dataset.clone(),
        name: seq.name.clone(),
        ..SequenceScores::default()
    };
    let mut slices = Vec::new();
    for e in &seq.events {
        builder.push(e, |s| slices.push(s))?;
    }
    slices.extend(builder.finish());
    for slice in &slices {
        let map = oms.step(slice)?;
        let Some(j) = seq.mask_near(slice.window_end, window / 2) else {
            continue;
        };
        let truth = &seq.masks[j].1;
        scores.iou.push(iou(&map.mask, truth)?);
        scores.ssim.push(mask_ssim(&map.mask, truth)?);
        if config.closing {
            let closed = closing(&map.mask);
            scores.closed_iou.push(iou(&closed, truth)?);
            scores.closed_ssim.push(mask_ssim(&closed, truth)?);
        }
        let sal = saliency(&config.proto, &kernels, &ProtoInput::from_slice(&map.to_slice(slice)?))?;
        scores.hits.push(box_hits(sal.peak, truth, config.box_size));
    }
    Ok(scores)
}

/// One sub-dataset line of the report; percentages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub dataset: String,
    pub sequences: usize,
    pub frames: usize,
    pub iou_mean: f64,
    pub iou_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    /// Mean over sequences of per-sequence accuracy; NaN when no window aligned.
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub closed_iou_mean: Option<f64>,
    pub closed_ssim_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// `(path, message)` of sequences that failed to load or score.
    pub failures: Vec<(String, String)>,
}

/// Mean and population standard deviation; NaN for an empty slice.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Groups sequence scores by sub-dataset (in first-seen order).
pub fn aggregate(scores: &[SequenceScores]) -> Vec<BenchRow> {
    let mut names: Vec<&str> = Vec::new();
    for s in scores {
        if !names.contains(&s.dataset.as_str()) {
            names.push(&s.dataset);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let group: Vec<&SequenceScores> = scores.iter().filter(|s| s.dataset == name).collect();
            let pct = |f: fn(&SequenceScores) -> &Vec<f64>| -> Vec<f64> { group.iter().flat_map(|s| f(s).iter().map(|v| 100.0 * v)).collect() };
            let (iou_mean, iou_std) = mean_std(&pct(|s| &s.iou));
            let (ssim_mean, ssim_std) = mean_std(&pct(|s| &s.ssim));
            let acc: Vec<f64> = group.iter().filter_map(|s| s.accuracy()).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            let closed = |f: fn(&SequenceScores) -> &Vec<f64>| {
                let v = pct(f);
                (!v.is_empty()).then(|| mean_std(&v).0)
            };
            BenchRow {
                dataset: name.to_string(),
                sequences: group.len(),
                frames: group.iter().map(|s| s.iou.len()).sum(),
                iou_mean,
                iou_std,
                ssim_mean,
                ssim_std,
                accuracy_mean,
                accuracy_std,
                closed_iou_mean: closed(|s| &s.closed_iou),
                closed_ssim_mean: closed(|s| &s.closed_ssim),
            }
        })
        .collect()
}

/// Scores sequences in parallel and aggregates per sub-dataset.
pub fn run_benchmark(sequences: &[MaskedSequence], config: &BenchConfig) -> BenchReport {
    let results: Vec<Result<SequenceScores>> = thread::scope(|s| {
        let handles: Vec<_> = sequences.iter().map(|seq| s.spawn(move || score_sequence(seq, config))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Config("scoring thread panicked".into()))))
            .collect()
    });
    let mut report = BenchReport::default();
    let mut ok = Vec::new();
    for (seq, r) in sequences.iter().zip(results) {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => report.failures.push((format!("{}/{}", seq.dataset, seq.name), e.to_string())),
        }
    }
    report.rows = aggregate(&ok);
    report
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16} {:>6} {:>16} {:>16} {:>16}", "dataset", "frames", "IoU %", "SSIM %", "accuracy %");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<16} {:>6} {:>16} {:>16} {:>16}",
                r.dataset,
                r.frames,
                format!("{:.2} ± {:.2}", r.iou_mean, r.iou_std),
                format!("{:.2} ± {:.2}", r.ssim_mean, r.ssim_std),
                format!("{:.2} ± {:.2}", r.accuracy_mean, r.accuracy_std),
            );
            if let (Some(i), Some(m)) = (r.closed_iou_mean, r.closed_ssim_mean) {
                let _ = writeln!(s, "{:<16} {:>6} {:>16.2} {:>16.2}", "  closed", "", i, m);
            }
        }
        for (p, e) in &self.failures {
            let _ = writeln!(s, "failed {p}: {e}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(g: Geometry, f: impl Fn(usize, usize) -> bool) -> Mask {
        Grid::from_fn(g, f)
    }

    #[test]
    fn iou_cases() {
        let g = Geometry::new(8, 8);
        let a = mask(g, |x, _| x < 4);
        let b = mask(g, |x, _| x >= 4);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        let e = Mask::filled(g, false);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
        assert!(iou(&a, &Mask::filled(Geometry::new(4, 4), false)).is_err());
    }

    #[test]
    fn ssim_closed_forms() {
        let g = Geometry::new(12, 9);
        let z = Grid::filled(g, 0.0);
        let o = Grid::filled(g, 1.0);
        assert!((ssim(&o, &o).unwrap() - 1.0).abs() < 1e-9);
        assert!((ssim(&z, &o).unwrap() - SSIM_C1 / (1.0 + SSIM_C1)).abs() < 1e-12);
        assert!(ssim(&Grid::filled(Geometry::new(6, 9), 0.0), &Grid::filled(Geometry::new(6, 9), 0.0)).is_err());
    }

    #[test]
    fn box_just_outside_mask_edge_hits() {
        let g = Geometry::new(32, 32);
        let m = mask(g, |x, _| x <= 10);
        assert!(box_hits((14, 16), &m, 8));
        assert!(!box_hits((15, 16), &m, 8));
        assert!(box_hits((0, 0), &m, 8));
        assert_eq!(detection_accuracy(&[], &[], 8).unwrap(), None);
        let empty = Mask::filled(g, false);
        assert_eq!(detection_accuracy(&[(3, 3), (9, 9)], &[empty.clone(), empty], 8).unwrap(), Some(0.0));
    }

    #[test]
    fn closing_fills_one_pixel_gaps() {
        let g = Geometry::new(10, 10);
        let m = mask(g, |x, y| (2..8).contains(&x) && (2..8).contains(&y) && !(x == 5 && y == 5));
        let c = closing(&m);
        assert!(c[(5, 5)]);
        assert_eq!(c.count_ones(), 36);
    }

    #[test]
    fn mask_alignment() {
        let g = Geometry::new(4, 4);
        let e = Mask::filled(g, false);
        let s = MaskedSequence::new("d", "s", g, vec![], vec![(20_000, e.clone()), (40_000, e.clone())]).unwrap();
        assert_eq!(s.mask_near(21_000, 10_000), Some(0));
        assert_eq!(s.mask_near(30_000, 10_000), Some(0));
        assert_eq!(s.mask_near(31_000, 10_000), Some(1));
        assert_eq!(s.mask_near(55_000, 10_000), None);
        assert!(MaskedSequence::new("d", "s", g, vec![], vec![(5, e.clone()), (5, e)]).is_err());
    }
}
