//! Benchmarks OMS maps and salient points on mask-annotated sequences.
//!
//! cargo run --release --example bench -- <dataset root>
//!
//! Without an argument a small synthetic sequence is scored against masks
//! rendered from the same scene.

use std::path::PathBuf;

use bioattn::bench::{load_dataset, run_benchmark, BenchConfig, MaskedSequence};
use bioattn::events::Event;
use bioattn::scenes::{slices_of, Shape, Viewport, World};
use bioattn::stimgen::{EventSensor, SensorModel};
use bioattn::{Geometry, Grid};

/// A disk crossing a static textured scene, with its coverage as ground truth.
fn synthetic() -> bioattn::Result<MaskedSequence> {
    let g = Geometry::new(96, 72);
    let view = Viewport::new(g, (0.0, 0.0));
    let scene = |t: f64| {
        let cx = 15.0 + 300.0 * t;
        World::new(96.0, 72.0)
            .with(Shape::Rect { x0: 10.0, y0: 50.0, w: 70.0, h: 4.0 })
            .with(Shape::Disk { cx, cy: 30.0, radius: 8.0 })
    };
    let mut sensor = EventSensor::new(SensorModel::default(), &view.render(&scene(0.0), 0.0), 0.0)?;
    let mut events: Vec<Event> = Vec::new();
    let mut masks = Vec::new();
    for k in 1..=200u64 {
        let t = k as f64 * 1e-3;
        events.extend(sensor.push_frame(&view.render(&scene(t), t), k as f64 * 1000.0)?);
        if k % 20 == 0 {
            let cx = 15.0 + 300.0 * t;
            let m = Grid::from_fn(g, |x, y| (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - 30.0).powi(2) <= 64.0);
            masks.push((k * 1000, m));
        }
    }
    let n = slices_of(&events, 20_000, g)?.len();
    println!("synthetic sequence: {} events, {n} windows, {} masks", events.len(), masks.len());
    MaskedSequence::new("synthetic", "disk", g, events, masks)
}

fn main() -> bioattn::Result<()> {
    let sequences = match std::env::args().nth(1).map(PathBuf::from) {
        Some(root) => {
            let mut seqs = Vec::new();
            for (_, path, loaded) in load_dataset(&root)? {
                match loaded {
                    Ok(s) => seqs.push(s),
                    Err(e) => eprintln!("skipping {}: {e}", path.display()),
                }
            }
            seqs
        }
        None => vec![synthetic()?],
    };
    let report = run_benchmark(&sequences, &BenchConfig { closing: true, ..BenchConfig::default() });
    print!("{}", report.to_table());
    Ok(())
}
