//! Proto-object saliency of simple patterns and of the calibration disks.
//!
//! cargo run --release --example saliency

use bioattn::cli::calibration_detections;
use bioattn::proto::{saliency_from_events, ProtoConfig};
use bioattn::scenes::{line_segment, slice_from_pixels, square_outline};
use bioattn::stimgen::SensorModel;
use bioattn::Geometry;

fn main() -> bioattn::Result<()> {
    let g = Geometry::new(128, 128);
    let cfg = ProtoConfig::default();
    for side in [9, 17, 33] {
        let sq = square_outline(64 - side / 2, 64 - side / 2, side);
        let n = sq.len();
        let a = saliency_from_events(&cfg, &slice_from_pixels(g, sq))?;
        let b = saliency_from_events(&cfg, &slice_from_pixels(g, line_segment(64 - n / 2, 64, n)))?;
        println!("square {side:>2}: peak {:.4} at {:?}; line of {n} px: {:.4} (ratio {:.1})", a.max_value, a.peak, b.max_value, a.max_value / b.max_value);
    }

    let (map, hits, dist) = calibration_detections(&cfg, &SensorModel::default())?;
    println!("\ncalibration disks: {hits}/6 within {} px, global peak {:?}", cfg.radius, map.peak);
    for (i, d) in dist.iter().enumerate() {
        println!("  disk {i}: nearest maximum {d:.1} px");
    }
    Ok(())
}
