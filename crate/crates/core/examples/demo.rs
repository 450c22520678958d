//! Closed attention loop on the default blinking-square scene.
//!
//! cargo run --release --example demo

use bioattn::cli::{closed_loop_config, default_demo_world, latency_summary, RunConfig};
use bioattn::control::{closed_loop, compute_ranges, sensor_position};

fn main() -> bioattn::Result<()> {
    let world = default_demo_world();
    let target = world.objects[0].shape.center();
    let mut cfg = closed_loop_config(&RunConfig::default(), world);
    cfg.iterations = 12;
    let log = closed_loop(&cfg)?;
    let ranges = compute_ranges(&cfg.ptu)?;
    println!("{:>4} {:>8} {:>10} {:>12} {:>12} {:>8}", "it", "P", "sal_max", "u", "pos", "dist");
    for r in &log.rows {
        let (x, y) = sensor_position(&cfg, &ranges, r.pan_pos, r.tilt_pos, target);
        let d = ((x - 64.0).powi(2) + (y - 64.0).powi(2)).sqrt();
        println!(
            "{:>4} {:>8} {:>10.4} {:>12} {:>12} {d:>8.1}",
            r.iteration,
            format!("{},{}", r.p_x, r.p_y),
            r.saliency_max,
            format!("{},{}", r.u_pan, r.u_tilt),
            format!("{},{}", r.pan_pos, r.tilt_pos)
        );
    }
    println!("saccades after iterations {:?}", log.saccades);
    print!("{}", latency_summary(&log));
    Ok(())
}
