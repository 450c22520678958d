//! Fits the spiking gaze controller and sweeps the pan error.
//!
//! cargo run --release --example controller

use bioattn::control::{compute_ranges, controller_step, solve_decoders, to_ptu_units, ControllerConfig, ControllerState, PanTiltModel};

fn main() -> bioattn::Result<()> {
    let cfg = ControllerConfig::default();
    let ctl = solve_decoders(&cfg)?;
    println!("decoder RMSE: pan {:.3} px, tilt {:.3} px (range {} px)", ctl.pan.rmse, ctl.tilt.rmse, ctl.range());

    let ptu = PanTiltModel::default();
    let ranges = compute_ranges(&ptu)?;
    let ppd = ranges.pixels_per_degree(ptu.resolution);
    println!("fov {:.3} deg, limits +-{} positions, {:.4} px/deg", ranges.fov_deg, ranges.pan_limit, ppd);
    println!("{:>6} {:>9} {:>9} {:>6}", "x", "cmd_pan", "K*eps", "u_pan");
    for i in 0..=8 {
        let x = i as f64 * 127.0 / 8.0;
        let mut st = ControllerState::new(&ctl);
        let (pan, _) = controller_step(&ctl, (x, 64.0), &mut st);
        let u = to_ptu_units(pan, 1.0, ptu.degrees_per_pos, ppd);
        println!("{x:>6.1} {pan:>9.3} {:>9.3} {u:>6}", cfg.gain_pan * (x - 64.0));
    }
    Ok(())
}
