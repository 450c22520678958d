//! Runs the sixteen grating experiments and prints activity and mask statistics.
//!
//! cargo run --release --example characterize

use bioattn::oms::{run_characterization, OmsConfig};
use bioattn::stimgen::{make_characterization_suite, SensorModel};

fn main() -> bioattn::Result<()> {
    let suite = make_characterization_suite();
    let rows = run_characterization(&suite, &SensorModel::default(), &OmsConfig::default())?;
    println!("{:>3} {:<22} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "id", "name", "mfr", "isi", "supp", "fg", "bg", "ratio");
    for r in &rows {
        println!(
            "{:>3} {:<22} {:>8.3} {:>8.3} {:>8.3} {:>8.4} {:>8.4} {:>8.2}",
            r.id, r.name, r.mfr_mean, r.isi_mean, r.suppression_fraction, r.foreground_density, r.background_density, r.density_ratio
        );
    }
    Ok(())
}
