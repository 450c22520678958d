//! OMS segmentation of a synthetic scene: a textured background under eye
//! jitter plus a disk that moves on its own. Prints per-slice suppression.
//!
//! cargo run --release --example segment

use bioattn::events::suppression_stats;
use bioattn::oms::{OmsConfig, OmsState};
use bioattn::scenes::slices_of;
use bioattn::stimgen::{scenario_events, Grating, GratingScenario, SensorModel, StimulusMode};

fn main() -> bioattn::Result<()> {
    let scenario = GratingScenario::new(StimulusMode::EyeAndObject, Grating::new(0.3, 0.01), Grating::new(3.0, 0.09));
    let geometry = scenario.geometry;
    let events = scenario_events(&scenario, &SensorModel::default())?;
    let config = OmsConfig::default();
    let mut oms = OmsState::new(config, geometry)?;
    let (mut tin, mut tout) = (0, 0);
    for (k, slice) in slices_of(&events, config.update_interval_us, geometry)?.iter().enumerate() {
        let map = oms.step(slice)?;
        let st = suppression_stats(slice, &map.mask)?;
        tin += st.input_events;
        tout += st.output_events;
        if k % 10 == 0 {
            println!("slice {k:>3}: {:>7} in {:>6} out, {:>5} mask px, suppression {:.3}", st.input_events, st.output_events, map.mask.count_ones(), st.suppression_fraction);
        }
    }
    println!("total: {tin} events in, {tout} out ({:.1}% suppressed)", 100.0 * (1.0 - tout as f64 / tin.max(1) as f64));
    Ok(())
}
