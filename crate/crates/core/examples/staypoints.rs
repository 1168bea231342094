//! Stop detection and destination clustering on a synthetic scenario.

use mobility_pm::geo::{position_events, RegionIndex};
use mobility_pm::stay::{build_staypoints, StopParams};
use mobility_pm::synth::{generate_scenario, ScenarioConfig};
use mobility_pm::trips::ModeThresholds;

fn main() -> mobility_pm::Result<()> {
    let cfg = ScenarioConfig {
        n_agents: 5,
        n_days: 2,
        ..Default::default()
    };
    let scenario = generate_scenario(&cfg, &ModeThresholds::default())?;
    let regions = RegionIndex::new(scenario.regions.clone())?;
    let events = position_events(&scenario.events, &scenario.towers, &regions)?;
    let params = StopParams::default();
    let staypoints = build_staypoints(&events, &params, &regions)?;

    println!(
        "{} events -> {} staypoints ({:?})",
        events.len(),
        staypoints.len(),
        params
    );
    for sp in staypoints.iter().take(8) {
        println!(
            "{} {} {:<10} {}s  {:?}",
            sp.staypoint_id,
            sp.user_id,
            sp.location_id,
            sp.t_end - sp.t_start,
            sp.region_municipality
        );
    }
    Ok(())
}
