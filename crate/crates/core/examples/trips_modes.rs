//! Triplegs, trips and the heuristic mode table.

use std::collections::BTreeMap;

use mobility_pm::synth::{generate_scenario, ScenarioConfig, SpeedSampling};
use mobility_pm::trips::{ModeThresholds, DEFAULT_GAP_THRESHOLD};

fn main() -> mobility_pm::Result<()> {
    let thresholds = ModeThresholds::default();
    for (speed, length, secs) in [
        (4.0, 900.0, 800),
        (30.0, 2_500.0, 300),
        (30.0, 9_000.0, 1_080),
        (80.0, 12_000.0, 540),
    ] {
        println!(
            "{speed:>5} km/h over {length:>6} m -> {:?}",
            thresholds.classify(speed, length, secs)
        );
    }

    let cfg = ScenarioConfig {
        n_agents: 20,
        n_days: 3,
        speed_sampling: SpeedSampling::BandCenter,
        ..Default::default()
    };
    let scenario = generate_scenario(&cfg, &thresholds)?;
    let regions = mobility_pm::geo::RegionIndex::new(scenario.regions.clone())?;
    let events = mobility_pm::geo::position_events(&scenario.events, &scenario.towers, &regions)?;
    let sps = mobility_pm::stay::build_staypoints(&events, &Default::default(), &regions)?;
    let (legs, trips) =
        mobility_pm::trips::build_trips(&sps, &events, &thresholds, DEFAULT_GAP_THRESHOLD)?;

    let mut by_mode: BTreeMap<String, usize> = BTreeMap::new();
    for t in &trips {
        *by_mode
            .entry(format!("{:?}", t.primary_mode()))
            .or_default() += 1;
    }
    println!(
        "{} legs, {} trips (truth {})",
        legs.len(),
        trips.len(),
        scenario.truth.n_trips()
    );
    println!("primary modes: {by_mode:?}");
    Ok(())
}
