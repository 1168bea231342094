//! Case-centric log and OCEL built from detected trips.

use mobility_pm::eventlog::{build_case_log, build_ocel, compute_stats};
use mobility_pm::formats::ocel_to_json;
use mobility_pm::geo::{position_events, RegionIndex, RegionLevel};
use mobility_pm::stay::build_staypoints;
use mobility_pm::synth::{generate_scenario, ScenarioConfig};
use mobility_pm::trips::{build_trips, ModeThresholds, DEFAULT_GAP_THRESHOLD};

fn main() -> mobility_pm::Result<()> {
    let thresholds = ModeThresholds::default();
    let scenario = generate_scenario(
        &ScenarioConfig {
            n_agents: 10,
            n_days: 2,
            ..Default::default()
        },
        &thresholds,
    )?;
    let regions = RegionIndex::new(scenario.regions.clone())?;
    let events = position_events(&scenario.events, &scenario.towers, &regions)?;
    let sps = build_staypoints(&events, &Default::default(), &regions)?;
    let (_, trips) = build_trips(&sps, &events, &thresholds, DEFAULT_GAP_THRESHOLD)?;

    let case = build_case_log(&trips, &sps, RegionLevel::Municipality);
    let ocel = build_ocel(&trips, &sps, RegionLevel::Municipality)?;
    println!("case log: {:?}", compute_stats(&case.log));
    println!("ocel:     {:?}", compute_stats(&ocel.log));
    for t in case.log.traces.iter().take(3) {
        println!("{}: {}", t.case_id, t.activities().join(" > "));
    }
    let json = ocel_to_json(&ocel.log);
    println!("{}...", &json[..json.len().min(400)]);
    Ok(())
}
