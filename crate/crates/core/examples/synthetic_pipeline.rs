//! Full pipeline on a generated scenario, scored against its ground truth.

use mobility_pm::geo::{position_events, RegionIndex, RegionLevel};
use mobility_pm::stay::{build_staypoints, StopParams};
use mobility_pm::synth::{generate_scenario, score_recovery, ScenarioConfig, SpeedSampling};
use mobility_pm::trips::{build_trips, ModeThresholds, DEFAULT_GAP_THRESHOLD};

fn main() -> mobility_pm::Result<()> {
    let agents = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(100);
    let cfg = ScenarioConfig {
        n_agents: agents,
        speed_sampling: SpeedSampling::BandCenter,
        ..Default::default()
    };
    let thresholds = ModeThresholds::default();
    let params = StopParams::default();

    let scenario = generate_scenario(&cfg, &thresholds)?;
    let regions = RegionIndex::new(scenario.regions.clone())?;
    let events = position_events(&scenario.events, &scenario.towers, &regions)?;
    let sps = build_staypoints(&events, &params, &regions)?;
    let (_, trips) = build_trips(&sps, &events, &thresholds, DEFAULT_GAP_THRESHOLD)?;
    let report = score_recovery(
        &scenario.truth,
        &sps,
        &trips,
        RegionLevel::Municipality,
        params.r1,
    )?;

    println!(
        "{} agents x {} days, {} CDR events",
        cfg.n_agents,
        cfg.n_days,
        events.len()
    );
    println!(
        "staypoints: precision {:.3} recall {:.3}",
        report.staypoints.precision, report.staypoints.recall
    );
    println!(
        "trips: {} detected / {} true",
        report.trips.n_detected, report.trips.n_truth
    );
    println!("OD exact cells: {:.3}", report.od.exact_cell_ratio);
    println!("mode accuracy: {:.3}", report.modes.accuracy);
    Ok(())
}
