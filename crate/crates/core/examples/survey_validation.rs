//! OD matrix against survey shares and survey pair counts.

use std::collections::BTreeMap;

use mobility_pm::geo::{position_events, RegionIndex, RegionLevel};
use mobility_pm::stay::build_staypoints;
use mobility_pm::synth::{generate_scenario, ScenarioConfig};
use mobility_pm::trips::{build_trips, ModeThresholds, DEFAULT_GAP_THRESHOLD};
use mobility_pm::validation::{
    build_od_matrix, compare_pairs, compare_shares, INTRA_CLASS, OTHER_CLASS,
};

fn main() -> mobility_pm::Result<()> {
    let thresholds = ModeThresholds::default();
    let scenario = generate_scenario(
        &ScenarioConfig {
            n_agents: 40,
            n_days: 5,
            ..Default::default()
        },
        &thresholds,
    )?;
    let regions = RegionIndex::new(scenario.regions.clone())?;
    let events = position_events(&scenario.events, &scenario.towers, &regions)?;
    let sps = build_staypoints(&events, &Default::default(), &regions)?;
    let (_, trips) = build_trips(&sps, &events, &thresholds, DEFAULT_GAP_THRESHOLD)?;
    let od = build_od_matrix(&trips, &sps, RegionLevel::Municipality).matrix;

    let survey = BTreeMap::from([
        (INTRA_CLASS.to_owned(), 0.25),
        (OTHER_CLASS.to_owned(), 0.75),
    ]);
    for c in compare_shares(&od, &survey, None)?.classes {
        println!(
            "{:<6} survey {:.2} measured {:.3} ({:+.1} pp)",
            c.class, c.survey_share, c.measured_share, c.deviation_pp
        );
    }

    // Pretend survey: measured counts with some scatter.
    let pairs: Vec<(String, String, f64)> = od
        .counts
        .iter()
        .enumerate()
        .map(|(i, ((o, d), &n))| {
            (
                o.clone(),
                d.clone(),
                n as f64 * (1.0 + 0.1 * ((i % 5) as f64 - 2.0)),
            )
        })
        .collect();
    let cmp = compare_pairs(&od, &pairs)?;
    println!(
        "{} pairs: r = {:.3}, slope {:.3}, p = {:?}",
        cmp.points.len(),
        cmp.fit.r,
        cmp.fit.slope,
        cmp.fit.p_value
    );
    if let (Some(o), Some(f)) = (&cmp.outlier, &cmp.fit_without_outlier) {
        println!("without {} -> {}: r = {:.3}", o.0, o.1, f.r);
    }
    Ok(())
}
