mod common;

use std::collections::BTreeMap;

use common::run_pipeline;
use mobility_pm::conformance::{dfg_to_workflow_net, token_replay};
use mobility_pm::discovery::{
    annotate_durations, discover_dfg, discover_ocdfg, export_dot, DotModel, DotOptions,
};
use mobility_pm::eventlog::{build_case_log, build_ocel, compute_stats};
use mobility_pm::formats;
use mobility_pm::geo::{position_events, RegionIndex, RegionLevel};
use mobility_pm::stay::{build_staypoints, StopParams};
use mobility_pm::synth::{generate_scenario, write_scenario, ScenarioConfig};
use mobility_pm::trips::{build_trips, ModeThresholds, DEFAULT_GAP_THRESHOLD};
use mobility_pm::validation::{
    build_od_matrix, compare_pairs, compare_shares, INTRA_CLASS, OTHER_CLASS,
};

fn small() -> ScenarioConfig {
    ScenarioConfig {
        n_agents: 15,
        n_days: 4,
        seed: 11,
        ..Default::default()
    }
}

#[test]
fn files_on_disk_give_the_same_results() {
    let scenario = generate_scenario(&small(), &ModeThresholds::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), &scenario).unwrap();

    let cdr = formats::read_cdr(&dir.path().join("cdr.csv")).unwrap();
    let towers = formats::read_towers(&dir.path().join("towers.csv")).unwrap();
    let regions = formats::read_regions(&dir.path().join("regions.geojson")).unwrap();
    assert_eq!(cdr, scenario.events);
    assert_eq!(towers.len(), scenario.towers.len());
    assert_eq!(regions.len(), scenario.regions.len());

    let index = RegionIndex::new(regions).unwrap();
    let events = position_events(&cdr, &towers, &index).unwrap();
    let sps = build_staypoints(&events, &StopParams::default(), &index).unwrap();
    let (_, trips) = build_trips(
        &sps,
        &events,
        &ModeThresholds::default(),
        DEFAULT_GAP_THRESHOLD,
    )
    .unwrap();
    let (sps_mem, trips_mem) = run_pipeline(&scenario);
    assert_eq!(sps.len(), sps_mem.len());
    assert_eq!(trips.len(), trips_mem.len());

    let sp_path = dir.path().join("staypoints.csv");
    formats::write_staypoints(&sp_path, &sps).unwrap();
    let (legs, trips_path) = (
        dir.path().join("triplegs.csv"),
        dir.path().join("trips.csv"),
    );
    formats::write_triplegs(&legs, &trips).unwrap();
    formats::write_trips(&trips_path, &trips).unwrap();
    let sps_back = formats::read_staypoints(&sp_path).unwrap();
    let trips_back = formats::read_trips(&legs, &trips_path).unwrap();
    let level = RegionLevel::Municipality;
    assert_eq!(
        build_case_log(&trips_back, &sps_back, level).log,
        build_case_log(&trips, &sps, level).log
    );
}

#[test]
fn logs_models_and_replay_agree() {
    let scenario = generate_scenario(&small(), &ModeThresholds::default()).unwrap();
    let (sps, trips) = run_pipeline(&scenario);
    for level in [RegionLevel::Parish, RegionLevel::Municipality] {
        let case = build_case_log(&trips, &sps, level);
        let ocel = build_ocel(&trips, &sps, level).unwrap();
        assert!(case.dropped.is_empty());
        let stats = compute_stats(&case.log);
        let ostats = compute_stats(&ocel.log);
        assert_eq!(stats.n_events, ostats.n_events);

        let dfg = annotate_durations(&discover_dfg(&case.log).unwrap(), &case.log).unwrap();
        let oc = discover_ocdfg(&ocel.log).unwrap();
        // Every trip type graph is a slice of the case graph.
        let mut summed: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (ty, d) in &oc.per_type {
            if ty == mobility_pm::eventlog::MODE_OBJECT_TYPE {
                continue;
            }
            for (k, a) in &d.arcs {
                *summed.entry(k.clone()).or_default() += a.frequency;
            }
        }
        let case_arcs: BTreeMap<(String, String), u64> = dfg
            .arcs
            .iter()
            .map(|(k, a)| (k.clone(), a.frequency))
            .collect();
        assert_eq!(summed, case_arcs);

        let dot = export_dot(
            DotModel::OcDfg(&oc),
            &DotOptions {
                show_duration: true,
                ..Default::default()
            },
        );
        assert!(dot.contains("digraph"));

        let net = dfg_to_workflow_net(&dfg).unwrap();
        let r = token_replay(&net, &case.log);
        assert_eq!((r.missing, r.remaining, r.fitness), (0, 0, 1.0));
    }
}

#[test]
fn survey_comparison_from_od_matrix() {
    let scenario = generate_scenario(&small(), &ModeThresholds::default()).unwrap();
    let (sps, trips) = run_pipeline(&scenario);
    let od = build_od_matrix(&trips, &sps, RegionLevel::Municipality);
    assert!(od.dropped.is_empty());
    assert_eq!(od.matrix.total, trips.len() as u64);

    // A survey equal to the measured split has zero deviation.
    let intra: u64 = od
        .matrix
        .counts
        .iter()
        .filter(|((o, d), _)| o == d)
        .map(|(_, n)| n)
        .sum();
    let share = intra as f64 / od.matrix.total as f64;
    let survey = BTreeMap::from([
        (INTRA_CLASS.to_owned(), share),
        (OTHER_CLASS.to_owned(), 1.0 - share),
    ]);
    let cmp = compare_shares(&od.matrix, &survey, None).unwrap();
    for c in &cmp.classes {
        assert!(c.deviation_pp.abs() < 1e-9, "{c:?}");
    }

    // Pair survey proportional to the measured counts fits perfectly.
    let pairs: Vec<(String, String, f64)> = od
        .matrix
        .counts
        .iter()
        .map(|((o, d), &n)| (o.clone(), d.clone(), 2.5 * n as f64))
        .collect();
    let fit = compare_pairs(&od.matrix, &pairs).unwrap();
    assert!((fit.fit.r - 1.0).abs() < 1e-12);
}

#[test]
fn same_seed_same_scenario() {
    let a = generate_scenario(&small(), &ModeThresholds::default()).unwrap();
    let b = generate_scenario(&small(), &ModeThresholds::default()).unwrap();
    assert_eq!(a.events, b.events);
    let c = generate_scenario(
        &ScenarioConfig {
            seed: 12,
            ..small()
        },
        &ModeThresholds::default(),
    )
    .unwrap();
    assert_ne!(a.events, c.events);
}
