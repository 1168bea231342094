#![allow(dead_code)]

use mobility_pm::eventlog::{CaseLog, Event, Trace};
use mobility_pm::geo::{position_events, RegionIndex};
use mobility_pm::stay::{build_staypoints, Staypoint, StopParams};
use mobility_pm::synth::Scenario;
use mobility_pm::trips::{build_trips, ModeThresholds, Trip, DEFAULT_GAP_THRESHOLD};
use rand::Rng;

/// Positions, stays and trips with default parameters.
pub fn run_pipeline(s: &Scenario) -> (Vec<Staypoint>, Vec<Trip>) {
    let regions = RegionIndex::new(s.regions.clone()).unwrap();
    let events = position_events(&s.events, &s.towers, &regions).unwrap();
    let sps = build_staypoints(&events, &StopParams::default(), &regions).unwrap();
    let (_, trips) = build_trips(
        &sps,
        &events,
        &ModeThresholds::default(),
        DEFAULT_GAP_THRESHOLD,
    )
    .unwrap();
    (sps, trips)
}

/// Random case log: `n` traces of 1..=max_len events over `alphabet` activities.
pub fn random_log(rng: &mut impl Rng, n: usize, max_len: usize, alphabet: usize) -> CaseLog {
    let traces = (0..n)
        .map(|i| {
            let len = rng.gen_range(1..=max_len);
            let mut t = rng.gen_range(0..1_000_000i64);
            let events = (0..len)
                .map(|_| {
                    t += rng.gen_range(0..7200);
                    Event {
                        activity: format!("R{:02}", rng.gen_range(0..alphabet)),
                        timestamp: t,
                    }
                })
                .collect();
            Trace {
                case_id: format!("c{i:06}"),
                events,
            }
        })
        .collect();
    CaseLog::new(traces).unwrap()
}
