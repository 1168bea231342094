//! Proptest strategies shared by unit tests.

use proptest::prelude::*;

use crate::eventlog::{CaseLog, Event, Trace};

/// Case logs over activities `A`..`F` with nondecreasing timestamps.
pub fn case_log(max_traces: usize, max_len: usize) -> impl Strategy<Value = CaseLog> {
    prop::collection::vec(
        prop::collection::vec((0u8..6, 0i64..3600), 1..=max_len),
        1..=max_traces,
    )
    .prop_map(|traces| {
        let traces = traces
            .into_iter()
            .enumerate()
            .map(|(i, steps)| {
                let mut t = 0;
                Trace {
                    case_id: format!("c{i:04}"),
                    events: steps
                        .into_iter()
                        .map(|(a, dt)| {
                            t += dt;
                            Event {
                                activity: ((b'A' + a) as char).to_string(),
                                timestamp: t,
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        CaseLog::new(traces).expect("generated traces are valid")
    })
}
