//! Workflow net from a DFG and token-based replay fitness.

use mobility_pm::conformance::{dfg_to_workflow_net, token_replay};
use mobility_pm::discovery::discover_dfg;
use mobility_pm::eventlog::{CaseLog, Event, Trace};

fn log(traces: &[&[&str]]) -> mobility_pm::Result<CaseLog> {
    CaseLog::new(
        traces
            .iter()
            .enumerate()
            .map(|(i, acts)| Trace {
                case_id: format!("c{i}"),
                events: acts
                    .iter()
                    .enumerate()
                    .map(|(j, a)| Event {
                        activity: a.to_string(),
                        timestamp: 60 * j as i64,
                    })
                    .collect(),
            })
            .collect(),
    )
}

fn main() -> mobility_pm::Result<()> {
    let train = log(&[&["A", "B", "C"], &["A", "C"], &["B", "C", "C"]])?;
    let net = dfg_to_workflow_net(&discover_dfg(&train)?)?;
    println!(
        "net: {} places, {} transitions ({} silent), {} arcs",
        net.places().len(),
        net.transitions().len(),
        net.n_silent(),
        net.arcs().len()
    );

    let own = token_replay(&net, &train);
    println!(
        "own log: fitness {} (m={}, r={})",
        own.fitness, own.missing, own.remaining
    );

    let test = log(&[&["A", "B", "C"], &["C", "A"], &["A", "X", "C"]])?;
    let r = token_replay(&net, &test);
    println!(
        "p={} c={} m={} r={} fitness {:.3}",
        r.produced, r.consumed, r.missing, r.remaining, r.fitness
    );
    for t in &r.traces {
        println!("  {}: {:.3}", t.case_id, t.fitness);
    }
    Ok(())
}
