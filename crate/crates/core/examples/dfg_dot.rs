//! Directly-follows graph, variants and Graphviz output from a small log.

use mobility_pm::discovery::{
    annotate_durations, discover_dfg, export_dot, extract_variants, DotModel, DotOptions,
};
use mobility_pm::eventlog::{CaseLog, Event, Trace};

fn trace(id: &str, steps: &[(&str, i64)]) -> Trace {
    Trace {
        case_id: id.into(),
        events: steps
            .iter()
            .map(|&(a, t)| Event {
                activity: a.into(),
                timestamp: t,
            })
            .collect(),
    }
}

fn main() -> mobility_pm::Result<()> {
    let log = CaseLog::new(vec![
        trace("t1", &[("Lisboa", 0), ("Oeiras", 1_200)]),
        trace("t2", &[("Lisboa", 100), ("Oeiras", 1_300)]),
        trace("t3", &[("Oeiras", 0), ("Cascais", 900), ("Sintra", 2_700)]),
        trace(
            "t4",
            &[("Lisboa", 0), ("Oeiras", 1_500), ("Cascais", 2_400)],
        ),
    ])?;
    let dfg = annotate_durations(&discover_dfg(&log)?, &log)?;
    for ((a, b), s) in &dfg.arcs {
        println!(
            "{a} -> {b}: {} trips, mean {:.0} s",
            s.frequency,
            s.mean_s.unwrap_or(0.0)
        );
    }
    for v in extract_variants(&log, Some(3))? {
        println!("{:>2} x {}", v.count, v.activities.join(" > "));
    }
    let opts = DotOptions {
        show_duration: true,
        ..Default::default()
    };
    print!("{}", export_dot(DotModel::Dfg(&dfg), &opts));
    Ok(())
}
