//! Directly-follows graphs, duration annotations, variants and OC-DFGs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{CaseLog, Ocel, Trace};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArcStats {
    pub frequency: u64,
    /// Mean seconds between the two events; set by [`annotate_durations`].
    pub mean_s: Option<f64>,
    pub median_s: Option<f64>,
    pub n_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dfg {
    /// Activity -> number of occurrences.
    pub nodes: BTreeMap<String, u64>,
    pub arcs: BTreeMap<(String, String), ArcStats>,
    pub start_counts: BTreeMap<String, u64>,
    pub end_counts: BTreeMap<String, u64>,
}

impl Dfg {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn arc(&self, src: &str, dst: &str) -> Option<&ArcStats> {
        self.arcs.get(&(src.to_owned(), dst.to_owned()))
    }

    fn add_trace(&mut self, trace: &Trace) {
        let (Some(first), Some(last)) = (trace.events.first(), trace.events.last()) else {
            return;
        };
        *self.start_counts.entry(first.activity.clone()).or_default() += 1;
        *self.end_counts.entry(last.activity.clone()).or_default() += 1;
        for e in &trace.events {
            *self.nodes.entry(e.activity.clone()).or_default() += 1;
        }
        for w in trace.events.windows(2) {
            self.arcs
                .entry((w[0].activity.clone(), w[1].activity.clone()))
                .or_default()
                .frequency += 1;
        }
    }

    fn merge(mut self, other: Dfg) -> Dfg {
        for (k, v) in other.nodes {
            *self.nodes.entry(k).or_default() += v;
        }
        for (k, v) in other.start_counts {
            *self.start_counts.entry(k).or_default() += v;
        }
        for (k, v) in other.end_counts {
            *self.end_counts.entry(k).or_default() += v;
        }
        for (k, v) in other.arcs {
            self.arcs.entry(k).or_default().frequency += v.frequency;
        }
        self
    }
}

/// Frequency DFG. Self-loops are ordinary arcs.
pub fn discover_dfg(log: &CaseLog) -> Result<Dfg> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(log
        .traces
        .par_iter()
        .fold(Dfg::default, |mut dfg, t| {
            dfg.add_trace(t);
            dfg
        })
        .reduce(Dfg::default, Dfg::merge))
}

fn median_of_sorted(v: &[i64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
    }
}

/// Adds mean/median seconds per arc from the adjacent-pair time deltas of
/// `log`, which must be the log `dfg` was discovered from.
pub fn annotate_durations(dfg: &Dfg, log: &CaseLog) -> Result<Dfg> {
    let mut samples: HashMap<(&str, &str), Vec<i64>> = HashMap::new();
    for t in &log.traces {
        for w in t.events.windows(2) {
            samples
                .entry((w[0].activity.as_str(), w[1].activity.as_str()))
                .or_default()
                .push(w[1].timestamp - w[0].timestamp);
        }
    }
    let mut out = dfg.clone();
    for ((a, b), mut s) in samples {
        let stats = out
            .arcs
            .get_mut(&(a.to_owned(), b.to_owned()))
            .ok_or_else(|| Error::MismatchedLog(a.to_owned(), b.to_owned()))?;
        if s.len() as u64 != stats.frequency {
            return Err(Error::MismatchedLog(a.to_owned(), b.to_owned()));
        }
        s.sort_unstable();
        let sum: i128 = s.iter().map(|&x| x as i128).sum();
        stats.mean_s = Some(sum as f64 / s.len() as f64);
        stats.median_s = Some(median_of_sorted(&s));
        stats.n_samples = s.len() as u64;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub activities: Vec<String>,
    pub count: usize,
    pub mean_duration_s: f64,
}

/// Variants by count descending, then lexicographic sequence.
pub fn extract_variants(log: &CaseLog, top_k: Option<usize>) -> Result<Vec<Variant>> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut groups: BTreeMap<Vec<&str>, (usize, i128)> = BTreeMap::new();
    for t in &log.traces {
        let key: Vec<&str> = t.events.iter().map(|e| e.activity.as_str()).collect();
        let g = groups.entry(key).or_default();
        g.0 += 1;
        g.1 += t.duration() as i128;
    }
    let mut variants: Vec<Variant> = groups
        .into_iter()
        .map(|(k, (count, total))| Variant {
            activities: k.into_iter().map(str::to_owned).collect(),
            count,
            mean_duration_s: total as f64 / count as f64,
        })
        .collect();
    variants.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.activities.cmp(&b.activities))
    });
    if let Some(k) = top_k {
        variants.truncate(k);
    }
    Ok(variants)
}

/// What [`filter_log_by_variants`] does when nothing matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyResult {
    #[default]
    Error,
    Allow,
}

/// Keeps the traces whose activity sequence is selected.
pub fn filter_log_by_variants(
    log: &CaseLog,
    selection: &[Vec<String>],
    on_empty: EmptyResult,
) -> Result<CaseLog> {
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    let wanted: BTreeSet<&[String]> = selection.iter().map(Vec::as_slice).collect();
    let traces: Vec<Trace> = log
        .traces
        .iter()
        .filter(|t| {
            let acts = t.activities();
            wanted.contains(acts.as_slice())
        })
        .cloned()
        .collect();
    if traces.is_empty() && on_empty == EmptyResult::Error {
        return Err(Error::EmptySelection);
    }
    Ok(CaseLog { traces })
}

/// One duration-annotated DFG per object type over a shared node set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OcDfg {
    pub per_type: BTreeMap<String, Dfg>,
}

impl OcDfg {
    pub fn nodes(&self) -> BTreeSet<&str> {
        self.per_type
            .values()
            .flat_map(|d| d.nodes.keys().map(String::as_str))
            .collect()
    }
}

/// Flattens the log along each object type and discovers a DFG per type.
pub fn discover_ocdfg(ocel: &Ocel) -> Result<OcDfg> {
    if ocel.events.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut per_type = BTreeMap::new();
    for ty in &ocel.object_types {
        let flat = ocel.flatten(ty);
        if flat.is_empty() {
            per_type.insert(ty.clone(), Dfg::default());
            continue;
        }
        let dfg = discover_dfg(&flat)?;
        per_type.insert(ty.clone(), annotate_durations(&dfg, &flat)?);
    }
    Ok(OcDfg { per_type })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DotOptions {
    pub show_frequency: bool,
    pub show_duration: bool,
    pub min_arc_frequency: u64,
}

impl Default for DotOptions {
    fn default() -> Self {
        DotOptions {
            show_frequency: true,
            show_duration: false,
            min_arc_frequency: 0,
        }
    }
}

/// Fixed palette for per-type arcs, cycled in type order.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub enum DotModel<'a> {
    Dfg(&'a Dfg),
    OcDfg(&'a OcDfg),
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn arc_label(stats: &ArcStats, opts: &DotOptions) -> Option<String> {
    let mut parts = Vec::new();
    if opts.show_frequency {
        parts.push(stats.frequency.to_string());
    }
    if opts.show_duration {
        if let Some(mean) = stats.mean_s {
            parts.push(format!("μ={:.1}m", mean / 60.0));
        }
    }
    (!parts.is_empty()).then(|| parts.join("\\n"))
}

/// Graphviz text. Nodes sorted by name, arcs by (source, target, type);
/// identical inputs give identical bytes.
pub fn export_dot(model: DotModel<'_>, opts: &DotOptions) -> String {
    let mut nodes: BTreeMap<&str, u64> = BTreeMap::new();
    // (src, dst, type index) -> stats
    let mut arcs: Vec<(&str, &str, Option<usize>, &ArcStats)> = Vec::new();
    let name = match model {
        DotModel::Dfg(dfg) => {
            for (k, v) in &dfg.nodes {
                nodes.insert(k, *v);
            }
            for ((a, b), s) in &dfg.arcs {
                arcs.push((a, b, None, s));
            }
            "dfg"
        }
        DotModel::OcDfg(oc) => {
            for (i, dfg) in oc.per_type.values().enumerate() {
                for (k, v) in &dfg.nodes {
                    *nodes.entry(k).or_default() += v;
                }
                for ((a, b), s) in &dfg.arcs {
                    arcs.push((a, b, Some(i), s));
                }
            }
            "ocdfg"
        }
    };
    arcs.sort_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)));

    let type_names: Vec<&str> = match model {
        DotModel::OcDfg(oc) => oc.per_type.keys().map(String::as_str).collect(),
        DotModel::Dfg(_) => Vec::new(),
    };

    let mut out = String::new();
    writeln!(out, "digraph {name} {{").unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    writeln!(out, "  node [shape=box];").unwrap();
    for (n, freq) in &nodes {
        if opts.show_frequency {
            writeln!(
                out,
                "  {} [label={}];",
                quote(n),
                quote(&format!("{n} ({freq})"))
            )
            .unwrap();
        } else {
            writeln!(out, "  {};", quote(n)).unwrap();
        }
    }
    for (a, b, ty, stats) in arcs {
        if stats.frequency < opts.min_arc_frequency {
            continue;
        }
        let mut attrs = Vec::new();
        if let Some(label) = arc_label(stats, opts) {
            attrs.push(format!("label=\"{label}\""));
        }
        if let Some(i) = ty {
            let color = PALETTE[i % PALETTE.len()];
            attrs.push(format!("color=\"{color}\""));
            attrs.push(format!("fontcolor=\"{color}\""));
            attrs.push(format!("tooltip={}", quote(type_names[i])));
        }
        if attrs.is_empty() {
            writeln!(out, "  {} -> {};", quote(a), quote(b)).unwrap();
        } else {
            writeln!(
                out,
                "  {} -> {} [{}];",
                quote(a),
                quote(b),
                attrs.join(", ")
            )
            .unwrap();
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::Event;

    fn trace(id: &str, acts: &[(&str, i64)]) -> Trace {
        Trace {
            case_id: id.into(),
            events: acts
                .iter()
                .map(|(a, t)| Event {
                    activity: a.to_string(),
                    timestamp: *t,
                })
                .collect(),
        }
    }

    fn abc_log() -> CaseLog {
        CaseLog::new(vec![
            trace("1", &[("A", 0), ("B", 600)]),
            trace("2", &[("A", 0), ("B", 1800)]),
            trace("3", &[("A", 0), ("C", 60)]),
        ])
        .unwrap()
    }

    fn counts(m: &BTreeMap<String, u64>) -> Vec<(&str, u64)> {
        m.iter().map(|(k, v)| (k.as_str(), *v)).collect()
    }

    #[test]
    fn dfg_of_small_log() {
        let dfg = discover_dfg(&abc_log()).unwrap();
        assert_eq!(dfg.arc("A", "B").unwrap().frequency, 2);
        assert_eq!(dfg.arc("A", "C").unwrap().frequency, 1);
        assert_eq!(dfg.arcs.len(), 2);
        assert_eq!(counts(&dfg.start_counts), [("A", 3)]);
        assert_eq!(counts(&dfg.end_counts), [("B", 2), ("C", 1)]);
    }

    #[test]
    fn singleton_traces_and_self_loops() {
        let log = CaseLog::new(vec![trace("1", &[("A", 0)]), trace("2", &[("B", 0)])]).unwrap();
        let dfg = discover_dfg(&log).unwrap();
        assert!(dfg.arcs.is_empty());
        assert_eq!(dfg.start_counts, dfg.end_counts);

        let log = CaseLog::new(vec![trace("1", &[("A", 0), ("A", 5)])]).unwrap();
        assert_eq!(
            discover_dfg(&log).unwrap().arc("A", "A").unwrap().frequency,
            1
        );
        assert!(matches!(
            discover_dfg(&CaseLog::default()),
            Err(Error::EmptyLog)
        ));
    }

    #[test]
    fn durations_mean_and_median() {
        let log = abc_log();
        let dfg = annotate_durations(&discover_dfg(&log).unwrap(), &log).unwrap();
        let ab = dfg.arc("A", "B").unwrap();
        assert_eq!(ab.mean_s, Some(1200.0));
        assert_eq!(ab.n_samples, 2);

        let log = CaseLog::new(vec![
            trace("1", &[("A", 0), ("B", 600)]),
            trace("2", &[("A", 0), ("B", 1200)]),
            trace("3", &[("A", 0), ("B", 6000)]),
        ])
        .unwrap();
        let dfg = annotate_durations(&discover_dfg(&log).unwrap(), &log).unwrap();
        assert_eq!(dfg.arc("A", "B").unwrap().median_s, Some(1200.0));
    }

    #[test]
    fn zero_frequency_arc_gets_no_annotation() {
        let log = abc_log();
        let mut dfg = discover_dfg(&log).unwrap();
        dfg.arcs
            .insert(("C".into(), "A".into()), ArcStats::default());
        let annotated = annotate_durations(&dfg, &log).unwrap();
        assert_eq!(annotated.arc("C", "A").unwrap().mean_s, None);
    }

    #[test]
    fn mismatched_log_rejected() {
        let dfg = discover_dfg(&abc_log()).unwrap();
        let other = CaseLog::new(vec![trace("x", &[("B", 0), ("A", 1)])]).unwrap();
        assert!(matches!(
            annotate_durations(&dfg, &other),
            Err(Error::MismatchedLog(..))
        ));
    }

    #[test]
    fn variants_ordering_and_truncation() {
        let log = abc_log();
        let v = extract_variants(&log, None).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(
            (v[0].activities.clone(), v[0].count),
            (vec!["A".to_string(), "B".into()], 2)
        );
        assert_eq!(v[0].mean_duration_s, 1200.0);
        assert_eq!(extract_variants(&log, Some(1)).unwrap().len(), 1);

        let same: Vec<Trace> = (0..100)
            .map(|i| trace(&i.to_string(), &[("A", 0), ("B", 1)]))
            .collect();
        let v = extract_variants(&CaseLog::new(same).unwrap(), None).unwrap();
        assert_eq!((v.len(), v[0].count), (1, 100));
    }

    #[test]
    fn variant_filtering() {
        let log = abc_log();
        let variants = extract_variants(&log, None).unwrap();
        let top: Vec<Vec<String>> = variants
            .iter()
            .take(1)
            .map(|v| v.activities.clone())
            .collect();
        assert_eq!(
            filter_log_by_variants(&log, &top, EmptyResult::Error)
                .unwrap()
                .len(),
            2
        );
        let all: Vec<Vec<String>> = variants.iter().map(|v| v.activities.clone()).collect();
        assert_eq!(
            filter_log_by_variants(&log, &all, EmptyResult::Error).unwrap(),
            log
        );

        let ghost = vec![vec!["Z".to_string()]];
        assert!(matches!(
            filter_log_by_variants(&log, &ghost, EmptyResult::Error),
            Err(Error::EmptySelection)
        ));
        assert!(filter_log_by_variants(&log, &ghost, EmptyResult::Allow)
            .unwrap()
            .is_empty());
        assert!(matches!(
            filter_log_by_variants(&log, &[], EmptyResult::Allow),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn dot_output() {
        let dfg = discover_dfg(
            &CaseLog::new(vec![
                trace("1", &[("A", 0), ("B", 1)]),
                trace("2", &[("A", 0), ("B", 1)]),
            ])
            .unwrap(),
        )
        .unwrap();
        let opts = DotOptions::default();
        let text = export_dot(DotModel::Dfg(&dfg), &opts);
        assert!(text.contains(r#""A" -> "B" [label="2"]"#), "{text}");
        assert_eq!(text, export_dot(DotModel::Dfg(&dfg), &opts));

        let filtered = export_dot(
            DotModel::Dfg(&dfg),
            &DotOptions {
                min_arc_frequency: 3,
                ..opts
            },
        );
        assert!(!filtered.contains("->"));
        assert!(filtered.contains(r#""A" [label="A (2)"]"#));
        assert!(filtered.contains(r#""B" [label="B (2)"]"#));
    }

    #[test]
    fn dot_duration_label_and_escaping() {
        let log = CaseLog::new(vec![trace("1", &[("Q\"x", 0), ("B", 1200)])]).unwrap();
        let dfg = annotate_durations(&discover_dfg(&log).unwrap(), &log).unwrap();
        let text = export_dot(
            DotModel::Dfg(&dfg),
            &DotOptions {
                show_frequency: true,
                show_duration: true,
                min_arc_frequency: 0,
            },
        );
        assert!(
            text.contains(r#""Q\"x" -> "B" [label="1\nμ=20.0m"]"#),
            "{text}"
        );
    }

    mod props {
        use super::*;
        use crate::testkit::case_log;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conservation(log in case_log(40, 8)) {
                let dfg = annotate_durations(&discover_dfg(&log).unwrap(), &log).unwrap();
                let n = log.len() as u64;
                let arcs: u64 = dfg.arcs.values().map(|a| a.frequency).sum();
                let pairs: u64 = log.traces.iter().map(|t| t.events.len() as u64 - 1).sum();
                prop_assert_eq!(arcs, pairs);
                prop_assert_eq!(dfg.start_counts.values().sum::<u64>(), n);
                prop_assert_eq!(dfg.end_counts.values().sum::<u64>(), n);
                prop_assert_eq!(dfg.nodes.values().sum::<u64>(), log.n_events() as u64);
                for a in dfg.arcs.values() {
                    prop_assert_eq!(a.n_samples, a.frequency);
                    prop_assert!(a.mean_s.unwrap() >= 0.0);
                }
                let variants = extract_variants(&log, None).unwrap();
                prop_assert_eq!(variants.iter().map(|v| v.count).sum::<usize>(), log.len());
            }

            #[test]
            fn variant_filter_keeps_selected(log in case_log(30, 5), k in 1usize..4) {
                let top: Vec<Vec<String>> = extract_variants(&log, Some(k))
                    .unwrap()
                    .into_iter()
                    .map(|v| v.activities)
                    .collect();
                let kept = filter_log_by_variants(&log, &top, EmptyResult::Error).unwrap();
                prop_assert!(kept.traces.iter().all(|t| top.contains(&t.activities())));
                let expected = log.traces.iter().filter(|t| top.contains(&t.activities())).count();
                prop_assert_eq!(kept.len(), expected);
            }
        }
    }
}
