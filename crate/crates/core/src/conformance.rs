//! Workflow nets from DFGs and token-based replay fitness.
//!
//! The net has one visible transition per activity. Its input place collects
//! tokens from the source (start activities) and from every predecessor's
//! output place through silent transitions, one per DFG arc; end activities
//! reach the sink the same way. Silent transitions whose removal cannot change
//! the visible language (series places with a single consumer or a single
//! producer) are then fused away, so a chain DFG `A -> B` becomes the plain
//! net `source -> A -> p_A_B -> B -> sink`.
//!
//! Every transition keeps exactly one input and one output place, so the net
//! is a state machine and any trace of the log it was discovered from replays
//! without missing or remaining tokens.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discovery::Dfg;
use crate::error::{Error, Result};
use crate::eventlog::{CaseLog, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Place {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    /// `None` for silent transitions.
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Place(usize),
    Transition(usize),
}

/// Place/transition net with a single source and sink place. The initial
/// marking is one token on the source; the final marking one on the sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<(Node, Node)>,
    source: usize,
    sink: usize,
    inputs: Vec<Vec<usize>>,
    outputs: Vec<Vec<usize>>,
}

impl PetriNet {
    pub fn new(
        places: Vec<Place>,
        transitions: Vec<Transition>,
        arcs: Vec<(Node, Node)>,
        source: usize,
        sink: usize,
    ) -> Result<Self> {
        let np = places.len();
        let nt = transitions.len();
        let mut inputs = vec![Vec::new(); nt];
        let mut outputs = vec![Vec::new(); nt];
        let mut place_in = vec![0usize; np];
        let mut place_out = vec![0usize; np];
        for &(from, to) in &arcs {
            match (from, to) {
                (Node::Place(p), Node::Transition(t)) if p < np && t < nt => {
                    inputs[t].push(p);
                    place_out[p] += 1;
                }
                (Node::Transition(t), Node::Place(p)) if p < np && t < nt => {
                    outputs[t].push(p);
                    place_in[p] += 1;
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "arc {from:?} -> {to:?} must join a place and a transition"
                    )))
                }
            }
        }
        if source >= np || sink >= np || source == sink {
            return Err(Error::InvalidInput(
                "source and sink must be distinct places".into(),
            ));
        }
        let sources: Vec<usize> = (0..np).filter(|&p| place_in[p] == 0).collect();
        let sinks: Vec<usize> = (0..np).filter(|&p| place_out[p] == 0).collect();
        if sources != [source] || sinks != [sink] {
            return Err(Error::InvalidInput(format!(
                "workflow net needs exactly one source and one sink place, found {sources:?} / {sinks:?}"
            )));
        }
        let mut labels = std::collections::BTreeSet::new();
        for t in &transitions {
            if let Some(l) = &t.label {
                if !labels.insert(l.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "duplicate transition label {l}"
                    )));
                }
            }
        }
        Ok(PetriNet {
            places,
            transitions,
            arcs,
            source,
            sink,
            inputs,
            outputs,
        })
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[(Node, Node)] {
        &self.arcs
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn transition_by_label(&self, label: &str) -> Option<usize> {
        self.transitions
            .iter()
            .position(|t| t.label.as_deref() == Some(label))
    }

    pub fn n_silent(&self) -> usize {
        self.transitions
            .iter()
            .filter(|t| t.label.is_none())
            .count()
    }

    pub fn node_name(&self, n: Node) -> &str {
        match n {
            Node::Place(p) => &self.places[p].id,
            Node::Transition(t) => &self.transitions[t].id,
        }
    }
}

// Mutable construction state for the DFG conversion.
// (label, silent name, input places, output places)
type DraftTransition = (Option<String>, String, Vec<usize>, Vec<usize>);

#[derive(Default)]
struct Draft {
    names: Vec<String>,
    alive: Vec<bool>,
    // 0 = plain, 1 = arc place, 2 = source/sink
    rank: Vec<u8>,
    transitions: Vec<DraftTransition>,
    removed_t: Vec<bool>,
    consumers: Vec<BTreeSet<usize>>,
    producers: Vec<BTreeSet<usize>>,
}

impl Draft {
    fn add_place(&mut self, name: String, rank: u8) -> usize {
        self.names.push(name);
        self.alive.push(true);
        self.rank.push(rank);
        self.consumers.push(BTreeSet::new());
        self.producers.push(BTreeSet::new());
        self.names.len() - 1
    }

    fn add_transition(&mut self, label: Option<String>, name: String, from: usize, to: usize) {
        let t = self.transitions.len();
        self.transitions.push((label, name, vec![from], vec![to]));
        self.removed_t.push(false);
        self.consumers[from].insert(t);
        self.producers[to].insert(t);
    }

    // Tries to fuse the places around silent transition `t`.
    fn try_fuse(&mut self, t: usize, source: usize, sink: usize) -> bool {
        if self.removed_t[t] || self.transitions[t].0.is_some() {
            return false;
        }
        let (p, q) = (self.transitions[t].2[0], self.transitions[t].3[0]);
        if p == q || (p == source && q == sink) {
            return false;
        }
        let only = |set: &BTreeSet<usize>| set.len() == 1 && set.contains(&t);
        if !(only(&self.consumers[p]) || only(&self.producers[q])) {
            return false;
        }
        let other_producers = self.producers[p]
            .iter()
            .chain(&self.producers[q])
            .any(|&x| x != t);
        let other_consumers = self.consumers[p]
            .iter()
            .chain(&self.consumers[q])
            .any(|&x| x != t);
        let touches_source = p == source || q == source;
        let touches_sink = p == sink || q == sink;
        if (touches_source && other_producers) || (touches_sink && other_consumers) {
            return false;
        }
        // Keep the more significant place and redirect the other into it.
        let (keep, drop) = if self.rank[q] > self.rank[p] {
            (q, p)
        } else {
            (p, q)
        };
        if self.rank[keep] == 0 {
            self.names[keep] = self.transitions[t].1.clone();
            self.rank[keep] = 1;
        }
        self.removed_t[t] = true;
        self.consumers[p].remove(&t);
        self.producers[q].remove(&t);
        self.alive[drop] = false;
        let moved_cons = std::mem::take(&mut self.consumers[drop]);
        let moved_prod = std::mem::take(&mut self.producers[drop]);
        for &x in &moved_cons {
            for pl in self.transitions[x].2.iter_mut() {
                if *pl == drop {
                    *pl = keep;
                }
            }
        }
        for &x in &moved_prod {
            for pl in self.transitions[x].3.iter_mut() {
                if *pl == drop {
                    *pl = keep;
                }
            }
        }
        self.consumers[keep].extend(moved_cons);
        self.producers[keep].extend(moved_prod);
        true
    }
}

/// Converts a DFG into a workflow net (see module docs).
pub fn dfg_to_workflow_net(dfg: &Dfg) -> Result<PetriNet> {
    if dfg.nodes.is_empty() || dfg.start_counts.is_empty() || dfg.end_counts.is_empty() {
        return Err(Error::EmptyModel);
    }
    let mut d = Draft::default();
    let source = d.add_place("source".into(), 2);
    let sink = d.add_place("sink".into(), 2);
    let mut io: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for a in dfg.nodes.keys() {
        let i = d.add_place(format!("in_{a}"), 0);
        let o = d.add_place(format!("out_{a}"), 0);
        io.insert(a, (i, o));
        d.add_transition(Some(a.clone()), format!("t_{a}"), i, o);
    }
    for a in dfg.start_counts.keys() {
        let (i, _) = io[a.as_str()];
        d.add_transition(None, format!("p_start_{a}"), source, i);
    }
    for (a, b) in dfg.arcs.keys() {
        let (Some(&(_, o)), Some(&(i, _))) = (io.get(a.as_str()), io.get(b.as_str())) else {
            return Err(Error::InvalidInput(format!(
                "arc ({a}, {b}) references unknown activity"
            )));
        };
        d.add_transition(None, format!("p_{a}_{b}"), o, i);
    }
    for a in dfg.end_counts.keys() {
        let (_, o) = io[a.as_str()];
        d.add_transition(None, format!("p_{a}_end"), o, sink);
    }

    loop {
        let mut changed = false;
        for t in 0..d.transitions.len() {
            changed |= d.try_fuse(t, source, sink);
        }
        if !changed {
            break;
        }
    }

    // Compact.
    let mut place_map = vec![usize::MAX; d.names.len()];
    let mut places = Vec::new();
    for (i, name) in d.names.iter().enumerate() {
        if d.alive[i] {
            place_map[i] = places.len();
            places.push(Place { id: name.clone() });
        }
    }
    let mut transitions = Vec::new();
    let mut arcs = Vec::new();
    let mut tau = 0usize;
    for (k, (label, _, ins, outs)) in d.transitions.iter().enumerate() {
        if d.removed_t[k] {
            continue;
        }
        let t = transitions.len();
        let id = match label {
            Some(l) => format!("t_{l}"),
            None => {
                tau += 1;
                format!("tau_{}", tau - 1)
            }
        };
        transitions.push(Transition {
            id,
            label: label.clone(),
        });
        for &p in ins {
            arcs.push((Node::Place(place_map[p]), Node::Transition(t)));
        }
        for &p in outs {
            arcs.push((Node::Transition(t), Node::Place(place_map[p])));
        }
    }
    PetriNet::new(
        places,
        transitions,
        arcs,
        place_map[source],
        place_map[sink],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFitness {
    pub case_id: String,
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
    pub fitness: f64,
    pub n_traces: usize,
    /// Set for an empty log, whose fitness is defined as 1.0.
    pub vacuous: bool,
    pub traces: Vec<TraceFitness>,
}

/// `½(1 − m/c) + ½(1 − r/p)`, with empty counts contributing a perfect half.
pub fn fitness(produced: u64, consumed: u64, missing: u64, remaining: u64) -> f64 {
    let left = if consumed == 0 {
        1.0
    } else {
        1.0 - missing as f64 / consumed as f64
    };
    let right = if produced == 0 {
        1.0
    } else {
        1.0 - remaining as f64 / produced as f64
    };
    0.5 * left + 0.5 * right
}

struct Replayer<'a> {
    net: &'a PetriNet,
    by_label: HashMap<&'a str, usize>,
    // For each place, silent single-in/single-out transitions producing into it: (from place, tau).
    silent_into: Vec<Vec<(usize, usize)>>,
}

impl<'a> Replayer<'a> {
    fn new(net: &'a PetriNet) -> Self {
        let mut by_label = HashMap::new();
        let mut silent_into = vec![Vec::new(); net.places.len()];
        for (t, tr) in net.transitions.iter().enumerate() {
            match &tr.label {
                Some(l) => {
                    by_label.insert(l.as_str(), t);
                }
                None => {
                    if let ([p], [q]) = (net.inputs[t].as_slice(), net.outputs[t].as_slice()) {
                        silent_into[*q].push((*p, t));
                    }
                }
            }
        }
        Replayer {
            net,
            by_label,
            silent_into,
        }
    }

    /// Moves a token into `target` along the shortest chain of silent
    /// transitions, if some marked place reaches it.
    fn enable(
        &self,
        target: usize,
        marking: &mut [u64],
        produced: &mut u64,
        consumed: &mut u64,
    ) -> bool {
        let n = marking.len();
        let mut via: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[target] = true;
        let mut queue = VecDeque::from([target]);
        while let Some(q) = queue.pop_front() {
            for &(p, t) in &self.silent_into[q] {
                if seen[p] {
                    continue;
                }
                seen[p] = true;
                // t moves a token p -> q
                via[p] = Some((t, q));
                if marking[p] > 0 {
                    let mut cur = p;
                    while cur != target {
                        let (_, next) = via[cur].expect("path");
                        marking[cur] -= 1;
                        *consumed += 1;
                        marking[next] += 1;
                        *produced += 1;
                        cur = next;
                    }
                    return true;
                }
                queue.push_back(p);
            }
        }
        false
    }

    fn replay(&self, trace: &Trace) -> TraceFitness {
        let net = self.net;
        let mut marking = vec![0u64; net.places.len()];
        marking[net.source] = 1;
        let (mut p, mut c, mut m) = (1u64, 0u64, 0u64);
        for e in &trace.events {
            let Some(&t) = self.by_label.get(e.activity.as_str()) else {
                // virtual input token: inserted, then consumed
                m += 1;
                c += 1;
                continue;
            };
            for &pl in &net.inputs[t] {
                if marking[pl] == 0 && !self.enable(pl, &mut marking, &mut p, &mut c) {
                    m += 1;
                    marking[pl] += 1;
                }
            }
            for &pl in &net.inputs[t] {
                marking[pl] -= 1;
                c += 1;
            }
            for &pl in &net.outputs[t] {
                marking[pl] += 1;
                p += 1;
            }
        }
        if marking[net.sink] == 0 && !self.enable(net.sink, &mut marking, &mut p, &mut c) {
            m += 1;
            marking[net.sink] += 1;
        }
        marking[net.sink] -= 1;
        c += 1;
        let r: u64 = marking.iter().sum();
        TraceFitness {
            case_id: trace.case_id.clone(),
            produced: p,
            consumed: c,
            missing: m,
            remaining: r,
            fitness: fitness(p, c, m, r),
        }
    }
}

/// Token-based replay of every trace. Activities without a transition add
/// one missing token, consume it and are skipped.
pub fn token_replay(net: &PetriNet, log: &CaseLog) -> FitnessReport {
    let replayer = Replayer::new(net);
    let traces: Vec<TraceFitness> = log.traces.par_iter().map(|t| replayer.replay(t)).collect();
    let sum = |f: fn(&TraceFitness) -> u64| traces.iter().map(f).sum::<u64>();
    let (p, c, m, r) = (
        sum(|t| t.produced),
        sum(|t| t.consumed),
        sum(|t| t.missing),
        sum(|t| t.remaining),
    );
    FitnessReport {
        produced: p,
        consumed: c,
        missing: m,
        remaining: r,
        fitness: if traces.is_empty() {
            1.0
        } else {
            fitness(p, c, m, r)
        },
        n_traces: traces.len(),
        vacuous: traces.is_empty(),
        traces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::discover_dfg;
    use crate::eventlog::Event;

    fn log(traces: &[&[&str]]) -> CaseLog {
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
                            timestamp: j as i64,
                        })
                        .collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    // Hand-built src -> A -> p_AB -> B -> sink.
    fn chain_net() -> PetriNet {
        let places = ["src", "p_AB", "sink"]
            .map(|id| Place { id: id.into() })
            .to_vec();
        let transitions = ["A", "B"]
            .map(|l| Transition {
                id: l.into(),
                label: Some(l.into()),
            })
            .to_vec();
        let arcs = vec![
            (Node::Place(0), Node::Transition(0)),
            (Node::Transition(0), Node::Place(1)),
            (Node::Place(1), Node::Transition(1)),
            (Node::Transition(1), Node::Place(2)),
        ];
        PetriNet::new(places, transitions, arcs, 0, 2).unwrap()
    }

    #[test]
    fn chain_dfg_gives_plain_net() {
        let dfg = discover_dfg(&log(&[&["A", "B"]])).unwrap();
        let net = dfg_to_workflow_net(&dfg).unwrap();
        assert_eq!(net.places().len(), 3);
        assert_eq!(net.transitions().len(), 2);
        assert_eq!(net.arcs().len(), 4);
        assert_eq!(net.n_silent(), 0);
        let names: Vec<&str> = net.places().iter().map(|p| p.id.as_str()).collect();
        assert!(names.contains(&"p_A_B"), "{names:?}");
    }

    #[test]
    fn self_loop_keeps_a_cycle_through_a() {
        let dfg = discover_dfg(&log(&[&["A", "A"]])).unwrap();
        let net = dfg_to_workflow_net(&dfg).unwrap();
        let a = net.transition_by_label("A").unwrap();
        // A's output can flow back into A's input.
        let report = token_replay(&net, &log(&[&["A", "A", "A"]]));
        assert_eq!((report.missing, report.remaining), (0, 0));
        assert!(net.arcs().iter().any(|&(f, _)| f == Node::Transition(a)));
    }

    #[test]
    fn empty_dfg_rejected() {
        assert!(matches!(
            dfg_to_workflow_net(&Dfg::default()),
            Err(Error::EmptyModel)
        ));
    }

    #[test]
    fn hand_replay_of_partial_trace() {
        let report = token_replay(&chain_net(), &log(&[&["A"]]));
        assert_eq!(
            (
                report.produced,
                report.consumed,
                report.missing,
                report.remaining
            ),
            (2, 2, 1, 1)
        );
        assert_eq!(report.fitness, 0.5);
    }

    #[test]
    fn unknown_activity_counts_one_missing() {
        let report = token_replay(&chain_net(), &log(&[&["A", "X", "B"]]));
        assert_eq!(report.missing, 1);
        assert_eq!(report.remaining, 0);
        assert_eq!((report.produced, report.consumed), (3, 4));
        assert_eq!(report.fitness, 0.5 * (1.0 - 1.0 / 4.0) + 0.5);
    }

    #[test]
    fn unknown_only_trace_stays_in_range() {
        let report = token_replay(&chain_net(), &log(&[&["X", "Y", "Z"]]));
        assert!(report.missing <= report.consumed);
        assert!((0.0..=1.0).contains(&report.fitness));
    }

    #[test]
    fn empty_log_is_vacuously_fit() {
        let report = token_replay(&chain_net(), &CaseLog::default());
        assert_eq!(report.fitness, 1.0);
        assert!(report.vacuous);
        assert_eq!((report.produced, report.consumed), (0, 0));
    }

    #[test]
    fn own_log_replays_perfectly() {
        let l = log(&[
            &["A", "B", "C"],
            &["A", "C"],
            &["B", "A", "A"],
            &["C"],
            &["A", "B", "D", "B"],
        ]);
        let net = dfg_to_workflow_net(&discover_dfg(&l).unwrap()).unwrap();
        let r = token_replay(&net, &l);
        assert_eq!((r.missing, r.remaining, r.fitness), (0, 0, 1.0));
    }

    #[test]
    fn deviating_trace_loses_fitness() {
        let l = log(&[&["A", "B"], &["A", "C"]]);
        let net = dfg_to_workflow_net(&discover_dfg(&l).unwrap()).unwrap();
        let r = token_replay(&net, &log(&[&["B", "A"]]));
        assert!(r.fitness < 1.0);
        assert!(r.missing > 0);
    }

    #[test]
    fn net_validation() {
        let places = vec![Place { id: "a".into() }, Place { id: "b".into() }];
        // Isolated places are both sources and sinks.
        assert!(PetriNet::new(places.clone(), vec![], vec![], 0, 1).is_err());
        let t = vec![
            Transition {
                id: "x".into(),
                label: Some("A".into()),
            },
            Transition {
                id: "y".into(),
                label: Some("A".into()),
            },
        ];
        let arcs = vec![
            (Node::Place(0), Node::Transition(0)),
            (Node::Transition(0), Node::Place(1)),
            (Node::Place(0), Node::Transition(1)),
            (Node::Transition(1), Node::Place(1)),
        ];
        assert!(PetriNet::new(places, t, arcs, 0, 1).is_err());
    }

    mod props {
        use super::*;
        use crate::testkit::case_log;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn own_log_fits_perfectly(log in case_log(60, 8)) {
                let net = dfg_to_workflow_net(&discover_dfg(&log).unwrap()).unwrap();
                let r = token_replay(&net, &log);
                prop_assert_eq!(r.missing, 0);
                prop_assert_eq!(r.remaining, 0);
                prop_assert_eq!(r.fitness, 1.0);
            }

            #[test]
            fn token_balance(model in case_log(10, 4), log in case_log(20, 6)) {
                let net = dfg_to_workflow_net(&discover_dfg(&model).unwrap()).unwrap();
                let r = token_replay(&net, &log);
                prop_assert_eq!(r.produced + r.missing, r.consumed + r.remaining);
                prop_assert!(r.missing <= r.consumed && r.remaining <= r.produced);
                prop_assert!((0.0..=1.0).contains(&r.fitness));
                for t in &r.traces {
                    prop_assert_eq!(t.produced + t.missing, t.consumed + t.remaining);
                    prop_assert!((0.0..=1.0).contains(&t.fitness));
                }
            }

            #[test]
            fn fitting_trace_never_lowers_fitness(model in case_log(10, 4), log in case_log(10, 6), pick in 0usize..10) {
                let net = dfg_to_workflow_net(&discover_dfg(&model).unwrap()).unwrap();
                let before = token_replay(&net, &log).fitness;
                let mut traces = log.traces.clone();
                let mut extra = model.traces[pick % model.len()].clone();
                extra.case_id = "zz".into();
                traces.push(extra);
                let after = token_replay(&net, &CaseLog::new(traces).unwrap()).fitness;
                prop_assert!(after >= before - 1e-12);
            }
        }
    }
}
