//! Case-centric and object-centric event logs built from trips.
//!
//! A case is a trip; activities are region ids at the chosen level. Each
//! trip yields its origin region at departure, every intermediate staypoint
//! whose region differs from the previously emitted one, and its destination
//! region at arrival. Endpoints are always emitted, so intra-region trips
//! produce self-loops.
//!
//! The object-centric log carries exactly the same events. Every event is
//! related to its trip object (typed by the trip's primary mode) and to one
//! shared object per mode, so `|R| = 2 |E|`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::RegionLevel;
use crate::stay::Staypoint;
use crate::trips::Trip;

/// Object type shared by the per-mode singleton objects.
pub const MODE_OBJECT_TYPE: &str = "Mode";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub activity: String,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn activities(&self) -> Vec<String> {
        self.events.iter().map(|e| e.activity.clone()).collect()
    }

    /// Seconds between the first and last event.
    pub fn duration(&self) -> i64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::InvalidInput(format!(
                "trace {} is empty",
                self.case_id
            )));
        }
        if self
            .events
            .windows(2)
            .any(|w| w[1].timestamp < w[0].timestamp)
        {
            return Err(Error::InvalidInput(format!(
                "trace {} is not time-ordered",
                self.case_id
            )));
        }
        Ok(())
    }
}

/// A multiset of traces, one per case.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CaseLog {
    pub traces: Vec<Trace>,
}

impl CaseLog {
    /// Validates every trace (non-empty, nondecreasing timestamps).
    pub fn new(traces: Vec<Trace>) -> Result<Self> {
        for t in &traces {
            t.validate()?;
        }
        Ok(CaseLog { traces })
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum()
    }

    pub fn activities(&self) -> BTreeSet<&str> {
        self.traces
            .iter()
            .flat_map(|t| t.events.iter().map(|e| e.activity.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OcelObject {
    pub id: String,
    #[serde(rename = "type")]
    pub object_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Relation {
    pub object_id: String,
    pub qualifier: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcelEvent {
    pub id: String,
    pub activity: String,
    pub timestamp: i64,
    pub relations: Vec<Relation>,
}

/// Events, typed objects and the event-object relation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ocel {
    pub object_types: Vec<String>,
    pub objects: Vec<OcelObject>,
    pub events: Vec<OcelEvent>,
}

impl Ocel {
    /// Sorts all arrays by id and checks referential integrity.
    pub fn new(
        mut object_types: Vec<String>,
        mut objects: Vec<OcelObject>,
        mut events: Vec<OcelEvent>,
    ) -> Result<Self> {
        object_types.sort();
        object_types.dedup();
        objects.sort();
        events.sort_by(|a, b| a.id.cmp(&b.id));
        for e in &mut events {
            e.relations.sort();
        }
        let ocel = Ocel {
            object_types,
            objects,
            events,
        };
        ocel.validate()?;
        Ok(ocel)
    }

    pub fn validate(&self) -> Result<()> {
        let types: BTreeSet<&str> = self.object_types.iter().map(String::as_str).collect();
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate object id {}", o.id)));
            }
            if !types.contains(o.object_type.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "object {} has undeclared type {}",
                    o.id, o.object_type
                )));
            }
        }
        let mut event_ids = BTreeSet::new();
        for e in &self.events {
            if !event_ids.insert(e.id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate event id {}", e.id)));
            }
            for r in &e.relations {
                if !ids.contains(r.object_id.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "event {} relates to unknown object {}",
                        e.id, r.object_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_relations(&self) -> usize {
        self.events.iter().map(|e| e.relations.len()).sum()
    }

    pub fn object_type_of(&self) -> HashMap<&str, &str> {
        self.objects
            .iter()
            .map(|o| (o.id.as_str(), o.object_type.as_str()))
            .collect()
    }

    /// Case log whose cases are the objects of `object_type`, each holding
    /// its related events ordered by `(timestamp, event id)`.
    pub fn flatten(&self, object_type: &str) -> CaseLog {
        let typed: BTreeSet<&str> = self
            .objects
            .iter()
            .filter(|o| o.object_type == object_type)
            .map(|o| o.id.as_str())
            .collect();
        let mut per_object: BTreeMap<&str, Vec<&OcelEvent>> = BTreeMap::new();
        for e in &self.events {
            for r in &e.relations {
                if typed.contains(r.object_id.as_str()) {
                    per_object.entry(r.object_id.as_str()).or_default().push(e);
                }
            }
        }
        let traces = per_object
            .into_iter()
            .map(|(oid, mut evs)| {
                evs.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));
                evs.dedup_by(|a, b| a.id == b.id);
                Trace {
                    case_id: oid.to_owned(),
                    events: evs
                        .into_iter()
                        .map(|e| Event {
                            activity: e.activity.clone(),
                            timestamp: e.timestamp,
                        })
                        .collect(),
                }
            })
            .collect();
        CaseLog { traces }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LogStats {
    pub n_cases_or_objects: usize,
    pub n_events: usize,
    pub n_variants_or_object_types: usize,
    pub n_relations: Option<usize>,
}

pub trait LogStatistics {
    fn stats(&self) -> LogStats;
}

impl LogStatistics for CaseLog {
    fn stats(&self) -> LogStats {
        let variants: BTreeSet<Vec<&str>> = self
            .traces
            .iter()
            .map(|t| t.events.iter().map(|e| e.activity.as_str()).collect())
            .collect();
        LogStats {
            n_cases_or_objects: self.traces.len(),
            n_events: self.n_events(),
            n_variants_or_object_types: variants.len(),
            n_relations: None,
        }
    }
}

impl LogStatistics for Ocel {
    fn stats(&self) -> LogStats {
        LogStats {
            n_cases_or_objects: self.objects.len(),
            n_events: self.events.len(),
            n_variants_or_object_types: self.object_types.len(),
            n_relations: Some(self.n_relations()),
        }
    }
}

pub fn compute_stats<L: LogStatistics>(log: &L) -> LogStats {
    log.stats()
}

/// A trip left out of a log, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedTrip {
    pub trip_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Built<T> {
    pub log: T,
    pub dropped: Vec<DroppedTrip>,
}

/// Region-labeled events of one trip, or the reason it cannot be labeled.
pub fn trip_events(
    trip: &Trip,
    staypoints: &HashMap<&str, &Staypoint>,
    level: RegionLevel,
) -> std::result::Result<Vec<Event>, String> {
    let region = |id: &str| -> std::result::Result<String, String> {
        let sp = staypoints
            .get(id)
            .ok_or_else(|| format!("unknown staypoint {id}"))?;
        sp.region(level)
            .map(str::to_owned)
            .ok_or_else(|| format!("staypoint {id} has no {level} region"))
    };
    let (first, last) = match (trip.triplegs.first(), trip.triplegs.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err("trip has no triplegs".into()),
    };
    let mut events = vec![Event {
        activity: region(&first.origin_staypoint)?,
        timestamp: first.t_start,
    }];
    for leg in &trip.triplegs[..trip.triplegs.len() - 1] {
        let activity = region(&leg.dest_staypoint)?;
        if events.last().map(|e| &e.activity) != Some(&activity) {
            events.push(Event {
                activity,
                timestamp: leg.t_end,
            });
        }
    }
    events.push(Event {
        activity: region(&last.dest_staypoint)?,
        timestamp: last.t_end,
    });
    Ok(events)
}

fn sorted_trips(trips: &[Trip]) -> Vec<&Trip> {
    let mut sorted: Vec<&Trip> = trips.iter().collect();
    sorted.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));
    sorted
}

fn staypoint_map(staypoints: &[Staypoint]) -> HashMap<&str, &Staypoint> {
    staypoints
        .iter()
        .map(|s| (s.staypoint_id.as_str(), s))
        .collect()
}

/// One trace per trip, in trip-id order. Trips with an unresolved endpoint
/// are reported in `dropped`.
pub fn build_case_log(
    trips: &[Trip],
    staypoints: &[Staypoint],
    level: RegionLevel,
) -> Built<CaseLog> {
    let sps = staypoint_map(staypoints);
    let mut traces = Vec::with_capacity(trips.len());
    let mut dropped = Vec::new();
    for trip in sorted_trips(trips) {
        match trip_events(trip, &sps, level) {
            Ok(events) => traces.push(Trace {
                case_id: trip.trip_id.clone(),
                events,
            }),
            Err(reason) => dropped.push(DroppedTrip {
                trip_id: trip.trip_id.clone(),
                reason,
            }),
        }
    }
    for t in &traces {
        debug_assert!(t
            .events
            .windows(2)
            .all(|w| w[0].timestamp <= w[1].timestamp));
    }
    Built {
        log: CaseLog { traces },
        dropped,
    }
}

/// Object-centric log over the same events as [`build_case_log`]. Event ids
/// are `e<case_index>_<event_index>`.
pub fn build_ocel(
    trips: &[Trip],
    staypoints: &[Staypoint],
    level: RegionLevel,
) -> Result<Built<Ocel>> {
    let sps = staypoint_map(staypoints);
    let mut types = BTreeSet::new();
    let mut objects = Vec::new();
    let mut modes = BTreeSet::new();
    let mut events = Vec::new();
    let mut dropped = Vec::new();
    let mut case_index = 0usize;
    for trip in sorted_trips(trips) {
        let trip_events = match trip_events(trip, &sps, level) {
            Ok(e) => e,
            Err(reason) => {
                dropped.push(DroppedTrip {
                    trip_id: trip.trip_id.clone(),
                    reason,
                });
                continue;
            }
        };
        let mode = trip.primary_mode().object_type();
        types.insert(mode.to_owned());
        modes.insert(mode);
        objects.push(OcelObject {
            id: trip.trip_id.clone(),
            object_type: mode.to_owned(),
        });
        for (i, e) in trip_events.into_iter().enumerate() {
            events.push(OcelEvent {
                id: format!("e{case_index}_{i}"),
                activity: e.activity,
                timestamp: e.timestamp,
                relations: vec![
                    Relation {
                        object_id: trip.trip_id.clone(),
                        qualifier: "trip".into(),
                    },
                    Relation {
                        object_id: mode.to_owned(),
                        qualifier: "mode".into(),
                    },
                ],
            });
        }
        case_index += 1;
    }
    if !modes.is_empty() {
        types.insert(MODE_OBJECT_TYPE.to_owned());
    }
    for m in modes {
        objects.push(OcelObject {
            id: m.to_owned(),
            object_type: MODE_OBJECT_TYPE.to_owned(),
        });
    }
    let ocel = Ocel::new(types.into_iter().collect(), objects, events)?;
    Ok(Built { log: ocel, dropped })
}
