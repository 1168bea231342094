//! Staypoint extraction: temporal stop grouping per user, then spatial
//! clustering of stop medians into shared destinations.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{
    haversine_distance, GeoPoint, PositionedEvent, RegionIndex, RegionLevel, EARTH_RADIUS_M,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopParams {
    /// Max roaming radius around the stop median, meters.
    pub r1: f64,
    /// Max distance linking stop medians into one destination, meters.
    pub r2: f64,
    /// Minimum stop span, seconds.
    pub min_duration: i64,
    /// Max silence between consecutive events of one stop, seconds.
    pub max_gap: i64,
}

impl Default for StopParams {
    fn default() -> Self {
        StopParams {
            r1: 300.0,
            r2: 500.0,
            min_duration: 600,
            max_gap: 3_600,
        }
    }
}

impl StopParams {
    pub fn validate(&self) -> Result<()> {
        let positive = self.r1 > 0.0 && self.r2 > 0.0 && self.min_duration > 0 && self.max_gap > 0;
        if !positive || !self.r1.is_finite() || !self.r2.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "stop parameters must be strictly positive: {self:?}"
            )));
        }
        if self.r2 < self.r1 {
            warn!("r2 ({}) is smaller than r1 ({})", self.r2, self.r1);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub user_id: String,
    pub median: GeoPoint,
    pub t_start: i64,
    pub t_end: i64,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staypoint {
    pub staypoint_id: String,
    pub user_id: String,
    pub location_id: String,
    pub median: GeoPoint,
    pub t_start: i64,
    pub t_end: i64,
    pub region_parish: Option<String>,
    pub region_municipality: Option<String>,
}

impl Staypoint {
    pub fn region(&self, level: RegionLevel) -> Option<&str> {
        match level {
            RegionLevel::Parish => self.region_parish.as_deref(),
            RegionLevel::Municipality => self.region_municipality.as_deref(),
        }
    }
}

/// Component-wise median.
pub fn median_point(points: &[GeoPoint]) -> GeoPoint {
    let mut lats: Vec<f64> = points.iter().map(|p| p.lat).collect();
    let mut lons: Vec<f64> = points.iter().map(|p| p.lon).collect();
    GeoPoint {
        lat: median(&mut lats),
        lon: median(&mut lons),
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Greedy temporal stop detection over one user's time-ordered trace.
///
/// An event joins the open stop when it follows the previous event within
/// `max_gap`, lies within `r1` of the current median, and every member
/// (itself included) stays within `r1` of the updated median. Groups shorter
/// than `min_duration` are discarded; their events count as moving.
pub fn detect_stops(trace: &[PositionedEvent], params: &StopParams) -> Result<Vec<Stop>> {
    let Some(first) = trace.first() else {
        return Ok(Vec::new());
    };
    for (i, w) in trace.windows(2).enumerate() {
        if w[1].user_id != first.user_id {
            return Err(Error::InvalidInput(format!(
                "trace mixes users {} and {}",
                first.user_id, w[1].user_id
            )));
        }
        if w[1].timestamp < w[0].timestamp {
            return Err(Error::UnsortedInput {
                user_id: first.user_id.clone(),
                index: i + 1,
            });
        }
    }

    let mut stops = Vec::new();
    let mut members: Vec<GeoPoint> = vec![first.location];
    let mut start = 0usize;
    let mut current_median = first.location;

    let close = |start: usize, end: usize, median: GeoPoint, stops: &mut Vec<Stop>| {
        let (t0, t1) = (trace[start].timestamp, trace[end].timestamp);
        if t1 - t0 >= params.min_duration {
            stops.push(Stop {
                user_id: first.user_id.clone(),
                median,
                t_start: t0,
                t_end: t1,
                n_events: end - start + 1,
            });
        }
    };

    for j in 1..trace.len() {
        let e = &trace[j];
        let gap_ok = e.timestamp - trace[j - 1].timestamp <= params.max_gap;
        let mut accepted = false;
        if gap_ok && haversine_distance(current_median, e.location) <= params.r1 {
            members.push(e.location);
            let candidate = median_point(&members);
            if members
                .iter()
                .all(|p| haversine_distance(candidate, *p) <= params.r1)
            {
                current_median = candidate;
                accepted = true;
            } else {
                members.pop();
            }
        }
        if !accepted {
            close(start, j - 1, current_median, &mut stops);
            start = j;
            members.clear();
            members.push(e.location);
            current_median = e.location;
        }
    }
    close(start, trace.len() - 1, current_median, &mut stops);
    Ok(stops)
}

/// Assigns a destination label to each stop. Implementations must be
/// deterministic; the output is aligned with the input slice.
pub trait DestinationLabeler: Sync {
    fn label(&self, stops: &[Stop]) -> Vec<String>;
}

/// Connected components of the graph linking stop medians at most `r2` apart.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdComponents {
    pub r2: f64,
}

impl DestinationLabeler for ThresholdComponents {
    fn label(&self, stops: &[Stop]) -> Vec<String> {
        cluster_destinations(stops, self.r2)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Threshold-graph connected components over stop medians.
///
/// Labels are `L0`, `L1`, ... in order of each component's earliest `t_start`
/// (ties broken by input position).
pub fn cluster_destinations(stops: &[Stop], r2: f64) -> Vec<String> {
    let n = stops.len();
    let mut dsu = DisjointSet::new(n);

    // Grid buckets sized so that any pair within r2 sits in adjacent cells.
    // hav(d) >= cos(phi1) cos(phi2) hav(dlambda) bounds the longitude span.
    let min_cos = stops
        .iter()
        .map(|s| s.median.lat.to_radians().cos())
        .fold(1.0f64, f64::min);
    let dlat = (r2 / EARTH_RADIUS_M).to_degrees();
    let hav = (r2 / EARTH_RADIUS_M / 2.0).sin();
    let ratio = if min_cos > 0.0 {
        hav / min_cos
    } else {
        f64::INFINITY
    };

    if ratio < 1.0 && dlat > 0.0 {
        let dlon = (2.0 * ratio.asin()).to_degrees();
        let key = |p: GeoPoint| ((p.lat / dlat).floor() as i64, (p.lon / dlon).floor() as i64);
        let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, s) in stops.iter().enumerate() {
            grid.entry(key(s.median)).or_default().push(i);
        }
        for (i, s) in stops.iter().enumerate() {
            let (ky, kx) = key(s.median);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(cell) = grid.get(&(ky + dy, kx + dx)) else {
                        continue;
                    };
                    for &j in cell {
                        if j > i && haversine_distance(s.median, stops[j].median) <= r2 {
                            dsu.union(i, j);
                        }
                    }
                }
            }
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                if haversine_distance(stops[i].median, stops[j].median) <= r2 {
                    dsu.union(i, j);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (stops[i].t_start, i));
    let mut label_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in &order {
        let root = dsu.find(i);
        let next = label_of_root.len();
        label_of_root.entry(root).or_insert(next);
    }
    (0..n)
        .map(|i| format!("L{}", label_of_root[&dsu.find(i)]))
        .collect()
}

/// Splits a mixed event stream into per-user traces, keeping input order.
pub fn group_by_user(events: &[PositionedEvent]) -> BTreeMap<&str, Vec<PositionedEvent>> {
    let mut users: BTreeMap<&str, Vec<PositionedEvent>> = BTreeMap::new();
    for e in events {
        users.entry(e.user_id.as_str()).or_default().push(e.clone());
    }
    users
}

/// Full staypoint stage: per-user stops, global destination labels, region
/// lookup at both levels. Output sorted by `(user_id, t_start)` with ids
/// `sp_000000`, `sp_000001`, ...
pub fn build_staypoints(
    events: &[PositionedEvent],
    params: &StopParams,
    regions: &RegionIndex,
) -> Result<Vec<Staypoint>> {
    build_staypoints_with(
        events,
        params,
        regions,
        &ThresholdComponents { r2: params.r2 },
    )
}

pub fn build_staypoints_with(
    events: &[PositionedEvent],
    params: &StopParams,
    regions: &RegionIndex,
    labeler: &dyn DestinationLabeler,
) -> Result<Vec<Staypoint>> {
    params.validate()?;
    let users = group_by_user(events);
    let per_user = users
        .par_iter()
        .map(|(_, trace)| detect_stops(trace, params))
        .collect::<Result<Vec<_>>>()?;
    let stops: Vec<Stop> = per_user.into_iter().flatten().collect();
    let labels = labeler.label(&stops);

    let mut staypoints: Vec<Staypoint> = stops
        .into_par_iter()
        .zip(labels)
        .map(|(s, location_id)| Staypoint {
            staypoint_id: String::new(),
            region_parish: regions
                .assign(s.median, RegionLevel::Parish)
                .map(str::to_owned),
            region_municipality: regions
                .assign(s.median, RegionLevel::Municipality)
                .map(str::to_owned),
            user_id: s.user_id,
            location_id,
            median: s.median,
            t_start: s.t_start,
            t_end: s.t_end,
        })
        .collect();
    staypoints.sort_by(|a, b| (&a.user_id, a.t_start).cmp(&(&b.user_id, b.t_start)));
    for (i, sp) in staypoints.iter_mut().enumerate() {
        sp.staypoint_id = format!("sp_{i:06}");
    }
    Ok(staypoints)
}
