//! Triplegs between consecutive staypoints, trips as chains of triplegs,
//! and kinematic transport-mode labels.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_distance, GeoPoint, PositionedEvent};
use crate::stay::{group_by_user, Staypoint};

/// Default idle time allowed between two legs of one trip, seconds.
pub const DEFAULT_GAP_THRESHOLD: i64 = 25 * 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Walk,
    Bicycle,
    Bus,
    Car,
    Train,
    Unknown,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Walk,
        Mode::Bicycle,
        Mode::Bus,
        Mode::Car,
        Mode::Train,
        Mode::Unknown,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Walk => "walk",
            Mode::Bicycle => "bicycle",
            Mode::Bus => "bus",
            Mode::Car => "car",
            Mode::Train => "train",
            Mode::Unknown => "unknown",
        }
    }

    /// Capitalized name used as an object type in object-centric logs.
    pub fn object_type(&self) -> &'static str {
        match self {
            Mode::Walk => "Walk",
            Mode::Bicycle => "Bicycle",
            Mode::Bus => "Bus",
            Mode::Car => "Car",
            Mode::Train => "Train",
            Mode::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown mode `{s}`")))
    }
}

/// Speed/length decision table. Speeds in km/h, lengths in meters.
///
/// ```text
/// duration < min_leg_duration_s                      unknown
/// speed < walk_below                                 walk
/// speed < bicycle_below                              bicycle
/// speed < bus_below                                  bus
/// speed < short_bus_below and length < short_bus_max_length_m   bus
/// speed >= train_from                                train
/// speed >= long_train_from and length >= long_train_min_length_m  train
/// otherwise                                          car
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeThresholds {
    pub walk_below: f64,
    pub bicycle_below: f64,
    pub bus_below: f64,
    pub short_bus_below: f64,
    pub short_bus_max_length_m: f64,
    pub long_train_from: f64,
    pub long_train_min_length_m: f64,
    pub train_from: f64,
    pub min_leg_duration_s: i64,
}

impl Default for ModeThresholds {
    fn default() -> Self {
        ModeThresholds {
            walk_below: 7.0,
            bicycle_below: 15.0,
            bus_below: 27.0,
            short_bus_below: 45.0,
            short_bus_max_length_m: 3_000.0,
            long_train_from: 45.0,
            long_train_min_length_m: 8_000.0,
            train_from: 60.0,
            min_leg_duration_s: 60,
        }
    }
}

impl ModeThresholds {
    pub fn validate(&self) -> Result<()> {
        let ordered = 0.0 < self.walk_below
            && self.walk_below < self.bicycle_below
            && self.bicycle_below < self.bus_below
            && self.bus_below <= self.short_bus_below
            && self.short_bus_below <= self.train_from
            && self.bus_below <= self.long_train_from
            && self.long_train_from <= self.train_from;
        if !ordered || self.short_bus_max_length_m < 0.0 || self.long_train_min_length_m < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mode thresholds are not ordered: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn classify(&self, speed_kmh: f64, length_m: f64, duration_s: i64) -> Mode {
        if duration_s < self.min_leg_duration_s || !speed_kmh.is_finite() {
            return Mode::Unknown;
        }
        if speed_kmh < self.walk_below {
            Mode::Walk
        } else if speed_kmh < self.bicycle_below {
            Mode::Bicycle
        } else if speed_kmh < self.bus_below
            || (speed_kmh < self.short_bus_below && length_m < self.short_bus_max_length_m)
        {
            Mode::Bus
        } else if speed_kmh >= self.train_from
            || (speed_kmh >= self.long_train_from && length_m >= self.long_train_min_length_m)
        {
            Mode::Train
        } else {
            Mode::Car
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tripleg {
    pub tripleg_id: String,
    pub user_id: String,
    pub origin_staypoint: String,
    pub dest_staypoint: String,
    pub t_start: i64,
    pub t_end: i64,
    pub path_length: f64,
    /// km/h over `path_length`.
    pub avg_speed: f64,
    pub mode: Mode,
}

impl Tripleg {
    pub fn duration(&self) -> i64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub trip_id: String,
    pub user_id: String,
    pub triplegs: Vec<Tripleg>,
    pub origin: String,
    pub destination: String,
    pub t_start: i64,
    pub t_end: i64,
}

impl Trip {
    /// Mode of the longest leg (earliest leg on ties).
    pub fn primary_mode(&self) -> Mode {
        let mut best: Option<&Tripleg> = None;
        for leg in &self.triplegs {
            if best.is_none_or(|b| leg.path_length > b.path_length) {
                best = Some(leg);
            }
        }
        best.map_or(Mode::Unknown, |l| l.mode)
    }

    /// Staypoint chain visited by the trip, origin first.
    pub fn staypoint_chain(&self) -> Vec<&str> {
        let mut chain = vec![self.origin.as_str()];
        chain.extend(self.triplegs.iter().map(|l| l.dest_staypoint.as_str()));
        chain
    }
}

fn path_length(points: &[GeoPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| haversine_distance(w[0], w[1]))
        .sum()
}

/// One tripleg per consecutive staypoint pair that changes location or has
/// movement in between. `moving_events` may contain all of the user's events;
/// only those strictly inside a gap are used. Legs start with
/// [`Mode::Unknown`]; see [`label_mode`].
pub fn derive_triplegs(
    staypoints: &[Staypoint],
    moving_events: &[PositionedEvent],
) -> Vec<Tripleg> {
    let mut legs = Vec::new();
    let mut cursor = 0usize;
    for (k, pair) in staypoints.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        while cursor < moving_events.len() && moving_events[cursor].timestamp <= a.t_end {
            cursor += 1;
        }
        let mut chain = vec![a.median];
        let mut j = cursor;
        while j < moving_events.len() && moving_events[j].timestamp < b.t_start {
            chain.push(moving_events[j].location);
            j += 1;
        }
        chain.push(b.median);
        let has_movement = chain.len() > 2;
        if a.location_id == b.location_id && !has_movement {
            continue;
        }
        let length = path_length(&chain);
        let duration = b.t_start - a.t_end;
        let avg_speed = if duration > 0 {
            length / duration as f64 * 3.6
        } else {
            0.0
        };
        legs.push(Tripleg {
            tripleg_id: format!("tl_{}_{:04}", a.user_id, k),
            user_id: a.user_id.clone(),
            origin_staypoint: a.staypoint_id.clone(),
            dest_staypoint: b.staypoint_id.clone(),
            t_start: a.t_end,
            t_end: b.t_start,
            path_length: length,
            avg_speed,
            mode: Mode::Unknown,
        });
    }
    legs
}

/// Heuristic label from the decision table. Always indicative only.
pub fn label_mode(leg: &Tripleg, thresholds: &ModeThresholds) -> Mode {
    thresholds.classify(leg.avg_speed, leg.path_length, leg.duration())
}

/// Merges chained legs whose idle gap is at most `gap_threshold` seconds.
pub fn assemble_trips(triplegs: &[Tripleg], gap_threshold: i64) -> Vec<Trip> {
    let mut groups: Vec<Vec<Tripleg>> = Vec::new();
    for leg in triplegs {
        match groups.last_mut() {
            Some(group)
                if {
                    let prev = group.last().unwrap();
                    prev.user_id == leg.user_id
                        && prev.dest_staypoint == leg.origin_staypoint
                        && leg.t_start - prev.t_end <= gap_threshold
                } =>
            {
                group.push(leg.clone())
            }
            _ => groups.push(vec![leg.clone()]),
        }
    }
    let mut counters: std::collections::HashMap<String, usize> = Default::default();
    groups
        .into_iter()
        .map(|legs| {
            let first = &legs[0];
            let last = legs.last().unwrap();
            let n = counters.entry(first.user_id.clone()).or_insert(0);
            let trip_id = format!("trip_{}_{:04}", first.user_id, n);
            *n += 1;
            Trip {
                trip_id,
                user_id: first.user_id.clone(),
                origin: first.origin_staypoint.clone(),
                destination: last.dest_staypoint.clone(),
                t_start: first.t_start,
                t_end: last.t_end,
                triplegs: legs,
            }
        })
        .collect()
}

/// Triplegs and trips for every user, mode-labeled, ordered by
/// `(user_id, t_start)`.
pub fn build_trips(
    staypoints: &[Staypoint],
    events: &[PositionedEvent],
    thresholds: &ModeThresholds,
    gap_threshold: i64,
) -> Result<(Vec<Tripleg>, Vec<Trip>)> {
    thresholds.validate()?;
    if gap_threshold < 0 {
        return Err(Error::InvalidConfig("gap_threshold must be >= 0".into()));
    }
    let events_by_user = group_by_user(events);
    let mut sp_by_user: std::collections::BTreeMap<&str, Vec<Staypoint>> = Default::default();
    for sp in staypoints {
        sp_by_user
            .entry(sp.user_id.as_str())
            .or_default()
            .push(sp.clone());
    }
    let per_user: Vec<(Vec<Tripleg>, Vec<Trip>)> = sp_by_user
        .into_par_iter()
        .map(|(user, mut sps)| {
            sps.sort_by_key(|s| s.t_start);
            let empty = Vec::new();
            let moving = events_by_user.get(user).unwrap_or(&empty);
            let mut legs = derive_triplegs(&sps, moving);
            for leg in &mut legs {
                leg.mode = label_mode(leg, thresholds);
            }
            let trips = assemble_trips(&legs, gap_threshold);
            (legs, trips)
        })
        .collect();
    let mut legs = Vec::new();
    let mut trips = Vec::new();
    for (l, t) in per_user {
        legs.extend(l);
        trips.extend(t);
    }
    Ok((legs, trips))
}
