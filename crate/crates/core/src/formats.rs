//! File formats: CSV tables, regions GeoJSON and the JSON artifacts.
//!
//! Timestamps are written as ISO-8601 UTC (`2024-02-01T08:00:00Z`). Floats use
//! the shortest representation that parses back to the same value.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::conformance::{FitnessReport, Node, PetriNet};
use crate::discovery::{ArcStats, Dfg, OcDfg, Variant};
use crate::error::{Error, Result};
use crate::eventlog::{
    CaseLog, DroppedTrip, Event, LogStats, Ocel, OcelEvent, OcelObject, Relation, Trace,
};
use crate::geo::{CdrEvent, GeoPoint, PositionedEvent, Region, RegionLevel, TowerSector};
use crate::stay::Staypoint;
use crate::trips::{Mode, Trip, Tripleg};
use crate::validation::OdMatrix;

pub fn format_timestamp(ts: i64) -> String {
    match DateTime::<Utc>::from_timestamp(ts, 0) {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Secs, true),
        None => ts.to_string(),
    }
}

/// Accepts RFC 3339 timestamps (any offset) or integer epoch seconds.
pub fn parse_timestamp(s: &str) -> std::result::Result<i64, String> {
    let s = s.trim();
    if let Ok(n) = s.parse::<i64>() {
        return Ok(n);
    }
    DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.timestamp())
        .map_err(|e| format!("bad timestamp {s:?}: {e}"))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

// Reads every record as a header -> value map, checking required columns.
fn read_table(path: &Path, required: &[&str]) -> Result<Vec<HashMap<String, String>>> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    for col in required {
        if !headers.iter().any(|h| h == *col) {
            return Err(Error::parse(path, format!("missing column {col}")));
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        rows.push(
            headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_owned(), v.to_owned()))
                .collect(),
        );
    }
    Ok(rows)
}

struct Row<'a> {
    path: &'a Path,
    line: usize,
    map: &'a HashMap<String, String>,
}

impl Row<'_> {
    fn str(&self, col: &str) -> Result<String> {
        self.map
            .get(col)
            .cloned()
            .ok_or_else(|| Error::parse(self.path, format!("row {}: missing {col}", self.line)))
    }

    fn opt(&self, col: &str) -> Option<String> {
        self.map.get(col).filter(|v| !v.is_empty()).cloned()
    }

    fn num<T: std::str::FromStr>(&self, col: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.str(col)?;
        v.parse()
            .map_err(|e| Error::parse(self.path, format!("row {}: {col}={v:?}: {e}", self.line)))
    }

    fn ts(&self, col: &str) -> Result<i64> {
        parse_timestamp(&self.str(col)?)
            .map_err(|e| Error::parse(self.path, format!("row {}: {col}: {e}", self.line)))
    }
}

fn rows<'a>(path: &'a Path, table: &'a [HashMap<String, String>]) -> impl Iterator<Item = Row<'a>> {
    table.iter().enumerate().map(move |(i, map)| Row {
        path,
        line: i + 2,
        map,
    })
}

fn write_csv(
    path: &Path,
    header: &[&str],
    records: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record(&r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e.to_string()))
}

fn opt_str(v: &Option<String>) -> String {
    v.clone().unwrap_or_default()
}

// ---- CDR, towers, positioned events ----

pub fn read_cdr(path: &Path) -> Result<Vec<CdrEvent>> {
    let table = read_table(path, &["user_id", "timestamp", "cell_id"])?;
    rows(path, &table)
        .map(|r| {
            Ok(CdrEvent {
                user_id: r.str("user_id")?,
                timestamp: r.ts("timestamp")?,
                cell_id: r.str("cell_id")?,
            })
        })
        .collect()
}

pub fn write_cdr(path: &Path, events: &[CdrEvent]) -> Result<()> {
    write_csv(
        path,
        &["user_id", "timestamp", "cell_id"],
        events.iter().map(|e| {
            vec![
                e.user_id.clone(),
                format_timestamp(e.timestamp),
                e.cell_id.clone(),
            ]
        }),
    )
}

pub fn read_towers(path: &Path) -> Result<Vec<TowerSector>> {
    let cols = [
        "cell_id",
        "lat",
        "lon",
        "azimuth_deg",
        "beamwidth_deg",
        "radius_m",
    ];
    let table = read_table(path, &cols)?;
    rows(path, &table)
        .map(|r| {
            TowerSector::new(
                r.str("cell_id")?,
                GeoPoint::new(r.num("lat")?, r.num("lon")?)?,
                r.num("azimuth_deg")?,
                r.num("beamwidth_deg")?,
                r.num("radius_m")?,
            )
            .map_err(|e| Error::parse(path, format!("row {}: {e}", r.line)))
        })
        .collect()
}

pub fn write_towers(path: &Path, towers: &[TowerSector]) -> Result<()> {
    write_csv(
        path,
        &[
            "cell_id",
            "lat",
            "lon",
            "azimuth_deg",
            "beamwidth_deg",
            "radius_m",
        ],
        towers.iter().map(|t| {
            vec![
                t.cell_id.clone(),
                t.center.lat.to_string(),
                t.center.lon.to_string(),
                t.azimuth.to_string(),
                t.beamwidth.to_string(),
                t.radius.to_string(),
            ]
        }),
    )
}

pub fn read_positioned(path: &Path) -> Result<Vec<PositionedEvent>> {
    let table = read_table(path, &["user_id", "timestamp", "cell_id", "lat", "lon"])?;
    rows(path, &table)
        .map(|r| {
            Ok(PositionedEvent {
                user_id: r.str("user_id")?,
                timestamp: r.ts("timestamp")?,
                cell_id: r.str("cell_id")?,
                location: GeoPoint::new(r.num("lat")?, r.num("lon")?)?,
            })
        })
        .collect()
}

pub fn write_positioned(path: &Path, events: &[PositionedEvent]) -> Result<()> {
    write_csv(
        path,
        &["user_id", "timestamp", "cell_id", "lat", "lon"],
        events.iter().map(|e| {
            vec![
                e.user_id.clone(),
                format_timestamp(e.timestamp),
                e.cell_id.clone(),
                e.location.lat.to_string(),
                e.location.lon.to_string(),
            ]
        }),
    )
}

// ---- regions ----

fn ring_to_json(ring: &[GeoPoint]) -> Value {
    Value::Array(ring.iter().map(|p| json!([p.lon, p.lat])).collect())
}

fn ring_from_json(v: &Value) -> std::result::Result<Vec<GeoPoint>, String> {
    let arr = v.as_array().ok_or("ring is not an array")?;
    arr.iter()
        .map(|c| {
            let c = c.as_array().ok_or("position is not an array")?;
            match (
                c.first().and_then(Value::as_f64),
                c.get(1).and_then(Value::as_f64),
            ) {
                (Some(lon), Some(lat)) => Ok(GeoPoint { lat, lon }),
                _ => Err("position needs [lon, lat]".to_owned()),
            }
        })
        .collect()
}

fn region_from_feature(f: &Value) -> std::result::Result<Region, String> {
    let props = f.get("properties").ok_or("feature without properties")?;
    let field = |k: &str| props.get(k).and_then(Value::as_str).map(str::to_owned);
    let region_id = field("region_id").ok_or("missing region_id")?;
    let level: RegionLevel = field("level")
        .ok_or("missing level")?
        .parse()
        .map_err(|e: Error| e.to_string())?;
    let geom = f.get("geometry").ok_or("feature without geometry")?;
    let coords = geom
        .get("coordinates")
        .ok_or("geometry without coordinates")?;
    let polygons: Vec<&Value> = match geom.get("type").and_then(Value::as_str) {
        Some("Polygon") => vec![coords],
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or("bad MultiPolygon")?
            .iter()
            .collect(),
        other => return Err(format!("unsupported geometry {other:?}")),
    };
    let mut boundary = Vec::new();
    for poly in polygons {
        for ring in poly.as_array().ok_or("polygon is not an array")? {
            boundary.push(ring_from_json(ring)?);
        }
    }
    Ok(Region {
        name: field("name").unwrap_or_else(|| region_id.clone()),
        region_id,
        level,
        parent_id: field("parent_id"),
        boundary,
    })
}

/// Regions from a GeoJSON FeatureCollection. Multi-polygon parts are
/// flattened into one ring list, evaluated with the even-odd rule.
pub fn read_regions(path: &Path) -> Result<Vec<Region>> {
    let doc: Value =
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e.to_string()))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(path, "not a FeatureCollection"))?;
    features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            region_from_feature(f).map_err(|e| Error::parse(path, format!("feature {i}: {e}")))
        })
        .collect()
}

pub fn write_regions(path: &Path, regions: &[Region]) -> Result<()> {
    let features: Vec<Value> = regions
        .iter()
        .map(|r| {
            json!({
                "type": "Feature",
                "properties": {
                    "region_id": r.region_id,
                    "name": r.name,
                    "level": r.level.to_string(),
                    "parent_id": r.parent_id,
                },
                "geometry": {
                    "type": "Polygon",
                    "coordinates": r.boundary.iter().map(|ring| ring_to_json(ring)).collect::<Vec<_>>(),
                },
            })
        })
        .collect();
    write_json(
        path,
        &json!({"type": "FeatureCollection", "features": features}),
    )
}

// ---- staypoints, triplegs, trips ----

const STAYPOINT_COLS: [&str; 9] = [
    "staypoint_id",
    "user_id",
    "location_id",
    "lat",
    "lon",
    "t_start",
    "t_end",
    "parish",
    "municipality",
];

pub fn write_staypoints(path: &Path, staypoints: &[Staypoint]) -> Result<()> {
    write_csv(
        path,
        &STAYPOINT_COLS,
        staypoints.iter().map(|s| {
            vec![
                s.staypoint_id.clone(),
                s.user_id.clone(),
                s.location_id.clone(),
                s.median.lat.to_string(),
                s.median.lon.to_string(),
                format_timestamp(s.t_start),
                format_timestamp(s.t_end),
                opt_str(&s.region_parish),
                opt_str(&s.region_municipality),
            ]
        }),
    )
}

pub fn read_staypoints(path: &Path) -> Result<Vec<Staypoint>> {
    let table = read_table(path, &STAYPOINT_COLS)?;
    rows(path, &table)
        .map(|r| {
            Ok(Staypoint {
                staypoint_id: r.str("staypoint_id")?,
                user_id: r.str("user_id")?,
                location_id: r.str("location_id")?,
                median: GeoPoint::new(r.num("lat")?, r.num("lon")?)?,
                t_start: r.ts("t_start")?,
                t_end: r.ts("t_end")?,
                region_parish: r.opt("parish"),
                region_municipality: r.opt("municipality"),
            })
        })
        .collect()
}

const TRIPLEG_COLS: [&str; 11] = [
    "tripleg_id",
    "trip_id",
    "user_id",
    "origin_sp",
    "dest_sp",
    "t_start",
    "t_end",
    "path_length_m",
    "avg_speed_kmh",
    "mode",
    "heuristic",
];

const TRIP_COLS: [&str; 9] = [
    "trip_id",
    "user_id",
    "origin_sp",
    "dest_sp",
    "t_start",
    "t_end",
    "n_legs",
    "primary_mode",
    "heuristic",
];

/// Writes `triplegs.csv`-style rows for every leg of every trip.
pub fn write_triplegs(path: &Path, trips: &[Trip]) -> Result<()> {
    write_csv(
        path,
        &TRIPLEG_COLS,
        trips.iter().flat_map(|t| {
            t.triplegs.iter().map(move |l| {
                vec![
                    l.tripleg_id.clone(),
                    t.trip_id.clone(),
                    l.user_id.clone(),
                    l.origin_staypoint.clone(),
                    l.dest_staypoint.clone(),
                    format_timestamp(l.t_start),
                    format_timestamp(l.t_end),
                    l.path_length.to_string(),
                    l.avg_speed.to_string(),
                    l.mode.to_string(),
                    "true".into(),
                ]
            })
        }),
    )
}

pub fn write_trips(path: &Path, trips: &[Trip]) -> Result<()> {
    write_csv(
        path,
        &TRIP_COLS,
        trips.iter().map(|t| {
            vec![
                t.trip_id.clone(),
                t.user_id.clone(),
                t.origin.clone(),
                t.destination.clone(),
                format_timestamp(t.t_start),
                format_timestamp(t.t_end),
                t.triplegs.len().to_string(),
                t.primary_mode().to_string(),
                "true".into(),
            ]
        }),
    )
}

/// Rebuilds trips from the two trip tables; legs are attached via `trip_id`.
pub fn read_trips(triplegs_path: &Path, trips_path: &Path) -> Result<Vec<Trip>> {
    let leg_table = read_table(triplegs_path, &TRIPLEG_COLS)?;
    let mut legs: HashMap<String, Vec<Tripleg>> = HashMap::new();
    for r in rows(triplegs_path, &leg_table) {
        let mode: Mode = r
            .str("mode")?
            .parse()
            .map_err(|e: Error| Error::parse(triplegs_path, format!("row {}: {e}", r.line)))?;
        legs.entry(r.str("trip_id")?).or_default().push(Tripleg {
            tripleg_id: r.str("tripleg_id")?,
            user_id: r.str("user_id")?,
            origin_staypoint: r.str("origin_sp")?,
            dest_staypoint: r.str("dest_sp")?,
            t_start: r.ts("t_start")?,
            t_end: r.ts("t_end")?,
            path_length: r.num("path_length_m")?,
            avg_speed: r.num("avg_speed_kmh")?,
            mode,
        });
    }
    let trip_table = read_table(trips_path, &TRIP_COLS)?;
    let mut trips = Vec::with_capacity(trip_table.len());
    for r in rows(trips_path, &trip_table) {
        let trip_id = r.str("trip_id")?;
        let mut triplegs = legs.remove(&trip_id).unwrap_or_default();
        triplegs.sort_by_key(|l| l.t_start);
        let n_legs: usize = r.num("n_legs")?;
        if triplegs.len() != n_legs {
            return Err(Error::parse(
                trips_path,
                format!(
                    "trip {trip_id}: n_legs={n_legs} but {} legs found",
                    triplegs.len()
                ),
            ));
        }
        trips.push(Trip {
            trip_id,
            user_id: r.str("user_id")?,
            origin: r.str("origin_sp")?,
            destination: r.str("dest_sp")?,
            t_start: r.ts("t_start")?,
            t_end: r.ts("t_end")?,
            triplegs,
        });
    }
    if let Some(orphan) = legs.keys().min() {
        return Err(Error::parse(
            triplegs_path,
            format!("legs reference unknown trip {orphan}"),
        ));
    }
    Ok(trips)
}

// ---- event logs ----

/// Rows sorted by (case_id, timestamp); events keep their in-trace order.
pub fn write_case_log(path: &Path, log: &CaseLog) -> Result<()> {
    let mut traces: Vec<&Trace> = log.traces.iter().collect();
    traces.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    write_csv(
        path,
        &["case_id", "activity", "timestamp"],
        traces.into_iter().flat_map(|t| {
            t.events.iter().map(move |e| {
                vec![
                    t.case_id.clone(),
                    e.activity.clone(),
                    format_timestamp(e.timestamp),
                ]
            })
        }),
    )
}

/// Groups rows by case in order of first appearance.
pub fn read_case_log(path: &Path) -> Result<CaseLog> {
    let table = read_table(path, &["case_id", "activity", "timestamp"])?;
    let mut order: Vec<String> = Vec::new();
    let mut by_case: HashMap<String, Vec<Event>> = HashMap::new();
    for r in rows(path, &table) {
        let case_id = r.str("case_id")?;
        let events = by_case.entry(case_id.clone()).or_insert_with(|| {
            order.push(case_id.clone());
            Vec::new()
        });
        events.push(Event {
            activity: r.str("activity")?,
            timestamp: r.ts("timestamp")?,
        });
    }
    let traces = order
        .into_iter()
        .map(|case_id| Trace {
            events: by_case.remove(&case_id).unwrap_or_default(),
            case_id,
        })
        .collect();
    CaseLog::new(traces).map_err(|e| Error::parse(path, e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct ObjectTypeJson {
    name: String,
}

#[derive(Serialize, Deserialize)]
struct OcelEventJson {
    id: String,
    activity: String,
    timestamp: String,
    relations: Vec<Relation>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct OcelJson {
    object_types: Vec<ObjectTypeJson>,
    objects: Vec<OcelObject>,
    events: Vec<OcelEventJson>,
}

pub fn ocel_to_json(ocel: &Ocel) -> String {
    let doc = OcelJson {
        object_types: ocel
            .object_types
            .iter()
            .map(|name| ObjectTypeJson { name: name.clone() })
            .collect(),
        objects: ocel.objects.clone(),
        events: ocel
            .events
            .iter()
            .map(|e| OcelEventJson {
                id: e.id.clone(),
                activity: e.activity.clone(),
                timestamp: format_timestamp(e.timestamp),
                relations: e.relations.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("OCEL serializes");
    s.push('\n');
    s
}

pub fn ocel_from_json(text: &str) -> std::result::Result<Ocel, String> {
    let doc: OcelJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let events = doc
        .events
        .into_iter()
        .map(|e| {
            Ok(OcelEvent {
                timestamp: parse_timestamp(&e.timestamp)?,
                id: e.id,
                activity: e.activity,
                relations: e.relations,
            })
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    Ocel::new(
        doc.object_types.into_iter().map(|t| t.name).collect(),
        doc.objects,
        events,
    )
    .map_err(|e| e.to_string())
}

pub fn write_ocel(path: &Path, ocel: &Ocel) -> Result<()> {
    write_text(path, &ocel_to_json(ocel))
}

pub fn read_ocel(path: &Path) -> Result<Ocel> {
    ocel_from_json(&read_text(path)?).map_err(|e| Error::parse(path, e))
}

pub fn write_log_stats(path: &Path, case: &LogStats, ocel: Option<&LogStats>) -> Result<()> {
    write_json(path, &json!({"case_log": case, "ocel": ocel}))
}

pub fn write_dropped(path: &Path, dropped: &[DroppedTrip]) -> Result<()> {
    write_csv(
        path,
        &["trip_id", "reason"],
        dropped
            .iter()
            .map(|d| vec![d.trip_id.clone(), d.reason.clone()]),
    )
}

// ---- models ----

#[derive(Serialize, Deserialize)]
struct CountJson {
    id: String,
    freq: u64,
    #[serde(
        rename = "objectType",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    object_type: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ArcJson {
    src: String,
    dst: String,
    freq: u64,
    mean_s: Option<f64>,
    median_s: Option<f64>,
    #[serde(
        rename = "objectType",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    object_type: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct DfgJson {
    nodes: Vec<CountJson>,
    arcs: Vec<ArcJson>,
    starts: Vec<CountJson>,
    ends: Vec<CountJson>,
}

fn counts<'a>(
    map: &'a BTreeMap<String, u64>,
    ty: Option<&str>,
) -> impl Iterator<Item = CountJson> + 'a {
    let ty = ty.map(str::to_owned);
    map.iter().map(move |(id, &freq)| CountJson {
        id: id.clone(),
        freq,
        object_type: ty.clone(),
    })
}

fn arcs<'a>(dfg: &'a Dfg, ty: Option<&str>) -> impl Iterator<Item = ArcJson> + 'a {
    let ty = ty.map(str::to_owned);
    dfg.arcs.iter().map(move |((src, dst), s)| ArcJson {
        src: src.clone(),
        dst: dst.clone(),
        freq: s.frequency,
        mean_s: s.mean_s,
        median_s: s.median_s,
        object_type: ty.clone(),
    })
}

pub fn dfg_to_json(dfg: &Dfg) -> String {
    let doc = DfgJson {
        nodes: counts(&dfg.nodes, None).collect(),
        arcs: arcs(dfg, None).collect(),
        starts: counts(&dfg.start_counts, None).collect(),
        ends: counts(&dfg.end_counts, None).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("DFG serializes");
    s.push('\n');
    s
}

pub fn dfg_from_json(text: &str) -> std::result::Result<Dfg, String> {
    let doc: DfgJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let collect = |v: Vec<CountJson>| v.into_iter().map(|c| (c.id, c.freq)).collect();
    let mut dfg = Dfg {
        nodes: collect(doc.nodes),
        start_counts: collect(doc.starts),
        end_counts: collect(doc.ends),
        arcs: BTreeMap::new(),
    };
    for a in doc.arcs {
        if !dfg.nodes.contains_key(&a.src) || !dfg.nodes.contains_key(&a.dst) {
            return Err(format!(
                "arc {} -> {} references an unknown node",
                a.src, a.dst
            ));
        }
        let n_samples = if a.mean_s.is_some() { a.freq } else { 0 };
        dfg.arcs.insert(
            (a.src, a.dst),
            ArcStats {
                frequency: a.freq,
                mean_s: a.mean_s,
                median_s: a.median_s,
                n_samples,
            },
        );
    }
    Ok(dfg)
}

pub fn write_dfg(path: &Path, dfg: &Dfg) -> Result<()> {
    write_text(path, &dfg_to_json(dfg))
}

pub fn read_dfg(path: &Path) -> Result<Dfg> {
    dfg_from_json(&read_text(path)?).map_err(|e| Error::parse(path, e))
}

/// Same layout as the DFG dump with every entry tagged by `objectType`.
pub fn write_ocdfg(path: &Path, oc: &OcDfg) -> Result<()> {
    let mut doc = DfgJson {
        nodes: Vec::new(),
        arcs: Vec::new(),
        starts: Vec::new(),
        ends: Vec::new(),
    };
    for (ty, dfg) in &oc.per_type {
        doc.nodes.extend(counts(&dfg.nodes, Some(ty)));
        doc.arcs.extend(arcs(dfg, Some(ty)));
        doc.starts.extend(counts(&dfg.start_counts, Some(ty)));
        doc.ends.extend(counts(&dfg.end_counts, Some(ty)));
    }
    write_json(path, &doc)
}

pub fn write_variants(path: &Path, variants: &[Variant]) -> Result<()> {
    write_csv(
        path,
        &["rank", "count", "mean_duration_s", "variant"],
        variants.iter().enumerate().map(|(i, v)| {
            vec![
                (i + 1).to_string(),
                v.count.to_string(),
                v.mean_duration_s.to_string(),
                v.activities.join(" > "),
            ]
        }),
    )
}

pub fn write_text_file(path: &Path, text: &str) -> Result<()> {
    write_text(path, text)
}

pub fn write_petri_net(path: &Path, net: &PetriNet) -> Result<()> {
    let arcs: Vec<Value> = net
        .arcs()
        .iter()
        .map(|&(a, b)| json!({"src": net.node_name(a), "dst": net.node_name(b)}))
        .collect();
    let doc = json!({
        "places": net.places().iter().map(|p| &p.id).collect::<Vec<_>>(),
        "transitions": net
            .transitions()
            .iter()
            .map(|t| json!({"id": t.id, "label": t.label}))
            .collect::<Vec<_>>(),
        "arcs": arcs,
        "source": net.node_name(Node::Place(net.source())),
        "sink": net.node_name(Node::Place(net.sink())),
    });
    write_json(path, &doc)
}

pub fn write_fitness(report_path: &Path, traces_path: &Path, report: &FitnessReport) -> Result<()> {
    write_json(
        report_path,
        &json!({
            "fitness": report.fitness,
            "produced": report.produced,
            "consumed": report.consumed,
            "missing": report.missing,
            "remaining": report.remaining,
            "n_traces": report.n_traces,
            "vacuous": report.vacuous,
        }),
    )?;
    write_csv(
        traces_path,
        &[
            "case_id",
            "produced",
            "consumed",
            "missing",
            "remaining",
            "fitness",
        ],
        report.traces.iter().map(|t| {
            vec![
                t.case_id.clone(),
                t.produced.to_string(),
                t.consumed.to_string(),
                t.missing.to_string(),
                t.remaining.to_string(),
                t.fitness.to_string(),
            ]
        }),
    )
}

pub fn write_od_matrix(path: &Path, od: &OdMatrix) -> Result<()> {
    write_csv(
        path,
        &["origin", "destination", "trips"],
        od.counts
            .iter()
            .map(|((o, d), n)| vec![o.clone(), d.clone(), n.to_string()]),
    )
}

// ---- survey ----

/// Survey table in one of its two layouts.
#[derive(Debug, Clone, PartialEq)]
pub enum Survey {
    Shares(BTreeMap<String, f64>),
    Pairs(Vec<(String, String, f64)>),
}

pub fn read_survey(path: &Path) -> Result<Survey> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    drop(rdr);
    let has = |c: &str| headers.iter().any(|h| h == c);
    if has("class") && has("share") {
        let table = read_table(path, &["class", "share"])?;
        let mut shares = BTreeMap::new();
        for r in rows(path, &table) {
            let class = r.str("class")?;
            if shares.insert(class.clone(), r.num("share")?).is_some() {
                return Err(Error::parse(path, format!("duplicate class {class}")));
            }
        }
        Ok(Survey::Shares(shares))
    } else if has("origin") && has("destination") && has("trips") {
        let table = read_table(path, &["origin", "destination", "trips"])?;
        rows(path, &table)
            .map(|r| Ok((r.str("origin")?, r.str("destination")?, r.num("trips")?)))
            .collect::<Result<Vec<_>>>()
            .map(Survey::Pairs)
    } else {
        Err(Error::parse(
            path,
            "expected columns class,share or origin,destination,trips",
        ))
    }
}

/// `alias,region_id` table mapping survey region names onto region ids.
pub fn read_aliases(path: &Path) -> Result<HashMap<String, String>> {
    let table = read_table(path, &["alias", "region_id"])?;
    rows(path, &table)
        .map(|r| Ok((r.str("alias")?, r.str("region_id")?)))
        .collect()
}
