//! Seeded synthetic CDR scenarios with ground truth, and recovery scoring.
//!
//! Agents live on a square tower grid laid out on a local tangent plane. Each
//! agent has a few anchors at tower sites and alternates dwells at anchors with
//! straight-line trips between them. Regions are a two-level rectangular grid.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;
use crate::geo::{
    haversine_distance, initial_bearing, normalize_degrees, CdrEvent, GeoPoint, Region,
    RegionLevel, TowerSector, EARTH_RADIUS_M,
};
use crate::stay::Staypoint;
use crate::trips::{Mode, ModeThresholds, Trip};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TowerGrid {
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    pub sector_radius_m: f64,
    pub sectors_per_tower: usize,
}

impl Default for TowerGrid {
    fn default() -> Self {
        TowerGrid {
            rows: 12,
            cols: 12,
            spacing_m: 1000.0,
            sector_radius_m: 150.0,
            sectors_per_tower: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionGrid {
    pub parish_size_m: f64,
    /// Parishes per municipality side.
    pub block: usize,
}

impl Default for RegionGrid {
    fn default() -> Self {
        RegionGrid {
            parish_size_m: 2000.0,
            block: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedSampling {
    Uniform,
    BandCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_agents: usize,
    pub n_days: usize,
    pub seed: u64,
    /// Unix seconds of the first midnight.
    pub start: i64,
    /// South-west corner of the tower grid.
    pub origin: GeoPoint,
    pub towers: TowerGrid,
    pub regions: RegionGrid,
    /// Trips per agent per day, uniform on `[min, max]`.
    pub trips_per_day_min: u32,
    pub trips_per_day_max: u32,
    pub mode_mix: BTreeMap<Mode, f64>,
    /// km/h `[low, high]` per mode.
    pub speed_bands: BTreeMap<Mode, [f64; 2]>,
    pub speed_sampling: SpeedSampling,
    pub dwell_pings_per_hour: f64,
    pub moving_pings_per_hour: f64,
    /// Minimum distance between consecutive pings of one trip.
    pub moving_ping_spacing_m: f64,
    pub anchors_per_agent: usize,
    pub min_anchor_separation_m: f64,
    pub min_dwell_s: i64,
    pub day_start_h: u32,
    pub day_end_h: u32,
    /// Probability that a ping is served by the second-nearest tower.
    pub noise: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let mode_mix = [
            (Mode::Walk, 0.10),
            (Mode::Bicycle, 0.10),
            (Mode::Bus, 0.30),
            (Mode::Car, 0.35),
            (Mode::Train, 0.15),
        ]
        .into_iter()
        .collect();
        let speed_bands = [
            (Mode::Walk, [2.0, 6.0]),
            (Mode::Bicycle, [8.0, 14.0]),
            (Mode::Bus, [16.0, 26.0]),
            (Mode::Car, [28.0, 44.0]),
            (Mode::Train, [62.0, 100.0]),
        ]
        .into_iter()
        .collect();
        ScenarioConfig {
            n_agents: 100,
            n_days: 14,
            seed: 1,
            start: 1_706_745_600,
            origin: GeoPoint {
                lat: 38.70,
                lon: -9.30,
            },
            towers: TowerGrid::default(),
            regions: RegionGrid::default(),
            trips_per_day_min: 2,
            trips_per_day_max: 2,
            mode_mix,
            speed_bands,
            speed_sampling: SpeedSampling::Uniform,
            dwell_pings_per_hour: 3.0,
            moving_pings_per_hour: 6.0,
            moving_ping_spacing_m: 3000.0,
            anchors_per_agent: 3,
            min_anchor_separation_m: 3500.0,
            min_dwell_s: 2700,
            day_start_h: 6,
            day_end_h: 22,
            noise: 0.0,
        }
    }
}

impl ScenarioConfig {
    /// Checks structure, probabilities, and that every speed band maps onto
    /// its own mode under `thresholds` for the shortest and longest trips.
    pub fn validate(&self, thresholds: &ModeThresholds) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let t = &self.towers;
        if self.n_agents == 0 || self.n_days == 0 {
            return bad("n_agents and n_days must be positive".into());
        }
        if t.rows == 0 || t.cols == 0 || t.sectors_per_tower == 0 {
            return bad("tower grid needs rows, cols and sectors_per_tower >= 1".into());
        }
        if !(t.spacing_m > 0.0 && t.sector_radius_m > 0.0 && t.sector_radius_m < t.spacing_m / 2.0)
        {
            return bad("need spacing_m > 0 and 0 < sector_radius_m < spacing_m / 2".into());
        }
        if self.regions.parish_size_m.is_nan()
            || self.regions.parish_size_m <= 0.0
            || self.regions.block == 0
        {
            return bad("region grid needs parish_size_m > 0 and block >= 1".into());
        }
        if self.trips_per_day_min == 0 || self.trips_per_day_min > self.trips_per_day_max {
            return bad("need 1 <= trips_per_day_min <= trips_per_day_max".into());
        }
        if !(self.dwell_pings_per_hour > 0.0 && self.moving_pings_per_hour >= 0.0) {
            return bad("ping rates must be positive".into());
        }
        if !(self.moving_ping_spacing_m > 0.0 && self.min_anchor_separation_m > 0.0) {
            return bad("spacings must be positive".into());
        }
        if self.anchors_per_agent < 2 {
            return bad("anchors_per_agent must be >= 2".into());
        }
        if self.min_dwell_s <= 0 || self.day_start_h >= self.day_end_h || self.day_end_h > 24 {
            return bad("need min_dwell_s > 0 and day_start_h < day_end_h <= 24".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise must lie in [0, 1]".into());
        }
        if self
            .mode_mix
            .values()
            .any(|p| !(p.is_finite() && *p >= 0.0))
        {
            return bad("mode probabilities must be nonnegative".into());
        }
        let sum: f64 = self.mode_mix.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("mode probabilities sum to {sum}, not 1"));
        }
        let lengths = [self.min_anchor_separation_m, self.max_trip_length()];
        for (&mode, &p) in &self.mode_mix {
            if p == 0.0 {
                continue;
            }
            if mode == Mode::Unknown {
                return bad("mode mix cannot include unknown".into());
            }
            let Some(&[lo, hi]) = self.speed_bands.get(&mode) else {
                return bad(format!("no speed band for {mode}"));
            };
            if !(lo > 0.0 && lo <= hi) {
                return bad(format!(
                    "speed band for {mode} must satisfy 0 < low <= high"
                ));
            }
            for speed in [lo, hi] {
                for len in lengths {
                    let dur = (len / (speed / 3.6)).round() as i64;
                    let got = thresholds.classify(speed, len, dur);
                    if got != mode {
                        return bad(format!(
                            "{mode} speed {speed} km/h over {len} m classifies as {got}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn max_trip_length(&self) -> f64 {
        let t = &self.towers;
        let w = (t.cols - 1) as f64 * t.spacing_m;
        let h = (t.rows - 1) as f64 * t.spacing_m;
        w.hypot(h).max(self.min_anchor_separation_m)
    }
}

/// Local tangent plane: meters east/north of `origin`.
#[derive(Debug, Clone, Copy)]
struct Plane {
    origin: GeoPoint,
    m_per_deg_lat: f64,
    m_per_deg_lon: f64,
}

impl Plane {
    fn new(origin: GeoPoint) -> Self {
        let m_per_deg_lat = EARTH_RADIUS_M.to_radians();
        Plane {
            origin,
            m_per_deg_lat,
            m_per_deg_lon: m_per_deg_lat * origin.lat.to_radians().cos(),
        }
    }

    fn to_geo(self, x: f64, y: f64) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat + y / self.m_per_deg_lat,
            lon: self.origin.lon + x / self.m_per_deg_lon,
        }
    }
}

/// Tower sites and lookup for the scenario grid.
#[derive(Debug, Clone)]
pub struct TowerLayout {
    grid: TowerGrid,
    plane: Plane,
    sites: Vec<GeoPoint>,
}

impl TowerLayout {
    pub fn new(origin: GeoPoint, grid: TowerGrid) -> Self {
        let plane = Plane::new(origin);
        let mut sites = Vec::with_capacity(grid.rows * grid.cols);
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                sites.push(plane.to_geo(
                    (c as f64 + 0.5) * grid.spacing_m,
                    (r as f64 + 0.5) * grid.spacing_m,
                ));
            }
        }
        TowerLayout { grid, plane, sites }
    }

    pub fn sites(&self) -> &[GeoPoint] {
        &self.sites
    }

    fn site_xy(&self, i: usize) -> (f64, f64) {
        let (r, c) = (i / self.grid.cols, i % self.grid.cols);
        (
            (c as f64 + 0.5) * self.grid.spacing_m,
            (r as f64 + 0.5) * self.grid.spacing_m,
        )
    }

    fn tower_id(&self, i: usize) -> String {
        format!("T{:03}_{:03}", i / self.grid.cols, i % self.grid.cols)
    }

    pub fn cell_id(&self, tower: usize, sector: usize) -> String {
        if self.grid.sectors_per_tower == 1 {
            self.tower_id(tower)
        } else {
            format!("{}_S{sector}", self.tower_id(tower))
        }
    }

    pub fn sectors(&self) -> Vec<TowerSector> {
        let k = self.grid.sectors_per_tower;
        let width = 360.0 / k as f64;
        let mut out = Vec::with_capacity(self.sites.len() * k);
        for (i, &site) in self.sites.iter().enumerate() {
            for s in 0..k {
                out.push(
                    TowerSector::new(
                        self.cell_id(i, s),
                        site,
                        s as f64 * width,
                        width,
                        self.grid.sector_radius_m,
                    )
                    .expect("grid sectors are valid"),
                );
            }
        }
        out
    }

    /// Towers ordered by distance to `p` within the 5x5 block around the
    /// planar grid cell containing it; ties go to the lower index.
    fn nearest_two(&self, p: GeoPoint) -> (usize, usize) {
        let x = (p.lon - self.plane.origin.lon) * self.plane.m_per_deg_lon;
        let y = (p.lat - self.plane.origin.lat) * self.plane.m_per_deg_lat;
        let clamp =
            |v: f64, n: usize| ((v / self.grid.spacing_m).floor().max(0.0) as usize).min(n - 1);
        let (c0, r0) = (clamp(x, self.grid.cols), clamp(y, self.grid.rows));
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(25);
        for r in r0.saturating_sub(2)..=(r0 + 2).min(self.grid.rows - 1) {
            for c in c0.saturating_sub(2)..=(c0 + 2).min(self.grid.cols - 1) {
                let i = r * self.grid.cols + c;
                best.push((haversine_distance(p, self.sites[i]), i));
            }
        }
        best.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let first = best[0].1;
        (first, best.get(1).map_or(first, |b| b.1))
    }

    /// Index of the tower closest to `p`.
    pub fn nearest_tower(&self, p: GeoPoint) -> usize {
        self.nearest_two(p).0
    }

    fn sector_of(&self, tower: usize, p: GeoPoint) -> usize {
        let k = self.grid.sectors_per_tower;
        if k == 1 || haversine_distance(p, self.sites[tower]) == 0.0 {
            return 0;
        }
        let width = 360.0 / k as f64;
        let b = normalize_degrees(initial_bearing(self.sites[tower], p) + width / 2.0);
        ((b / width) as usize).min(k - 1)
    }
}

/// Rectangular parishes, grouped into square municipality blocks.
pub fn grid_regions(origin: GeoPoint, towers: &TowerGrid, grid: &RegionGrid) -> Vec<Region> {
    let plane = Plane::new(origin);
    let size = grid.parish_size_m;
    let n_cols = ((towers.cols as f64 * towers.spacing_m) / size)
        .ceil()
        .max(1.0) as usize;
    let n_rows = ((towers.rows as f64 * towers.spacing_m) / size)
        .ceil()
        .max(1.0) as usize;
    let rect = |x0: f64, y0: f64, x1: f64, y1: f64| {
        vec![vec![
            plane.to_geo(x0, y0),
            plane.to_geo(x1, y0),
            plane.to_geo(x1, y1),
            plane.to_geo(x0, y1),
            plane.to_geo(x0, y0),
        ]]
    };
    let muni_id = |r: usize, c: usize| format!("M{:02}_{:02}", r / grid.block, c / grid.block);
    let mut regions = Vec::new();
    let (m_rows, m_cols) = (n_rows.div_ceil(grid.block), n_cols.div_ceil(grid.block));
    let msize = size * grid.block as f64;
    for mr in 0..m_rows {
        for mc in 0..m_cols {
            let id = format!("M{mr:02}_{mc:02}");
            let x1 = ((mc + 1) as f64 * msize).min(n_cols as f64 * size);
            let y1 = ((mr + 1) as f64 * msize).min(n_rows as f64 * size);
            regions.push(Region {
                name: format!("Municipality {mr}-{mc}"),
                region_id: id,
                level: RegionLevel::Municipality,
                parent_id: None,
                boundary: rect(mc as f64 * msize, mr as f64 * msize, x1, y1),
            });
        }
    }
    for r in 0..n_rows {
        for c in 0..n_cols {
            regions.push(Region {
                region_id: format!("P{r:02}_{c:02}"),
                name: format!("Parish {r}-{c}"),
                level: RegionLevel::Parish,
                parent_id: Some(muni_id(r, c)),
                boundary: rect(
                    c as f64 * size,
                    r as f64 * size,
                    (c + 1) as f64 * size,
                    (r + 1) as f64 * size,
                ),
            });
        }
    }
    regions
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    /// `home`, `work`, `other1`, ...
    pub name: String,
    pub cell_id: String,
    pub location: GeoPoint,
    pub parish: String,
    pub municipality: String,
}

impl Anchor {
    pub fn region(&self, level: RegionLevel) -> &str {
        match level {
            RegionLevel::Parish => &self.parish,
            RegionLevel::Municipality => &self.municipality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueStaypoint {
    /// Index into the agent's anchors.
    pub anchor: usize,
    pub t_start: i64,
    pub t_end: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueTrip {
    pub origin: usize,
    pub destination: usize,
    pub t_start: i64,
    pub t_end: i64,
    pub mode: Mode,
    pub speed_kmh: f64,
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTruth {
    pub user_id: String,
    pub anchors: Vec<Anchor>,
    pub staypoints: Vec<TrueStaypoint>,
    pub trips: Vec<TrueTrip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub t_start: i64,
    pub t_end: i64,
    pub agents: Vec<AgentTruth>,
}

impl GroundTruth {
    pub fn n_trips(&self) -> usize {
        self.agents.iter().map(|a| a.trips.len()).sum()
    }

    pub fn n_staypoints(&self) -> usize {
        self.agents.iter().map(|a| a.staypoints.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub events: Vec<CdrEvent>,
    /// True position of each event, aligned with `events`.
    pub positions: Vec<GeoPoint>,
    pub towers: Vec<TowerSector>,
    pub regions: Vec<Region>,
    pub truth: GroundTruth,
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    layout: &'a TowerLayout,
    parish_of: Vec<String>,
    muni_of: Vec<String>,
}

fn choose_anchors(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let n = ctx.layout.sites.len();
    let sep = ctx.cfg.min_anchor_separation_m;
    for _ in 0..100 {
        let mut chosen: Vec<usize> = Vec::new();
        for _ in 0..1000 {
            let cand = rng.gen_range(0..n);
            let (x, y) = ctx.layout.site_xy(cand);
            let ok = chosen.iter().all(|&o| {
                let (ox, oy) = ctx.layout.site_xy(o);
                (x - ox).hypot(y - oy) >= sep
            });
            if ok {
                chosen.push(cand);
                if chosen.len() == ctx.cfg.anchors_per_agent {
                    return Ok(chosen);
                }
            }
        }
    }
    Err(Error::InvalidConfig(format!(
        "cannot place {} anchors {sep} m apart on the tower grid",
        ctx.cfg.anchors_per_agent
    )))
}

fn draw_mode(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Mode {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = Mode::Car;
    for (&m, &p) in &cfg.mode_mix {
        if p == 0.0 {
            continue;
        }
        acc += p;
        last = m;
        if u < acc {
            return m;
        }
    }
    last
}

struct Ping {
    t: i64,
    pos: GeoPoint,
}

fn generate_agent(ctx: &Ctx, idx: usize) -> Result<(AgentTruth, Vec<CdrEvent>, Vec<GeoPoint>)> {
    let cfg = ctx.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(idx as u64);
    let user_id = format!("u{idx:05}");
    let towers = choose_anchors(ctx, &mut rng)?;
    let anchors: Vec<Anchor> = towers
        .iter()
        .enumerate()
        .map(|(k, &t)| Anchor {
            name: match k {
                0 => "home".into(),
                1 => "work".into(),
                k => format!("other{}", k - 1),
            },
            cell_id: ctx.layout.cell_id(t, 0),
            location: ctx.layout.sites[t],
            parish: ctx.parish_of[t].clone(),
            municipality: ctx.muni_of[t].clone(),
        })
        .collect();

    let mut pings: Vec<Ping> = Vec::new();
    let mut staypoints = Vec::new();
    let mut trips = Vec::new();
    let dwell_step = (3600.0 / cfg.dwell_pings_per_hour).round().max(1.0) as i64;
    let mut dwell = |pings: &mut Vec<Ping>, anchor: usize, a: i64, b: i64| {
        let pos = anchors[anchor].location;
        let mut t = a;
        while t < b {
            pings.push(Ping { t, pos });
            t += dwell_step;
        }
        pings.push(Ping { t: b, pos });
        staypoints.push(TrueStaypoint {
            anchor,
            t_start: a,
            t_end: b,
        });
    };

    let mut here = 0usize;
    let mut dwell_start = cfg.start;
    for day in 0..cfg.n_days as i64 {
        let k = rng.gen_range(cfg.trips_per_day_min..=cfg.trips_per_day_max) as usize;
        let ws = cfg.start + day * 86_400 + cfg.day_start_h as i64 * 3600;
        let we = cfg.start + day * 86_400 + cfg.day_end_h as i64 * 3600;
        let slot = (we - ws) / k as i64;
        for j in 0..k {
            let planned = ws + j as i64 * slot + rng.gen_range(0..(slot / 2).max(1));
            let depart = planned.max(dwell_start + cfg.min_dwell_s);
            let dest = if j + 1 == k && here != 0 {
                0
            } else {
                let options: Vec<usize> = (0..anchors.len())
                    .filter(|&a| a != here && !(j + 2 == k && a == 0 && anchors.len() > 2))
                    .collect();
                *options.choose(&mut rng).expect("at least two anchors")
            };
            let mode = draw_mode(cfg, &mut rng);
            let [lo, hi] = cfg.speed_bands[&mode];
            let speed = match cfg.speed_sampling {
                SpeedSampling::BandCenter => (lo + hi) / 2.0,
                SpeedSampling::Uniform => rng.gen_range(lo..=hi),
            };
            let (ax, ay) = ctx.layout.site_xy(towers[here]);
            let (bx, by) = ctx.layout.site_xy(towers[dest]);
            let length = (bx - ax).hypot(by - ay);
            let duration = (length / (speed / 3.6)).round().max(1.0) as i64;
            let arrive = depart + duration;

            dwell(&mut pings, here, dwell_start, depart);
            let by_rate = (duration as f64 / 3600.0 * cfg.moving_pings_per_hour).floor() as i64;
            let by_space = (length / cfg.moving_ping_spacing_m).floor() as i64 - 1;
            let n = by_rate.min(by_space).max(0);
            for i in 1..=n {
                let f = i as f64 / (n + 1) as f64;
                let t = depart + (f * duration as f64).round() as i64;
                let pos = ctx
                    .layout
                    .plane
                    .to_geo(ax + f * (bx - ax), ay + f * (by - ay));
                pings.push(Ping { t, pos });
            }
            trips.push(TrueTrip {
                origin: here,
                destination: dest,
                t_start: depart,
                t_end: arrive,
                mode,
                speed_kmh: speed,
                length_m: length,
            });
            here = dest;
            dwell_start = arrive;
        }
    }
    let end = (cfg.start + cfg.n_days as i64 * 86_400).max(dwell_start + cfg.min_dwell_s);
    dwell(&mut pings, here, dwell_start, end);

    let mut events = Vec::with_capacity(pings.len());
    let mut positions = Vec::with_capacity(pings.len());
    for p in pings {
        let (first, second) = ctx.layout.nearest_two(p.pos);
        let tower = if cfg.noise > 0.0 && rng.gen::<f64>() < cfg.noise {
            second
        } else {
            first
        };
        let sector = ctx.layout.sector_of(tower, p.pos);
        events.push(CdrEvent {
            user_id: user_id.clone(),
            timestamp: p.t,
            cell_id: ctx.layout.cell_id(tower, sector),
        });
        positions.push(p.pos);
    }
    let truth = AgentTruth {
        user_id,
        anchors,
        staypoints,
        trips,
    };
    Ok((truth, events, positions))
}

/// Generates a full scenario. Agents are simulated in parallel, each from its
/// own random stream, so output does not depend on the thread count.
pub fn generate_scenario(cfg: &ScenarioConfig, thresholds: &ModeThresholds) -> Result<Scenario> {
    cfg.validate(thresholds)?;
    let layout = TowerLayout::new(cfg.origin, cfg.towers);
    let regions = grid_regions(cfg.origin, &cfg.towers, &cfg.regions);
    let index = crate::geo::RegionIndex::new(regions.clone())?;
    let lookup = |level| -> Result<Vec<String>> {
        layout
            .sites
            .iter()
            .map(|&s| {
                index
                    .assign(s, level)
                    .map(str::to_owned)
                    .ok_or_else(|| Error::InvalidConfig("tower outside the region grid".into()))
            })
            .collect()
    };
    let ctx = Ctx {
        cfg,
        layout: &layout,
        parish_of: lookup(RegionLevel::Parish)?,
        muni_of: lookup(RegionLevel::Municipality)?,
    };
    let agents = (0..cfg.n_agents)
        .into_par_iter()
        .map(|i| generate_agent(&ctx, i))
        .collect::<Result<Vec<_>>>()?;
    let mut truth_agents = Vec::with_capacity(agents.len());
    let mut events = Vec::new();
    let mut positions = Vec::new();
    for (t, e, p) in agents {
        truth_agents.push(t);
        events.extend(e);
        positions.extend(p);
    }
    let t_end = truth_agents
        .iter()
        .filter_map(|a| a.staypoints.last())
        .map(|s| s.t_end)
        .max()
        .unwrap_or(cfg.start);
    Ok(Scenario {
        events,
        positions,
        towers: layout.sectors(),
        regions,
        truth: GroundTruth {
            seed: cfg.seed,
            t_start: cfg.start,
            t_end,
            agents: truth_agents,
        },
    })
}

/// Writes `cdr.csv`, `towers.csv`, `regions.geojson` and `ground_truth.json`.
pub fn write_scenario(dir: &Path, s: &Scenario) -> Result<()> {
    formats::write_cdr(&dir.join("cdr.csv"), &s.events)?;
    formats::write_towers(&dir.join("towers.csv"), &s.towers)?;
    formats::write_regions(&dir.join("regions.geojson"), &s.regions)?;
    formats::write_json(&dir.join("ground_truth.json"), &s.truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaypointScore {
    pub n_truth: usize,
    pub n_detected: usize,
    pub matched: usize,
    pub precision: f64,
    pub recall: f64,
    /// Set when nothing was detected; precision is then reported as 1.0.
    pub precision_vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripScore {
    pub n_truth: usize,
    pub n_detected: usize,
    /// `(detected − truth) / truth`.
    pub count_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdScore {
    pub level: RegionLevel,
    pub n_cells: usize,
    pub exact_cells: usize,
    /// Share of non-empty cells (in either matrix) with equal counts.
    pub exact_cell_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScore {
    /// truth mode -> detected mode -> trips.
    pub confusion: BTreeMap<Mode, BTreeMap<Mode, u64>>,
    pub matched_trips: usize,
    /// Correct labels over all true trips; unmatched trips count as wrong.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub staypoints: StaypointScore,
    pub trips: TripScore,
    pub od: OdScore,
    pub modes: ModeScore,
}

fn overlap(a: (i64, i64), b: (i64, i64)) -> i64 {
    a.1.min(b.1) - a.0.max(b.0)
}

/// Scores detected staypoints and trips against ground truth.
///
/// A detected staypoint matches a true one of the same user when their time
/// overlap is at least half the longer of the two and its median lies within
/// `r1` of the anchor; matching is one-to-one and greedy in time order. True
/// trips are paired with the detected trip of largest time overlap.
pub fn score_recovery(
    truth: &GroundTruth,
    staypoints: &[Staypoint],
    trips: &[Trip],
    level: RegionLevel,
    r1: f64,
) -> Result<RecoveryReport> {
    let agents: HashMap<&str, &AgentTruth> = truth
        .agents
        .iter()
        .map(|a| (a.user_id.as_str(), a))
        .collect();
    let mut sp_by_user: BTreeMap<&str, Vec<&Staypoint>> = BTreeMap::new();
    for s in staypoints {
        if !agents.contains_key(s.user_id.as_str()) {
            return Err(Error::ScenarioMismatch(format!(
                "unknown user {}",
                s.user_id
            )));
        }
        sp_by_user.entry(&s.user_id).or_default().push(s);
    }
    let mut trips_by_user: BTreeMap<&str, Vec<&Trip>> = BTreeMap::new();
    for t in trips {
        if !agents.contains_key(t.user_id.as_str()) {
            return Err(Error::ScenarioMismatch(format!(
                "unknown user {}",
                t.user_id
            )));
        }
        trips_by_user.entry(&t.user_id).or_default().push(t);
    }

    let mut matched = 0;
    for agent in &truth.agents {
        let detected = sp_by_user
            .get(agent.user_id.as_str())
            .map_or(&[][..], Vec::as_slice);
        let mut used = vec![false; detected.len()];
        for ts in &agent.staypoints {
            let anchor = agent.anchors[ts.anchor].location;
            let span = (ts.t_start, ts.t_end);
            let best = detected
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .filter_map(|(i, d)| {
                    let ov = overlap(span, (d.t_start, d.t_end));
                    let need = (ts.t_end - ts.t_start).max(d.t_end - d.t_start) as f64 * 0.5;
                    (ov >= 0 && ov as f64 >= need && haversine_distance(d.median, anchor) <= r1)
                        .then_some((i, ov))
                })
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((i, _)) = best {
                used[i] = true;
                matched += 1;
            }
        }
    }
    let n_truth_sp = truth.n_staypoints();
    let sp_score = StaypointScore {
        n_truth: n_truth_sp,
        n_detected: staypoints.len(),
        matched,
        precision: if staypoints.is_empty() {
            1.0
        } else {
            matched as f64 / staypoints.len() as f64
        },
        recall: if n_truth_sp == 0 {
            1.0
        } else {
            matched as f64 / n_truth_sp as f64
        },
        precision_vacuous: staypoints.is_empty(),
    };

    let n_truth_trips = truth.n_trips();
    let trip_score = TripScore {
        n_truth: n_truth_trips,
        n_detected: trips.len(),
        count_deviation: if n_truth_trips == 0 {
            0.0
        } else {
            (trips.len() as f64 - n_truth_trips as f64) / n_truth_trips as f64
        },
    };

    let sp_by_id: HashMap<&str, &Staypoint> = staypoints
        .iter()
        .map(|s| (s.staypoint_id.as_str(), s))
        .collect();
    let mut true_od: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for a in &truth.agents {
        for t in &a.trips {
            *true_od
                .entry((
                    a.anchors[t.origin].region(level),
                    a.anchors[t.destination].region(level),
                ))
                .or_default() += 1;
        }
    }
    let mut det_od: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for t in trips {
        let region = |id: &str| sp_by_id.get(id).and_then(|s| s.region(level));
        if let (Some(o), Some(d)) = (region(&t.origin), region(&t.destination)) {
            *det_od.entry((o, d)).or_default() += 1;
        }
    }
    let cells: BTreeSet<&(&str, &str)> = true_od.keys().chain(det_od.keys()).collect();
    let exact = cells
        .iter()
        .filter(|c| true_od.get(**c) == det_od.get(**c))
        .count();
    let od_score = OdScore {
        level,
        n_cells: cells.len(),
        exact_cells: exact,
        exact_cell_ratio: if cells.is_empty() {
            1.0
        } else {
            exact as f64 / cells.len() as f64
        },
    };

    let mut confusion: BTreeMap<Mode, BTreeMap<Mode, u64>> = BTreeMap::new();
    let mut matched_trips = 0;
    let mut correct = 0;
    for a in &truth.agents {
        let detected = trips_by_user
            .get(a.user_id.as_str())
            .map_or(&[][..], Vec::as_slice);
        let mut used = vec![false; detected.len()];
        for t in &a.trips {
            let best = detected
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, d)| (i, overlap((t.t_start, t.t_end), (d.t_start, d.t_end))))
                .filter(|&(_, ov)| ov > 0)
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((i, _)) = best {
                used[i] = true;
                matched_trips += 1;
                let got = detected[i].primary_mode();
                correct += usize::from(got == t.mode);
                *confusion.entry(t.mode).or_default().entry(got).or_default() += 1;
            }
        }
    }
    let modes = ModeScore {
        confusion,
        matched_trips,
        accuracy: if n_truth_trips == 0 {
            1.0
        } else {
            correct as f64 / n_truth_trips as f64
        },
    };

    Ok(RecoveryReport {
        staypoints: sp_score,
        trips: trip_score,
        od: od_score,
        modes,
    })
}
