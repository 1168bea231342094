//! Antenna geometry, pseudo-location sampling and region assignment.
//!
//! A CDR only names the serving cell. Each event is placed at a deterministic
//! pseudo-location inside that cell's sector wedge, optionally restricted to a
//! land mask, and later linked to parishes and municipalities by
//! point-in-polygon tests.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Rejection-sampling budget for land clipping.
pub const DEFAULT_SAMPLING_ATTEMPTS: u32 = 64;

/// A WGS84 coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::InvalidInput(format!(
                "coordinate ({}, {}) out of range",
                self.lat, self.lon
            )));
        }
        Ok(())
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.lat, self.lon)
    }
}

/// Great-circle distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial bearing from `from` to `to`, degrees clockwise from north in [0, 360).
pub fn initial_bearing(from: GeoPoint, to: GeoPoint) -> f64 {
    let (phi1, phi2) = (from.lat.to_radians(), to.lat.to_radians());
    let dlambda = (to.lon - from.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    normalize_degrees(y.atan2(x).to_degrees())
}

/// Point reached by travelling `distance_m` from `origin` along `bearing_deg`.
pub fn destination_point(origin: GeoPoint, bearing_deg: f64, distance_m: f64) -> GeoPoint {
    let delta = distance_m / EARTH_RADIUS_M;
    let theta = bearing_deg.to_radians();
    let phi1 = origin.lat.to_radians();
    let lambda1 = origin.lon.to_radians();
    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
    let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
    let lambda2 = lambda1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * sin_phi2);
    let lon = (lambda2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
    GeoPoint {
        lat: phi2.to_degrees(),
        lon,
    }
}

/// Maps any angle in degrees to [0, 360).
pub fn normalize_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Signed smallest difference `a - b` in (-180, 180].
fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Coverage wedge of one antenna sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerSector {
    pub cell_id: String,
    pub center: GeoPoint,
    /// Degrees clockwise from north, [0, 360).
    pub azimuth: f64,
    /// Opening angle in degrees, (0, 360].
    pub beamwidth: f64,
    /// Meters.
    pub radius: f64,
}

impl TowerSector {
    /// Builds a sector, normalizing the azimuth and validating the geometry.
    pub fn new(
        cell_id: impl Into<String>,
        center: GeoPoint,
        azimuth: f64,
        beamwidth: f64,
        radius: f64,
    ) -> Result<Self> {
        let sector = TowerSector {
            cell_id: cell_id.into(),
            center,
            azimuth: normalize_degrees(azimuth),
            beamwidth,
            radius,
        };
        sector.validate()?;
        Ok(sector)
    }

    pub fn validate(&self) -> Result<()> {
        self.center.validate()?;
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sector {}: radius must be > 0, got {}",
                self.cell_id, self.radius
            )));
        }
        if !(self.beamwidth > 0.0 && self.beamwidth <= 360.0) {
            return Err(Error::InvalidInput(format!(
                "sector {}: beamwidth must be in (0, 360], got {}",
                self.cell_id, self.beamwidth
            )));
        }
        if !(0.0..360.0).contains(&self.azimuth) {
            return Err(Error::InvalidInput(format!(
                "sector {}: azimuth must be in [0, 360), got {}",
                self.cell_id, self.azimuth
            )));
        }
        Ok(())
    }

    /// Whether `p` lies within the radius and the azimuth wedge.
    pub fn contains(&self, p: GeoPoint) -> bool {
        let d = haversine_distance(self.center, p);
        if d > self.radius {
            return false;
        }
        if self.beamwidth >= 360.0 || d == 0.0 {
            return true;
        }
        let bearing = initial_bearing(self.center, p);
        angle_difference(bearing, self.azimuth).abs() <= self.beamwidth / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionLevel {
    Parish,
    Municipality,
}

impl fmt::Display for RegionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionLevel::Parish => "parish",
            RegionLevel::Municipality => "municipality",
        })
    }
}

impl std::str::FromStr for RegionLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parish" => Ok(RegionLevel::Parish),
            "municipality" => Ok(RegionLevel::Municipality),
            other => Err(Error::InvalidInput(format!(
                "unknown region level `{other}` (expected parish|municipality)"
            ))),
        }
    }
}

/// An administrative area. Rings are closed; containment uses the even-odd
/// rule across all rings, so holes and multi-part areas both work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub region_id: String,
    pub name: String,
    pub level: RegionLevel,
    pub parent_id: Option<String>,
    pub boundary: Vec<Vec<GeoPoint>>,
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        if self.boundary.is_empty() {
            return Err(Error::InvalidInput(format!(
                "region {} has no rings",
                self.region_id
            )));
        }
        for ring in &self.boundary {
            if ring.len() < 4 || ring.first() != ring.last() {
                return Err(Error::InvalidInput(format!(
                    "region {}: rings must be closed with at least 4 vertices",
                    self.region_id
                )));
            }
        }
        if self.level == RegionLevel::Parish && self.parent_id.is_none() {
            return Err(Error::InvalidInput(format!(
                "parish {} has no municipality parent",
                self.region_id
            )));
        }
        Ok(())
    }

    /// Point-in-polygon with boundary points counted as inside.
    pub fn contains(&self, p: GeoPoint) -> bool {
        if self.boundary.iter().any(|ring| on_ring_boundary(ring, p)) {
            return true;
        }
        let crossings = self
            .boundary
            .iter()
            .filter(|ring| ray_cast(ring, p))
            .count();
        crossings % 2 == 1
    }

    pub fn bbox(&self) -> BBox {
        let mut bbox = BBox::empty();
        for p in self.boundary.iter().flatten() {
            bbox.extend(*p);
        }
        bbox
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BBox {
    fn empty() -> Self {
        BBox {
            min_lat: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
            min_lon: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
        }
    }

    fn extend(&mut self, p: GeoPoint) {
        self.min_lat = self.min_lat.min(p.lat);
        self.max_lat = self.max_lat.max(p.lat);
        self.min_lon = self.min_lon.min(p.lon);
        self.max_lon = self.max_lon.max(p.lon);
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat
            && p.lat <= self.max_lat
            && p.lon >= self.min_lon
            && p.lon <= self.max_lon
    }
}

fn on_segment(a: GeoPoint, b: GeoPoint, p: GeoPoint) -> bool {
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    let scale = (b.lon - a.lon).abs().max((b.lat - a.lat).abs()).max(1e-300);
    if cross.abs() > 1e-12 * scale {
        return false;
    }
    p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

fn on_ring_boundary(ring: &[GeoPoint], p: GeoPoint) -> bool {
    ring.windows(2).any(|w| on_segment(w[0], w[1], p))
}

// Even-odd ray cast along +lon.
fn ray_cast(ring: &[GeoPoint], p: GeoPoint) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Immutable lookup over regions of both levels.
#[derive(Debug, Clone, Default)]
pub struct RegionIndex {
    regions: Vec<Region>,
    bboxes: Vec<BBox>,
    by_id: HashMap<String, usize>,
}

impl RegionIndex {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(regions.len());
        for (i, r) in regions.iter().enumerate() {
            r.validate()?;
            if by_id.insert(r.region_id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate region id {}",
                    r.region_id
                )));
            }
        }
        for r in &regions {
            if let Some(parent) = &r.parent_id {
                if r.level == RegionLevel::Parish {
                    let ok = by_id
                        .get(parent)
                        .map(|&i| regions[i].level == RegionLevel::Municipality)
                        .unwrap_or(false);
                    if !ok {
                        return Err(Error::InvalidInput(format!(
                            "parish {} references unknown municipality {}",
                            r.region_id, parent
                        )));
                    }
                }
            }
        }
        let bboxes = regions.iter().map(Region::bbox).collect();
        Ok(RegionIndex {
            regions,
            bboxes,
            by_id,
        })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn get(&self, region_id: &str) -> Option<&Region> {
        self.by_id.get(region_id).map(|&i| &self.regions[i])
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Region of `level` containing `p`. Shared-boundary ties go to the
    /// lexicographically smallest region id.
    pub fn assign(&self, p: GeoPoint, level: RegionLevel) -> Option<&str> {
        self.regions
            .iter()
            .zip(&self.bboxes)
            .filter(|(r, b)| r.level == level && b.contains(p) && r.contains(p))
            .map(|(r, _)| r.region_id.as_str())
            .min()
    }

    /// Whether `p` lies in any region, regardless of level.
    pub fn covers(&self, p: GeoPoint) -> bool {
        self.regions
            .iter()
            .zip(&self.bboxes)
            .any(|(r, b)| b.contains(p) && r.contains(p))
    }
}

/// See [`RegionIndex::assign`].
pub fn assign_region(p: GeoPoint, regions: &RegionIndex, level: RegionLevel) -> Option<String> {
    regions.assign(p, level).map(str::to_owned)
}

/// Deterministic pseudo-location inside `sector`.
///
/// Radius is drawn as `radius * sqrt(u)` so points are uniform over the wedge
/// area. With a non-empty `land` mask, candidates are resampled up to
/// `attempts` times; after that the sector center is used if it is on land.
pub fn sample_sector_point(
    sector: &TowerSector,
    seed: u64,
    land: &RegionIndex,
    attempts: u32,
) -> Result<GeoPoint> {
    if sector.radius <= 0.0 {
        return Ok(sector.center);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..attempts {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        let dist = sector.radius * u.sqrt();
        let bearing = sector.azimuth - sector.beamwidth / 2.0 + v * sector.beamwidth;
        let q = destination_point(sector.center, normalize_degrees(bearing), dist);
        // Rounding at the wedge edge can push a candidate a hair outside.
        if !sector.contains(q) {
            continue;
        }
        if land.is_empty() || land.covers(q) {
            return Ok(q);
        }
    }
    if land.is_empty() || land.covers(sector.center) {
        return Ok(sector.center);
    }
    Err(Error::ClippingExhausted {
        cell_id: sector.cell_id.clone(),
        attempts,
    })
}

/// Stable per-event seed: first 8 bytes of SHA-256 over the event key.
pub fn event_seed(cell_id: &str, user_id: &str, timestamp: i64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(cell_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(user_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(timestamp.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A raw call detail record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdrEvent {
    pub user_id: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub cell_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionedEvent {
    pub user_id: String,
    pub timestamp: i64,
    pub cell_id: String,
    pub location: GeoPoint,
}

/// Places every CDR at its pseudo-location. Output is sorted by
/// `(user_id, timestamp)`, stable with respect to the input order.
pub fn position_events(
    events: &[CdrEvent],
    towers: &[TowerSector],
    land: &RegionIndex,
) -> Result<Vec<PositionedEvent>> {
    use rayon::prelude::*;

    let by_cell: HashMap<&str, &TowerSector> =
        towers.iter().map(|t| (t.cell_id.as_str(), t)).collect();
    let mut out = events
        .par_iter()
        .map(|e| {
            let sector = by_cell.get(e.cell_id.as_str()).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "event of user {} references unknown cell {}",
                    e.user_id, e.cell_id
                ))
            })?;
            let seed = event_seed(&e.cell_id, &e.user_id, e.timestamp);
            let location = sample_sector_point(sector, seed, land, DEFAULT_SAMPLING_ATTEMPTS)?;
            Ok(PositionedEvent {
                user_id: e.user_id.clone(),
                timestamp: e.timestamp,
                cell_id: e.cell_id.clone(),
                location,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| (&a.user_id, a.timestamp).cmp(&(&b.user_id, b.timestamp)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(id: &str, lat0: f64, lon0: f64, size: f64) -> Region {
        let ring = vec![
            GeoPoint {
                lat: lat0,
                lon: lon0,
            },
            GeoPoint {
                lat: lat0,
                lon: lon0 + size,
            },
            GeoPoint {
                lat: lat0 + size,
                lon: lon0 + size,
            },
            GeoPoint {
                lat: lat0 + size,
                lon: lon0,
            },
            GeoPoint {
                lat: lat0,
                lon: lon0,
            },
        ];
        Region {
            region_id: id.into(),
            name: id.into(),
            level: RegionLevel::Municipality,
            parent_id: None,
            boundary: vec![ring],
        }
    }

    // Spherical law of cosines, independent of the haversine form.
    fn cosine_law(a: GeoPoint, b: GeoPoint) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dl = (b.lon - a.lon).to_radians();
        let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
        EARTH_RADIUS_M * c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn haversine_identity_and_symmetry() {
        let a = GeoPoint {
            lat: 38.70,
            lon: -9.30,
        };
        assert_eq!(haversine_distance(a, a), 0.0);
        let b = GeoPoint {
            lat: 38.75,
            lon: -9.2,
        };
        assert!((haversine_distance(a, b) - haversine_distance(b, a)).abs() < 1e-6);
    }

    #[test]
    fn haversine_matches_cosine_law() {
        let a = GeoPoint {
            lat: 38.70,
            lon: -9.30,
        };
        let b = GeoPoint {
            lat: 38.70,
            lon: -9.20,
        };
        let oracle = cosine_law(a, b);
        // frozen from the oracle
        assert!((oracle - 8677.99).abs() < 0.01, "oracle {oracle}");
        assert!((haversine_distance(a, b) - oracle).abs() < 10.0);
    }

    #[test]
    fn zero_radius_returns_center() {
        let s = TowerSector {
            cell_id: "c".into(),
            center: GeoPoint {
                lat: 38.7,
                lon: -9.3,
            },
            azimuth: 0.0,
            beamwidth: 120.0,
            radius: 0.0,
        };
        let p = sample_sector_point(&s, 1, &RegionIndex::default(), 64).unwrap();
        assert_eq!(p, s.center);
    }

    #[test]
    fn sampling_is_deterministic_and_in_wedge() {
        let s = TowerSector::new(
            "c",
            GeoPoint {
                lat: 38.7,
                lon: -9.3,
            },
            90.0,
            60.0,
            500.0,
        )
        .unwrap();
        let none = RegionIndex::default();
        let a = sample_sector_point(&s, 42, &none, 64).unwrap();
        let b = sample_sector_point(&s, 42, &none, 64).unwrap();
        assert_eq!(a, b);
        let q = sample_sector_point(&s, 7, &none, 64).unwrap();
        assert!(haversine_distance(s.center, q) <= 500.0);
        let bearing = initial_bearing(s.center, q);
        assert!((60.0..=120.0).contains(&bearing), "bearing {bearing}");
    }

    #[test]
    fn land_clipping_falls_back_or_fails() {
        let center = GeoPoint {
            lat: 38.7,
            lon: -9.3,
        };
        let s = TowerSector::new("c", center, 0.0, 360.0, 1000.0).unwrap();
        // Land far away from the sector and not covering the center.
        let far = RegionIndex::new(vec![square("sea", 10.0, 10.0, 1.0)]).unwrap();
        assert!(matches!(
            sample_sector_point(&s, 3, &far, 64),
            Err(Error::ClippingExhausted { .. })
        ));
        // A tiny island around the center: rejection almost always fails,
        // but the center itself is on land.
        let island = RegionIndex::new(vec![square("i", 38.69999, -9.30001, 0.00002)]).unwrap();
        let p = sample_sector_point(&s, 3, &island, 64).unwrap();
        assert!(island.covers(p));
    }

    #[test]
    fn land_clipping_keeps_points_on_land() {
        let s = TowerSector::new(
            "c",
            GeoPoint {
                lat: 38.7,
                lon: -9.3,
            },
            0.0,
            360.0,
            1000.0,
        )
        .unwrap();
        // Land is the half-plane north of the tower.
        let north = RegionIndex::new(vec![square("n", 38.7, -9.4, 0.2)]).unwrap();
        for seed in 0..200 {
            let p = sample_sector_point(&s, seed, &north, 64).unwrap();
            assert!(p.lat >= 38.7);
        }
    }

    #[test]
    fn assign_region_cases() {
        let idx = RegionIndex::new(vec![
            square("B", 38.0, -9.0, 1.0),
            square("A", 38.0, -10.0, 1.0),
        ])
        .unwrap();
        let centroid = GeoPoint {
            lat: 38.5,
            lon: -9.5,
        };
        assert_eq!(
            assign_region(centroid, &idx, RegionLevel::Municipality).as_deref(),
            Some("A")
        );
        let far = GeoPoint { lat: 0.0, lon: 0.0 };
        assert_eq!(assign_region(far, &idx, RegionLevel::Municipality), None);
        // Shared edge at lon = -9.0: both contain it, "A" wins.
        let edge = GeoPoint {
            lat: 38.5,
            lon: -9.0,
        };
        assert!(idx.regions().iter().all(|r| r.contains(edge)));
        assert_eq!(
            assign_region(edge, &idx, RegionLevel::Municipality).as_deref(),
            Some("A")
        );
        assert_eq!(assign_region(centroid, &idx, RegionLevel::Parish), None);
    }

    #[test]
    fn holes_are_excluded() {
        let mut r = square("R", 0.0, 0.0, 4.0);
        let hole = square("h", 1.0, 1.0, 2.0).boundary.remove(0);
        r.boundary.push(hole);
        assert!(r.contains(GeoPoint { lat: 0.5, lon: 0.5 }));
        assert!(!r.contains(GeoPoint { lat: 2.0, lon: 2.0 }));
    }

    #[test]
    fn invalid_sector_rejected() {
        let c = GeoPoint { lat: 0.0, lon: 0.0 };
        assert!(TowerSector::new("x", c, 0.0, 0.0, 10.0).is_err());
        assert!(TowerSector::new("x", c, 0.0, 90.0, -1.0).is_err());
        assert_eq!(
            TowerSector::new("x", c, 370.0, 90.0, 1.0).unwrap().azimuth,
            10.0
        );
    }

    #[test]
    fn unclosed_ring_rejected() {
        let mut r = square("R", 0.0, 0.0, 1.0);
        r.boundary[0].pop();
        assert!(RegionIndex::new(vec![r]).is_err());
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(event_seed("c1", "u1", 10), event_seed("c1", "u1", 10));
        assert_ne!(event_seed("c1", "u1", 10), event_seed("c1", "u1", 11));
        assert_ne!(event_seed("c1", "u1", 10), event_seed("c1u", "1", 10));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn point() -> impl Strategy<Value = GeoPoint> {
            (-80.0..80.0f64, -179.0..179.0f64).prop_map(|(lat, lon)| GeoPoint { lat, lon })
        }

        fn local() -> impl Strategy<Value = GeoPoint> {
            (38.0..39.0f64, -10.0..-9.0f64).prop_map(|(lat, lon)| GeoPoint { lat, lon })
        }

        // Crossing-number test with an explicit on-segment check.
        fn oracle_in_ring(p: GeoPoint, ring: &[GeoPoint]) -> (bool, bool) {
            let mut inside = false;
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
                let within = p.lon >= a.lon.min(b.lon)
                    && p.lon <= a.lon.max(b.lon)
                    && p.lat >= a.lat.min(b.lat)
                    && p.lat <= a.lat.max(b.lat);
                if cross == 0.0 && within {
                    return (true, true);
                }
                if (a.lat > p.lat) != (b.lat > p.lat) {
                    let lon_at = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
                    if p.lon < lon_at {
                        inside = !inside;
                    }
                }
            }
            (inside, false)
        }

        fn polygon() -> impl Strategy<Value = Vec<GeoPoint>> {
            prop::collection::vec(local(), 3..6).prop_map(|mut pts| {
                // Star-shaped ordering around the centroid keeps the ring simple.
                let c = GeoPoint {
                    lat: pts.iter().map(|p| p.lat).sum::<f64>() / pts.len() as f64,
                    lon: pts.iter().map(|p| p.lon).sum::<f64>() / pts.len() as f64,
                };
                pts.sort_by(|a, b| {
                    let ta = (a.lat - c.lat).atan2(a.lon - c.lon);
                    let tb = (b.lat - c.lat).atan2(b.lon - c.lon);
                    ta.total_cmp(&tb)
                });
                pts.push(pts[0]);
                pts
            })
        }

        proptest! {
            #[test]
            fn haversine_metric(a in point(), b in point(), c in point()) {
                let ab = haversine_distance(a, b);
                prop_assert!(ab >= 0.0);
                prop_assert_eq!(ab, haversine_distance(b, a));
                prop_assert!(ab <= haversine_distance(a, c) + haversine_distance(c, b) + 1e-6);
            }

            #[test]
            fn samples_stay_in_sector(
                center in local(),
                az in 0.0..360.0f64,
                bw in 1.0..=360.0f64,
                radius in 1.0..5000.0f64,
                seed: u64,
            ) {
                let s = TowerSector::new("c", center, az, bw, radius).unwrap();
                let q = sample_sector_point(&s, seed, &RegionIndex::default(), DEFAULT_SAMPLING_ATTEMPTS).unwrap();
                prop_assert!(s.contains(q));
                prop_assert!(haversine_distance(center, q) <= radius);
            }

            #[test]
            fn assign_matches_brute_force(
                rings in prop::collection::vec(polygon(), 1..6),
                pts in prop::collection::vec(local(), 1..40),
            ) {
                let regions: Vec<Region> = rings
                    .iter()
                    .enumerate()
                    .map(|(i, r)| Region {
                        region_id: format!("R{i}"),
                        name: String::new(),
                        level: RegionLevel::Municipality,
                        parent_id: None,
                        boundary: vec![r.clone()],
                    })
                    .collect();
                let index = RegionIndex::new(regions).unwrap();
                for p in pts {
                    let want = rings
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| {
                            let (inside, on_edge) = oracle_in_ring(p, r);
                            inside || on_edge
                        })
                        .map(|(i, _)| format!("R{i}"))
                        .min();
                    prop_assert_eq!(assign_region(p, &index, RegionLevel::Municipality), want);
                }
            }
        }
    }
}
