//! Origin-destination matrices, least-squares fits and survey comparison.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::eventlog::DroppedTrip;
use crate::geo::RegionLevel;
use crate::stay::Staypoint;
use crate::trips::Trip;

/// Survey class holding trips that start and end in the same region.
pub const INTRA_CLASS: &str = "intra";
/// Survey class collecting every destination not listed explicitly.
pub const OTHER_CLASS: &str = "other";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OdMatrix {
    pub level: RegionLevel,
    pub counts: BTreeMap<(String, String), u64>,
    pub total: u64,
}

impl OdMatrix {
    pub fn new(level: RegionLevel) -> Self {
        OdMatrix {
            level,
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn add(&mut self, origin: &str, destination: &str, n: u64) {
        *self
            .counts
            .entry((origin.to_owned(), destination.to_owned()))
            .or_default() += n;
        self.total += n;
    }

    pub fn get(&self, origin: &str, destination: &str) -> u64 {
        self.counts
            .get(&(origin.to_owned(), destination.to_owned()))
            .copied()
            .unwrap_or(0)
    }

    fn merge(mut self, other: OdMatrix) -> OdMatrix {
        for ((o, d), n) in other.counts {
            self.add(&o, &d, n);
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct OdBuild {
    pub matrix: OdMatrix,
    pub dropped: Vec<DroppedTrip>,
}

/// Counts trips per (origin region, destination region). Trips whose
/// endpoints have no region at `level` are dropped and reported.
pub fn build_od_matrix(trips: &[Trip], staypoints: &[Staypoint], level: RegionLevel) -> OdBuild {
    let by_id: HashMap<&str, &Staypoint> = staypoints
        .iter()
        .map(|s| (s.staypoint_id.as_str(), s))
        .collect();
    let region = |id: &str| by_id.get(id).and_then(|s| s.region(level));
    let (matrix, mut dropped) = trips
        .par_iter()
        .fold(
            || (OdMatrix::new(level), Vec::new()),
            |(mut m, mut dropped), trip| {
                match (region(&trip.origin), region(&trip.destination)) {
                    (Some(o), Some(d)) => m.add(o, d, 1),
                    _ => dropped.push(DroppedTrip {
                        trip_id: trip.trip_id.clone(),
                        reason: format!("endpoint without {level} region"),
                    }),
                }
                (m, dropped)
            },
        )
        .reduce(
            || (OdMatrix::new(level), Vec::new()),
            |(a, mut da), (b, db)| {
                da.extend(db);
                (a.merge(b), da)
            },
        );
    dropped.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));
    OdBuild { matrix, dropped }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation; 0 when `y` is constant.
    pub r: f64,
    pub r_squared: f64,
    /// Two-sided p-value of the slope; `None` when n < 3 or `y` is constant.
    pub p_value: Option<f64>,
    pub n: usize,
    pub y_constant: bool,
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DegenerateInput(format!(
            "|x| = {n} but |y| = {}",
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 points, got {n}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value".into()));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateInput("x is constant".into()));
    }
    let y_constant = y.iter().all(|&v| v == y[0]);
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (slope, r) = if y_constant {
        (0.0, 0.0)
    } else {
        (sxy / sxx, (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    };
    let intercept = if y_constant { y[0] } else { my - slope * mx };
    let p_value = (n >= 3 && !y_constant).then(|| {
        let df = nf - 2.0;
        let sse = (syy - slope * sxy).max(0.0);
        if sse == 0.0 {
            return 0.0;
        }
        let se = (sse / df / sxx).sqrt();
        let t = slope / se;
        beta_reg(df / 2.0, 0.5, df / (df + t * t))
    });
    Ok(RegressionResult {
        slope,
        intercept,
        r,
        r_squared: r * r,
        p_value,
        n,
        y_constant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDeviation {
    pub class: String,
    pub survey_share: f64,
    pub measured_share: f64,
    pub measured_trips: u64,
    /// `100 · (measured − survey)`.
    pub deviation_pp: f64,
    /// `(measured − survey) / survey`; `None` for a zero survey share.
    pub relative_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareComparison {
    pub origin: Option<String>,
    pub n_trips: u64,
    pub classes: Vec<ClassDeviation>,
}

/// Compares measured destination shares with survey shares.
///
/// Trips in scope are all trips, or those leaving `origin` when given. Each
/// trip falls in [`INTRA_CLASS`] when it stays in its region, in the class
/// named after its destination region, or else in [`OTHER_CLASS`].
pub fn compare_shares(
    od: &OdMatrix,
    survey: &BTreeMap<String, f64>,
    origin: Option<&str>,
) -> Result<ShareComparison> {
    if survey.is_empty() {
        return Err(Error::ClassMismatch("survey has no classes".into()));
    }
    if let Some((c, s)) = survey.iter().find(|(_, s)| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::ClassMismatch(format!("class {c} has share {s}")));
    }
    let sum: f64 = survey.values().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::ClassMismatch(format!("shares sum to {sum}, not 1")));
    }
    let mut measured: BTreeMap<&str, u64> = survey.keys().map(|k| (k.as_str(), 0)).collect();
    let mut n_trips = 0;
    for ((o, d), &n) in &od.counts {
        if origin.is_some_and(|f| f != o) {
            continue;
        }
        let class = if o == d && survey.contains_key(INTRA_CLASS) {
            INTRA_CLASS
        } else if survey.contains_key(d.as_str()) && o != d {
            d.as_str()
        } else if survey.contains_key(OTHER_CLASS) {
            OTHER_CLASS
        } else {
            return Err(Error::ClassMismatch(format!(
                "no class covers trips {o} -> {d}"
            )));
        };
        *measured.get_mut(class).expect("class present") += n;
        n_trips += n;
    }
    if n_trips == 0 {
        return Err(Error::DegenerateInput("no trips in scope".into()));
    }
    let classes = survey
        .iter()
        .map(|(class, &survey_share)| {
            let trips = measured[class.as_str()];
            let share = trips as f64 / n_trips as f64;
            ClassDeviation {
                class: class.clone(),
                survey_share,
                measured_share: share,
                measured_trips: trips,
                deviation_pp: 100.0 * (share - survey_share),
                relative_deviation: (survey_share > 0.0)
                    .then(|| (share - survey_share) / survey_share),
            }
        })
        .collect();
    Ok(ShareComparison {
        origin: origin.map(str::to_owned),
        n_trips,
        classes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPoint {
    pub origin: String,
    pub destination: String,
    pub survey: f64,
    pub measured: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub points: Vec<PairPoint>,
    /// Survey counts on x, measured counts on y.
    pub fit: RegressionResult,
    /// The pair with the largest absolute residual under `fit`.
    pub outlier: Option<(String, String)>,
    pub fit_without_outlier: Option<RegressionResult>,
}

/// Regresses measured OD counts on survey counts for the listed pairs, with
/// and without the worst-fitting pair.
pub fn compare_pairs(od: &OdMatrix, pairs: &[(String, String, f64)]) -> Result<PairComparison> {
    let points: Vec<PairPoint> = pairs
        .iter()
        .map(|(o, d, s)| PairPoint {
            origin: o.clone(),
            destination: d.clone(),
            survey: *s,
            measured: od.get(o, d),
        })
        .collect();
    let x: Vec<f64> = points.iter().map(|p| p.survey).collect();
    let y: Vec<f64> = points.iter().map(|p| p.measured as f64).collect();
    let fit = linear_regression(&x, &y)?;
    let mut outlier = None;
    let mut fit_without_outlier = None;
    if points.len() >= 4 {
        let worst = (0..points.len())
            .map(|i| (i, (y[i] - fit.intercept - fit.slope * x[i]).abs()))
            .fold(
                (0, f64::NEG_INFINITY),
                |best, c| if c.1 > best.1 { c } else { best },
            )
            .0;
        outlier = Some((
            points[worst].origin.clone(),
            points[worst].destination.clone(),
        ));
        let keep = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .enumerate()
                .filter(|(i, _)| *i != worst)
                .map(|(_, &a)| a)
                .collect()
        };
        fit_without_outlier = linear_regression(&keep(&x), &keep(&y)).ok();
    }
    Ok(PairComparison {
        points,
        fit,
        outlier,
        fit_without_outlier,
    })
}

/// Rewrites survey region names through an alias table.
pub fn apply_aliases(pairs: &mut [(String, String, f64)], aliases: &HashMap<String, String>) {
    for (o, d, _) in pairs {
        if let Some(a) = aliases.get(o.as_str()) {
            *o = a.clone();
        }
        if let Some(a) = aliases.get(d.as_str()) {
            *d = a.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::trips::{Mode, Tripleg};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sp(id: &str, muni: Option<&str>) -> Staypoint {
        Staypoint {
            staypoint_id: id.into(),
            user_id: "u".into(),
            location_id: id.into(),
            median: GeoPoint { lat: 0.0, lon: 0.0 },
            t_start: 0,
            t_end: 0,
            region_parish: None,
            region_municipality: muni.map(Into::into),
        }
    }

    fn trip(id: &str, o: &str, d: &str) -> Trip {
        Trip {
            trip_id: id.into(),
            user_id: "u".into(),
            triplegs: vec![Tripleg {
                tripleg_id: id.into(),
                user_id: "u".into(),
                origin_staypoint: o.into(),
                dest_staypoint: d.into(),
                t_start: 0,
                t_end: 1,
                path_length: 0.0,
                avg_speed: 0.0,
                mode: Mode::Car,
            }],
            origin: o.into(),
            destination: d.into(),
            t_start: 0,
            t_end: 1,
        }
    }

    fn sps() -> Vec<Staypoint> {
        vec![
            sp("o", Some("Oeiras")),
            sp("l", Some("Lisboa")),
            sp("x", None),
        ]
    }

    #[test]
    fn od_counts() {
        let trips = vec![
            trip("t1", "o", "l"),
            trip("t2", "o", "l"),
            trip("t3", "o", "o"),
        ];
        let od = build_od_matrix(&trips, &sps(), RegionLevel::Municipality);
        assert_eq!(od.matrix.get("Oeiras", "Lisboa"), 2);
        assert_eq!(od.matrix.get("Oeiras", "Oeiras"), 1);
        assert_eq!(od.matrix.total, 3);

        let mut trips = trips;
        trips.push(trip("t4", "l", "o"));
        trips.push(trip("t5", "x", "o"));
        let od = build_od_matrix(&trips, &sps(), RegionLevel::Municipality);
        assert_eq!(od.matrix.get("Lisboa", "Oeiras"), 1);
        assert_eq!(od.matrix.get("Oeiras", "Lisboa"), 2);
        assert_eq!(od.dropped.len(), 1);
        assert_eq!(od.dropped[0].trip_id, "t5");
        assert_eq!(od.matrix.total, 4);

        let empty = build_od_matrix(&[], &sps(), RegionLevel::Parish);
        assert!(empty.matrix.counts.is_empty());
        assert_eq!(empty.matrix.total, 0);
    }

    #[test]
    fn perfect_line() {
        let r = linear_regression(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert_eq!(r.slope, 2.0);
        assert_eq!(r.intercept, 0.0);
        assert_eq!(r.r, 1.0);
        assert_eq!(r.r_squared, 1.0);
        assert_eq!(r.p_value, Some(0.0));
    }

    #[test]
    fn constant_y() {
        let r = linear_regression(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.r, 0.0);
        assert_eq!(r.intercept, 5.0);
        assert!(r.y_constant);
        assert_eq!(r.p_value, None);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            linear_regression(&[1.0], &[1.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            linear_regression(&[2.0, 2.0], &[1.0, 3.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(linear_regression(&[1.0, 2.0], &[1.0]).is_err());
        let two = linear_regression(&[1.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(two.p_value, None);
        assert_eq!(two.slope, 2.0);
    }

    #[test]
    fn p_value_reference() {
        // Student t CDF on the correlation form of the slope statistic.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = [1.2, 1.9, 3.4, 3.8, 5.6, 5.7, 7.4];
        let r = linear_regression(&x, &y).unwrap();
        let df = 5.0;
        let t = r.r * (df / (1.0 - r.r_squared)).sqrt();
        let tdist = statrs::distribution::StudentsT::new(0.0, 1.0, df).unwrap();
        use statrs::distribution::ContinuousCDF;
        let expected = 2.0 * (1.0 - tdist.cdf(t.abs()));
        assert_abs_diff_eq!(r.p_value.unwrap(), expected, epsilon = 1e-12);

        // Tabulated two-sided tails.
        let p = |t: f64, df: f64| beta_reg(df / 2.0, 0.5, df / (df + t * t));
        assert_abs_diff_eq!(p(2.0, 10.0), 0.07338803477074039, epsilon = 1e-12);
        assert_abs_diff_eq!(p(3.5, 5.0), 0.017284431785293354, epsilon = 1e-12);
    }

    fn od(cells: &[(&str, &str, u64)]) -> OdMatrix {
        let mut m = OdMatrix::new(RegionLevel::Municipality);
        for (o, d, n) in cells {
            m.add(o, d, *n);
        }
        m
    }

    fn survey(s: &[(&str, f64)]) -> BTreeMap<String, f64> {
        s.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn share_deviations() {
        let m = od(&[
            ("O", "O", 60),
            ("O", "L", 25),
            ("O", "A", 10),
            ("O", "B", 5),
            ("L", "L", 99),
        ]);
        let s = survey(&[("intra", 0.573), ("L", 0.269), ("other", 0.158)]);
        let cmp = compare_shares(&m, &s, Some("O")).unwrap();
        assert_eq!(cmp.n_trips, 100);
        let dev: BTreeMap<&str, f64> = cmp
            .classes
            .iter()
            .map(|c| (c.class.as_str(), c.deviation_pp))
            .collect();
        assert_abs_diff_eq!(dev["intra"], 2.7, epsilon = 1e-9);
        assert_abs_diff_eq!(dev["L"], -1.9, epsilon = 1e-9);
        assert_abs_diff_eq!(dev["other"], -0.8, epsilon = 1e-9);

        let exact = survey(&[("intra", 0.6), ("L", 0.25), ("other", 0.15)]);
        let cmp = compare_shares(&m, &exact, Some("O")).unwrap();
        assert!(cmp.classes.iter().all(|c| c.deviation_pp.abs() < 1e-9));
    }

    #[test]
    fn share_errors() {
        let m = od(&[("O", "O", 1), ("O", "L", 1)]);
        let bad_sum = survey(&[("intra", 0.5), ("L", 0.4)]);
        assert!(matches!(
            compare_shares(&m, &bad_sum, None),
            Err(Error::ClassMismatch(_))
        ));
        let uncovered = survey(&[("intra", 0.5), ("A", 0.5)]);
        assert!(matches!(
            compare_shares(&m, &uncovered, None),
            Err(Error::ClassMismatch(_))
        ));
    }

    #[test]
    fn pairs_with_outlier() {
        let m = od(&[
            ("O", "A", 10),
            ("O", "B", 20),
            ("O", "L", 500),
            ("O", "D", 40),
            ("O", "E", 50),
        ]);
        let pairs: Vec<(String, String, f64)> =
            [("A", 1.0), ("B", 2.0), ("L", 3.0), ("D", 4.0), ("E", 5.0)]
                .iter()
                .map(|(d, s)| ("O".to_string(), d.to_string(), *s))
                .collect();
        let cmp = compare_pairs(&m, &pairs).unwrap();
        assert_eq!(cmp.outlier, Some(("O".into(), "L".into())));
        let clean = cmp.fit_without_outlier.unwrap();
        assert_abs_diff_eq!(clean.slope, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(clean.r_squared, 1.0, epsilon = 1e-12);
        assert!(cmp.fit.r_squared < 1.0);
    }

    // Textbook sum formulas, independent of the centered implementation.
    fn oracle(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|a| a * a).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
        (slope, intercept, r)
    }

    fn data() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0..100.0f64, n),
                prop::collection::vec(-100.0..100.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_oracle((x, y) in data()) {
            let r = linear_regression(&x, &y).unwrap();
            let (slope, intercept, pr) = oracle(&x, &y);
            prop_assert!((r.slope - slope).abs() < 1e-9);
            prop_assert!((r.intercept - intercept).abs() < 1e-9);
            prop_assert!((r.r - pr).abs() < 1e-9);
            prop_assert!((r.r_squared - r.r * r.r).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r.r));
        }

        #[test]
        fn shift_and_scale((x, y) in data(), c in -50.0..50.0f64, k in 0.1..10.0f64) {
            let base = linear_regression(&x, &y).unwrap();
            let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
            let s = linear_regression(&x, &shifted).unwrap();
            prop_assert!((s.slope - base.slope).abs() < 1e-9);
            prop_assert!((s.intercept - base.intercept - c).abs() < 1e-9);
            prop_assert!((s.r - base.r).abs() < 1e-9);
            let scaled: Vec<f64> = y.iter().map(|v| v * k).collect();
            let s = linear_regression(&x, &scaled).unwrap();
            prop_assert!((s.slope - k * base.slope).abs() < 1e-9 * k.max(1.0));
            prop_assert!((s.r - base.r).abs() < 1e-9);
        }

        #[test]
        fn od_total_conserved(cells in prop::collection::vec((0usize..3, 0usize..4), 0..60)) {
            let stays: Vec<Staypoint> = (0..4)
                .map(|i| sp(&format!("s{i}"), (i < 3).then(|| ["A", "B", "C"][i])))
                .collect();
            let trips: Vec<Trip> = cells
                .iter()
                .enumerate()
                .map(|(k, (o, d))| trip(&format!("t{k:03}"), &format!("s{o}"), &format!("s{d}")))
                .collect();
            let b = build_od_matrix(&trips, &stays, RegionLevel::Municipality);
            prop_assert_eq!(b.matrix.total, b.matrix.counts.values().sum::<u64>());
            prop_assert_eq!(b.matrix.total as usize + b.dropped.len(), trips.len());
        }
    }
}
