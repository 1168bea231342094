//! Command-line pipeline: one subcommand per stage, file artifacts in a run
//! directory, one TOML configuration.
//!
//! Exit status is 0 on success, 2 when a file cannot be read or written and
//! 1 for every other failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::conformance::{dfg_to_workflow_net, token_replay};
use crate::discovery::{
    annotate_durations, discover_dfg, discover_ocdfg, export_dot, extract_variants, DotModel,
    DotOptions,
};
use crate::error::{Error, Result};
use crate::eventlog::{build_case_log, build_ocel, compute_stats};
use crate::formats::{self, Survey};
use crate::geo::{position_events, RegionIndex, RegionLevel};
use crate::stay::{build_staypoints, StopParams};
use crate::synth::{
    generate_scenario, score_recovery, write_scenario, GroundTruth, ScenarioConfig,
};
use crate::trips::{build_trips, ModeThresholds, DEFAULT_GAP_THRESHOLD};
use crate::validation::{apply_aliases, build_od_matrix, compare_pairs, compare_shares};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Input CDR table; unset means synthetic data generated into the run directory.
    pub cdr: Option<PathBuf>,
    pub towers: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub survey: Option<PathBuf>,
    /// `alias,region_id` table applied to survey region names.
    pub aliases: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripSection {
    pub gap_threshold: i64,
}

impl Default for TripSection {
    fn default() -> Self {
        TripSection {
            gap_threshold: DEFAULT_GAP_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogSection {
    pub level: RegionLevel,
    pub ocel: bool,
}

impl Default for LogSection {
    fn default() -> Self {
        LogSection {
            level: RegionLevel::Municipality,
            ocel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverSection {
    pub top_k: usize,
    pub min_arc_frequency: u64,
}

impl Default for DiscoverSection {
    fn default() -> Self {
        DiscoverSection {
            top_k: 10,
            min_arc_frequency: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    /// Restricts share comparison to trips leaving this region.
    pub origin: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides `synth.seed` when set.
    pub seed: Option<u64>,
    pub paths: Paths,
    pub stays: StopParams,
    pub trips: TripSection,
    pub modes: ModeThresholds,
    pub log: LogSection,
    pub discover: DiscoverSection,
    pub validate: ValidateSection,
    pub synth: ScenarioConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |section: &str, e: Error| Error::InvalidConfig(format!("[{section}] {e}"));
        self.stays.validate().map_err(|e| field("stays", e))?;
        self.modes.validate().map_err(|e| field("modes", e))?;
        if self.trips.gap_threshold < 0 {
            return Err(Error::InvalidConfig(
                "[trips] gap_threshold must be >= 0".into(),
            ));
        }
        if self.discover.top_k == 0 {
            return Err(Error::InvalidConfig("[discover] top_k must be >= 1".into()));
        }
        Ok(())
    }

    fn scenario(&self) -> ScenarioConfig {
        let mut s = self.synth.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }

    /// Hex SHA-256 of the effective configuration, excluding the run directory.
    pub fn stamp(&self) -> String {
        let mut c = self.clone();
        c.paths.out_dir = None;
        c.synth.seed = self.scenario().seed;
        c.seed = None;
        let text = toml::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Stage {
    /// Generate a synthetic scenario: cdr.csv, towers.csv, regions.geojson, ground_truth.json.
    Synth,
    /// Pseudo-locations inside tower sectors: positioned.csv.
    Position,
    /// Staypoints with destination labels and regions: staypoints.csv.
    Stays,
    /// Mode-labeled triplegs and trips: triplegs.csv, trips.csv.
    Trips,
    /// Case-centric and object-centric logs: case_log.csv, ocel.json, log_stats.json.
    Log,
    /// DFG, OC-DFG, variants and DOT: dfg.json, dfg.dot, variants.csv, ocdfg.json, ocdfg.dot.
    Discover,
    /// Workflow net and token replay: petri_net.json, fitness.json, fitness_traces.csv.
    Conform,
    /// OD matrix, survey comparison and recovery scores: od_matrix.csv, validation.json.
    Validate,
    /// Every stage in order; synth runs only when paths.cdr is unset.
    All,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Position => "position",
            Stage::Stays => "stays",
            Stage::Trips => "trips",
            Stage::Log => "log",
            Stage::Discover => "discover",
            Stage::Conform => "conform",
            Stage::Validate => "validate",
            Stage::All => "all",
        }
    }
}

/// Mobility process mining pipeline.
#[derive(Debug, Parser)]
#[command(name = "mobility-pm", version)]
pub struct Cli {
    /// TOML configuration file (defaults below).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory for all artifacts [default: paths.out_dir or ./run].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Region level for event logs and OD matrices [default: municipality].
    #[arg(long, global = true)]
    pub level: Option<RegionLevel>,
    /// Number of variants written to variants.csv [default: 10].
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    /// Hide DOT arcs below this frequency [default: 0].
    #[arg(long, global = true)]
    pub min_arc_freq: Option<u64>,
    /// Worker threads [default: all cores]. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Scenario seed for `synth` [default: 1].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overwrite existing artifacts and a mismatching run stamp.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub stage: Stage,
}

/// Resolved configuration plus run-directory bookkeeping.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub force: bool,
}

const STAMP_FILE: &str = "run_stamp.txt";

impl Run {
    pub fn new(config: PipelineConfig, out: PathBuf, force: bool) -> Result<Self> {
        config.validate()?;
        Ok(Run { config, out, force })
    }

    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(level) = cli.level {
            config.log.level = level;
        }
        if let Some(k) = cli.top_k {
            config.discover.top_k = k;
        }
        if let Some(f) = cli.min_arc_freq {
            config.discover.min_arc_frequency = f;
        }
        if let Some(seed) = cli.seed {
            config.seed = Some(seed);
        }
        let out = cli
            .out
            .clone()
            .or_else(|| config.paths.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("run"));
        Run::new(config, out, cli.force)
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input(&self, configured: &Option<PathBuf>, default: &str) -> PathBuf {
        configured.clone().unwrap_or_else(|| self.artifact(default))
    }

    fn require(&self, stage: &'static str, name: &str, needs: &'static str) -> Result<PathBuf> {
        let p = self.artifact(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingDependency {
                stage,
                artifact: p,
                needs,
            })
        }
    }

    // Destination path for a new artifact, refusing to clobber without --force.
    fn output(&self, name: &str) -> Result<PathBuf> {
        let p = self.artifact(name);
        if p.exists() && !self.force {
            return Err(Error::ArtifactExists(p));
        }
        Ok(p)
    }

    fn check_stamp(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        let path = self.artifact(STAMP_FILE);
        let stamp = self.config.stamp();
        match std::fs::read_to_string(&path) {
            Ok(old) if old.trim() == stamp => return Ok(()),
            Ok(old) if !self.force => {
                return Err(Error::InvalidConfig(format!(
                    "{} was produced with config {}, current config is {stamp}",
                    self.out.display(),
                    old.trim()
                )))
            }
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(&path, e)),
        }
        formats::write_text_file(&path, &format!("{stamp}\n"))
    }

    fn synthetic(&self) -> bool {
        self.config.paths.cdr.is_none()
    }

    pub fn run(&self, stage: Stage) -> std::result::Result<(), (Stage, Error)> {
        self.check_stamp().map_err(|e| (stage, e))?;
        if stage == Stage::All {
            let mut stages = vec![];
            if self.synthetic() {
                stages.push(Stage::Synth);
            }
            stages.extend([
                Stage::Position,
                Stage::Stays,
                Stage::Trips,
                Stage::Log,
                Stage::Discover,
                Stage::Conform,
                Stage::Validate,
            ]);
            for s in stages {
                self.run_one(s).map_err(|e| (s, e))?;
            }
            return Ok(());
        }
        self.run_one(stage).map_err(|e| (stage, e))
    }

    fn run_one(&self, stage: Stage) -> Result<()> {
        log::info!("stage {}", stage.name());
        match stage {
            Stage::Synth => self.synth(),
            Stage::Position => self.position(),
            Stage::Stays => self.stays(),
            Stage::Trips => self.trips(),
            Stage::Log => self.log(),
            Stage::Discover => self.discover(),
            Stage::Conform => self.conform(),
            Stage::Validate => self.validate(),
            Stage::All => unreachable!("expanded by run"),
        }
    }

    fn regions(&self) -> Result<RegionIndex> {
        let path = self.input(&self.config.paths.regions, "regions.geojson");
        let regions = formats::read_regions(&path)?;
        RegionIndex::new(regions).map_err(|e| Error::parse(&path, e))
    }

    fn synth(&self) -> Result<()> {
        let scenario = generate_scenario(&self.config.scenario(), &self.config.modes)?;
        for name in [
            "cdr.csv",
            "towers.csv",
            "regions.geojson",
            "ground_truth.json",
        ] {
            self.output(name)?;
        }
        write_scenario(&self.out, &scenario)?;
        log::info!(
            "{} agents, {} events, {} true trips",
            scenario.truth.agents.len(),
            scenario.events.len(),
            scenario.truth.n_trips()
        );
        Ok(())
    }

    fn position(&self) -> Result<()> {
        let p = &self.config.paths;
        let cdr = formats::read_cdr(&self.input(&p.cdr, "cdr.csv"))?;
        let towers = formats::read_towers(&self.input(&p.towers, "towers.csv"))?;
        let land = self.regions()?;
        let positioned = position_events(&cdr, &towers, &land)?;
        formats::write_positioned(&self.output("positioned.csv")?, &positioned)
    }

    fn stays(&self) -> Result<()> {
        let events =
            formats::read_positioned(&self.require("stays", "positioned.csv", "position")?)?;
        let regions = self.regions()?;
        let staypoints = build_staypoints(&events, &self.config.stays, &regions)?;
        formats::write_staypoints(&self.output("staypoints.csv")?, &staypoints)
    }

    fn trips(&self) -> Result<()> {
        let sps = formats::read_staypoints(&self.require("trips", "staypoints.csv", "stays")?)?;
        let events =
            formats::read_positioned(&self.require("trips", "positioned.csv", "position")?)?;
        let (_, trips) = build_trips(
            &sps,
            &events,
            &self.config.modes,
            self.config.trips.gap_threshold,
        )?;
        formats::write_triplegs(&self.output("triplegs.csv")?, &trips)?;
        formats::write_trips(&self.output("trips.csv")?, &trips)
    }

    fn load_trips(
        &self,
        stage: &'static str,
    ) -> Result<(Vec<crate::stay::Staypoint>, Vec<crate::trips::Trip>)> {
        let sps = formats::read_staypoints(&self.require(stage, "staypoints.csv", "stays")?)?;
        let trips = formats::read_trips(
            &self.require(stage, "triplegs.csv", "trips")?,
            &self.require(stage, "trips.csv", "trips")?,
        )?;
        Ok((sps, trips))
    }

    fn log(&self) -> Result<()> {
        let (sps, trips) = self.load_trips("log")?;
        let level = self.config.log.level;
        let case = build_case_log(&trips, &sps, level);
        formats::write_case_log(&self.output("case_log.csv")?, &case.log)?;
        let mut dropped = case.dropped;
        let mut ocel_stats = None;
        if self.config.log.ocel {
            let ocel = build_ocel(&trips, &sps, level)?;
            formats::write_ocel(&self.output("ocel.json")?, &ocel.log)?;
            ocel_stats = Some(compute_stats(&ocel.log));
            dropped.extend(ocel.dropped);
            dropped.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));
            dropped.dedup();
        }
        formats::write_log_stats(
            &self.output("log_stats.json")?,
            &compute_stats(&case.log),
            ocel_stats.as_ref(),
        )?;
        formats::write_dropped(&self.output("dropped_trips.csv")?, &dropped)
    }

    fn discover(&self) -> Result<()> {
        let log = formats::read_case_log(&self.require("discover", "case_log.csv", "log")?)?;
        let dfg = annotate_durations(&discover_dfg(&log)?, &log)?;
        let opts = DotOptions {
            show_frequency: true,
            show_duration: true,
            min_arc_frequency: self.config.discover.min_arc_frequency,
        };
        formats::write_dfg(&self.output("dfg.json")?, &dfg)?;
        formats::write_text_file(
            &self.output("dfg.dot")?,
            &export_dot(DotModel::Dfg(&dfg), &opts),
        )?;
        let variants = extract_variants(&log, Some(self.config.discover.top_k))?;
        formats::write_variants(&self.output("variants.csv")?, &variants)?;
        if self.config.log.ocel {
            let ocel = formats::read_ocel(&self.require("discover", "ocel.json", "log")?)?;
            let oc = discover_ocdfg(&ocel)?;
            formats::write_ocdfg(&self.output("ocdfg.json")?, &oc)?;
            formats::write_text_file(
                &self.output("ocdfg.dot")?,
                &export_dot(DotModel::OcDfg(&oc), &opts),
            )?;
        }
        Ok(())
    }

    fn conform(&self) -> Result<()> {
        let dfg = formats::read_dfg(&self.require("conform", "dfg.json", "discover")?)?;
        let log = formats::read_case_log(&self.require("conform", "case_log.csv", "log")?)?;
        let net = dfg_to_workflow_net(&dfg)?;
        let report = token_replay(&net, &log);
        formats::write_petri_net(&self.output("petri_net.json")?, &net)?;
        formats::write_fitness(
            &self.output("fitness.json")?,
            &self.output("fitness_traces.csv")?,
            &report,
        )?;
        log::info!(
            "fitness {:.4} over {} traces",
            report.fitness,
            report.n_traces
        );
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let (sps, trips) = self.load_trips("validate")?;
        let level = self.config.log.level;
        let od = build_od_matrix(&trips, &sps, level);
        formats::write_od_matrix(&self.output("od_matrix.csv")?, &od.matrix)?;

        let mut shares = None;
        let mut pairs = None;
        if let Some(path) = &self.config.paths.survey {
            match formats::read_survey(path)? {
                Survey::Shares(s) => {
                    shares = Some(compare_shares(
                        &od.matrix,
                        &s,
                        self.config.validate.origin.as_deref(),
                    )?);
                }
                Survey::Pairs(mut p) => {
                    if let Some(a) = &self.config.paths.aliases {
                        apply_aliases(&mut p, &formats::read_aliases(a)?);
                    }
                    pairs = Some(compare_pairs(&od.matrix, &p)?);
                }
            }
        }
        let report = json!({
            "level": level,
            "n_trips": trips.len(),
            "n_dropped": od.dropped.len(),
            "od_total": od.matrix.total,
            "shares": shares,
            "pairs": pairs,
        });
        formats::write_json(&self.output("validation.json")?, &report)?;

        let truth_path = self.input(&self.config.paths.ground_truth, "ground_truth.json");
        if truth_path.exists() {
            let truth: GroundTruth = formats::read_json(&truth_path)?;
            let rec = score_recovery(&truth, &sps, &trips, level, self.config.stays.r1)?;
            formats::write_json(&self.output("recovery.json")?, &rec)?;
        }
        Ok(())
    }
}

fn default_config_help() -> String {
    let text = toml::to_string(&PipelineConfig::default()).unwrap_or_default();
    format!("Configuration file with every default:\n\n{text}")
}

/// Parses arguments, runs the requested stage and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = Cli::command()
        .after_long_help(default_config_help())
        .get_matches_from(args);
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let run = match Run::from_cli(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error [config]: {e}");
            return exit_code(&e);
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run.run(cli.stage)),
            Err(e) => {
                eprintln!("error [config]: cannot start {n} threads: {e}");
                return ExitCode::from(1);
            }
        },
        None => run.run(cli.stage),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, e)) => {
            eprintln!("error [{}]: {e}", stage.name());
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> ExitCode {
    if e.is_io() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

/// File names each stage writes, keyed by stage name. `validate` also
/// writes `recovery.json` when ground truth is available.
pub fn artifacts(stage: Stage) -> BTreeMap<&'static str, &'static [&'static str]> {
    let all: [(&str, &[&str]); 8] = [
        (
            "synth",
            &[
                "cdr.csv",
                "towers.csv",
                "regions.geojson",
                "ground_truth.json",
            ],
        ),
        ("position", &["positioned.csv"]),
        ("stays", &["staypoints.csv"]),
        ("trips", &["triplegs.csv", "trips.csv"]),
        (
            "log",
            &[
                "case_log.csv",
                "ocel.json",
                "log_stats.json",
                "dropped_trips.csv",
            ],
        ),
        (
            "discover",
            &[
                "dfg.json",
                "dfg.dot",
                "variants.csv",
                "ocdfg.json",
                "ocdfg.dot",
            ],
        ),
        (
            "conform",
            &["petri_net.json", "fitness.json", "fitness_traces.csv"],
        ),
        ("validate", &["od_matrix.csv", "validation.json"]),
    ];
    all.into_iter()
        .filter(|(name, _)| stage == Stage::All || *name == stage.name())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_roundtrips_through_toml() {
        let text = toml::to_string(&PipelineConfig::default()).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, PipelineConfig::default());
    }

    #[test]
    fn partial_config() {
        let cfg: PipelineConfig =
            toml::from_str("seed = 7\n[stays]\nr1 = 250.0\n[log]\nlevel = \"parish\"\n").unwrap();
        assert_eq!(cfg.stays.r1, 250.0);
        assert_eq!(cfg.stays.r2, StopParams::default().r2);
        assert_eq!(cfg.log.level, RegionLevel::Parish);
        assert_eq!(cfg.scenario().seed, 7);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(toml::from_str::<PipelineConfig>("[stays]\nradius = 3\n").is_err());
    }

    #[test]
    fn invalid_values_name_section() {
        let mut cfg = PipelineConfig::default();
        cfg.stays.r1 = -1.0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("[stays]"), "{err}");
    }

    #[test]
    fn stamp_tracks_parameters_not_location() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.paths.out_dir = Some("elsewhere".into());
        assert_eq!(a.stamp(), b.stamp());
        b.discover.top_k = 3;
        assert_ne!(a.stamp(), b.stamp());
        let mut c = a.clone();
        c.seed = Some(1);
        assert_eq!(a.stamp(), c.stamp());
    }

    #[test]
    fn artifact_table() {
        assert_eq!(artifacts(Stage::All).len(), 8);
        assert_eq!(artifacts(Stage::Conform)["conform"].len(), 3);
    }
}
