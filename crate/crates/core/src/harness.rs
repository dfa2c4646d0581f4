//! Config-driven batch runs and table-shaped reports.
//!
//! `run_batch` expands every condition × trial index into a seeded trial,
//! writes one JSONL log per trial plus `manifest.json`. `analyze` reads the
//! logs back (never in-memory state) and writes the report CSVs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condition::{ConditionSpec, Feedback, SpeedClass};
use crate::error::{Error, Result};
use crate::flightworld::{run_trial, ScenarioSpec, OPERATOR_XY};
use crate::geometry::Vec2;
use crate::inference::{paired_t_test, rm_anova_two_way, AnovaTable, RmDataset, ALPHA};
use crate::kinemetrics::{mean_tracking_distance, motion_summary, MotionSummary, Trajectory};
use crate::landing_metrics::{
    containment_diameter, group_stats, landing_axis_regression, CenterMode, LandingRecord,
};
use crate::policies::{
    CombinedPolicy, CombinedPolicyParams, HeadParams, HeadTracker, PadPolicy, TactilePolicy,
    TactilePolicyParams, VisualPolicy, VisualPolicyParams,
};
use crate::tactor_array::PadGeometry;
use crate::trial_log::{DroneOutcome, TrialLog};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOG_SUBDIR: &str = "logs";

/// Synthetic-operator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub visual: VisualPolicyParams,
    pub tactile: TactilePolicyParams,
    pub handover_activation: f64,
    pub head: HeadParams,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let c = CombinedPolicyParams::default();
        PolicyConfig {
            visual: c.visual,
            tactile: c.tactile,
            handover_activation: c.handover_activation,
            head: HeadParams::default(),
        }
    }
}

impl PolicyConfig {
    pub fn combined(&self) -> CombinedPolicyParams {
        CombinedPolicyParams {
            visual: self.visual.clone(),
            tactile: self.tactile.clone(),
            handover_activation: self.handover_activation,
        }
    }

    /// One controller per pad for the given feedback condition.
    pub fn build(
        &self,
        condition: &ConditionSpec,
        geometry: &PadGeometry,
    ) -> Vec<Box<dyn PadPolicy>> {
        (0..condition.drone_count)
            .map(|_| -> Box<dyn PadPolicy> {
                match condition.feedback {
                    Feedback::Visual => Box::new(VisualPolicy::new(self.visual.clone())),
                    Feedback::Tactile => {
                        Box::new(TactilePolicy::new(self.tactile.clone(), geometry.clone()))
                    }
                    Feedback::VisualTactile => {
                        Box::new(CombinedPolicy::new(self.combined(), geometry.clone()))
                    }
                }
            })
            .collect()
    }

    /// Gaze model; only conditions with vision have one.
    pub fn head_tracker(&self, condition: &ConditionSpec) -> Option<HeadTracker> {
        condition.feedback.sees_drone().then(|| {
            HeadTracker::new(
                Vec2::new(OPERATOR_XY[0], OPERATOR_XY[1]),
                self.visual.attention_dwell,
                self.head.clone(),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionEntry {
    pub feedback: Feedback,
    pub speed: SpeedClass,
    #[serde(default = "one")]
    pub drones: u8,
    /// Overrides the top-level policy parameters for this condition.
    #[serde(default)]
    pub policies: Option<PolicyConfig>,
}

fn one() -> u8 {
    1
}

impl ConditionEntry {
    pub fn spec(&self) -> ConditionSpec {
        ConditionSpec {
            feedback: self.feedback,
            speed_class: self.speed,
            drone_count: self.drones,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Odd moving-average window applied before differentiation.
    pub smoothing_window: Option<usize>,
    pub containment_quantile: f64,
    pub center_mode: CenterMode,
    /// Fail on corrupt log lines instead of skipping them.
    pub strict: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            smoothing_window: None,
            containment_quantile: 0.9,
            center_mode: CenterMode::PlateCenter,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: ScenarioSpec,
    pub conditions: Vec<ConditionEntry>,
    #[serde(default = "default_trials")]
    pub trials_per_condition: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub policies: PolicyConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub analysis: AnalysisOptions,
}

fn default_trials() -> usize {
    5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    /// The 6-condition protocol for the given drone count.
    pub fn protocol(drone_count: u8) -> Self {
        ExperimentConfig {
            scenario: ScenarioSpec::default(),
            conditions: ConditionSpec::protocol(drone_count)
                .into_iter()
                .map(|c| ConditionEntry {
                    feedback: c.feedback,
                    speed: c.speed_class,
                    drones: c.drone_count,
                    policies: None,
                })
                .collect(),
            trials_per_condition: default_trials(),
            base_seed: 0,
            policies: PolicyConfig::default(),
            output_dir: default_output_dir(),
            analysis: AnalysisOptions::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials_per_condition == 0 {
            return Err(Error::Config("trials_per_condition must be >= 1".into()));
        }
        if self.conditions.is_empty() {
            return Err(Error::Config("condition list is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.conditions {
            let spec = c.spec();
            spec.validate()?;
            if !seen.insert(spec) {
                return Err(Error::Config(format!("duplicate condition {spec}")));
            }
            if let Some(p) = &c.policies {
                p.combined().validate()?;
            }
            self.scenario.for_condition(&spec).validate()?;
        }
        self.policies.combined().validate()?;
        let a = &self.analysis;
        if !(a.containment_quantile > 0.0 && a.containment_quantile <= 1.0) {
            return Err(Error::Config(
                "containment_quantile must lie in (0, 1]".into(),
            ));
        }
        if let Some(w) = a.smoothing_window {
            if w % 2 == 0 {
                return Err(Error::Config("smoothing_window must be odd".into()));
            }
        }
        Ok(())
    }

    fn policies_for<'a>(&'a self, entry: &'a ConditionEntry) -> &'a PolicyConfig {
        entry.policies.as_ref().unwrap_or(&self.policies)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable numeric code of a condition: `100·feedback + 10·speed + drones`
/// with V=1, T=2, VT=3 and slow=1, fast=2.
pub fn condition_code(c: &ConditionSpec) -> u64 {
    let f = match c.feedback {
        Feedback::Visual => 1,
        Feedback::Tactile => 2,
        Feedback::VisualTactile => 3,
    };
    let s = match c.speed_class {
        SpeedClass::Slow => 1,
        SpeedClass::Fast => 2,
    };
    100 * f + 10 * s + c.drone_count as u64
}

/// `splitmix64(splitmix64(splitmix64(base) ^ code) ^ index)`.
pub fn trial_seed(base_seed: u64, condition: &ConditionSpec, index: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ condition_code(condition)) ^ index as u64)
}

pub fn log_file_name(condition: &ConditionSpec, index: usize) -> String {
    format!("{condition}_t{index:03}.jsonl")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestOutcome {
    pub drone: usize,
    pub pad: usize,
    pub disp_x: f64,
    pub disp_y: f64,
    pub displacement_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub condition: ConditionSpec,
    pub index: usize,
    pub seed: u64,
    pub file: String,
    pub timed_out: bool,
    pub outcomes: Vec<ManifestOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Unix seconds; the only field outside the determinism contract.
    pub generated_at: u64,
    pub base_seed: u64,
    pub trials: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

fn manifest_entry(
    condition: ConditionSpec,
    index: usize,
    seed: u64,
    file: String,
    log: &TrialLog,
) -> ManifestEntry {
    ManifestEntry {
        condition,
        index,
        seed,
        file,
        timed_out: log.timed_out(),
        outcomes: log
            .outcomes()
            .into_iter()
            .flatten()
            .map(|o: DroneOutcome| ManifestOutcome {
                drone: o.drone,
                pad: o.pad,
                disp_x: o.disp_x,
                disp_y: o.disp_y,
                displacement_mm: o.displacement().norm() * 1000.0,
            })
            .collect(),
    }
}

/// Run one configured trial in memory.
pub fn simulate_trial(
    config: &ExperimentConfig,
    entry: &ConditionEntry,
    index: usize,
) -> Result<TrialLog> {
    let condition = entry.spec();
    let seed = trial_seed(config.base_seed, &condition, index);
    let scenario = config.scenario.for_condition(&condition);
    let geometry = scenario.geometry()?;
    let policy_cfg = config.policies_for(entry);
    let mut policies = policy_cfg.build(&condition, &geometry);
    let mut head = policy_cfg.head_tracker(&condition);
    run_trial(&scenario, &condition, &mut policies, head.as_mut(), seed)
}

/// Run every condition × trial, writing logs under `out/logs` and the
/// manifest at `out/manifest.json`. `workers = 0` uses all cores.
pub fn run_batch(config: &ExperimentConfig, out: &Path, workers: usize) -> Result<Manifest> {
    config.validate()?;
    let log_dir = out.join(LOG_SUBDIR);
    fs::create_dir_all(&log_dir).map_err(|e| Error::io(&log_dir, e))?;

    let jobs: Vec<(&ConditionEntry, usize)> = config
        .conditions
        .iter()
        .flat_map(|c| (0..config.trials_per_condition).map(move |i| (c, i)))
        .collect();

    let run_job = |&(entry, index): &(&ConditionEntry, usize)| -> Result<ManifestEntry> {
        let condition = entry.spec();
        let log = simulate_trial(config, entry, index)?;
        let file = log_file_name(&condition, index);
        log.save(&log_dir.join(&file))?;
        if log.timed_out() {
            log::warn!("{condition} trial {index} timed out");
        }
        Ok(manifest_entry(
            condition,
            index,
            log.header.seed,
            format!("{LOG_SUBDIR}/{file}"),
            &log,
        ))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let trials = pool.install(|| jobs.par_iter().map(run_job).collect::<Result<Vec<_>>>())?;

    let manifest = Manifest {
        generated_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        base_seed: config.base_seed,
        trials,
    };
    let path = out.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Which hand holds pad `pad` in a trial with `drones` drones.
pub fn hand_label(drones: u8, pad: usize) -> &'static str {
    match (drones, pad) {
        (1, _) => "right",
        (_, 0) => "left",
        _ => "right",
    }
}

/// Log files under `dir` (or `dir/logs` when present), sorted by name.
pub fn find_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    let nested = dir.join(LOG_SUBDIR);
    let dir = if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    };
    let mut out = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Order used for every report: drone count, feedback, speed.
fn report_key(c: &ConditionSpec) -> (u8, Feedback, SpeedClass) {
    (c.drone_count, c.feedback, c.speed_class)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    drones: u8,
    feedback: Feedback,
    speed: SpeedClass,
    pad: usize,
}

impl GroupKey {
    fn new(c: &ConditionSpec, pad: usize) -> Self {
        let (drones, feedback, speed) = report_key(c);
        GroupKey {
            drones,
            feedback,
            speed,
            pad,
        }
    }

    fn condition(&self) -> ConditionSpec {
        ConditionSpec {
            feedback: self.feedback,
            speed_class: self.speed,
            drone_count: self.drones,
        }
    }

    fn hand(&self) -> &'static str {
        hand_label(self.drones, self.pad)
    }
}

/// Paths of every report written by [`analyze`].
pub const REPORT_FILES: [&str; 7] = [
    "table1_hand_kinematics.csv",
    "table2_head_kinematics.csv",
    "table3_displacement.csv",
    "table4_diameters.csv",
    "anova_report.csv",
    "ttests.csv",
    "regression.csv",
];

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub trials: usize,
    pub anova: Option<AnovaTable>,
    /// Human-readable summary (also written to `anova_report.txt`).
    pub text: String,
}

struct Loaded {
    log: TrialLog,
    index: usize,
}

/// Trial index from a `<condition>_tNNN.jsonl` name; falls back to the
/// order of appearance within the condition.
fn trial_index(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_str()?;
    stem.rsplit_once("_t")?.1.parse().ok()
}

fn load_all(paths: &[PathBuf], strict: bool) -> Result<Vec<Loaded>> {
    let mut per_condition: BTreeMap<ConditionSpec, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let log = TrialLog::load(p, strict)?;
        let counter = per_condition.entry(log.header.condition).or_default();
        let index = trial_index(p).unwrap_or(*counter);
        *counter += 1;
        out.push(Loaded { log, index });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_fields(m: &MotionSummary) -> [String; 4] {
    [
        m.mean_speed.to_string(),
        m.mean_accel.to_string(),
        m.mean_jerk.to_string(),
        m.mean_snap.to_string(),
    ]
}

fn average(summaries: &[MotionSummary]) -> MotionSummary {
    let n = summaries.len() as f64;
    let mut m = MotionSummary::default();
    for s in summaries {
        m.mean_speed += s.mean_speed / n;
        m.mean_accel += s.mean_accel / n;
        m.mean_jerk += s.mean_jerk / n;
        m.mean_snap += s.mean_snap / n;
    }
    m
}

fn landing_records(trials: &[Loaded]) -> BTreeMap<GroupKey, Vec<(usize, LandingRecord)>> {
    let mut groups: BTreeMap<GroupKey, Vec<(usize, LandingRecord)>> = BTreeMap::new();
    for t in trials {
        let c = t.log.header.condition;
        for o in t.log.outcomes().into_iter().flatten() {
            groups.entry(GroupKey::new(&c, o.pad)).or_default().push((
                t.index,
                LandingRecord {
                    condition: c,
                    pad: o.pad,
                    displacement: o.displacement(),
                },
            ));
        }
    }
    for v in groups.values_mut() {
        v.sort_by_key(|(i, _)| *i);
    }
    groups
}

/// Analyze every log in `log_dir` and write the report files into `out`.
pub fn analyze(log_dir: &Path, out: &Path, options: &AnalysisOptions) -> Result<AnalysisReport> {
    let paths = find_logs(log_dir)?;
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no trial logs under {}",
            log_dir.display()
        )));
    }
    let mut trials = load_all(&paths, options.strict)?;
    trials.sort_by_key(|t| (report_key(&t.log.header.condition), t.index));
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut text = String::new();
    writeln!(text, "{} trial logs analysed", trials.len()).ok();

    write_table1(&trials, out, options)?;
    write_table2(&trials, out, options)?;
    let groups = landing_records(&trials);
    write_table3(&groups, out)?;
    write_table4(&groups, out, options)?;
    write_regression(&groups, out)?;
    write_ttests(&groups, out)?;
    let anova = write_anova(&trials, out, &mut text)?;

    let txt = out.join("anova_report.txt");
    fs::write(&txt, &text).map_err(|e| Error::io(&txt, e))?;
    Ok(AnalysisReport {
        trials: trials.len(),
        anova,
        text,
    })
}

fn csv_writer(out: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    let path = out.join(name);
    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn write_table1(trials: &[Loaded], out: &Path, options: &AnalysisOptions) -> Result<()> {
    let mut groups: BTreeMap<GroupKey, (Vec<MotionSummary>, Vec<f64>)> = BTreeMap::new();
    for t in trials {
        let log = &t.log;
        let c = log.header.condition;
        for pad in 0..log.drone_count() {
            let n = log.landing_stage_len(pad);
            let pad_track = log.pad_track(pad);
            let drone_track = log.drone_track(pad);
            let traj =
                Trajectory::new(log.header.dt, pad_track[..n.min(pad_track.len())].to_vec())?;
            let entry = groups.entry(GroupKey::new(&c, pad)).or_default();
            match motion_summary(&traj, options.smoothing_window) {
                Ok(s) => entry.0.push(s),
                Err(e) => log::warn!("{c} trial {} pad {pad}: {e}", t.index),
            }
            let k = n.min(drone_track.len()).min(pad_track.len());
            let d: Vec<Vec2> = drone_track[..k].iter().map(|p| p.xy()).collect();
            let p: Vec<Vec2> = pad_track[..k].iter().map(|p| p.xy()).collect();
            if let Ok(dist) = mean_tracking_distance(&d, &p) {
                entry.1.push(dist);
            }
        }
    }
    let mut w = csv_writer(out, REPORT_FILES[0])?;
    w.write_record([
        "drones",
        "feedback",
        "speed",
        "hand",
        "n",
        "velocity_m_s",
        "acceleration_m_s2",
        "jerk_m_s3",
        "snap_m_s4",
        "tracking_distance_mm",
    ])?;
    for (k, (summaries, dists)) in &groups {
        if summaries.is_empty() {
            continue;
        }
        let m = average(summaries);
        let track =
            (!dists.is_empty()).then(|| 1000.0 * dists.iter().sum::<f64>() / dists.len() as f64);
        let mut row = vec![
            k.drones.to_string(),
            k.feedback.code().to_string(),
            k.speed.code().to_string(),
            k.hand().to_string(),
            summaries.len().to_string(),
        ];
        row.extend(summary_fields(&m));
        row.push(fmt_opt(track));
        w.write_record(&row)?;
    }
    w.flush()
        .map_err(|e| Error::io(out.join(REPORT_FILES[0]), e))
}

fn write_table2(trials: &[Loaded], out: &Path, options: &AnalysisOptions) -> Result<()> {
    let mut groups: BTreeMap<(u8, Feedback, SpeedClass), Vec<MotionSummary>> = BTreeMap::new();
    for t in trials.iter().filter(|t| t.log.drone_count() == 2) {
        let Some(track) = t.log.head_track() else {
            continue;
        };
        let n = (0..2)
            .map(|d| t.log.landing_stage_len(d))
            .max()
            .unwrap_or(0)
            .min(track.len());
        let traj = Trajectory::new(t.log.header.dt, track[..n].to_vec())?;
        match motion_summary(&traj, options.smoothing_window) {
            Ok(s) => groups
                .entry(report_key(&t.log.header.condition))
                .or_default()
                .push(s),
            Err(e) => log::warn!("{} trial {} head: {e}", t.log.header.condition, t.index),
        }
    }
    let mut w = csv_writer(out, REPORT_FILES[1])?;
    w.write_record([
        "drones",
        "feedback",
        "speed",
        "n",
        "velocity_m_s",
        "acceleration_m_s2",
        "jerk_m_s3",
        "snap_m_s4",
    ])?;
    for ((drones, f, s), summaries) in &groups {
        let m = average(summaries);
        let mut row = vec![
            drones.to_string(),
            f.code().to_string(),
            s.code().to_string(),
            summaries.len().to_string(),
        ];
        row.extend(summary_fields(&m));
        w.write_record(&row)?;
    }
    w.flush()
        .map_err(|e| Error::io(out.join(REPORT_FILES[1]), e))
}

type Groups = BTreeMap<GroupKey, Vec<(usize, LandingRecord)>>;

fn records_of(v: &[(usize, LandingRecord)]) -> Vec<LandingRecord> {
    v.iter().map(|(_, r)| r.clone()).collect()
}

fn group_prefix(k: &GroupKey) -> Vec<String> {
    vec![
        k.drones.to_string(),
        k.feedback.code().to_string(),
        k.speed.code().to_string(),
        k.hand().to_string(),
    ]
}

fn write_table3(groups: &Groups, out: &Path) -> Result<()> {
    let mut w = csv_writer(out, REPORT_FILES[2])?;
    w.write_record([
        "drones", "feedback", "speed", "hand", "n", "mean_mm", "std_mm", "max_mm",
    ])?;
    for (k, v) in groups {
        let s = group_stats(&records_of(v))?;
        let mut row = group_prefix(k);
        row.extend([
            s.n.to_string(),
            s.mean.to_string(),
            fmt_opt(s.std_deviation),
            s.maximum.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()
        .map_err(|e| Error::io(out.join(REPORT_FILES[2]), e))
}

fn write_table4(groups: &Groups, out: &Path, options: &AnalysisOptions) -> Result<()> {
    let mut w = csv_writer(out, REPORT_FILES[3])?;
    w.write_record([
        "drones",
        "feedback",
        "speed",
        "hand",
        "n",
        "quantile",
        "center",
        "diameter_m",
    ])?;
    let center = match options.center_mode {
        CenterMode::PlateCenter => "plate",
        CenterMode::MeanLandingPoint => "mean",
    };
    for (k, v) in groups {
        let d = containment_diameter(
            &records_of(v),
            options.containment_quantile,
            options.center_mode,
        )?;
        let mut row = group_prefix(k);
        row.extend([
            v.len().to_string(),
            options.containment_quantile.to_string(),
            center.to_string(),
            d.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()
        .map_err(|e| Error::io(out.join(REPORT_FILES[3]), e))
}

fn write_regression(groups: &Groups, out: &Path) -> Result<()> {
    let mut w = csv_writer(out, REPORT_FILES[6])?;
    w.write_record([
        "drones",
        "feedback",
        "speed",
        "hand",
        "n",
        "intercept_m",
        "slope",
        "r_squared",
        "note",
    ])?;
    for (k, v) in groups {
        let mut row = group_prefix(k);
        row.push(v.len().to_string());
        match landing_axis_regression(&records_of(v)) {
            Ok(f) => row.extend([
                f.intercept.to_string(),
                f.slope.to_string(),
                f.r_squared.to_string(),
                String::new(),
            ]),
            Err(e) => row.extend([String::new(), String::new(), String::new(), e.to_string()]),
        }
        w.write_record(&row)?;
    }
    w.flush()
        .map_err(|e| Error::io(out.join(REPORT_FILES[6]), e))
}

fn write_ttests(groups: &Groups, out: &Path) -> Result<()> {
    let mut w = csv_writer(out, REPORT_FILES[5])?;
    w.write_record([
        "drones",
        "hand",
        "condition_a",
        "condition_b",
        "n",
        "t",
        "df",
        "p",
        "significant",
        "note",
    ])?;
    let keys: Vec<&GroupKey> = groups.keys().collect();
    for (i, ka) in keys.iter().enumerate() {
        for kb in &keys[i + 1..] {
            if ka.drones != kb.drones || ka.pad != kb.pad {
                continue;
            }
            let a: BTreeMap<usize, f64> = groups[*ka]
                .iter()
                .map(|(idx, r)| (*idx, r.displacement.norm() * 1000.0))
                .collect();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (idx, r) in &groups[*kb] {
                if let Some(x) = a.get(idx) {
                    xs.push(*x);
                    ys.push(r.displacement.norm() * 1000.0);
                }
            }
            let mut row = vec![
                ka.drones.to_string(),
                ka.hand().to_string(),
                ka.condition().cell_label(),
                kb.condition().cell_label(),
                xs.len().to_string(),
            ];
            match paired_t_test(&xs, &ys) {
                Ok(t) => row.extend([
                    t.t.to_string(),
                    t.df.to_string(),
                    t.p.to_string(),
                    (t.p < ALPHA).to_string(),
                    String::new(),
                ]),
                Err(e) => row.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]),
            }
            w.write_record(&row)?;
        }
    }
    w.flush()
        .map_err(|e| Error::io(out.join(REPORT_FILES[5]), e))
}

/// Repeated-measures dataset over trial index (the unit), drone count and
/// feedback/speed cell. Each value is the trial's mean displacement (mm)
/// over its landed drones.
pub fn anova_dataset(logs: &[(usize, &TrialLog)]) -> Result<RmDataset> {
    let drone_levels: BTreeSet<u8> = logs
        .iter()
        .map(|(_, l)| l.header.condition.drone_count)
        .collect();
    let cells: BTreeSet<(Feedback, SpeedClass)> = logs
        .iter()
        .map(|(_, l)| (l.header.condition.feedback, l.header.condition.speed_class))
        .collect();
    let units: BTreeSet<usize> = logs.iter().map(|(i, _)| *i).collect();
    let drone_idx: BTreeMap<u8, usize> = drone_levels
        .iter()
        .enumerate()
        .map(|(i, d)| (*d, i))
        .collect();
    let cell_idx: BTreeMap<(Feedback, SpeedClass), usize> =
        cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let unit_idx: BTreeMap<usize, usize> = units.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let mut obs = Vec::new();
    for (i, log) in logs {
        let c = log.header.condition;
        let landed: Vec<f64> = log
            .outcomes()
            .into_iter()
            .flatten()
            .map(|o| o.displacement().norm() * 1000.0)
            .collect();
        if landed.is_empty() {
            continue;
        }
        obs.push((
            unit_idx[i],
            drone_idx[&c.drone_count],
            cell_idx[&(c.feedback, c.speed_class)],
            landed.iter().sum::<f64>() / landed.len() as f64,
        ));
    }
    RmDataset::from_observations("drones", "feedback_speed", &obs)
}

fn write_anova(trials: &[Loaded], out: &Path, text: &mut String) -> Result<Option<AnovaTable>> {
    let mut w = csv_writer(out, REPORT_FILES[4])?;
    w.write_record([
        "effect",
        "ss",
        "df",
        "ms",
        "error_ss",
        "error_df",
        "F",
        "p",
        "significant",
        "note",
    ])?;
    let logs: Vec<(usize, &TrialLog)> = trials.iter().map(|t| (t.index, &t.log)).collect();
    let table = match anova_dataset(&logs).and_then(|d| rm_anova_two_way(&d)) {
        Ok(t) => t,
        Err(e) => {
            writeln!(text, "two-way RM-ANOVA skipped: {e}").ok();
            let mut row = vec![String::new(); 9];
            row.push(e.to_string());
            w.write_record(&row)?;
            w.flush()
                .map_err(|e| Error::io(out.join(REPORT_FILES[4]), e))?;
            return Ok(None);
        }
    };
    writeln!(text, "two-way RM-ANOVA (alpha = {}):", table.alpha).ok();
    for e in &table.effects {
        let sig = e.significant(table.alpha);
        writeln!(
            text,
            "  {:<24} F({}, {}) = {:.4}, p = {:.4e}{}",
            e.name,
            e.df,
            e.error_df,
            e.f,
            e.p,
            if sig { "  *" } else { "" }
        )
        .ok();
        w.write_record([
            e.name.clone(),
            e.sum_of_squares.to_string(),
            e.df.to_string(),
            e.mean_square.to_string(),
            e.error_sum_of_squares.to_string(),
            e.error_df.to_string(),
            e.f.to_string(),
            e.p.to_string(),
            sig.to_string(),
            if e.degenerate {
                "0/0 reported as F=0, p=1".into()
            } else {
                String::new()
            },
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(out.join(REPORT_FILES[4]), e))?;
    Ok(Some(table))
}
