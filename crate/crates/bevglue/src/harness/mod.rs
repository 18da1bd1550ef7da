//! Experiment runner: scenarios in, per-frame metrics and summaries out.
//!
//! Every run follows the same loop. For each agent pair and frame, the
//! receiver keeps its own detections at full precision while the sender's
//! go through the real wire codec, an alignment method produces a relative
//! pose estimate, and the estimate is scored against the scenario's ground
//! truth. Three methods ride the same rails:
//!
//! * `bevglue`: object graphs + common-subgraph matching + rigid fit. Never
//!   reads reported poses, so its numbers cannot depend on localization
//!   noise or spoofing.
//! * `icp`: classical point registration initialized from the reported
//!   poses, transmitting box centers or densified boundary points.
//! * `reported-pose-only`: trusts the radios outright; the control method.
//!
//! A frame is valid when the agents genuinely co-observe at least 2
//! objects; all aggregates run over valid frames and the invalid fraction
//! is reported alongside. Metrics with an empty denominator (no matches,
//! no pose) are absent rather than faked as zero, and appear as empty CSV
//! cells.
//!
//! Output files are byte-deterministic for a given config: floats are
//! printed with 9 significant digits, and the matcher's wall-clock
//! throughput, being nondeterministic, lives only in the in-memory
//! [`RunSummary`], never in a file.

pub mod config;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::geometry::wrap;
use crate::graph::{GraphError, ObjectGraph};
use crate::icp::{densify_boxes, icp_2d, IcpError};
use crate::matching::{
    match_graphs, node_affinity, CommonSubgraph, MatchError,
};
use crate::pose::{solve_procrustes, Correspondences};
use crate::sim::{true_correspondences, Observation, Scenario, SimError};
use crate::wire::{self, AlignmentMessage, WireError};
use config::{ConfigError, ExperimentConfig};

pub use config::{parse_config, render_config};

/// Accounting size of a reported-pose-only message: the standard header
/// plus three f32 pose components.
pub const POSE_ONLY_MESSAGE_BYTES: u64 = wire::HEADER_LEN as u64 + 12;
/// Accounting size of one transmitted ICP point: two f32 coordinates.
pub const ICP_POINT_BYTES: u64 = 8;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Icp(#[from] IcpError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bevglue,
    Icp,
    ReportedPoseOnly,
}

impl std::str::FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "bevglue" => Ok(Self::Bevglue),
            "icp" => Ok(Self::Icp),
            "reported-pose-only" => Ok(Self::ReportedPoseOnly),
            _ => Err(HarnessError::Invalid(
                "method must be bevglue, icp, or reported-pose-only",
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bevglue => "bevglue",
            Self::Icp => "icp",
            Self::ReportedPoseOnly => "reported-pose-only",
        })
    }
}

/// One agent pair's outcome on one frame. `None` means the quantity is
/// undefined there, not zero: precision with no matches, errors with no
/// estimate, match counts for methods that do not match objects.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub timestep: u32,
    pub agent_i: u32,
    pub agent_j: u32,
    /// Alignment was attempted: at least 2 truly co-visible objects.
    pub valid: bool,
    pub num_matched: Option<usize>,
    pub match_precision: Option<f64>,
    pub match_recall: Option<f64>,
    pub trans_error: Option<f64>,
    pub rot_error: Option<f64>,
    pub bytes_sent: u64,
}

/// Aggregates over one run. Error statistics cover valid frames that
/// produced an estimate; `success_rate` divides by all valid frames, so a
/// valid frame without an estimate counts as a failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub frames: usize,
    pub valid_frames: usize,
    pub invalid_fraction: f64,
    pub median_trans_error: Option<f64>,
    pub mean_trans_error: Option<f64>,
    pub median_rot_error: Option<f64>,
    pub mean_rot_error: Option<f64>,
    pub success_rate: Option<f64>,
    pub total_bytes: u64,
    pub total_log2_bytes: f64,
    /// Alignment steps per wall-clock second. Not written to output files:
    /// timing varies run to run and the files must not.
    pub matcher_fps: Option<f64>,
}

/// Matcher ablation stages, cumulative left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatcherVariant {
    /// Greedy one-to-one on node affinity alone; edges never consulted.
    NodeOnly,
    /// Full pairwise-consistent subgraph search, no temporal seeding.
    Geometric,
    /// Subgraph search seeded from the previous frame's matched tracks.
    GeometricTracking,
}

impl MatcherVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::NodeOnly => "node-only",
            Self::Geometric => "geometric",
            Self::GeometricTracking => "geometric-tracking",
        }
    }
}

/// Per-variant ablation aggregates; means over valid frames where the
/// metric is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub median_trans_error: Option<f64>,
    pub median_rot_error: Option<f64>,
    /// Mean symmetric difference between consecutive frames' matched
    /// track-pair sets; the stability metric tracking is meant to improve.
    pub mean_churn: Option<f64>,
}

struct FrameRecord {
    metrics: FrameMetrics,
    /// Matched `(sender track, receiver track)` ids, when the method
    /// produces discrete matches on a valid frame.
    matched_tracks: Option<BTreeSet<(u32, u32)>>,
}

#[derive(Default)]
struct MatchTimer {
    total: Duration,
    steps: usize,
}

impl MatchTimer {
    fn time<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.total += start.elapsed();
        self.steps += 1;
        out
    }

    fn fps(&self) -> Option<f64> {
        let secs = self.total.as_secs_f64();
        (self.steps > 0 && secs > 0.0).then(|| self.steps as f64 / secs)
    }
}

/// Greedy assignment by node affinity only, the ablation floor. Pairs above
/// the node gate are taken best-first under one-to-one constraints; with
/// look-alike vehicles in the scene this confuses objects freely, which is
/// what the geometric stages exist to fix.
pub fn node_only_match(
    gi: &ObjectGraph,
    gj: &ObjectGraph,
    cfg: &crate::matching::MatchConfig,
) -> Result<CommonSubgraph, MatchError> {
    cfg.validate()?;
    let mut scored: Vec<((usize, usize), f64)> = Vec::new();
    for m in 0..gi.len() {
        for n in 0..gj.len() {
            let a = node_affinity(gi.node(m), gj.node(n), cfg);
            if a >= cfg.min_node_affinity {
                scored.push(((m, n), a));
            }
        }
    }
    scored.sort_unstable_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let mut used_left = vec![false; gi.len()];
    let mut used_right = vec![false; gj.len()];
    let mut pairs = Vec::new();
    for ((m, n), _) in scored {
        if !used_left[m] && !used_right[n] {
            used_left[m] = true;
            used_right[n] = true;
            pairs.push((m, n));
        }
    }
    Ok(CommonSubgraph::from_pairs(pairs, gi, gj, cfg))
}

fn pose_errors(estimate: &crate::geometry::Se2Pose, truth: &crate::geometry::Se2Pose) -> (f64, f64) {
    let trans = (estimate.tx() - truth.tx()).hypot(estimate.ty() - truth.ty());
    let rot = wrap(estimate.theta() - truth.theta()).abs();
    (trans, rot)
}

fn f32_roundtrip(points: Vec<crate::geometry::Point2>) -> Vec<crate::geometry::Point2> {
    points
        .into_iter()
        .map(|p| {
            crate::geometry::Point2::new(f64::from(p.x() as f32), f64::from(p.y() as f32))
                .expect("finite after f32 narrowing")
        })
        .collect()
}

fn score_matches(
    matched: &CommonSubgraph,
    truth_pairs: &[(usize, usize)],
) -> (Option<f64>, Option<f64>) {
    let truth: BTreeSet<(usize, usize)> = truth_pairs.iter().copied().collect();
    let correct = matched
        .pairs()
        .iter()
        .filter(|p| truth.contains(p))
        .count();
    let precision =
        (!matched.is_empty()).then(|| correct as f64 / matched.len() as f64);
    let recall = (!truth.is_empty()).then(|| correct as f64 / truth.len() as f64);
    (precision, recall)
}

fn run_frames(
    cfg: &ExperimentConfig,
    method: Method,
    variant: MatcherVariant,
) -> Result<(Vec<FrameRecord>, Option<f64>), HarnessError> {
    let scenario = Scenario::generate(cfg.scenario.clone())?;
    let mut records = Vec::new();
    let mut timer = MatchTimer::default();
    for i in 0..scenario.num_agents() {
        for j in (i + 1)..scenario.num_agents() {
            // The temporal seed chains through one agent pair's frames and
            // restarts after any frame that produced no match set.
            let mut prev: Option<CommonSubgraph> = None;
            for t in 0..scenario.num_frames() {
                let obs_i = scenario.observe(i, t);
                let obs_j = scenario.observe(j, t);
                let truth_pairs = true_correspondences(&obs_i, &obs_j);
                let valid = truth_pairs.len() >= 2;
                let record = evaluate_pair_frame(
                    cfg,
                    method,
                    variant,
                    &scenario,
                    (i, j, t),
                    &obs_i,
                    &obs_j,
                    &truth_pairs,
                    valid,
                    &mut prev,
                    &mut timer,
                )?;
                records.push(record);
            }
        }
    }
    records.sort_by_key(|r| (r.metrics.timestep, r.metrics.agent_i, r.metrics.agent_j));
    Ok((records, timer.fps()))
}

#[allow(clippy::too_many_arguments)]
fn evaluate_pair_frame(
    cfg: &ExperimentConfig,
    method: Method,
    variant: MatcherVariant,
    scenario: &Scenario,
    (i, j, t): (usize, usize, usize),
    obs_i: &Observation,
    obs_j: &Observation,
    truth_pairs: &[(usize, usize)],
    valid: bool,
    prev: &mut Option<CommonSubgraph>,
    timer: &mut MatchTimer,
) -> Result<FrameRecord, HarnessError> {
    let truth_rel = scenario.true_relative_pose(i, j, t);
    let mut metrics = FrameMetrics {
        timestep: t as u32,
        agent_i: i as u32,
        agent_j: j as u32,
        valid,
        num_matched: None,
        match_precision: None,
        match_recall: None,
        trans_error: None,
        rot_error: None,
        bytes_sent: 0,
    };
    let mut matched_tracks = None;

    match method {
        Method::Bevglue => {
            // The sender's boxes cross the wire even on invalid frames; the
            // codec narrows them to f32 just as a receiver would see them.
            let msg = AlignmentMessage {
                sender_id: obs_j.agent_id,
                timestep: obs_j.timestep,
                boxes: obs_j.boxes.clone(),
            };
            metrics.bytes_sent = wire::encoded_len(&msg) as u64;
            if !valid {
                *prev = None;
                return Ok(FrameRecord {
                    metrics,
                    matched_tracks,
                });
            }
            let decoded = wire::decode(&wire::encode(&msg)?)?;
            let (matched, pose) = timer.time(|| -> Result<_, HarnessError> {
                let gi = ObjectGraph::build(&obs_i.boxes)?;
                let gj = ObjectGraph::build(&decoded.boxes)?;
                let matched = match variant {
                    MatcherVariant::NodeOnly => node_only_match(&gi, &gj, &cfg.matcher)?,
                    MatcherVariant::Geometric => {
                        match_graphs(&gi, &gj, None, &cfg.matcher)?
                    }
                    MatcherVariant::GeometricTracking => {
                        match_graphs(&gi, &gj, prev.as_ref(), &cfg.matcher)?
                    }
                };
                let pose = (matched.len() >= 2)
                    .then(|| {
                        let (p, q): (Vec<_>, Vec<_>) = matched
                            .pairs()
                            .iter()
                            .map(|&(m, n)| (gj.center(n), gi.center(m)))
                            .unzip();
                        let corr = Correspondences::new(p, q).expect("2+ matched pairs");
                        // Degenerate layouts (all matched centers collinear
                        // or coincident) yield no estimate, not a bogus one.
                        solve_procrustes(&corr).ok()
                    })
                    .flatten();
                Ok((matched, pose))
            })?;
            metrics.num_matched = Some(matched.len());
            let (precision, recall) = score_matches(&matched, truth_pairs);
            metrics.match_precision = precision;
            metrics.match_recall = recall;
            if let Some(est) = pose {
                let (te, re) = pose_errors(&est.pose, &truth_rel);
                metrics.trans_error = Some(te);
                metrics.rot_error = Some(re);
            }
            matched_tracks = Some(
                matched
                    .track_pairs()
                    .iter()
                    .copied()
                    .collect::<BTreeSet<_>>(),
            );
            *prev = Some(matched);
        }
        Method::Icp => {
            let source = f32_roundtrip(densify_boxes(
                &obs_j.boxes,
                cfg.icp.boundary_samples_per_box,
            ));
            metrics.bytes_sent =
                wire::HEADER_LEN as u64 + ICP_POINT_BYTES * source.len() as u64;
            if !valid {
                return Ok(FrameRecord {
                    metrics,
                    matched_tracks,
                });
            }
            let target = densify_boxes(&obs_i.boxes, cfg.icp.boundary_samples_per_box);
            let init = scenario
                .reported_pose(i, t)
                .inverse()
                .compose(&scenario.reported_pose(j, t));
            if !source.is_empty() && !target.is_empty() {
                let result = timer.time(|| icp_2d(&source, &target, init, &cfg.icp))?;
                let (te, re) = pose_errors(&result.pose, &truth_rel);
                metrics.trans_error = Some(te);
                metrics.rot_error = Some(re);
            }
        }
        Method::ReportedPoseOnly => {
            metrics.bytes_sent = POSE_ONLY_MESSAGE_BYTES;
            if !valid {
                return Ok(FrameRecord {
                    metrics,
                    matched_tracks,
                });
            }
            let est = timer.time(|| {
                scenario
                    .reported_pose(i, t)
                    .inverse()
                    .compose(&scenario.reported_pose(j, t))
            });
            let (te, re) = pose_errors(&est, &truth_rel);
            metrics.trans_error = Some(te);
            metrics.rot_error = Some(re);
        }
    }

    Ok(FrameRecord {
        metrics,
        matched_tracks,
    })
}

fn median(sorted: &[f64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

fn summarize(cfg: &ExperimentConfig, rows: &[FrameMetrics], matcher_fps: Option<f64>) -> RunSummary {
    let frames = rows.len();
    let valid: Vec<&FrameMetrics> = rows.iter().filter(|r| r.valid).collect();
    let mut trans: Vec<f64> = valid.iter().filter_map(|r| r.trans_error).collect();
    let mut rot: Vec<f64> = valid.iter().filter_map(|r| r.rot_error).collect();
    trans.sort_by(f64::total_cmp);
    rot.sort_by(f64::total_cmp);
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let successes = valid
        .iter()
        .filter(|r| {
            r.trans_error
                .is_some_and(|t| t <= cfg.success_trans_threshold)
                && r.rot_error.is_some_and(|a| a <= cfg.success_rot_threshold)
        })
        .count();
    let total_bytes: u64 = rows.iter().map(|r| r.bytes_sent).sum();
    RunSummary {
        frames,
        valid_frames: valid.len(),
        invalid_fraction: if frames == 0 {
            0.0
        } else {
            (frames - valid.len()) as f64 / frames as f64
        },
        median_trans_error: median(&trans),
        mean_trans_error: mean(&trans),
        median_rot_error: median(&rot),
        mean_rot_error: mean(&rot),
        success_rate: (!valid.is_empty()).then(|| successes as f64 / valid.len() as f64),
        total_bytes,
        total_log2_bytes: wire::log2_bytes(total_bytes),
        matcher_fps,
    }
}

/// Runs one experiment without touching the filesystem.
pub fn evaluate_frames(
    cfg: &ExperimentConfig,
    method: Method,
) -> Result<(Vec<FrameMetrics>, RunSummary), HarnessError> {
    let variant = MatcherVariant::GeometricTracking;
    let (records, fps) = run_frames(cfg, method, variant)?;
    let rows: Vec<FrameMetrics> = records.into_iter().map(|r| r.metrics).collect();
    let summary = summarize(cfg, &rows, fps);
    Ok((rows, summary))
}

/// Floats in output files carry 9 significant digits, scientific form.
fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

fn fmt_opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn fmt_opt_count(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

pub const FRAME_CSV_HEADER: &str = "timestep,agent_i,agent_j,valid,num_matched,match_precision,match_recall,trans_error,rot_error,bytes_sent";

/// Per-frame metrics as CSV with a fixed column order; absent metrics are
/// empty cells.
pub fn frames_to_csv(rows: &[FrameMetrics]) -> String {
    let mut out = String::from(FRAME_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.timestep,
            r.agent_i,
            r.agent_j,
            u8::from(r.valid),
            fmt_opt_count(r.num_matched),
            fmt_opt_float(r.match_precision),
            fmt_opt_float(r.match_recall),
            fmt_opt_float(r.trans_error),
            fmt_opt_float(r.rot_error),
            r.bytes_sent,
        ));
    }
    out
}

/// Summary as flat key=value text. Deliberately omits throughput: files
/// must be byte-identical across reruns and wall-clock numbers are not.
pub fn summary_to_kv(s: &RunSummary) -> String {
    let mut out = String::new();
    for (key, value) in [
        ("frames", s.frames.to_string()),
        ("valid_frames", s.valid_frames.to_string()),
        ("invalid_fraction", fmt_float(s.invalid_fraction)),
        ("median_trans_error", fmt_opt_float(s.median_trans_error)),
        ("mean_trans_error", fmt_opt_float(s.mean_trans_error)),
        ("median_rot_error", fmt_opt_float(s.median_rot_error)),
        ("mean_rot_error", fmt_opt_float(s.mean_rot_error)),
        ("success_rate", fmt_opt_float(s.success_rate)),
        ("total_bytes", s.total_bytes.to_string()),
        ("total_log2_bytes", fmt_float(s.total_log2_bytes)),
    ] {
        out.push_str(key);
        out.push('=');
        out.push_str(&value);
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Runs one experiment and writes `frames.csv` and `summary.txt` into
/// `out_dir`. Identical configs produce byte-identical files.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    method: Method,
    out_dir: &Path,
) -> Result<RunSummary, HarnessError> {
    let (rows, summary) = evaluate_frames(cfg, method)?;
    ensure_dir(out_dir)?;
    write_file(&out_dir.join("frames.csv"), &frames_to_csv(&rows))?;
    write_file(&out_dir.join("summary.txt"), &summary_to_kv(&summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Value v sets reported-pose noise to v meters and v degrees.
    LocNoise,
    /// Value v sets the detector center noise sigma to v meters.
    DetNoise,
    /// Value v sets boundary samples per box (integer; 0 = centers).
    Bandwidth,
    /// Value 0 or 1 toggles the spoofing attack.
    Attack,
}

impl std::str::FromStr for SweepAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "loc_noise" => Ok(Self::LocNoise),
            "det_noise" => Ok(Self::DetNoise),
            "bandwidth" => Ok(Self::Bandwidth),
            "attack" => Ok(Self::Attack),
            _ => Err(HarnessError::Invalid(
                "axis must be loc_noise, det_noise, bandwidth, or attack",
            )),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::LocNoise => "loc_noise",
            Self::DetNoise => "det_noise",
            Self::Bandwidth => "bandwidth",
            Self::Attack => "attack",
        })
    }
}

fn apply_axis(
    base: &ExperimentConfig,
    axis: SweepAxis,
    value: f64,
) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::LocNoise => {
            if !(value.is_finite() && value >= 0.0) {
                return Err(HarnessError::Invalid("loc_noise values must be >= 0"));
            }
            cfg.scenario.loc_sigma_t = value;
            cfg.scenario.loc_sigma_r = value.to_radians();
        }
        SweepAxis::DetNoise => {
            if !(value.is_finite() && value >= 0.0) {
                return Err(HarnessError::Invalid("det_noise values must be >= 0"));
            }
            cfg.scenario.det_sigma_xy = value;
        }
        SweepAxis::Bandwidth => {
            if !(value.is_finite() && value >= 0.0 && value.fract() == 0.0) {
                return Err(HarnessError::Invalid(
                    "bandwidth values must be non-negative integers",
                ));
            }
            cfg.icp.boundary_samples_per_box = value as usize;
        }
        SweepAxis::Attack => {
            cfg.scenario.spoof_attack = match value {
                v if v == 0.0 => false,
                v if v == 1.0 => true,
                _ => return Err(HarnessError::Invalid("attack values must be 0 or 1")),
            };
        }
    }
    Ok(cfg)
}

pub const SWEEP_CSV_HEADER: &str = "axis,value,frames,valid_frames,invalid_fraction,median_trans_error,mean_trans_error,median_rot_error,mean_rot_error,success_rate,total_bytes,total_log2_bytes";

/// One run per value, each in its own subdirectory, plus a combined
/// `sweep.csv` of summaries at the top of `out_dir`.
pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    method: Method,
    out_dir: &Path,
) -> Result<Vec<(f64, RunSummary)>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Invalid("sweep needs at least one value"));
    }
    ensure_dir(out_dir)?;
    let mut table = Vec::with_capacity(values.len());
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for &value in values {
        let cfg = apply_axis(base, axis, value)?;
        let sub = out_dir.join(format!("{axis}_{value}"));
        let summary = run_experiment(&cfg, method, &sub)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            axis,
            value,
            summary.frames,
            summary.valid_frames,
            fmt_float(summary.invalid_fraction),
            fmt_opt_float(summary.median_trans_error),
            fmt_opt_float(summary.mean_trans_error),
            fmt_opt_float(summary.median_rot_error),
            fmt_opt_float(summary.mean_rot_error),
            fmt_opt_float(summary.success_rate),
            summary.total_bytes,
            fmt_float(summary.total_log2_bytes),
        ));
        table.push((value, summary));
    }
    write_file(&out_dir.join("sweep.csv"), &csv)?;
    Ok(table)
}

pub const ABLATE_CSV_HEADER: &str =
    "variant,mean_precision,mean_recall,median_trans_error,median_rot_error,mean_churn";

fn churn_of(records: &[FrameRecord]) -> Option<f64> {
    // Consecutive-frame comparisons within one agent pair; a frame without
    // a match set breaks the chain.
    let mut diffs = Vec::new();
    let mut by_pair: std::collections::BTreeMap<(u32, u32), Vec<&FrameRecord>> =
        std::collections::BTreeMap::new();
    for r in records {
        by_pair
            .entry((r.metrics.agent_i, r.metrics.agent_j))
            .or_default()
            .push(r);
    }
    for chain in by_pair.values() {
        for pair in chain.windows(2) {
            if pair[1].metrics.timestep != pair[0].metrics.timestep + 1 {
                continue;
            }
            if let (Some(a), Some(b)) = (&pair[0].matched_tracks, &pair[1].matched_tracks) {
                diffs.push(a.symmetric_difference(b).count() as f64);
            }
        }
    }
    (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64)
}

/// Runs the three matcher stages over the same scenario and reports their
/// aggregate match quality, pose error, and temporal stability.
pub fn ablate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<AblationRow>, HarnessError> {
    let mut rows = Vec::new();
    for variant in [
        MatcherVariant::NodeOnly,
        MatcherVariant::Geometric,
        MatcherVariant::GeometricTracking,
    ] {
        let (records, _) = run_frames(cfg, Method::Bevglue, variant)?;
        let valid: Vec<&FrameMetrics> = records
            .iter()
            .map(|r| &r.metrics)
            .filter(|m| m.valid)
            .collect();
        let mean = |vals: Vec<f64>| {
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let mut trans: Vec<f64> = valid.iter().filter_map(|m| m.trans_error).collect();
        let mut rot: Vec<f64> = valid.iter().filter_map(|m| m.rot_error).collect();
        trans.sort_by(f64::total_cmp);
        rot.sort_by(f64::total_cmp);
        rows.push(AblationRow {
            variant: variant.name(),
            mean_precision: mean(valid.iter().filter_map(|m| m.match_precision).collect()),
            mean_recall: mean(valid.iter().filter_map(|m| m.match_recall).collect()),
            median_trans_error: median(&trans),
            median_rot_error: median(&rot),
            mean_churn: churn_of(&records),
        });
    }
    ensure_dir(out_dir)?;
    let mut csv = String::from(ABLATE_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.variant,
            fmt_opt_float(r.mean_precision),
            fmt_opt_float(r.mean_recall),
            fmt_opt_float(r.median_trans_error),
            fmt_opt_float(r.median_rot_error),
            fmt_opt_float(r.mean_churn),
        ));
    }
    write_file(&out_dir.join("ablate.csv"), &csv)?;
    Ok(rows)
}
