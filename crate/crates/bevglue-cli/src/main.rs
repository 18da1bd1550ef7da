//! `bevglue`: experiment CLI for GPS-free spatial alignment.
//!
//! Subcommands map onto the library harness: `generate` emits replay logs,
//! `match` aligns two logs offline, `evaluate` scores a method against
//! ground truth, `sweep` repeats that across a config axis, and `ablate`
//! compares matcher stages. All output files are byte-deterministic for a
//! given config and seed; anything nondeterministic (timing) goes to
//! stdout only. Failures print a single `error: ...` line on stderr and
//! exit nonzero.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bevglue::graph::ObjectGraph;
use bevglue::harness::{
    ablate, config::ExperimentConfig, evaluate_frames, frames_to_csv, parse_config,
    render_config, summary_to_kv, sweep, Method, SweepAxis,
};
use bevglue::matching::{match_graphs, CommonSubgraph};
use bevglue::pose::{solve_procrustes, Correspondences};
use bevglue::sim::Scenario;
use bevglue::wire::{decode_replay, encode_replay, AlignmentMessage};

#[derive(Parser)]
#[command(
    name = "bevglue",
    version,
    about = "Aligns agents by what they see, not where they claim to be"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Flat key=value config file; missing keys fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's frame count.
    #[arg(long)]
    frames: Option<usize>,
}

impl CommonOpts {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                parse_config(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.scenario.seed = seed;
        }
        if let Some(frames) = self.frames {
            cfg.scenario.num_frames = frames;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and write one replay log per agent.
    Generate {
        #[command(flatten)]
        common: CommonOpts,
        /// Output directory for agent_<k>.replay and config.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Match two replay logs frame by frame and estimate the relative pose.
    Match {
        /// Replay log of the receiving agent.
        left: PathBuf,
        /// Replay log of the sending agent.
        right: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Output directory for matches.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one method against ground truth; writes frames.csv and summary.txt.
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
        /// bevglue, icp, or reported-pose-only.
        #[arg(long)]
        method: String,
        /// Output directory for frames.csv and summary.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate across an axis of configs; writes per-value runs and sweep.csv.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// loc_noise, det_noise, bandwidth, or attack.
        #[arg(long)]
        axis: String,
        /// Comma-separated numeric values, e.g. 0,0.5,1.5,2.5.
        #[arg(long)]
        values: String,
        /// bevglue, icp, or reported-pose-only.
        #[arg(long)]
        method: String,
        /// Output directory; one subdirectory per value plus sweep.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare matcher stages on one corpus; writes ablate.csv.
    Ablate {
        #[command(flatten)]
        common: CommonOpts,
        /// Output directory for ablate.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, out } => generate(&common.load()?, &out),
        Command::Match {
            left,
            right,
            common,
            out,
        } => match_logs(&common.load()?, &left, &right, &out),
        Command::Evaluate {
            common,
            method,
            out,
        } => evaluate(&common.load()?, &method, &out),
        Command::Sweep {
            common,
            axis,
            values,
            method,
            out,
        } => run_sweep(&common.load()?, &axis, &values, &method, &out),
        Command::Ablate { common, out } => run_ablate(&common.load()?, &out),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create directory {}", dir.display()))
}

fn generate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let scenario = Scenario::generate(cfg.scenario.clone())?;
    ensure_dir(out)?;
    for agent in 0..scenario.num_agents() {
        let log = scenario.export_replay(agent);
        let bytes = encode_replay(&log)?;
        write_file(&out.join(format!("agent_{agent}.replay")), &bytes)?;
    }
    write_file(&out.join("config.txt"), render_config(cfg).as_bytes())?;
    println!(
        "wrote {} replay logs ({} frames each) to {}",
        scenario.num_agents(),
        scenario.num_frames(),
        out.display()
    );
    Ok(())
}

fn load_replay(path: &Path) -> Result<Vec<AlignmentMessage>> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read replay {}", path.display()))?;
    let msgs = decode_replay(&bytes)
        .with_context(|| format!("cannot decode replay {}", path.display()))?;
    Ok(msgs)
}

fn by_timestep(msgs: Vec<AlignmentMessage>, side: &str) -> Result<Vec<(u32, AlignmentMessage)>> {
    let mut map = std::collections::BTreeMap::new();
    for m in msgs {
        if map.insert(m.timestep, m).is_some() {
            bail!("{side} replay repeats timestep");
        }
    }
    Ok(map.into_iter().collect())
}

/// Offline alignment of two logs: no ground truth, no reported poses, just
/// the message streams. Rows cover timesteps present in both logs.
fn match_logs(cfg: &ExperimentConfig, left: &Path, right: &Path, out: &Path) -> Result<()> {
    let left_msgs = by_timestep(load_replay(left)?, "left")?;
    let right_msgs: std::collections::BTreeMap<u32, AlignmentMessage> =
        by_timestep(load_replay(right)?, "right")?.into_iter().collect();

    let mut csv = String::from("timestep,num_matched,confidence,theta,tx,ty,track_pairs\n");
    let mut prev: Option<CommonSubgraph> = None;
    let mut matched_frames = 0usize;
    for (t, msg_l) in &left_msgs {
        let Some(msg_r) = right_msgs.get(t) else {
            continue;
        };
        let gl = ObjectGraph::build(&msg_l.boxes)?;
        let gr = ObjectGraph::build(&msg_r.boxes)?;
        let matched = match_graphs(&gl, &gr, prev.as_ref(), &cfg.matcher)?;
        let pose = if matched.len() >= 2 {
            let (p, q): (Vec<_>, Vec<_>) = matched
                .pairs()
                .iter()
                .map(|&(m, n)| (gr.center(n), gl.center(m)))
                .unzip();
            solve_procrustes(&Correspondences::new(p, q).expect("2+ pairs")).ok()
        } else {
            None
        };
        let mut pairs_cell = String::new();
        for (k, (ti, tj)) in matched.track_pairs().iter().enumerate() {
            if k > 0 {
                pairs_cell.push(';');
            }
            let _ = write!(pairs_cell, "{ti}:{tj}");
        }
        let (theta, tx, ty) = pose
            .map(|e| {
                (
                    format!("{:.8e}", e.pose.theta()),
                    format!("{:.8e}", e.pose.tx()),
                    format!("{:.8e}", e.pose.ty()),
                )
            })
            .unwrap_or_default();
        let _ = writeln!(
            csv,
            "{t},{},{:.8e},{theta},{tx},{ty},{pairs_cell}",
            matched.len(),
            matched.confidence(),
        );
        matched_frames += 1;
        prev = Some(matched);
    }
    if matched_frames == 0 {
        bail!("replays share no timesteps");
    }
    ensure_dir(out)?;
    write_file(&out.join("matches.csv"), csv.as_bytes())?;
    println!("matched {matched_frames} frames into {}", out.display());
    Ok(())
}

fn evaluate(cfg: &ExperimentConfig, method: &str, out: &Path) -> Result<()> {
    let method: Method = method.parse()?;
    let (rows, summary) = evaluate_frames(cfg, method)?;
    ensure_dir(out)?;
    write_file(&out.join("frames.csv"), frames_to_csv(&rows).as_bytes())?;
    write_file(&out.join("summary.txt"), summary_to_kv(&summary).as_bytes())?;
    print!("{}", summary_to_kv(&summary));
    if let Some(fps) = summary.matcher_fps {
        // Stdout only: wall-clock numbers stay out of the files.
        println!("throughput: {fps:.0} alignments/s");
    }
    Ok(())
}

fn parse_values(values: &str) -> Result<Vec<f64>> {
    values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .with_context(|| format!("bad sweep value '{s}'"))
        })
        .collect()
}

fn run_sweep(
    cfg: &ExperimentConfig,
    axis: &str,
    values: &str,
    method: &str,
    out: &Path,
) -> Result<()> {
    let axis: SweepAxis = axis.parse()?;
    let method: Method = method.parse()?;
    let values = parse_values(values)?;
    let table = sweep(cfg, axis, &values, method, out)?;
    for (value, summary) in &table {
        println!(
            "{axis}={value}: success_rate={} median_trans_error={}",
            summary
                .success_rate
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "n/a".into()),
            summary
                .median_trans_error
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "n/a".into()),
        );
    }
    println!("wrote sweep.csv to {}", out.display());
    Ok(())
}

fn run_ablate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let rows = ablate(cfg, out)?;
    for r in &rows {
        println!(
            "{}: precision={} recall={} churn={}",
            r.variant,
            r.mean_precision
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "n/a".into()),
            r.mean_recall
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "n/a".into()),
            r.mean_churn
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "n/a".into()),
        );
    }
    println!("wrote ablate.csv to {}", out.display());
    Ok(())
}
