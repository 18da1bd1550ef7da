//! Deterministic synthetic traffic scenes for evaluating alignment.
//!
//! A scenario is a pure function of its config: objects with vehicle-like
//! extents drift through a square world on smooth constant-speed paths,
//! agents move slowly near the middle so their sensing discs overlap, and
//! every random draw comes from a stream keyed by `(seed, purpose, agent,
//! frame)`. Observing frame 40 before frame 3, or one agent before the
//! other, changes nothing; the same seed is byte-identical run to run.
//!
//! Observations model a per-agent detector-plus-tracker: range-gated
//! visibility, independent misses, Gaussian center/heading/extent noise
//! applied in the agent's local frame, Poisson clutter with never-reused
//! track ids, and track ids that persist across short occlusions but reset
//! once an object stays unseen for `TRACK_RESET_GAP` frames. Every box
//! remembers which global object produced it (or none, for clutter), which
//! is what scoring a matcher against the truth needs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::geometry::{wrap, Point2, Se2Pose};
use crate::graph::TrackedBox;
use crate::wire::AlignmentMessage;

/// Simulation step, seconds per frame.
pub const DT: f64 = 0.1;
/// Minimum center separation between any two objects, any frame.
pub const MIN_SEPARATION: f64 = 2.0;
/// A track id survives up to this many consecutive missed frames.
pub const TRACK_RESET_GAP: usize = 3;

/// Floor for perturbed box extents, keeps noisy dims valid.
const MIN_EXTENT: f64 = 0.3;
/// Bound on per-object heading drift, rad/s.
const MAX_TURN_RATE: f64 = 0.1;

const SALT_LAYOUT: u64 = 0x4C41_594F;
const SALT_VISIBILITY: u64 = 0x5649_5349;
const SALT_DETECT: u64 = 0x4445_5445;
const SALT_LOCALIZE: u64 = 0x4C4F_4341;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(&'static str),
    #[error("could not place {num_objects} objects {MIN_SEPARATION} m apart in a {extent} m world")]
    PlacementFailed { num_objects: usize, extent: f64 },
}

/// Everything that defines a scenario. Two equal configs produce equal
/// scenarios down to the last bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub num_objects: usize,
    pub num_agents: usize,
    /// Side length of the square world, centered on the origin (meters).
    pub world_extent: f64,
    pub num_frames: usize,
    pub sensing_radius: f64,
    /// Per-object per-frame probability of a missed detection.
    pub p_miss: f64,
    /// Poisson mean of false positives per agent per frame.
    pub fp_rate: f64,
    pub det_sigma_xy: f64,
    pub det_sigma_yaw: f64,
    pub det_sigma_dim: f64,
    /// Object speeds are drawn uniformly from `[0, object_speed_range]` m/s.
    pub object_speed_range: f64,
    /// Std of the reported-pose translation error, per axis (meters).
    pub loc_sigma_t: f64,
    /// Std of the reported-pose heading error (radians).
    pub loc_sigma_r: f64,
    /// When set, every agent reports one identical attacker-chosen pose.
    pub spoof_attack: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_objects: 10,
            num_agents: 2,
            world_extent: 80.0,
            num_frames: 100,
            sensing_radius: 50.0,
            p_miss: 0.1,
            fp_rate: 0.5,
            det_sigma_xy: 0.2,
            det_sigma_yaw: 0.02,
            det_sigma_dim: 0.05,
            object_speed_range: 3.0,
            loc_sigma_t: 0.0,
            loc_sigma_r: 0.0,
            spoof_attack: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_agents < 2 {
            return Err(SimError::InvalidConfig("need at least 2 agents"));
        }
        if self.num_frames == 0 {
            return Err(SimError::InvalidConfig("need at least 1 frame"));
        }
        for (ok, msg) in [
            (
                self.world_extent.is_finite() && self.world_extent > 0.0,
                "world_extent must be positive",
            ),
            (
                self.sensing_radius.is_finite() && self.sensing_radius > 0.0,
                "sensing_radius must be positive",
            ),
            (
                (0.0..=1.0).contains(&self.p_miss),
                "p_miss must lie in [0, 1]",
            ),
            (
                self.fp_rate.is_finite() && (0.0..=1000.0).contains(&self.fp_rate),
                "fp_rate must lie in [0, 1000]",
            ),
            (
                self.det_sigma_xy.is_finite() && self.det_sigma_xy >= 0.0,
                "det_sigma_xy must be >= 0",
            ),
            (
                self.det_sigma_yaw.is_finite() && self.det_sigma_yaw >= 0.0,
                "det_sigma_yaw must be >= 0",
            ),
            (
                self.det_sigma_dim.is_finite() && self.det_sigma_dim >= 0.0,
                "det_sigma_dim must be >= 0",
            ),
            (
                self.object_speed_range.is_finite() && self.object_speed_range >= 0.0,
                "object_speed_range must be >= 0",
            ),
            (
                self.loc_sigma_t.is_finite() && self.loc_sigma_t >= 0.0,
                "loc_sigma_t must be >= 0",
            ),
            (
                self.loc_sigma_r.is_finite() && self.loc_sigma_r >= 0.0,
                "loc_sigma_r must be >= 0",
            ),
        ] {
            if !ok {
                return Err(SimError::InvalidConfig(msg));
            }
        }
        Ok(())
    }
}

/// One agent's detector output for one frame, boxes in the agent's local
/// frame. `truth[k]` is the global object behind `boxes[k]`, `None` for
/// clutter; it exists for scoring and is never transmitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub agent_id: u32,
    pub timestep: u32,
    pub boxes: Vec<TrackedBox>,
    pub truth: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
struct PlanarState {
    x: f64,
    y: f64,
    heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct FrameState {
    objects: Vec<PlanarState>,
    agents: Vec<Se2Pose>,
}

#[derive(Debug, Clone, PartialEq)]
struct FrameRoster {
    /// `(global object index, track id)`, ascending by object index.
    detections: Vec<(usize, u32)>,
    /// Track ids of this frame's false positives.
    false_positives: Vec<u32>,
}

/// A fully generated scene: trajectories, per-agent detection rosters, and
/// the attacker pose used under spoofing. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    cfg: ScenarioConfig,
    extents: Vec<(f64, f64)>,
    frames: Vec<FrameState>,
    /// Indexed `[agent][frame]`.
    rosters: Vec<Vec<FrameRoster>>,
    spoof_pose: Se2Pose,
}

/// Counter-split substream: one ChaCha stream per `(seed, purpose, agent,
/// frame)`, so draws never depend on who asked first.
fn stream(seed: u64, purpose: u64, agent: u64, frame: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for (slot, word) in [purpose, agent, frame, 0x9E37_79B9_7F4A_7C15].into_iter().enumerate() {
        state = state.wrapping_add(word).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        state ^= state >> 31;
        let mixed = splitmix64(&mut state);
        key[slot * 8..(slot + 1) * 8].copy_from_slice(&mixed.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Scenario {
    pub fn generate(cfg: ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut layout = stream(cfg.seed, SALT_LAYOUT, 0, 0);

        let mut extents = Vec::with_capacity(cfg.num_objects);
        let mut trajectories: Vec<Vec<PlanarState>> = Vec::with_capacity(cfg.num_objects);
        let half = cfg.world_extent / 2.0;
        for _ in 0..cfg.num_objects {
            extents.push(sample_extent(&mut layout));
            let mut placed = false;
            // Each object is rolled as a whole trajectory and re-rolled until
            // it keeps its distance from everything placed before it.
            for _ in 0..1000 {
                let start = PlanarState {
                    x: layout.random_range(-half..half),
                    y: layout.random_range(-half..half),
                    heading: layout.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                };
                let speed = layout.random_range(0.0..=cfg.object_speed_range.max(f64::MIN_POSITIVE));
                let turn = layout.random_range(-MAX_TURN_RATE..=MAX_TURN_RATE);
                let candidate = roll_out(start, speed, turn, cfg.num_frames);
                let clear = candidate.iter().enumerate().all(|(t, s)| {
                    trajectories.iter().all(|other| {
                        let o = &other[t];
                        (s.x - o.x).hypot(s.y - o.y) >= MIN_SEPARATION
                    })
                });
                if clear {
                    trajectories.push(candidate);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(SimError::PlacementFailed {
                    num_objects: cfg.num_objects,
                    extent: cfg.world_extent,
                });
            }
        }

        // Agents start inside a small disc at the world center so their
        // sensing areas overlap throughout the run.
        let spawn_radius = (cfg.sensing_radius / 4.0).min(half);
        let mut agent_paths: Vec<Vec<PlanarState>> = Vec::with_capacity(cfg.num_agents);
        for _ in 0..cfg.num_agents {
            let r = spawn_radius * layout.random_range(0.0f64..1.0).sqrt();
            let ang = layout.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let start = PlanarState {
                x: r * ang.cos(),
                y: r * ang.sin(),
                heading: layout.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            };
            let speed = layout.random_range(0.0..=2.0);
            let turn = layout.random_range(-0.05..=0.05);
            agent_paths.push(roll_out(start, speed, turn, cfg.num_frames));
        }

        let spoof_pose = Se2Pose::new(
            layout.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            layout.random_range(-half..half),
            layout.random_range(-half..half),
        )
        .expect("finite spoof pose");

        let frames: Vec<FrameState> = (0..cfg.num_frames)
            .map(|t| FrameState {
                objects: trajectories.iter().map(|tr| tr[t].clone()).collect(),
                agents: agent_paths
                    .iter()
                    .map(|tr| {
                        Se2Pose::new(tr[t].heading, tr[t].x, tr[t].y).expect("finite agent pose")
                    })
                    .collect(),
            })
            .collect();

        let rosters = build_rosters(&cfg, &frames);

        Ok(Self {
            cfg,
            extents,
            frames,
            rosters,
            spoof_pose,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn num_frames(&self) -> usize {
        self.cfg.num_frames
    }

    pub fn num_agents(&self) -> usize {
        self.cfg.num_agents
    }

    pub fn num_objects(&self) -> usize {
        self.cfg.num_objects
    }

    /// Ground-truth pose of an agent: the transform from its local frame to
    /// the world frame.
    pub fn agent_pose(&self, agent: usize, t: usize) -> Se2Pose {
        self.frames[t].agents[agent]
    }

    pub fn object_center(&self, object: usize, t: usize) -> Point2 {
        let s = &self.frames[t].objects[object];
        Point2::new(s.x, s.y).expect("finite object center")
    }

    pub fn object_yaw(&self, object: usize, t: usize) -> f64 {
        wrap(self.frames[t].objects[object].heading)
    }

    pub fn object_extent(&self, object: usize) -> (f64, f64) {
        self.extents[object]
    }

    /// Detector output for one agent and frame. Pure: any call order, any
    /// repetition, same result.
    pub fn observe(&self, agent: usize, t: usize) -> Observation {
        let roster = &self.rosters[agent][t];
        let world_from_agent = self.frames[t].agents[agent];
        let agent_from_world = world_from_agent.inverse();
        let mut rng = stream(self.cfg.seed, SALT_DETECT, agent as u64, t as u64);
        let xy = Normal::new(0.0, self.cfg.det_sigma_xy).expect("validated sigma");
        let yaw_n = Normal::new(0.0, self.cfg.det_sigma_yaw).expect("validated sigma");
        let dim = Normal::new(0.0, self.cfg.det_sigma_dim).expect("validated sigma");

        let mut boxes = Vec::with_capacity(roster.detections.len() + roster.false_positives.len());
        let mut truth = Vec::with_capacity(boxes.capacity());
        for &(object, track_id) in &roster.detections {
            let s = &self.frames[t].objects[object];
            let local = agent_from_world.apply(Point2::new(s.x, s.y).expect("finite center"));
            let local_yaw = wrap(s.heading - world_from_agent.theta());
            let (length, width) = self.extents[object];
            let b = TrackedBox::new(
                local.x() + xy.sample(&mut rng),
                local.y() + xy.sample(&mut rng),
                (length + dim.sample(&mut rng)).max(MIN_EXTENT),
                (width + dim.sample(&mut rng)).max(MIN_EXTENT),
                local_yaw + yaw_n.sample(&mut rng),
                track_id,
            )
            .expect("noisy box stays valid");
            boxes.push(b);
            truth.push(Some(object));
        }
        for &fp_id in &roster.false_positives {
            let r = self.cfg.sensing_radius * rng.random_range(0.0f64..1.0).sqrt();
            let ang = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let b = TrackedBox::new(
                r * ang.cos(),
                r * ang.sin(),
                rng.random_range(3.5..9.0),
                rng.random_range(1.6..2.8),
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                fp_id,
            )
            .expect("clutter box valid");
            boxes.push(b);
            truth.push(None);
        }
        Observation {
            agent_id: agent as u32,
            timestep: t as u32,
            boxes,
            truth,
        }
    }

    /// The pose an agent claims over the radio: truth plus localization
    /// noise, or the shared attacker pose when the scenario is spoofed.
    pub fn reported_pose(&self, agent: usize, t: usize) -> Se2Pose {
        if self.cfg.spoof_attack {
            return self.spoof_pose;
        }
        let truth = self.frames[t].agents[agent];
        let mut rng = stream(self.cfg.seed, SALT_LOCALIZE, agent as u64, t as u64);
        let trans = Normal::new(0.0, self.cfg.loc_sigma_t).expect("validated sigma");
        let rot = Normal::new(0.0, self.cfg.loc_sigma_r).expect("validated sigma");
        let dx = trans.sample(&mut rng);
        let dy = trans.sample(&mut rng);
        let dth = rot.sample(&mut rng);
        Se2Pose::new(truth.theta() + dth, truth.tx() + dx, truth.ty() + dy)
            .expect("finite reported pose")
    }

    /// Ground-truth transform taking points in agent `j`'s frame into agent
    /// `i`'s frame.
    pub fn true_relative_pose(&self, i: usize, j: usize, t: usize) -> Se2Pose {
        self.frames[t].agents[i]
            .inverse()
            .compose(&self.frames[t].agents[j])
    }

    /// One agent's whole run as wire messages, ready for a replay log.
    pub fn export_replay(&self, agent: usize) -> Vec<AlignmentMessage> {
        (0..self.cfg.num_frames)
            .map(|t| {
                let obs = self.observe(agent, t);
                AlignmentMessage {
                    sender_id: obs.agent_id,
                    timestep: obs.timestep,
                    boxes: obs.boxes,
                }
            })
            .collect()
    }
}

/// Box-index pairs of objects both agents detected this frame; clutter
/// never pairs. Sorted by the left index.
pub fn true_correspondences(obs_i: &Observation, obs_j: &Observation) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (bi, gi) in obs_i.truth.iter().enumerate() {
        let Some(gi) = gi else { continue };
        for (bj, gj) in obs_j.truth.iter().enumerate() {
            if Some(*gi) == *gj {
                pairs.push((bi, bj));
                break;
            }
        }
    }
    pairs
}

fn sample_extent(rng: &mut ChaCha12Rng) -> (f64, f64) {
    // Car, van, truck archetypes with per-vehicle jitter. Repeated
    // archetypes leave extents alone too similar to identify an object,
    // which is exactly what makes the scene an honest matching benchmark.
    let archetypes = [(4.6, 1.9), (5.4, 2.1), (8.2, 2.6)];
    let which = match rng.random_range(0.0f64..1.0) {
        u if u < 0.6 => 0,
        u if u < 0.85 => 1,
        _ => 2,
    };
    let (l, w) = archetypes[which];
    let jitter_l: Normal<f64> = Normal::new(0.0, 0.15).expect("const sigma");
    let jitter_w: Normal<f64> = Normal::new(0.0, 0.08).expect("const sigma");
    (
        (l + jitter_l.sample(rng)).max(MIN_EXTENT),
        (w + jitter_w.sample(rng)).max(MIN_EXTENT),
    )
}

/// Constant-speed path with a fixed bounded turn rate, Euler-stepped.
fn roll_out(start: PlanarState, speed: f64, turn: f64, frames: usize) -> Vec<PlanarState> {
    let mut out = Vec::with_capacity(frames);
    let mut s = start;
    for _ in 0..frames {
        out.push(s.clone());
        let next = PlanarState {
            x: s.x + speed * s.heading.cos() * DT,
            y: s.y + speed * s.heading.sin() * DT,
            heading: s.heading + turn * DT,
        };
        s = next;
    }
    out
}

fn build_rosters(cfg: &ScenarioConfig, frames: &[FrameState]) -> Vec<Vec<FrameRoster>> {
    let mut rosters = Vec::with_capacity(cfg.num_agents);
    for agent in 0..cfg.num_agents {
        let mut next_track_id: u32 = 0;
        let mut current_id: Vec<Option<u32>> = vec![None; cfg.num_objects];
        let mut last_seen: Vec<Option<usize>> = vec![None; cfg.num_objects];
        let mut per_frame = Vec::with_capacity(cfg.num_frames);
        for (t, frame) in frames.iter().enumerate() {
            let mut rng = stream(cfg.seed, SALT_VISIBILITY, agent as u64, t as u64);
            let agent_pose = &frame.agents[agent];
            let mut detections = Vec::new();
            for (object, s) in frame.objects.iter().enumerate() {
                // One miss draw per object regardless of range keeps the
                // stream layout independent of the geometry.
                let miss_draw = rng.random_range(0.0f64..1.0);
                let in_range = (s.x - agent_pose.tx()).hypot(s.y - agent_pose.ty())
                    <= cfg.sensing_radius;
                if !in_range || miss_draw < cfg.p_miss {
                    continue;
                }
                let id = match (current_id[object], last_seen[object]) {
                    // Unseen gaps up to the reset threshold keep the track.
                    (Some(id), Some(last)) if t - last - 1 < TRACK_RESET_GAP => id,
                    _ => {
                        let id = next_track_id;
                        next_track_id += 1;
                        current_id[object] = Some(id);
                        id
                    }
                };
                last_seen[object] = Some(t);
                detections.push((object, id));
            }
            let fp_count = if cfg.fp_rate > 0.0 {
                Poisson::new(cfg.fp_rate).expect("validated rate").sample(&mut rng) as usize
            } else {
                0
            };
            let false_positives: Vec<u32> = (0..fp_count)
                .map(|_| {
                    let id = next_track_id;
                    next_track_id += 1;
                    id
                })
                .collect();
            per_frame.push(FrameRoster {
                detections,
                false_positives,
            });
        }
        rosters.push(per_frame);
    }
    rosters
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quick_cfg() -> ScenarioConfig {
        ScenarioConfig {
            num_frames: 30,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = Scenario::generate(quick_cfg()).unwrap();
        let b = Scenario::generate(quick_cfg()).unwrap();
        assert_eq!(a, b);
        let c = Scenario::generate(ScenarioConfig {
            seed: 1,
            ..quick_cfg()
        })
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn observation_is_call_order_independent() {
        let s = Scenario::generate(quick_cfg()).unwrap();
        let late_first = s.observe(1, 20);
        let early = s.observe(0, 0);
        let late_again = s.observe(1, 20);
        assert_eq!(late_first, late_again);
        assert_eq!(early, s.observe(0, 0));
    }

    #[test]
    fn separation_holds_on_every_frame() {
        for seed in 0..3 {
            let s = Scenario::generate(ScenarioConfig {
                seed,
                ..quick_cfg()
            })
            .unwrap();
            for t in 0..s.num_frames() {
                for a in 0..s.num_objects() {
                    for b in 0..a {
                        let d = s.object_center(a, t).distance_to(&s.object_center(b, t));
                        assert!(
                            d >= MIN_SEPARATION,
                            "objects {a},{b} at frame {t} only {d} m apart (seed {seed})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_noise_observations_match_truth_exactly() {
        let s = Scenario::generate(ScenarioConfig {
            det_sigma_xy: 0.0,
            det_sigma_yaw: 0.0,
            det_sigma_dim: 0.0,
            p_miss: 0.0,
            fp_rate: 0.0,
            ..quick_cfg()
        })
        .unwrap();
        let obs = s.observe(0, 5);
        assert_eq!(obs.boxes.len(), {
            // Everything in range is detected.
            let pose = s.agent_pose(0, 5);
            (0..s.num_objects())
                .filter(|&o| {
                    let c = s.object_center(o, 5);
                    (c.x() - pose.tx()).hypot(c.y() - pose.ty()) <= s.config().sensing_radius
                })
                .count()
        });
        let agent_from_world = s.agent_pose(0, 5).inverse();
        for (b, truth) in obs.boxes.iter().zip(&obs.truth) {
            let object = truth.expect("no clutter configured");
            let local = agent_from_world.apply(s.object_center(object, 5));
            assert_eq!(b.x(), local.x());
            assert_eq!(b.y(), local.y());
            let (l, w) = s.object_extent(object);
            assert_eq!((b.length(), b.width()), (l, w));
            assert_abs_diff_eq!(
                wrap(b.yaw() - (s.object_yaw(object, 5) - s.agent_pose(0, 5).theta())),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn total_miss_leaves_only_clutter() {
        let s = Scenario::generate(ScenarioConfig {
            p_miss: 1.0,
            fp_rate: 2.0,
            ..quick_cfg()
        })
        .unwrap();
        for t in 0..s.num_frames() {
            let obs = s.observe(0, t);
            assert!(obs.truth.iter().all(Option::is_none));
        }
    }

    #[test]
    fn no_objects_means_only_clutter() {
        let s = Scenario::generate(ScenarioConfig {
            num_objects: 0,
            fp_rate: 1.0,
            ..quick_cfg()
        })
        .unwrap();
        let obs = s.observe(1, 3);
        assert!(obs.truth.iter().all(Option::is_none));
    }

    #[test]
    fn center_noise_rms_matches_sigma() {
        // RMS of the 2D center error should be sigma * sqrt(2) over many
        // draws; 5% tolerance at ~10^4 samples.
        let sigma = 0.2;
        let s = Scenario::generate(ScenarioConfig {
            num_frames: 800,
            object_speed_range: 0.5,
            fp_rate: 0.0,
            p_miss: 0.0,
            det_sigma_yaw: 0.0,
            det_sigma_dim: 0.0,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let mut sum_sq = 0.0;
        let mut n = 0usize;
        for agent in 0..2 {
            for t in 0..s.num_frames() {
                let agent_from_world = s.agent_pose(agent, t).inverse();
                let obs = s.observe(agent, t);
                for (b, truth) in obs.boxes.iter().zip(&obs.truth) {
                    let local = agent_from_world.apply(s.object_center(truth.unwrap(), t));
                    sum_sq += (b.x() - local.x()).powi(2) + (b.y() - local.y()).powi(2);
                    n += 1;
                }
            }
        }
        assert!(n > 10_000, "only {n} samples");
        let rms = (sum_sq / n as f64).sqrt();
        let expected = sigma * 2.0f64.sqrt();
        assert!(
            (rms - expected).abs() / expected < 0.05,
            "rms {rms} vs expected {expected} over {n} draws"
        );
    }

    #[test]
    fn reported_pose_noise_std_matches_sigma() {
        let sigma = 2.5;
        let s = Scenario::generate(ScenarioConfig {
            num_objects: 0,
            num_frames: 5000,
            loc_sigma_t: sigma,
            fp_rate: 0.0,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let mut errs = Vec::with_capacity(10_000);
        for agent in 0..2 {
            for t in 0..s.num_frames() {
                errs.push(s.reported_pose(agent, t).tx() - s.agent_pose(agent, t).tx());
            }
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let std = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
            / (errs.len() - 1) as f64)
            .sqrt();
        assert!(
            (std - sigma).abs() / sigma < 0.05,
            "std {std} vs sigma {sigma} over {} draws",
            errs.len()
        );
    }

    #[test]
    fn zero_loc_noise_reports_truth() {
        let s = Scenario::generate(quick_cfg()).unwrap();
        for t in [0, 7, 29] {
            assert_eq!(s.reported_pose(0, t), s.agent_pose(0, t));
        }
    }

    #[test]
    fn spoofed_reports_collapse_to_one_pose() {
        let s = Scenario::generate(ScenarioConfig {
            spoof_attack: true,
            num_agents: 3,
            loc_sigma_t: 1.0,
            ..quick_cfg()
        })
        .unwrap();
        let claimed = s.reported_pose(0, 0);
        for agent in 0..3 {
            for t in [0, 10, 29] {
                assert_eq!(s.reported_pose(agent, t), claimed);
            }
        }
        assert_ne!(claimed, s.agent_pose(0, 0));
    }

    #[test]
    fn relative_pose_transports_points() {
        let s = Scenario::generate(quick_cfg()).unwrap();
        let t = 12;
        let rel = s.true_relative_pose(0, 1, t);
        // A world point seen in j's frame must land on the same world point
        // when mapped through rel into i's frame.
        let world = Point2::new(3.0, -4.0).unwrap();
        let in_j = s.agent_pose(1, t).inverse().apply(world);
        let in_i = s.agent_pose(0, t).inverse().apply(world);
        let mapped = rel.apply(in_j);
        assert_abs_diff_eq!(mapped.x(), in_i.x(), epsilon = 1e-10);
        assert_abs_diff_eq!(mapped.y(), in_i.y(), epsilon = 1e-10);
    }

    #[test]
    fn track_ids_persist_and_reset_by_the_gap_rule() {
        let s = Scenario::generate(ScenarioConfig {
            p_miss: 0.3,
            num_frames: 120,
            fp_rate: 0.0,
            ..ScenarioConfig::default()
        })
        .unwrap();
        for agent in 0..2 {
            // object -> (last seen frame, last id)
            let mut history: Vec<Option<(usize, u32)>> = vec![None; s.num_objects()];
            for t in 0..s.num_frames() {
                let obs = s.observe(agent, t);
                for (b, truth) in obs.boxes.iter().zip(&obs.truth) {
                    let object = truth.unwrap();
                    if let Some((last_t, last_id)) = history[object] {
                        let gap = t - last_t - 1;
                        if gap < TRACK_RESET_GAP {
                            assert_eq!(
                                b.track_id(),
                                last_id,
                                "object {object} lost its id after a {gap}-frame gap"
                            );
                        } else {
                            assert_ne!(
                                b.track_id(),
                                last_id,
                                "object {object} kept its id across a {gap}-frame gap"
                            );
                        }
                    }
                    history[object] = Some((t, b.track_id()));
                }
            }
        }
    }

    #[test]
    fn clutter_ids_are_fresh_and_unique() {
        let s = Scenario::generate(ScenarioConfig {
            fp_rate: 1.5,
            num_frames: 60,
            ..ScenarioConfig::default()
        })
        .unwrap();
        for agent in 0..2 {
            let mut fp_ids = std::collections::BTreeSet::new();
            let mut detection_ids = std::collections::BTreeSet::new();
            for t in 0..s.num_frames() {
                let obs = s.observe(agent, t);
                for (b, truth) in obs.boxes.iter().zip(&obs.truth) {
                    if truth.is_some() {
                        detection_ids.insert(b.track_id());
                    } else {
                        assert!(
                            fp_ids.insert(b.track_id()),
                            "clutter id {} reused",
                            b.track_id()
                        );
                    }
                }
            }
            assert!(fp_ids.is_disjoint(&detection_ids));
        }
    }

    #[test]
    fn default_config_keeps_agents_covisible() {
        let mut good = 0usize;
        let mut total = 0usize;
        for seed in 0..5 {
            let s = Scenario::generate(ScenarioConfig {
                seed,
                ..ScenarioConfig::default()
            })
            .unwrap();
            for t in 0..s.num_frames() {
                let pairs = true_correspondences(&s.observe(0, t), &s.observe(1, t));
                total += 1;
                if pairs.len() >= 2 {
                    good += 1;
                }
            }
        }
        let frac = good as f64 / total as f64;
        assert!(frac >= 0.9, "only {frac:.3} of frames had 2+ shared objects");
    }

    #[test]
    fn correspondences_pair_shared_objects_only() {
        let s = Scenario::generate(ScenarioConfig {
            fp_rate: 2.0,
            ..quick_cfg()
        })
        .unwrap();
        let (oi, oj) = (s.observe(0, 3), s.observe(1, 3));
        let pairs = true_correspondences(&oi, &oj);
        for &(bi, bj) in &pairs {
            assert_eq!(oi.truth[bi], oj.truth[bj]);
            assert!(oi.truth[bi].is_some());
        }
        // Complete: every shared global id appears.
        let shared: std::collections::BTreeSet<_> = oi
            .truth
            .iter()
            .flatten()
            .filter(|gid| oj.truth.contains(&Some(**gid)))
            .collect();
        assert_eq!(pairs.len(), shared.len());
    }

    #[test]
    fn config_validation() {
        let bad_agents = ScenarioConfig {
            num_agents: 1,
            ..ScenarioConfig::default()
        };
        assert!(Scenario::generate(bad_agents).is_err());
        let bad_p = ScenarioConfig {
            p_miss: 1.5,
            ..ScenarioConfig::default()
        };
        assert!(Scenario::generate(bad_p).is_err());
        // An over-packed world must fail placement, not spin forever.
        let packed = ScenarioConfig {
            num_objects: 200,
            world_extent: 10.0,
            num_frames: 2,
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            Scenario::generate(packed),
            Err(SimError::PlacementFailed { .. })
        ));
    }

    #[test]
    fn replay_export_mirrors_observations() {
        let s = Scenario::generate(quick_cfg()).unwrap();
        let log = s.export_replay(1);
        assert_eq!(log.len(), s.num_frames());
        for (t, msg) in log.iter().enumerate() {
            assert_eq!(msg.sender_id, 1);
            assert_eq!(msg.timestep, t as u32);
            assert_eq!(msg.boxes, s.observe(1, t).boxes);
        }
    }
}
