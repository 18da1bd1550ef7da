//! Spatial alignment for collaborative perception without shared positioning.
//!
//! Two agents observing the same traffic scene each produce a set of tracked
//! bounding boxes in their own local frame. This crate recovers the relative
//! pose between the agents from box geometry alone: boxes become nodes of a
//! fully connected graph whose features are invariant to rigid motion of the
//! observer, the graphs are matched by a temporally seeded common-subgraph
//! search, and the matched box centers are fed to a closed-form least-squares
//! alignment. Reported positions are never an input, so a wrong or hostile
//! pose claim cannot corrupt the estimate.
//!
//! Module map, in pipeline order:
//!
//! * [`geometry`] — planar rigid transforms and angle handling.
//! * [`graph`] — tracked boxes and the pose-invariant object graph.
//! * [`matching`] — common-subgraph search between two object graphs.
//! * [`pose`] — least-squares rigid alignment of matched centers.
//! * [`wire`] — compact box messages, replay logs, bandwidth accounting.
//! * [`sim`] — deterministic synthetic scenes for evaluation.
//! * [`icp`] — point-to-point ICP baseline for comparison runs.
//! * [`harness`] — experiment runner, sweeps, ablations, CSV output.

pub mod geometry;
pub mod graph;
pub mod harness;
pub mod icp;
pub mod matching;
pub mod pose;
pub mod sim;
pub mod wire;

pub use geometry::{Point2, Se2Pose};
pub use graph::{ObjectGraph, TrackedBox};
pub use matching::{CommonSubgraph, MatchConfig};
pub use pose::PoseEstimate;
