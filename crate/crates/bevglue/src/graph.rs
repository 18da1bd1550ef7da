//! Tracked boxes and the pose-invariant object graph.
//!
//! Each detected box becomes a node; every ordered pair of distinct nodes
//! carries an edge. Node features are the box extents plus the track id,
//! edge features describe node `n` as seen from node `m`: polar range and
//! bearing with `m`'s center as pole and `m`'s heading as the reference
//! direction, plus the relative heading. All of it is unchanged when the
//! whole frame moves rigidly, which is what lets two agents compare graphs
//! without knowing their relative pose.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{wrap, Point2};

/// Below this center distance an edge is considered coincident and its
/// bearing is meaningless.
const COINCIDENT_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("box {what} must be positive, got {value}")]
    NonPositiveExtent { what: &'static str, value: f64 },
    #[error("yaw {value} outside the single-precision wrap range")]
    YawOutOfRange { value: f64 },
    #[error("track id {0} appears twice in one frame")]
    DuplicateTrackId(u32),
}

/// An axis-aligned-in-its-own-frame bounding box with a tracker identity.
///
/// Extents are strictly positive and the yaw is wrapped to `(-pi, pi]`
/// (at single precision granularity for boxes that came over the wire).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedBox {
    x: f64,
    y: f64,
    length: f64,
    width: f64,
    yaw: f64,
    track_id: u32,
}

impl TrackedBox {
    pub fn new(
        x: f64,
        y: f64,
        length: f64,
        width: f64,
        yaw: f64,
        track_id: u32,
    ) -> Result<Self, GraphError> {
        Self::validate(x, y, length, width, yaw)?;
        Ok(Self {
            x,
            y,
            length,
            width,
            yaw: wrap(yaw),
            track_id,
        })
    }

    /// Constructor for decoded wire boxes. The yaw was wrapped before the
    /// single-precision quantization, so it is kept bit-for-bit instead of
    /// being re-wrapped; re-wrapping would move a value that the cast
    /// rounded just past the boundary.
    pub(crate) fn from_decoded(
        x: f64,
        y: f64,
        length: f64,
        width: f64,
        yaw: f64,
        track_id: u32,
    ) -> Result<Self, GraphError> {
        Self::validate(x, y, length, width, yaw)?;
        // f32::from(pi as f32) overshoots pi by ~8.7e-8; anything further out
        // cannot have come from a wrapped angle.
        if yaw.abs() > f64::from(std::f32::consts::PI) {
            return Err(GraphError::YawOutOfRange { value: yaw });
        }
        Ok(Self {
            x,
            y,
            length,
            width,
            yaw,
            track_id,
        })
    }

    fn validate(x: f64, y: f64, length: f64, width: f64, yaw: f64) -> Result<(), GraphError> {
        for (what, value) in [
            ("x", x),
            ("y", y),
            ("length", length),
            ("width", width),
            ("yaw", yaw),
        ] {
            if !value.is_finite() {
                return Err(GraphError::NonFinite { what, value });
            }
        }
        for (what, value) in [("length", length), ("width", width)] {
            if value <= 0.0 {
                return Err(GraphError::NonPositiveExtent { what, value });
            }
        }
        Ok(())
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn track_id(&self) -> u32 {
        self.track_id
    }

    pub fn center(&self) -> Point2 {
        // Coordinates were validated finite on construction.
        Point2::new(self.x, self.y).expect("validated box center")
    }
}

/// Per-node feature: what the box looks like regardless of where it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFeature {
    pub length: f64,
    pub width: f64,
    pub track_id: u32,
}

/// Directed edge feature for the ordered pair `(m, n)`.
///
/// `rho` is the center distance, `theta` the bearing of `n` in `m`'s
/// heading frame, `psi_rel` the heading of `n` relative to `m`. `rho` is
/// symmetric under swapping the pair, `psi_rel` flips sign (up to the wrap
/// boundary), `theta` does not transform simply. Coincident centers get
/// `theta = 0` by convention and the `degenerate` flag, so a matcher can
/// discount the meaningless bearing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFeature {
    pub rho: f64,
    pub theta: f64,
    pub psi_rel: f64,
    pub degenerate: bool,
}

/// Fully connected directed graph over one frame's boxes.
///
/// Edges are stored dense, row-major over `(m, n)`; the diagonal is unused.
#[derive(Debug, Clone)]
pub struct ObjectGraph {
    nodes: Vec<NodeFeature>,
    centers: Vec<Point2>,
    edges: Vec<EdgeFeature>,
    by_track: BTreeMap<u32, usize>,
}

impl ObjectGraph {
    /// Builds the graph for one agent's frame. Track ids must be unique
    /// within the frame; an empty slice yields an empty graph.
    pub fn build(boxes: &[TrackedBox]) -> Result<Self, GraphError> {
        let mut by_track = BTreeMap::new();
        for (idx, b) in boxes.iter().enumerate() {
            if by_track.insert(b.track_id(), idx).is_some() {
                return Err(GraphError::DuplicateTrackId(b.track_id()));
            }
        }

        let nodes: Vec<NodeFeature> = boxes
            .iter()
            .map(|b| NodeFeature {
                length: b.length(),
                width: b.width(),
                track_id: b.track_id(),
            })
            .collect();
        let centers: Vec<Point2> = boxes.iter().map(|b| b.center()).collect();

        let m = boxes.len();
        let mut edges = Vec::with_capacity(m * m);
        for (i, bm) in boxes.iter().enumerate() {
            for (j, bn) in boxes.iter().enumerate() {
                if i == j {
                    // Diagonal placeholder, unreachable through `edge`.
                    edges.push(EdgeFeature {
                        rho: 0.0,
                        theta: 0.0,
                        psi_rel: 0.0,
                        degenerate: true,
                    });
                    continue;
                }
                edges.push(Self::edge_between(bm, bn));
            }
        }

        Ok(Self {
            nodes,
            centers,
            edges,
            by_track,
        })
    }

    fn edge_between(m: &TrackedBox, n: &TrackedBox) -> EdgeFeature {
        let dx = n.x() - m.x();
        let dy = n.y() - m.y();
        let rho = dx.hypot(dy);
        let psi_rel = wrap(n.yaw() - m.yaw());
        if rho < COINCIDENT_EPS {
            return EdgeFeature {
                rho,
                theta: 0.0,
                psi_rel,
                degenerate: true,
            };
        }
        EdgeFeature {
            rho,
            theta: wrap(dy.atan2(dx) - m.yaw()),
            psi_rel,
            degenerate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of directed edges, always `M * (M - 1)`.
    pub fn edge_count(&self) -> usize {
        let m = self.nodes.len();
        m * m.saturating_sub(1)
    }

    pub fn node(&self, idx: usize) -> &NodeFeature {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[NodeFeature] {
        &self.nodes
    }

    pub fn center(&self, idx: usize) -> Point2 {
        self.centers[idx]
    }

    /// Feature of the directed edge `m -> n`. `m` and `n` must be distinct
    /// valid node indices.
    pub fn edge(&self, m: usize, n: usize) -> &EdgeFeature {
        assert!(m != n, "self edges do not exist");
        &self.edges[m * self.nodes.len() + n]
    }

    /// Node index currently carrying `track_id`, if any.
    pub fn node_by_track(&self, track_id: u32) -> Option<usize> {
        self.by_track.get(&track_id).copied()
    }
}
