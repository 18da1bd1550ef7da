//! 2D point-to-point ICP, the classical registration baseline.
//!
//! Alternates gated nearest-neighbor association with a closed-form rigid
//! re-fit until the pose stops moving. Unlike the graph matcher it needs an
//! initial pose, and that dependence is the point of the comparison: fed an
//! accurate initial guess it aligns well, fed a poor one it locks onto the
//! wrong correspondences and stays there.

use thiserror::Error;

use crate::geometry::{Point2, Se2Pose};
use crate::graph::TrackedBox;
use crate::pose::{solve_procrustes, Correspondences};

#[derive(Debug, Error, PartialEq)]
pub enum IcpError {
    #[error("icp needs non-empty source and target point sets")]
    EmptyInput,
    #[error("invalid icp config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop once the mean motion of the source points between successive
    /// pose estimates falls below this (meters).
    pub convergence_tol: f64,
    /// Candidate pairs farther apart than this are dropped. Without the
    /// gate, sparse center clouds pair everything with everything.
    pub max_pair_dist: f64,
    /// Points sampled along each box perimeter by [`densify_boxes`];
    /// 0 sends centers only.
    pub boundary_samples_per_box: usize,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_tol: 1e-4,
            max_pair_dist: 2.0,
            boundary_samples_per_box: 0,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<(), IcpError> {
        if self.max_iterations == 0 {
            return Err(IcpError::InvalidConfig("max_iterations must be >= 1"));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(IcpError::InvalidConfig("convergence_tol must be > 0"));
        }
        if !(self.max_pair_dist.is_finite() && self.max_pair_dist > 0.0) {
            return Err(IcpError::InvalidConfig("max_pair_dist must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Transform taking source points onto the target set.
    pub pose: Se2Pose,
    pub converged: bool,
    pub iterations: usize,
    /// RMS distance over gated pairs at the final pose; NaN when the gate
    /// leaves nothing.
    pub residual_rms: f64,
}

/// Gated nearest-neighbor pairs `(source index, target index)` under `pose`.
fn associate(
    source: &[Point2],
    target: &[Point2],
    pose: &Se2Pose,
    gate: f64,
) -> Vec<(usize, usize)> {
    source
        .iter()
        .enumerate()
        .filter_map(|(si, p)| {
            let moved = pose.apply(*p);
            let (ti, d) = target
                .iter()
                .enumerate()
                .map(|(ti, q)| (ti, moved.distance_to(q)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("target checked non-empty");
            (d <= gate).then_some((si, ti))
        })
        .collect()
}

fn residual_rms(source: &[Point2], target: &[Point2], pose: &Se2Pose, pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return f64::NAN;
    }
    let sum: f64 = pairs
        .iter()
        .map(|&(si, ti)| pose.apply(source[si]).distance_to(&target[ti]).powi(2))
        .sum();
    (sum / pairs.len() as f64).sqrt()
}

/// Registers `source` onto `target` starting from `init`.
///
/// Each iteration re-associates from scratch and re-fits the absolute pose
/// from the original source points, so error never accumulates through
/// incremental composition. Returns with `converged: false` when the
/// iteration cap is hit, fewer than 2 pairs survive the gate, or the fit
/// degenerates; the pose reported is the best one reached.
pub fn icp_2d(
    source: &[Point2],
    target: &[Point2],
    init: Se2Pose,
    cfg: &IcpConfig,
) -> Result<IcpResult, IcpError> {
    cfg.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(IcpError::EmptyInput);
    }

    let mut pose = init;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iterations {
        iterations += 1;
        let pairs = associate(source, target, &pose, cfg.max_pair_dist);
        if pairs.len() < 2 {
            return Ok(IcpResult {
                residual_rms: residual_rms(source, target, &pose, &pairs),
                pose,
                converged: false,
                iterations,
            });
        }
        let (p, q): (Vec<Point2>, Vec<Point2>) = pairs
            .iter()
            .map(|&(si, ti)| (source[si], target[ti]))
            .unzip();
        let corr = Correspondences::new(p, q).expect("pair count checked");
        let Ok(fit) = solve_procrustes(&corr) else {
            // Collinear or coincident pairs: no usable update.
            break;
        };
        let shift = source
            .iter()
            .map(|p| fit.pose.apply(*p).distance_to(&pose.apply(*p)))
            .sum::<f64>()
            / source.len() as f64;
        pose = fit.pose;
        if shift < cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    let final_pairs = associate(source, target, &pose, cfg.max_pair_dist);
    Ok(IcpResult {
        residual_rms: residual_rms(source, target, &pose, &final_pairs),
        pose,
        converged,
        iterations,
    })
}

/// Point cloud for a set of boxes: centers when `samples_per_box` is 0,
/// otherwise that many points evenly spaced along each box perimeter.
pub fn densify_boxes(boxes: &[TrackedBox], samples_per_box: usize) -> Vec<Point2> {
    if samples_per_box == 0 {
        return boxes.iter().map(TrackedBox::center).collect();
    }
    let mut points = Vec::with_capacity(boxes.len() * samples_per_box);
    for b in boxes {
        let (hl, hw) = (b.length() / 2.0, b.width() / 2.0);
        // Rectangle corners in box coordinates, walked as four segments.
        let corners = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)];
        let lengths = [b.length(), b.width(), b.length(), b.width()];
        let perimeter = 2.0 * (b.length() + b.width());
        let (sin, cos) = b.yaw().sin_cos();
        for k in 0..samples_per_box {
            let mut s = perimeter * k as f64 / samples_per_box as f64;
            let mut seg = 0;
            while s > lengths[seg] {
                s -= lengths[seg];
                seg += 1;
            }
            let (x0, y0) = corners[seg];
            let (x1, y1) = corners[(seg + 1) % 4];
            let f = s / lengths[seg];
            let (bx, by) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            points.push(
                Point2::new(
                    b.x() + cos * bx - sin * by,
                    b.y() + sin * bx + cos * by,
                )
                .expect("perimeter point finite"),
            );
        }
    }
    points
}
