//! Closed-form rigid alignment of matched point pairs.
//!
//! Given centers `p` in one agent's frame and the matched centers `q` in the
//! other's, the solver returns the least-squares rigid transform taking `p`
//! onto `q`; callers wanting the opposite direction invert the result. The
//! solve is the classic centered-covariance SVD with a determinant guard, so
//! the answer is always a proper rotation, never a reflection.
//!
//! There is deliberately no outlier rejection here. The matcher only emits
//! mutually consistent pairs, and the residual it leaves behind is reported
//! so callers can still reject a suspect frame.

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::geometry::{wrap, Point2, Se2Pose};

/// Below this spread (meters) around their centroid the source points no
/// longer pin down a rotation.
const MIN_SPREAD: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PoseError {
    #[error("correspondence sides differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 correspondences, got {0}")]
    Underdetermined(usize),
    #[error("source points are coincident; rotation is unobservable")]
    DegenerateSpread,
}

/// Matched point pairs: `p[k]` in the source frame corresponds to `q[k]` in
/// the target frame. Both sides always have the same length, at least 2.
#[derive(Debug, Clone)]
pub struct Correspondences {
    p: Vec<Point2>,
    q: Vec<Point2>,
}

impl Correspondences {
    pub fn new(p: Vec<Point2>, q: Vec<Point2>) -> Result<Self, PoseError> {
        if p.len() != q.len() {
            return Err(PoseError::LengthMismatch {
                left: p.len(),
                right: q.len(),
            });
        }
        if p.len() < 2 {
            return Err(PoseError::Underdetermined(p.len()));
        }
        Ok(Self { p, q })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// A solved alignment and the root-mean-square residual it leaves on its
/// own correspondences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub pose: Se2Pose,
    pub residual_rms: f64,
}

/// Least-squares rigid transform taking the source points onto the target
/// points.
///
/// Centers both sides, takes the SVD of the 2x2 cross-covariance, and flips
/// the smaller singular direction if the raw orthogonal optimum would be a
/// reflection. Exact for noise-free rigid data down to floating-point
/// round-off, including the minimal two-point case.
pub fn solve_procrustes(c: &Correspondences) -> Result<PoseEstimate, PoseError> {
    let n = c.len() as f64;
    let p_bar = centroid(&c.p);
    let q_bar = centroid(&c.q);

    let spread = c
        .p
        .iter()
        .map(|p| p.distance_to(&p_bar))
        .fold(0.0f64, f64::max);
    if spread <= MIN_SPREAD {
        return Err(PoseError::DegenerateSpread);
    }

    // Cross-covariance of centered pairs: H = sum (p - p_bar)(q - q_bar)^T.
    let mut h = Matrix2::zeros();
    for (p, q) in c.p.iter().zip(&c.q) {
        let pc = Vector2::new(p.x() - p_bar.x(), p.y() - p_bar.y());
        let qc = Vector2::new(q.x() - q_bar.x(), q.y() - q_bar.y());
        h += pc * qc.transpose();
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("2x2 svd requested u");
    let v = svd.v_t.expect("2x2 svd requested v_t").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix2::new(1.0, 0.0, 0.0, d) * u.transpose();

    let theta = wrap(r[(1, 0)].atan2(r[(0, 0)]));
    let t = Vector2::new(q_bar.x(), q_bar.y()) - r * Vector2::new(p_bar.x(), p_bar.y());
    let pose = Se2Pose::new(theta, t.x, t.y).expect("finite inputs give a finite pose");

    let ss: f64 = c
        .p
        .iter()
        .zip(&c.q)
        .map(|(p, q)| {
            let m = pose.apply(*p);
            (m.x() - q.x()).powi(2) + (m.y() - q.y()).powi(2)
        })
        .sum();
    Ok(PoseEstimate {
        pose,
        residual_rms: (ss / n).sqrt(),
    })
}

fn centroid(pts: &[Point2]) -> Point2 {
    let n = pts.len() as f64;
    let (sx, sy) = pts
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x(), sy + p.y()));
    Point2::new(sx / n, sy / n).expect("finite centroid")
}
