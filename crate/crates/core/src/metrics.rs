//! Hand-pose accuracy metrics and annotation reprojection statistics.
//!
//! Joint positions here are in millimeters; camera geometry stays in
//! meters, and the reprojection statistics convert internally.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::camera::{CameraError, CameraView};
use crate::energy::AnnotationSet;
use crate::math::{Mat3, Vec3};

/// Joints per hand: wrist plus four per finger.
pub const JOINT_COUNT: usize = 21;

/// Thresholds for the error-curve area span this range in millimeters.
pub const PCK_RANGE_MM: f64 = 50.0;

/// Number of thresholds in the error-curve area.
pub const PCK_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// A joint list does not hold exactly 21 entries.
    WrongJointCount { got: usize },
    /// The error-curve area needs at least one error value.
    EmptyErrors,
    /// Annotation dimensions disagree with the views or joint count.
    ShapeMismatch,
    /// A visible annotated joint failed to project.
    Projection(CameraError),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::WrongJointCount { got } => {
                write!(f, "expected {JOINT_COUNT} joints, got {got}")
            }
            MetricsError::EmptyErrors => write!(f, "no error values"),
            MetricsError::ShapeMismatch => {
                write!(f, "annotations do not match the views or joint count")
            }
            MetricsError::Projection(e) => write!(f, "projection failed: {e}"),
        }
    }
}

impl core::error::Error for MetricsError {}

impl From<CameraError> for MetricsError {
    fn from(e: CameraError) -> Self {
        MetricsError::Projection(e)
    }
}

/// The 21 joint positions of one hand, millimeters, wrist first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSet {
    pub points: [Vec3; JOINT_COUNT],
}

impl JointSet {
    pub fn new(points: [Vec3; JOINT_COUNT]) -> Self {
        Self { points }
    }

    pub fn from_slice(points: &[Vec3]) -> Result<Self, MetricsError> {
        if points.len() != JOINT_COUNT {
            return Err(MetricsError::WrongJointCount { got: points.len() });
        }
        let mut fixed = [Vec3::ZERO; JOINT_COUNT];
        fixed.copy_from_slice(points);
        Ok(Self { points: fixed })
    }

    /// Converts meter-unit joints (the model side) into millimeters.
    pub fn from_meters(points: &[Vec3]) -> Result<Self, MetricsError> {
        let mut set = Self::from_slice(points)?;
        for p in &mut set.points {
            *p = *p * 1000.0;
        }
        Ok(set)
    }
}

/// A scaled rigid motion: p ↦ scale·R·p + translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }
}

/// Pre-alignment applied before averaging joint errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    /// No alignment.
    Absolute,
    /// Translate the prediction so its wrist coincides with the truth's.
    RootRelative,
    /// Best-fit similarity transform of the prediction onto the truth.
    Procrustes,
}

/// Jacobi eigendecomposition of a symmetric 4×4 matrix: cyclic sweeps of
/// plane rotations until the off-diagonal mass is gone. Returns
/// (eigenvalues, eigenvectors as columns), unsorted.
fn sym_eigen_4(mut a: [[f64; 4]; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
    let mut v = [[0.0; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..64 {
        let mut off = 0.0;
        for p in 0..4 {
            for q in (p + 1)..4 {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if tau >= 0.0 {
                    1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..4 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in &mut v {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2], a[3][3]], v)
}

/// Least-squares similarity transform mapping `from` onto `to`. The
/// rotation comes from the dominant eigenvector of the quaternion form of
/// the cross-covariance, which is always a proper rotation; scale and
/// translation follow in closed form. Degenerate inputs (a single
/// repeated point) fall back to unit scale.
pub fn fit_similarity(from: &JointSet, to: &JointSet) -> SimilarityTransform {
    let n = JOINT_COUNT as f64;
    let mut mu_from = Vec3::ZERO;
    let mut mu_to = Vec3::ZERO;
    for j in 0..JOINT_COUNT {
        mu_from += from.points[j];
        mu_to += to.points[j];
    }
    mu_from = mu_from / n;
    mu_to = mu_to / n;

    // Cross-covariance m[a][b] = Σ from_a·to_b over centered points.
    let mut m = [[0.0; 3]; 3];
    let mut var_from = 0.0;
    for j in 0..JOINT_COUNT {
        let x = from.points[j] - mu_from;
        let y = to.points[j] - mu_to;
        let xa = x.to_array();
        let ya = y.to_array();
        for (a, &xv) in xa.iter().enumerate() {
            for (b, &yv) in ya.iter().enumerate() {
                m[a][b] += xv * yv;
            }
        }
        var_from += x.norm_squared();
    }

    let n4 = [
        [
            m[0][0] + m[1][1] + m[2][2],
            m[1][2] - m[2][1],
            m[2][0] - m[0][2],
            m[0][1] - m[1][0],
        ],
        [
            m[1][2] - m[2][1],
            m[0][0] - m[1][1] - m[2][2],
            m[0][1] + m[1][0],
            m[2][0] + m[0][2],
        ],
        [
            m[2][0] - m[0][2],
            m[0][1] + m[1][0],
            m[1][1] - m[0][0] - m[2][2],
            m[1][2] + m[2][1],
        ],
        [
            m[0][1] - m[1][0],
            m[2][0] + m[0][2],
            m[1][2] + m[2][1],
            m[2][2] - m[0][0] - m[1][1],
        ],
    ];
    let (eigenvalues, eigenvectors) = sym_eigen_4(n4);
    let mut best = 0;
    for k in 1..4 {
        if eigenvalues[k] > eigenvalues[best] {
            best = k;
        }
    }
    let q = crate::math::Quat::new(
        eigenvectors[0][best],
        eigenvectors[1][best],
        eigenvectors[2][best],
        eigenvectors[3][best],
    )
    .normalized();
    let rotation = q.to_rotation_matrix();

    let mut correlation = 0.0;
    for j in 0..JOINT_COUNT {
        let x = from.points[j] - mu_from;
        let y = to.points[j] - mu_to;
        correlation += y.dot(rotation * x);
    }
    let mut scale = if var_from > 0.0 {
        correlation / var_from
    } else {
        1.0
    };
    if !(scale > 0.0) {
        scale = 1.0;
    }
    SimilarityTransform {
        scale,
        rotation,
        translation: mu_to - rotation * mu_from * scale,
    }
}

/// Mean per-joint position error in millimeters under the chosen
/// alignment.
pub fn mpjpe(pred: &JointSet, gt: &JointSet, mode: AlignMode) -> f64 {
    let aligned: [Vec3; JOINT_COUNT] = match mode {
        AlignMode::Absolute => pred.points,
        AlignMode::RootRelative => {
            let shift = gt.points[0] - pred.points[0];
            core::array::from_fn(|j| pred.points[j] + shift)
        }
        AlignMode::Procrustes => {
            let t = fit_similarity(pred, gt);
            core::array::from_fn(|j| t.apply(pred.points[j]))
        }
    };
    let mut sum = 0.0;
    for j in 0..JOINT_COUNT {
        sum += (aligned[j] - gt.points[j]).norm();
    }
    sum / JOINT_COUNT as f64
}

/// Area under the fraction-of-errors-below-threshold curve, averaged over
/// `steps` thresholds τ_k = range·k/steps (k = 1..steps, endpoint 0
/// excluded). Comparison is strict: an error equal to a threshold does not
/// count as under it.
pub fn pck_auc_over(errors: &[f64], range_mm: f64, steps: usize) -> Result<f64, MetricsError> {
    if errors.is_empty() || steps == 0 {
        return Err(MetricsError::EmptyErrors);
    }
    let mut area = 0.0;
    for k in 1..=steps {
        let tau = range_mm * k as f64 / steps as f64;
        let under = errors.iter().filter(|&&e| e < tau).count();
        area += under as f64 / errors.len() as f64;
    }
    Ok(area / steps as f64)
}

/// `pck_auc_over` at the standard range (50 mm) and step count (100).
pub fn pck_auc(errors: &[f64]) -> Result<f64, MetricsError> {
    pck_auc_over(errors, PCK_RANGE_MM, PCK_STEPS)
}

/// Mean and spread (population standard deviation) of one joint's
/// reprojection distance across the views that saw it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointStat {
    pub mean: f64,
    pub std: f64,
}

/// Per-joint pixel distance between projected 3D joints (millimeters in,
/// converted to meters for the cameras) and the 2D annotations of one
/// hand. Joints no view marked visible come back as `None`.
pub fn reprojection_error(
    joints: &JointSet,
    annotations: &AnnotationSet,
    views: &[CameraView],
    hand: usize,
) -> Result<Vec<Option<JointStat>>, MetricsError> {
    if annotations.views.len() != views.len() {
        return Err(MetricsError::ShapeMismatch);
    }
    let mut distances: Vec<Vec<f64>> = vec![Vec::new(); JOINT_COUNT];
    for (view, ann) in views.iter().zip(&annotations.views) {
        let obs = ann.hands.get(hand).ok_or(MetricsError::ShapeMismatch)?;
        if obs.len() != JOINT_COUNT {
            return Err(MetricsError::ShapeMismatch);
        }
        for (j, kp) in obs.iter().enumerate() {
            if !kp.visible {
                continue;
            }
            let meters = joints.points[j] * 1e-3;
            let px = view.project(meters)?;
            let dx = px[0] - kp.pixel[0];
            let dy = px[1] - kp.pixel[1];
            distances[j].push(libm::sqrt(dx * dx + dy * dy));
        }
    }
    Ok(distances
        .into_iter()
        .map(|d| {
            if d.is_empty() {
                return None;
            }
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            Some(JointStat {
                mean,
                std: libm::sqrt(var),
            })
        })
        .collect())
}
