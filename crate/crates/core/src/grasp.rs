//! Grasp-set evaluation for safe handover.
//!
//! A grasp is a gripper pose in SE(3). Predicted grasps are scored against
//! a reference set of feasible grasps around the true object pose: coverage
//! asks how much of the reference set is reachable, precision how many
//! predictions are near a feasible grasp. Sweeping the hand-clearance
//! threshold ε produces a precision/coverage curve.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::camera::PointCloud;
use crate::geometry::{AabbTree, GeometryError, TriMesh};
use crate::math::{quat_angle, Quat, Vec3};
use crate::models::RigidPose;

/// A gripper point counts as touching a mesh within this distance (meters),
/// on top of the inside test.
pub const SURFACE_CONTACT_TOLERANCE: f64 = 1e-4;

/// Meters of translation that weigh as much as one radian of quaternion
/// angle in farthest-point sampling.
pub const FPS_ROTATION_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum GraspError {
    /// A grasp orientation is not a unit quaternion (within 1e-9).
    BadQuaternion { index: usize },
    /// A gripper template must carry at least one point.
    EmptyTemplate,
    /// σ_t must be positive and σ_q inside (0, π).
    BadMatchConfig,
    /// Farthest-point sample size outside 1..=len.
    SampleSize { n: usize, len: usize },
    /// Mesh collision tests need a closed mesh.
    MeshNotClosed,
    /// The ε grid must be non-empty and strictly ascending.
    BadEpsilonGrid,
    Geometry(GeometryError),
}

impl fmt::Display for GraspError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraspError::BadQuaternion { index } => {
                write!(f, "grasp {index} orientation is not a unit quaternion")
            }
            GraspError::EmptyTemplate => write!(f, "gripper template has no points"),
            GraspError::BadMatchConfig => {
                write!(f, "match thresholds must satisfy σ_t > 0 and 0 < σ_q < π")
            }
            GraspError::SampleSize { n, len } => {
                write!(f, "cannot sample {n} grasps from a set of {len}")
            }
            GraspError::MeshNotClosed => write!(f, "mesh not closed"),
            GraspError::BadEpsilonGrid => {
                write!(f, "ε grid must be non-empty and strictly ascending")
            }
            GraspError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for GraspError {}

impl From<GeometryError> for GraspError {
    fn from(e: GeometryError) -> Self {
        GraspError::Geometry(e)
    }
}

/// A gripper pose: where the gripper sits and how it is oriented. `q` and
/// `−q` describe the same grasp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grasp {
    /// Position in meters.
    pub translation: Vec3,
    /// Unit quaternion.
    pub orientation: Quat,
}

impl Grasp {
    /// Builds a grasp, rejecting orientations more than 1e-9 from unit norm.
    pub fn new(translation: Vec3, orientation: Quat) -> Result<Self, GraspError> {
        if (orientation.norm() - 1.0).abs() > 1e-9 {
            return Err(GraspError::BadQuaternion { index: 0 });
        }
        Ok(Self {
            translation,
            orientation,
        })
    }
}

/// An ordered list of grasps.
pub type GraspSet = Vec<Grasp>;

/// Checks every orientation in a set for unit norm.
pub fn validate_grasps(grasps: &GraspSet) -> Result<(), GraspError> {
    for (index, g) in grasps.iter().enumerate() {
        if (g.orientation.norm() - 1.0).abs() > 1e-9 {
            return Err(GraspError::BadQuaternion { index });
        }
    }
    Ok(())
}

/// Grasps verified collision-free against the true object and hand meshes;
/// the yardstick that coverage and precision measure against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pub grasps: GraspSet,
}

/// Points sampled on the gripper surface, in the gripper's own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GripperTemplate {
    points: Vec<Vec3>,
}

impl GripperTemplate {
    pub fn new(points: Vec<Vec3>) -> Result<Self, GraspError> {
        if points.is_empty() {
            return Err(GraspError::EmptyTemplate);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }
}

/// Thresholds for the grasp-matching predicate. σ_q applies to the angle
/// between unit quaternions, half the corresponding 3D rotation angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Translation threshold, meters.
    pub sigma_t: f64,
    /// Quaternion-angle threshold, radians.
    pub sigma_q: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            sigma_t: 0.05,
            sigma_q: 15.0 * core::f64::consts::PI / 180.0,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), GraspError> {
        if self.sigma_t > 0.0 && self.sigma_q > 0.0 && self.sigma_q < core::f64::consts::PI {
            Ok(())
        } else {
            Err(GraspError::BadMatchConfig)
        }
    }
}

/// True when both poses are close: ‖g_t − h_t‖ < σ_t and
/// arccos(|⟨g_q, h_q⟩|) < σ_q. Symmetric, and insensitive to quaternion
/// sign flips.
pub fn grasp_match(g: &Grasp, h: &Grasp, cfg: &MatchConfig) -> bool {
    (g.translation - h.translation).norm() < cfg.sigma_t
        && quat_angle(g.orientation, h.orientation) < cfg.sigma_q
}

fn grasp_distance(a: &Grasp, b: &Grasp) -> f64 {
    (a.translation - b.translation).norm()
        + FPS_ROTATION_WEIGHT * quat_angle(a.orientation, b.orientation)
}

/// Greedy farthest-point sampling of `n` grasps, seeded at element 0. Ties
/// pick the lowest index, so the result depends only on input order.
pub fn fps_sample(grasps: &GraspSet, n: usize) -> Result<GraspSet, GraspError> {
    if n == 0 || n > grasps.len() {
        return Err(GraspError::SampleSize {
            n,
            len: grasps.len(),
        });
    }
    let mut selected = Vec::with_capacity(n);
    let mut chosen = vec![false; grasps.len()];
    let mut dist: Vec<f64> = grasps
        .iter()
        .map(|g| grasp_distance(g, &grasps[0]))
        .collect();
    selected.push(grasps[0]);
    chosen[0] = true;
    while selected.len() < n {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in dist.iter().enumerate() {
            if !chosen[i] && d > best_d {
                best_d = d;
                best = i;
            }
        }
        chosen[best] = true;
        selected.push(grasps[best]);
        for (i, d) in dist.iter_mut().enumerate() {
            if !chosen[i] {
                *d = d.min(grasp_distance(&grasps[i], &grasps[best]));
            }
        }
    }
    Ok(selected)
}

/// Moves every grasp by a rigid pose: positions map through R·t + t₀,
/// orientations pick up the pose's rotation on the left.
pub fn transform_grasps(grasps: &GraspSet, pose: &RigidPose) -> GraspSet {
    let rot = pose.rotation_matrix();
    let q = Quat::from_rotation_matrix(&rot);
    grasps
        .iter()
        .map(|g| Grasp {
            translation: rot * g.translation + pose.translation,
            orientation: q.mul(g.orientation).normalized(),
        })
        .collect()
}

/// Drops every grasp whose posed gripper points come strictly closer than
/// `epsilon` to any hand point. ε = 0 or an empty cloud removes nothing.
pub fn hand_collision_filter(
    grasps: &GraspSet,
    template: &GripperTemplate,
    hand_cloud: &PointCloud,
    epsilon: f64,
) -> GraspSet {
    let eps2 = epsilon * epsilon;
    grasps
        .iter()
        .filter(|g| {
            if hand_cloud.points.is_empty() || epsilon <= 0.0 {
                return true;
            }
            let rot = g.orientation.to_rotation_matrix();
            !template.points.iter().any(|&p| {
                let world = rot * p + g.translation;
                hand_cloud
                    .points
                    .iter()
                    .any(|&h| (world - h).norm_squared() < eps2)
            })
        })
        .copied()
        .collect()
}

/// A closed mesh with its search tree, for point-contact tests.
struct MeshCollider<'a> {
    mesh: &'a TriMesh,
    tree: AabbTree,
}

impl<'a> MeshCollider<'a> {
    fn new(mesh: &'a TriMesh) -> Result<Self, GraspError> {
        if !mesh.is_closed() {
            return Err(GraspError::MeshNotClosed);
        }
        let tree = AabbTree::build(mesh)?;
        Ok(Self { mesh, tree })
    }

    /// Any posed gripper point inside the mesh or touching its surface?
    fn grasp_collides(&self, grasp: &Grasp, template: &GripperTemplate) -> bool {
        let rot = grasp.orientation.to_rotation_matrix();
        template.points.iter().any(|&p| {
            let world = rot * p + grasp.translation;
            if self.tree.closest_point(self.mesh, world).distance <= SURFACE_CONTACT_TOLERANCE {
                return true;
            }
            // Closedness was checked at construction.
            self.tree.is_inside(self.mesh, world).unwrap_or(false)
        })
    }
}

fn touches_scene(
    grasp: &Grasp,
    template: &GripperTemplate,
    object: &MeshCollider,
    hand: &MeshCollider,
) -> bool {
    object.grasp_collides(grasp, template) || hand.grasp_collides(grasp, template)
}

/// Carries object-frame grasp candidates into the world through the true
/// object pose, then keeps only those clear of both true meshes (given
/// already posed into the world).
pub fn build_reference_set(
    base_grasps: &GraspSet,
    gt_object_pose: &RigidPose,
    object_world: &TriMesh,
    hand_world: &TriMesh,
    template: &GripperTemplate,
) -> Result<ReferenceSet, GraspError> {
    let object = MeshCollider::new(object_world)?;
    let hand = MeshCollider::new(hand_world)?;
    let grasps = transform_grasps(base_grasps, gt_object_pose)
        .into_iter()
        .filter(|g| !touches_scene(g, template, &object, &hand))
        .collect();
    Ok(ReferenceSet { grasps })
}

fn coverage_inner(
    predicted: &GraspSet,
    reference: &ReferenceSet,
    cfg: &MatchConfig,
    template: &GripperTemplate,
    object: &MeshCollider,
    hand: &MeshCollider,
) -> f64 {
    if reference.grasps.is_empty() {
        return 1.0;
    }
    let usable: Vec<bool> = predicted
        .iter()
        .map(|g| !touches_scene(g, template, object, hand))
        .collect();
    let matched = reference
        .grasps
        .iter()
        .filter(|r| {
            predicted
                .iter()
                .zip(&usable)
                .any(|(g, &ok)| ok && grasp_match(r, g, cfg))
        })
        .count();
    matched as f64 / reference.grasps.len() as f64
}

/// Fraction of the reference set matched by at least one prediction that
/// is itself clear of the true object and hand meshes. An empty reference
/// set is vacuously covered (1.0).
pub fn coverage(
    predicted: &GraspSet,
    reference: &ReferenceSet,
    cfg: &MatchConfig,
    object_world: &TriMesh,
    hand_world: &TriMesh,
    template: &GripperTemplate,
) -> Result<f64, GraspError> {
    let object = MeshCollider::new(object_world)?;
    let hand = MeshCollider::new(hand_world)?;
    Ok(coverage_inner(
        predicted, reference, cfg, template, &object, &hand,
    ))
}

/// Fraction of predictions matching at least one reference grasp. No
/// predictions means no defined value.
pub fn precision(predicted: &GraspSet, reference: &ReferenceSet, cfg: &MatchConfig) -> Option<f64> {
    if predicted.is_empty() {
        return None;
    }
    let hits = predicted
        .iter()
        .filter(|g| reference.grasps.iter().any(|r| grasp_match(g, r, cfg)))
        .count();
    Some(hits as f64 / predicted.len() as f64)
}

/// A handover scene, everything in world coordinates except the grasp
/// candidates, which live in the object's own frame.
#[derive(Debug, Clone)]
pub struct HandoverScene<'a> {
    pub base_grasps: &'a GraspSet,
    pub gt_object_pose: RigidPose,
    /// True object mesh, already posed into the world.
    pub object_world: &'a TriMesh,
    /// True hand mesh, already posed into the world.
    pub hand_world: &'a TriMesh,
}

/// One ε sample of the curve. Precision is absent when the filter left no
/// predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub precision: Option<f64>,
    pub coverage: f64,
}

/// 15 uniform ε values spanning 0 to 0.07 m.
pub fn default_epsilon_grid() -> Vec<f64> {
    (0..15).map(|i| 0.07 * i as f64 / 14.0).collect()
}

/// Sweeps the hand-clearance threshold: for each ε the candidates are
/// posed by the estimated object pose, filtered against the hand cloud at
/// that ε, and scored against the reference set built from the true pose.
pub fn precision_coverage_curve(
    scene: &HandoverScene,
    estimated_pose: &RigidPose,
    hand_cloud: &PointCloud,
    template: &GripperTemplate,
    cfg: &MatchConfig,
    eps_grid: &[f64],
) -> Result<Vec<CurvePoint>, GraspError> {
    cfg.validate()?;
    if eps_grid.is_empty() || eps_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GraspError::BadEpsilonGrid);
    }
    let object = MeshCollider::new(scene.object_world)?;
    let hand = MeshCollider::new(scene.hand_world)?;
    let reference = ReferenceSet {
        grasps: transform_grasps(scene.base_grasps, &scene.gt_object_pose)
            .into_iter()
            .filter(|g| !touches_scene(g, template, &object, &hand))
            .collect(),
    };
    let predicted_all = transform_grasps(scene.base_grasps, estimated_pose);
    let mut points = Vec::with_capacity(eps_grid.len());
    for &epsilon in eps_grid {
        let chi = hand_collision_filter(&predicted_all, template, hand_cloud, epsilon);
        points.push(CurvePoint {
            epsilon,
            precision: precision(&chi, &reference, cfg),
            coverage: coverage_inner(&chi, &reference, cfg, template, &object, &hand),
        });
    }
    Ok(points)
}
