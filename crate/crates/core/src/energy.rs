//! Scene energy terms and their analytic gradients.
//!
//! The total objective is a sum of four terms: a depth term (mean squared
//! millimeter distance from merged cloud points to the nearest posed
//! surface), hand and object keypoint reprojection terms (mean squared
//! pixel error over visible annotations), and an ℓ₂ regularizer on hand
//! pose vectors. Gradients flow through closest-point barycentrics (held
//! fixed, subgradient style), camera projection, skinning, and the rigid
//! pose map.
//!
//! Evaluation is pure and single-threaded with a fixed summation order, so
//! identical inputs produce identical floats.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::camera::{CameraError, CameraView, PointCloud, SurfaceAnchor};
use crate::geometry::AabbTree;
use crate::math::{rotation_derivatives, Vec3};
use crate::models::{
    rigid_vertex_jacobian, HandJacobian, ModelError, SceneModels, ScenePose,
};

#[derive(Debug, Clone, PartialEq)]
pub enum EnergyError {
    /// Hand keypoints exist but every γ is zero.
    NoVisibleHandKeypoints,
    /// Object keypoints exist but every γ is zero.
    NoVisibleObjectKeypoints,
    /// Annotation dimensions disagree with the scene models.
    ShapeMismatch,
    /// A visible keypoint's model point cannot be projected.
    Projection(CameraError),
    Model(ModelError),
}

impl fmt::Display for EnergyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnergyError::NoVisibleHandKeypoints => write!(f, "no visible hand keypoints"),
            EnergyError::NoVisibleObjectKeypoints => write!(f, "no visible object keypoints"),
            EnergyError::ShapeMismatch => {
                write!(f, "annotations do not match the scene's hands and objects")
            }
            EnergyError::Projection(e) => write!(f, "keypoint projection failed: {e}"),
            EnergyError::Model(e) => write!(f, "model evaluation failed: {e}"),
        }
    }
}

impl core::error::Error for EnergyError {}

impl From<ModelError> for EnergyError {
    fn from(e: ModelError) -> Self {
        EnergyError::Model(e)
    }
}

/// One image-space keypoint observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointObs {
    pub pixel: [f64; 2],
    pub visible: bool,
}

impl KeypointObs {
    pub const HIDDEN: Self = Self {
        pixel: [0.0, 0.0],
        visible: false,
    };
}

/// Keypoint observations of one view: per hand per joint, and per object
/// per keypoint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViewAnnotations {
    pub hands: Vec<Vec<KeypointObs>>,
    pub objects: Vec<Vec<KeypointObs>>,
}

/// All keypoint observations of one frame, plus the fixed surface anchors
/// that define each object keypoint on its rest mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    pub views: Vec<ViewAnnotations>,
    /// `anchors[o][k]` pins object `o`'s keypoint `k`; anchors are
    /// view-independent and never re-derived after the first frame.
    pub anchors: Vec<Vec<SurfaceAnchor>>,
}

impl AnnotationSet {
    /// Checks dimensions against a scene and that visible pixels are finite.
    pub fn validate(&self, models: &SceneModels, view_count: usize) -> Result<(), EnergyError> {
        if self.views.len() != view_count || self.anchors.len() != models.objects.len() {
            return Err(EnergyError::ShapeMismatch);
        }
        for view in &self.views {
            if view.hands.len() != models.hands.len()
                || view.objects.len() != models.objects.len()
            {
                return Err(EnergyError::ShapeMismatch);
            }
            for (h, joints) in view.hands.iter().enumerate() {
                if joints.len() != models.hands[h].joint_count() {
                    return Err(EnergyError::ShapeMismatch);
                }
            }
            for (o, kps) in view.objects.iter().enumerate() {
                if kps.len() != self.anchors[o].len() {
                    return Err(EnergyError::ShapeMismatch);
                }
            }
            for obs in view
                .hands
                .iter()
                .chain(view.objects.iter())
                .flatten()
            {
                if obs.visible && !(obs.pixel[0].is_finite() && obs.pixel[1].is_finite()) {
                    return Err(EnergyError::ShapeMismatch);
                }
            }
        }
        Ok(())
    }
}

/// Energy values by term. Units: depth mm², keypoints px², regularizer
/// dimensionless; the total is their plain sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyReport {
    pub e_depth: f64,
    pub e_kpt_hand: f64,
    pub e_kpt_object: f64,
    pub e_reg: f64,
    pub e_total: f64,
}

/// Objective gradient, shaped like a [`ScenePose`]: one θ-sized vector per
/// hand and one (ω, t) 6-vector per object.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub hands: Vec<Vec<f64>>,
    pub objects: Vec<[f64; 6]>,
}

impl Gradient {
    pub fn zeros_like(pose: &ScenePose) -> Self {
        Self {
            hands: pose.hands.iter().map(|h| vec![0.0; h.theta.len()]).collect(),
            objects: vec![[0.0; 6]; pose.objects.len()],
        }
    }

    pub fn add(&mut self, other: &Gradient) {
        for (a, b) in self.hands.iter_mut().zip(&other.hands) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.objects.iter_mut().zip(&other.objects) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hands.iter().flatten().all(|x| x.is_finite())
            && self.objects.iter().flatten().all(|x| x.is_finite())
    }
}

/// Derivative of the squared distance `‖d − q‖²` with respect to the
/// triangle corners, holding the barycentric coordinates of
/// `q = u·a + v·b + w·c` fixed: `∂/∂a = −2u·(d − q)` and likewise with `v`,
/// `w` for `b`, `c`.
///
/// Freezing `(u, v, w)` is exact in the face-interior case and a
/// subgradient on edge/vertex cases, which is what the optimizer uses.
pub fn barycentric_grad(d: Vec3, tri: (Vec3, Vec3, Vec3), bary: [f64; 3]) -> [Vec3; 3] {
    let (a, b, c) = tri;
    let q = a * bary[0] + b * bary[1] + c * bary[2];
    let r = d - q;
    [r * (-2.0 * bary[0]), r * (-2.0 * bary[1]), r * (-2.0 * bary[2])]
}

/// Depth term: mean squared distance (in mm) from each cloud point to the
/// nearest posed surface, with gradient through the owning mesh only.
///
/// Each point is attributed to the single globally nearest mesh, hands
/// before objects on exact ties. An empty cloud contributes zero so frames
/// without depth still optimize on keypoints.
pub fn e_depth(
    models: &SceneModels,
    pose: &ScenePose,
    cloud: &PointCloud,
) -> Result<(f64, Gradient), EnergyError> {
    let mut grad = Gradient::zeros_like(pose);
    if cloud.is_empty() {
        return Ok((0.0, grad));
    }
    let posed = models.pose_all(pose)?;
    let trees: Vec<AabbTree> = posed
        .iter()
        .map(|p| AabbTree::build(&p.mesh).expect("posed meshes keep their faces"))
        .collect();

    let n_hands = models.hands.len();
    let mut hand_jacs: Vec<Option<HandJacobian>> = vec![None; n_hands];
    let mut obj_rot_derivs = vec![None; models.objects.len()];

    let inv_n = 1.0 / cloud.len() as f64;
    let scale = 1.0e6 * inv_n; // meters² → mm², averaged
    let mut sum_d2 = 0.0;

    for &d in &cloud.points {
        let mut owner = usize::MAX;
        let mut best = None;
        for (m, tree) in trees.iter().enumerate() {
            let r = tree.closest_point(&posed[m].mesh, d);
            if best.as_ref().map_or(true, |b: &crate::geometry::ClosestPointResult| {
                r.distance < b.distance
            }) {
                owner = m;
                best = Some(r);
            }
        }
        let hit = best.expect("scene has at least one mesh");
        sum_d2 += hit.distance * hit.distance;

        let mesh = &posed[owner].mesh;
        let corners = mesh.faces()[hit.face];
        let tri = mesh.face_vertices(hit.face);
        let bg = barycentric_grad(d, tri, hit.bary);

        if owner < n_hands {
            let h = owner;
            if hand_jacs[h].is_none() {
                hand_jacs[h] = Some(models.hands[h].jacobian(&pose.hands[h])?);
            }
            let jac = hand_jacs[h].as_ref().unwrap();
            let g = &mut grad.hands[h];
            for (corner, &vi) in bg.iter().zip(&corners) {
                let row = jac.vertex(vi as usize);
                for (gd, jd) in g.iter_mut().zip(row) {
                    *gd += scale * corner.dot(*jd);
                }
            }
        } else {
            let o = owner - n_hands;
            if obj_rot_derivs[o].is_none() {
                obj_rot_derivs[o] = Some(rotation_derivatives(pose.objects[o].rotation));
            }
            let dr = obj_rot_derivs[o].as_ref().unwrap();
            let rest = &models.objects[o];
            let g = &mut grad.objects[o];
            for (corner, &vi) in bg.iter().zip(&corners) {
                let v_rest = rest.vertices()[vi as usize];
                for i in 0..3 {
                    g[i] += scale * corner.dot(dr[i] * v_rest);
                    g[3 + i] += scale * corner[i];
                }
            }
        }
    }
    Ok((1.0e6 * sum_d2 * inv_n, grad))
}

/// Hand keypoint term: mean squared reprojection error in px² over all
/// visible hand joints across all views, `(1/Σγ)·ΣΣΣ γ‖proj(J) − p‖²`.
///
/// Scenes without hands contribute zero; hands whose annotations are all
/// invisible are an error, since the mean is undefined.
pub fn e_kpt_hand(
    models: &SceneModels,
    pose: &ScenePose,
    views: &[CameraView],
    annotations: &AnnotationSet,
) -> Result<(f64, Gradient), EnergyError> {
    let mut grad = Gradient::zeros_like(pose);
    if models.hands.is_empty() {
        return Ok((0.0, grad));
    }

    let mut visible = 0usize;
    let mut sum = 0.0;
    // Raw gradient of the un-normalized sum; divided by Σγ at the end.
    for (h, model) in models.hands.iter().enumerate() {
        let posed = model.forward(&pose.hands[h])?;
        let jac = model.jacobian(&pose.hands[h])?;
        for (view, ann) in views.iter().zip(&annotations.views) {
            for (j, obs) in ann.hands[h].iter().enumerate() {
                if !obs.visible {
                    continue;
                }
                visible += 1;
                let (px, dpix) = view
                    .project_with_jacobian(posed.joints[j])
                    .map_err(EnergyError::Projection)?;
                let r = [px[0] - obs.pixel[0], px[1] - obs.pixel[1]];
                sum += r[0] * r[0] + r[1] * r[1];
                let pull = dpix[0] * (2.0 * r[0]) + dpix[1] * (2.0 * r[1]);
                let rows = jac.joint(j);
                for (gd, jd) in grad.hands[h].iter_mut().zip(rows) {
                    *gd += pull.dot(*jd);
                }
            }
        }
    }
    if visible == 0 {
        return Err(EnergyError::NoVisibleHandKeypoints);
    }
    let inv = 1.0 / visible as f64;
    for g in grad.hands.iter_mut().flatten() {
        *g *= inv;
    }
    Ok((sum * inv, grad))
}

/// Object keypoint term: like the hand term, over each object's anchored
/// surface keypoints.
pub fn e_kpt_object(
    models: &SceneModels,
    pose: &ScenePose,
    views: &[CameraView],
    annotations: &AnnotationSet,
) -> Result<(f64, Gradient), EnergyError> {
    let mut grad = Gradient::zeros_like(pose);
    if models.objects.is_empty() {
        return Ok((0.0, grad));
    }

    let mut visible = 0usize;
    let mut sum = 0.0;
    for (o, rest) in models.objects.iter().enumerate() {
        let rigid = &pose.objects[o];
        for (k, anchor) in annotations.anchors[o].iter().enumerate() {
            let rest_point = anchor.position_on(rest);
            let world = rigid.apply(rest_point);
            let dworld = rigid_vertex_jacobian(rigid, rest_point);
            for (view, ann) in views.iter().zip(&annotations.views) {
                let obs = ann.objects[o][k];
                if !obs.visible {
                    continue;
                }
                visible += 1;
                let (px, dpix) = view
                    .project_with_jacobian(world)
                    .map_err(EnergyError::Projection)?;
                let r = [px[0] - obs.pixel[0], px[1] - obs.pixel[1]];
                sum += r[0] * r[0] + r[1] * r[1];
                let pull = dpix[0] * (2.0 * r[0]) + dpix[1] * (2.0 * r[1]);
                for (i, col) in dworld.iter().enumerate() {
                    grad.objects[o][i] += pull.dot(*col);
                }
            }
        }
    }
    if visible == 0 {
        return Err(EnergyError::NoVisibleObjectKeypoints);
    }
    let inv = 1.0 / visible as f64;
    for g in grad.objects.iter_mut().flatten() {
        *g *= inv;
    }
    Ok((sum * inv, grad))
}

/// ℓ₂ pose regularizer: mean of `‖θ_h‖²` over hands, zero without hands.
pub fn e_reg(pose: &ScenePose) -> (f64, Gradient) {
    let mut grad = Gradient::zeros_like(pose);
    let n = pose.hands.len();
    if n == 0 {
        return (0.0, grad);
    }
    let inv = 1.0 / n as f64;
    let mut sum = 0.0;
    for (h, hand) in pose.hands.iter().enumerate() {
        for (g, &t) in grad.hands[h].iter_mut().zip(&hand.theta) {
            sum += t * t;
            *g = 2.0 * t * inv;
        }
    }
    (sum * inv, grad)
}

/// Full objective: the sum of all four terms and their gradients.
pub fn e_total(
    models: &SceneModels,
    pose: &ScenePose,
    views: &[CameraView],
    annotations: &AnnotationSet,
    cloud: &PointCloud,
) -> Result<(EnergyReport, Gradient), EnergyError> {
    let (depth, mut grad) = e_depth(models, pose, cloud)?;
    let (kpt_hand, g_hand) = e_kpt_hand(models, pose, views, annotations)?;
    let (kpt_object, g_object) = e_kpt_object(models, pose, views, annotations)?;
    let (reg, g_reg) = e_reg(pose);
    grad.add(&g_hand);
    grad.add(&g_object);
    grad.add(&g_reg);
    Ok((
        EnergyReport {
            e_depth: depth,
            e_kpt_hand: kpt_hand,
            e_kpt_object: kpt_object,
            e_reg: reg,
            e_total: depth + kpt_hand + kpt_object + reg,
        },
        grad,
    ))
}
