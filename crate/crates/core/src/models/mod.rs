//! Differentiable scene models: rigid objects and a skinned hand.
//!
//! Objects carry a 6-DoF pose (axis-angle rotation plus translation). The
//! hand is a linear-blend-skinned mesh driven by a pose vector θ: the first
//! three components rotate the root about the wrist, the next three
//! translate it, and each articulated joint takes a further axis-angle
//! triple. Shape is a frozen per-subject offset β baked into the rest
//! vertices when the model is built.
//!
//! Forward passes and jacobians are pure functions of immutable models, so
//! they can run concurrently.

mod procedural;

pub use procedural::procedural_hand;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{GeometryError, TriMesh};
use crate::math::{canonicalize_axis_angle, rotation, rotation_derivatives, Mat3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A pose vector length does not match the model's DoF count.
    ThetaDimension { expected: usize, got: usize },
    /// Joint arrays disagree in length.
    JointArrayMismatch,
    /// parent[j] must be a lower-numbered joint for every non-root joint.
    BadParent { joint: usize },
    /// A skinning weight is negative or references a bad joint.
    BadWeight { vertex: usize },
    /// A vertex's skinning weights do not sum to 1 within 1e-9.
    WeightSum { vertex: usize },
    /// An articulated-joint index is the root, out of range, or repeated.
    BadArticulatedJoint { joint: usize },
    /// The shape offset produced an invalid mesh.
    Shape(GeometryError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::ThetaDimension { expected, got } => {
                write!(f, "pose has {got} parameters, model expects {expected}")
            }
            ModelError::JointArrayMismatch => {
                write!(f, "joint parents and rest positions disagree in length")
            }
            ModelError::BadParent { joint } => {
                write!(f, "joint {joint} has an invalid parent")
            }
            ModelError::BadWeight { vertex } => {
                write!(f, "vertex {vertex} has an invalid skinning weight")
            }
            ModelError::WeightSum { vertex } => {
                write!(f, "skinning weights of vertex {vertex} do not sum to 1")
            }
            ModelError::BadArticulatedJoint { joint } => {
                write!(f, "articulated joint {joint} is not a valid non-root joint")
            }
            ModelError::Shape(e) => write!(f, "shape offset broke the rest mesh: {e}"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Object pose: axis-angle rotation and translation, both world-frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    /// Axis-angle rotation, radians times unit axis.
    pub rotation: Vec3,
    /// Translation in meters.
    pub translation: Vec3,
}

impl RigidPose {
    pub const IDENTITY: Self = Self {
        rotation: Vec3::ZERO,
        translation: Vec3::ZERO,
    };

    pub fn rotation_matrix(&self) -> Mat3 {
        rotation(self.rotation)
    }

    /// Applies the pose to a point: `R(ω)·p + t`.
    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation_matrix() * p + self.translation
    }

    /// Same rigid motion with the rotation magnitude wrapped into [0, π].
    pub fn canonicalized(&self) -> Self {
        Self {
            rotation: canonicalize_axis_angle(self.rotation),
            translation: self.translation,
        }
    }
}

/// Hand pose vector θ.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub theta: Vec<f64>,
}

impl HandPose {
    pub fn zeros(dof: usize) -> Self {
        Self {
            theta: vec![0.0; dof],
        }
    }
}

/// All pose parameters of one frame: hand θ vectors and object poses.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePose {
    pub hands: Vec<HandPose>,
    pub objects: Vec<RigidPose>,
}

/// The fixed geometry a scene is fit against: hand models and object rest
/// meshes, in stable index order.
#[derive(Debug, Clone)]
pub struct SceneModels {
    pub hands: Vec<HandModel>,
    pub objects: Vec<TriMesh>,
}

impl SceneModels {
    /// Poses every model. Hands come first, then objects, matching the
    /// mesh-attribution order used by the depth term.
    pub fn pose_all(&self, pose: &ScenePose) -> Result<Vec<PosedModel>, ModelError> {
        let mut out = Vec::with_capacity(self.hands.len() + self.objects.len());
        for (model, hand_pose) in self.hands.iter().zip(&pose.hands) {
            out.push(model.forward(hand_pose)?);
        }
        for (rest, rigid) in self.objects.iter().zip(&pose.objects) {
            out.push(rigid_forward(rigid, rest));
        }
        Ok(out)
    }
}

/// A model evaluated at a pose: its mesh, and for hands the world-space
/// joint positions (objects leave `joints` empty).
#[derive(Debug, Clone)]
pub struct PosedModel {
    pub mesh: TriMesh,
    pub joints: Vec<Vec3>,
}

/// Poses a rigid mesh: every vertex maps through `R(ω)·v + t`.
pub fn rigid_forward(pose: &RigidPose, rest: &TriMesh) -> PosedModel {
    let r = pose.rotation_matrix();
    let t = pose.translation;
    PosedModel {
        mesh: rest.map_vertices(|v| r * v + t),
        joints: Vec::new(),
    }
}

/// Derivative of a posed vertex with respect to the six pose parameters.
///
/// Columns 0..3 are ∂(R·v + t)/∂ω_i, columns 3..6 the translation part
/// (identity).
pub fn rigid_vertex_jacobian(pose: &RigidPose, vertex: Vec3) -> [Vec3; 6] {
    let dr = rotation_derivatives(pose.rotation);
    [
        dr[0] * vertex,
        dr[1] * vertex,
        dr[2] * vertex,
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ]
}

/// A linear-blend-skinned hand.
///
/// Joints form a rooted tree (the wrist is joint 0 and every parent index
/// is smaller than its child's). θ is laid out as root axis-angle, root
/// translation, then one axis-angle triple per articulated joint in
/// ascending joint order; joints outside `articulated` (the fingertips)
/// carry no parameters.
#[derive(Debug, Clone)]
pub struct HandModel {
    rest_mesh: TriMesh,
    shaped_mesh: TriMesh,
    parents: Vec<usize>,
    rest_joints: Vec<Vec3>,
    weights: Vec<Vec<(usize, f64)>>,
    articulated: Vec<usize>,
    /// Start of each joint's rotation block in θ; `usize::MAX` when the
    /// joint has no DoF.
    theta_block: Vec<usize>,
    beta: [f64; 10],
}

const NO_BLOCK: usize = usize::MAX;

impl HandModel {
    /// Builds and validates a hand model.
    ///
    /// `weights[v]` lists `(joint, weight)` pairs for vertex `v`; weights
    /// must be non-negative and sum to 1. `articulated` lists the non-root
    /// joints that carry rotation parameters, in ascending order. The shape
    /// offset β displaces each rest vertex radially from the rest-mesh
    /// centroid before anything else happens.
    pub fn new(
        rest_mesh: TriMesh,
        parents: Vec<usize>,
        rest_joints: Vec<Vec3>,
        weights: Vec<Vec<(usize, f64)>>,
        articulated: Vec<usize>,
        beta: [f64; 10],
    ) -> Result<Self, ModelError> {
        let n = parents.len();
        if rest_joints.len() != n || n == 0 {
            return Err(ModelError::JointArrayMismatch);
        }
        if parents[0] != 0 {
            return Err(ModelError::BadParent { joint: 0 });
        }
        for (j, &p) in parents.iter().enumerate().skip(1) {
            if p >= j {
                return Err(ModelError::BadParent { joint: j });
            }
        }
        if weights.len() != rest_mesh.vertex_count() {
            return Err(ModelError::JointArrayMismatch);
        }
        for (v, row) in weights.iter().enumerate() {
            let mut sum = 0.0;
            for &(j, w) in row {
                if j >= n || w < 0.0 || !w.is_finite() {
                    return Err(ModelError::BadWeight { vertex: v });
                }
                sum += w;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(ModelError::WeightSum { vertex: v });
            }
        }
        let mut prev = 0;
        for &j in &articulated {
            if j == 0 || j >= n || (prev != 0 && j <= prev) {
                return Err(ModelError::BadArticulatedJoint { joint: j });
            }
            prev = j;
        }
        let mut theta_block = vec![NO_BLOCK; n];
        theta_block[0] = 0;
        for (i, &j) in articulated.iter().enumerate() {
            theta_block[j] = 6 + 3 * i;
        }
        let shaped_mesh = apply_shape_offset(&rest_mesh, &beta).map_err(ModelError::Shape)?;
        Ok(Self {
            rest_mesh,
            shaped_mesh,
            parents,
            rest_joints,
            weights,
            articulated,
            theta_block,
            beta,
        })
    }

    pub fn rest_mesh(&self) -> &TriMesh {
        &self.rest_mesh
    }

    /// Rest mesh with the shape offset applied; this is what gets skinned.
    pub fn shaped_mesh(&self) -> &TriMesh {
        &self.shaped_mesh
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn rest_joints(&self) -> &[Vec3] {
        &self.rest_joints
    }

    pub fn skinning_weights(&self) -> &[Vec<(usize, f64)>] {
        &self.weights
    }

    pub fn articulated_joints(&self) -> &[usize] {
        &self.articulated
    }

    pub fn beta(&self) -> &[f64; 10] {
        &self.beta
    }

    /// Length of θ for this model.
    pub fn dof_count(&self) -> usize {
        6 + 3 * self.articulated.len()
    }

    /// Local axis-angle of joint `j` under `theta`.
    fn local_axis_angle(&self, theta: &[f64], j: usize) -> Vec3 {
        match self.theta_block[j] {
            NO_BLOCK => Vec3::ZERO,
            s => Vec3::new(theta[s], theta[s + 1], theta[s + 2]),
        }
    }

    /// World affine transform per joint: `x ↦ a[j]·x + b[j]`.
    ///
    /// Each joint rotates about its own rest position, composed down the
    /// tree; the root additionally translates by θ's translation block.
    fn joint_transforms(&self, theta: &[f64]) -> (Vec<Mat3>, Vec<Vec3>, Vec<Mat3>) {
        let n = self.joint_count();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut local = Vec::with_capacity(n);

        let r0 = rotation(self.local_axis_angle(theta, 0));
        let t = Vec3::new(theta[3], theta[4], theta[5]);
        let j0 = self.rest_joints[0];
        a.push(r0);
        b.push(j0 + t - r0 * j0);
        local.push(r0);

        for j in 1..n {
            let p = self.parents[j];
            let rj = rotation(self.local_axis_angle(theta, j));
            let pivot = self.rest_joints[j];
            a.push(a[p] * rj);
            b.push(a[p] * (pivot - rj * pivot) + b[p]);
            local.push(rj);
        }
        (a, b, local)
    }

    /// Poses the hand: FK through the joint tree, then linear blend
    /// skinning of the shaped vertices. Joints in the result are the FK
    /// joint positions.
    pub fn forward(&self, pose: &HandPose) -> Result<PosedModel, ModelError> {
        if pose.theta.len() != self.dof_count() {
            return Err(ModelError::ThetaDimension {
                expected: self.dof_count(),
                got: pose.theta.len(),
            });
        }
        let (a, b, _) = self.joint_transforms(&pose.theta);
        let joints = (0..self.joint_count())
            .map(|j| a[j] * self.rest_joints[j] + b[j])
            .collect();
        let verts = self
            .shaped_mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(v, &x)| {
                let mut out = Vec3::ZERO;
                for &(j, w) in &self.weights[v] {
                    out += (a[j] * x + b[j]) * w;
                }
                out
            })
            .collect();
        Ok(PosedModel {
            mesh: self.shaped_mesh.with_vertex_positions(verts),
            joints,
        })
    }

    /// Analytic derivatives of every posed vertex and joint with respect
    /// to θ.
    pub fn jacobian(&self, pose: &HandPose) -> Result<HandJacobian, ModelError> {
        if pose.theta.len() != self.dof_count() {
            return Err(ModelError::ThetaDimension {
                expected: self.dof_count(),
                got: pose.theta.len(),
            });
        }
        let theta = &pose.theta;
        let n = self.joint_count();
        let dofs = self.dof_count();
        let (a, _b, local) = self.joint_transforms(theta);

        // Local rotation derivatives for every joint that has a block.
        let mut local_dr: Vec<Option<[Mat3; 3]>> = vec![None; n];
        for j in 0..n {
            if self.theta_block[j] != NO_BLOCK {
                local_dr[j] = Some(rotation_derivatives(self.local_axis_angle(theta, j)));
            }
        }

        let nv = self.shaped_mesh.vertex_count();
        let mut jac = HandJacobian {
            dof_count: dofs,
            vertices: vec![Vec3::ZERO; nv * dofs],
            joints: vec![Vec3::ZERO; n * dofs],
        };

        let mut da = vec![Mat3::ZERO; n];
        let mut db = vec![Vec3::ZERO; n];
        for d in 0..dofs {
            // Seed the sweep at the joint owning this dof, then propagate
            // down the tree; joints outside that subtree keep zeros.
            let (owner, comp) = if d < 3 {
                (0, d)
            } else if d < 6 {
                (0, d - 3)
            } else {
                (self.articulated[(d - 6) / 3], (d - 6) % 3)
            };
            for j in 0..n {
                da[j] = Mat3::ZERO;
                db[j] = Vec3::ZERO;
            }
            if d >= 3 && d < 6 {
                db[0] = Vec3::axis(comp);
            } else if owner == 0 {
                let dr = local_dr[0].as_ref().unwrap()[comp];
                da[0] = dr;
                db[0] = -(dr * self.rest_joints[0]);
            } else {
                let p = self.parents[owner];
                let dr = local_dr[owner].as_ref().unwrap()[comp];
                let pivot = self.rest_joints[owner];
                da[owner] = a[p] * dr;
                db[owner] = -(a[p] * (dr * pivot));
            }
            let first = if owner == 0 { 1 } else { owner + 1 };
            for j in first..n {
                let p = self.parents[j];
                let pivot = self.rest_joints[j];
                da[j] = da[p] * local[j];
                db[j] = da[p] * (pivot - local[j] * pivot) + db[p];
            }

            for j in 0..n {
                jac.joints[j * dofs + d] = da[j] * self.rest_joints[j] + db[j];
            }
            for (v, &x) in self.shaped_mesh.vertices().iter().enumerate() {
                let mut g = Vec3::ZERO;
                for &(j, w) in &self.weights[v] {
                    g += (da[j] * x + db[j]) * w;
                }
                jac.vertices[v * dofs + d] = g;
            }
        }
        Ok(jac)
    }
}

/// Dense derivatives of a posed hand: one 3-vector per (vertex, dof) and
/// per (joint, dof).
#[derive(Debug, Clone)]
pub struct HandJacobian {
    pub dof_count: usize,
    vertices: Vec<Vec3>,
    joints: Vec<Vec3>,
}

impl HandJacobian {
    /// ∂vertex_v/∂θ, one entry per dof.
    pub fn vertex(&self, v: usize) -> &[Vec3] {
        &self.vertices[v * self.dof_count..(v + 1) * self.dof_count]
    }

    /// ∂joint_j/∂θ, one entry per dof.
    pub fn joint(&self, j: usize) -> &[Vec3] {
        &self.joints[j * self.dof_count..(j + 1) * self.dof_count]
    }
}

/// Radial shape offset: vertex `v` moves along its unit offset from the
/// rest centroid by a polynomial in that direction with coefficients β.
fn apply_shape_offset(mesh: &TriMesh, beta: &[f64; 10]) -> Result<TriMesh, GeometryError> {
    if beta.iter().all(|&b| b == 0.0) {
        return Ok(mesh.clone());
    }
    let mut centroid = Vec3::ZERO;
    for &v in mesh.vertices() {
        centroid += v;
    }
    centroid = centroid * (1.0 / mesh.vertex_count() as f64);
    let verts: Vec<Vec3> = mesh
        .vertices()
        .iter()
        .map(|&v| {
            let r = v - centroid;
            if r.norm_squared() < 1e-18 {
                return v;
            }
            let u = r.normalized();
            let basis = [
                1.0,
                u.x,
                u.y,
                u.z,
                u.x * u.x,
                u.y * u.y,
                u.z * u.z,
                u.x * u.y,
                u.y * u.z,
                u.z * u.x,
            ];
            let s: f64 = basis.iter().zip(beta).map(|(p, b)| p * b).sum();
            v + u * s
        })
        .collect();
    TriMesh::new(verts, mesh.faces().to_vec())
}
