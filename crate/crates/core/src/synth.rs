//! Synthetic scenes with exact ground truth.
//!
//! Everything the fitting pipeline consumes — meshes, camera rigs, depth
//! maps, keypoint annotations, grasp candidates — can be generated here
//! from a seed, so solver and metric claims are checkable end to end
//! without any captured data. All randomness flows through per-purpose
//! ChaCha streams keyed on frame and view, making output independent of
//! evaluation order.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::camera::{CameraView, DepthMap, SurfaceAnchor};
use crate::energy::{AnnotationSet, KeypointObs, ViewAnnotations};
use crate::geometry::{AabbTree, GeometryError, Ray, TriMesh};
use crate::grasp::{Grasp, GraspSet, GripperTemplate};
use crate::math::{vec3, Mat3, Quat, Vec3};
use crate::models::{ModelError, PosedModel, SceneModels, ScenePose};

/// Surface hits closer to the keypoint than this don't occlude it; object
/// keypoints sit on their surface, so only genuine blockers count.
pub const SURFACE_VISIBILITY_TOLERANCE: f64 = 1e-4;

/// Occlusion clearance for hand joints (meters). Joints live under the
/// skin, so the sight line always ends inside the hand mesh; hits within
/// this distance of the joint are its own skin, not an occluder. Larger
/// than the deepest joint (≈9 mm), smaller than a finger's diameter
/// (≈16 mm), so a finger crossing the sight line still occludes.
pub const HAND_JOINT_CLEARANCE: f64 = 0.012;

/// How far the gripper origin sits from the sampled surface point along
/// its outward normal.
pub const GRASP_STANDOFF: f64 = 0.058;

const STREAM_DEPTH: u64 = 1;
const STREAM_KEYPOINT: u64 = 2;
const STREAM_ANCHOR: u64 = 3;
const STREAM_GRASP: u64 = 4;
const STREAM_PERTURB: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    /// Frame index past the trajectory.
    FrameOutOfRange { frame: usize, frames: usize },
    /// View index past the rig.
    ViewOutOfRange { view: usize, views: usize },
    /// A trajectory entry does not match the scene's models.
    TrajectoryShape { frame: usize },
    /// Anchor lists must match the objects, with in-range faces and
    /// normalized barycentric weights.
    BadAnchor { object: usize, keypoint: usize },
    /// A primitive dimension is non-positive or inconsistent.
    BadDimensions,
    Model(ModelError),
    Geometry(GeometryError),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::FrameOutOfRange { frame, frames } => {
                write!(f, "frame {frame} out of range ({frames} frames)")
            }
            SynthError::ViewOutOfRange { view, views } => {
                write!(f, "view {view} out of range ({views} views)")
            }
            SynthError::TrajectoryShape { frame } => {
                write!(f, "trajectory frame {frame} does not match the scene models")
            }
            SynthError::BadAnchor { object, keypoint } => {
                write!(f, "bad anchor {keypoint} on object {object}")
            }
            SynthError::BadDimensions => write!(f, "primitive dimensions must be positive"),
            SynthError::Model(e) => write!(f, "{e}"),
            SynthError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SynthError {}

impl From<ModelError> for SynthError {
    fn from(e: ModelError) -> Self {
        SynthError::Model(e)
    }
}

impl From<GeometryError> for SynthError {
    fn from(e: GeometryError) -> Self {
        SynthError::Geometry(e)
    }
}

/// One RNG per (purpose, frame, view), all derived from the scene seed.
fn stream(seed: u64, purpose: u64, frame: usize, view: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | ((frame as u64 & 0xff_ffff) << 24) | (view as u64 & 0xff_ffff));
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// An axis-aligned box of the given full extents, centered at the origin.
pub fn box_mesh(extents: Vec3) -> Result<TriMesh, SynthError> {
    if !(extents.x > 0.0 && extents.y > 0.0 && extents.z > 0.0) {
        return Err(SynthError::BadDimensions);
    }
    let h = extents * 0.5;
    let vertices = vec![
        vec3(-h.x, -h.y, -h.z),
        vec3(h.x, -h.y, -h.z),
        vec3(h.x, h.y, -h.z),
        vec3(-h.x, h.y, -h.z),
        vec3(-h.x, -h.y, h.z),
        vec3(h.x, -h.y, h.z),
        vec3(h.x, h.y, h.z),
        vec3(-h.x, h.y, h.z),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [2, 3, 7],
        [2, 7, 6],
        [0, 4, 7],
        [0, 7, 3],
        [1, 2, 6],
        [1, 6, 5],
    ];
    Ok(TriMesh::new(vertices, faces)?)
}

/// A closed cylinder around the z axis, centered at the origin.
pub fn cylinder_mesh(radius: f64, height: f64, segments: usize) -> Result<TriMesh, SynthError> {
    if !(radius > 0.0 && height > 0.0) || segments < 3 {
        return Err(SynthError::BadDimensions);
    }
    let n = segments;
    let mut vertices = Vec::with_capacity(2 + 2 * n);
    vertices.push(vec3(0.0, 0.0, -0.5 * height));
    vertices.push(vec3(0.0, 0.0, 0.5 * height));
    for z in [-0.5 * height, 0.5 * height] {
        for s in 0..n {
            let a = core::f64::consts::TAU * s as f64 / n as f64;
            vertices.push(vec3(radius * libm::cos(a), radius * libm::sin(a), z));
        }
    }
    let bottom = |s: usize| (2 + s % n) as u32;
    let top = |s: usize| (2 + n + s % n) as u32;
    let mut faces = Vec::with_capacity(4 * n);
    for s in 0..n {
        faces.push([bottom(s), bottom(s + 1), top(s + 1)]);
        faces.push([bottom(s), top(s + 1), top(s)]);
        faces.push([1, top(s), top(s + 1)]);
        faces.push([0, bottom(s + 1), bottom(s)]);
    }
    Ok(TriMesh::new(vertices, faces)?)
}

/// An L-shaped prism: an `outer_x` × `outer_y` corner of the given wall
/// thickness, extruded along z by `depth`, centered on its bounding box.
pub fn l_bracket_mesh(
    outer_x: f64,
    outer_y: f64,
    thickness: f64,
    depth: f64,
) -> Result<TriMesh, SynthError> {
    if !(thickness > 0.0 && depth > 0.0 && outer_x > thickness && outer_y > thickness) {
        return Err(SynthError::BadDimensions);
    }
    let (a, b, t) = (outer_x, outer_y, thickness);
    // Counterclockwise L outline; the fan from the corner vertex stays
    // inside the material because both legs contain it.
    let outline = [
        vec3(0.0, 0.0, 0.0),
        vec3(a, 0.0, 0.0),
        vec3(a, t, 0.0),
        vec3(t, t, 0.0),
        vec3(t, b, 0.0),
        vec3(0.0, b, 0.0),
    ];
    let center = vec3(0.5 * a, 0.5 * b, 0.0);
    let mut vertices = Vec::with_capacity(12);
    for z in [-0.5 * depth, 0.5 * depth] {
        for p in &outline {
            vertices.push(*p - center + vec3(0.0, 0.0, z));
        }
    }
    let mut faces = Vec::with_capacity(20);
    for k in 1..5u32 {
        faces.push([0, k + 1, k]); // bottom cap, −z outward
        faces.push([6, 6 + k, 6 + k + 1]); // top cap, +z outward
    }
    for i in 0..6u32 {
        let j = (i + 1) % 6;
        faces.push([i, j, 6 + j]);
        faces.push([i, 6 + j, 6 + i]);
    }
    Ok(TriMesh::new(vertices, faces)?)
}

/// A latitude/longitude sphere with poles on the z axis.
pub fn uv_sphere_mesh(radius: f64, segments: usize, rings: usize) -> Result<TriMesh, SynthError> {
    if !(radius > 0.0) || segments < 3 || rings < 1 {
        return Err(SynthError::BadDimensions);
    }
    let mut vertices = Vec::with_capacity(2 + segments * rings);
    vertices.push(vec3(0.0, 0.0, radius));
    vertices.push(vec3(0.0, 0.0, -radius));
    for k in 1..=rings {
        let phi = core::f64::consts::PI * k as f64 / (rings + 1) as f64;
        let (rho, z) = (radius * libm::sin(phi), radius * libm::cos(phi));
        for s in 0..segments {
            let a = core::f64::consts::TAU * s as f64 / segments as f64;
            vertices.push(vec3(rho * libm::cos(a), rho * libm::sin(a), z));
        }
    }
    let ring = |k: usize, s: usize| (2 + (k - 1) * segments + s % segments) as u32;
    let mut faces = Vec::with_capacity(2 * segments * rings);
    for s in 0..segments {
        faces.push([0, ring(1, s), ring(1, s + 1)]);
        faces.push([1, ring(rings, s + 1), ring(rings, s)]);
    }
    for k in 1..rings {
        for s in 0..segments {
            faces.push([ring(k, s), ring(k + 1, s), ring(k + 1, s + 1)]);
            faces.push([ring(k, s), ring(k + 1, s + 1), ring(k, s + 1)]);
        }
    }
    Ok(TriMesh::new(vertices, faces)?)
}

/// Default synthetic rig: cameras on a ring, all aimed at the origin.
/// Resolution 160×120 with matching intrinsics, enough to frame a desk
/// workspace from 0.5–0.8 m out.
pub fn ring_rig(count: usize, radius: f64, height: f64) -> Vec<CameraView> {
    (0..count)
        .map(|i| {
            let a = core::f64::consts::TAU * i as f64 / count.max(1) as f64;
            let eye = vec3(radius * libm::cos(a), radius * libm::sin(a), height);
            let forward = (-eye).normalized();
            let right = forward.cross(vec3(0.0, 0.0, 1.0)).normalized();
            let down = forward.cross(right);
            let rot = Mat3::from_rows([right.to_array(), down.to_array(), forward.to_array()]);
            CameraView::new(130.0, 130.0, 80.0, 60.0, 160, 120, rot, -(rot * eye))
                .expect("ring cameras are valid by construction")
        })
        .collect()
}

/// A full synthetic scene: models, their true per-frame poses, the rig,
/// object keypoint anchors, and noise levels. The seed pins every random
/// draw, so one spec always produces identical artifacts.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub models: SceneModels,
    /// One ScenePose per frame.
    pub trajectory: Vec<ScenePose>,
    pub views: Vec<CameraView>,
    /// `anchors[o]` pins object `o`'s keypoints onto its rest mesh.
    pub anchors: Vec<Vec<SurfaceAnchor>>,
    pub seed: u64,
    /// Gaussian noise on rendered depth, millimeters.
    pub depth_noise_mm: f64,
    /// Gaussian noise on annotated pixels.
    pub keypoint_noise_px: f64,
}

impl SceneSpec {
    pub fn frame_count(&self) -> usize {
        self.trajectory.len()
    }

    /// Checks that every trajectory entry and anchor matches the models.
    pub fn validate(&self) -> Result<(), SynthError> {
        for (frame, pose) in self.trajectory.iter().enumerate() {
            let shape_ok = pose.hands.len() == self.models.hands.len()
                && pose.objects.len() == self.models.objects.len()
                && pose
                    .hands
                    .iter()
                    .zip(&self.models.hands)
                    .all(|(p, m)| p.theta.len() == m.dof_count());
            if !shape_ok {
                return Err(SynthError::TrajectoryShape { frame });
            }
        }
        if self.anchors.len() != self.models.objects.len() {
            return Err(SynthError::BadAnchor {
                object: self.anchors.len(),
                keypoint: 0,
            });
        }
        for (object, (anchor_list, mesh)) in self
            .anchors
            .iter()
            .zip(&self.models.objects)
            .enumerate()
        {
            for (keypoint, anchor) in anchor_list.iter().enumerate() {
                let sum: f64 = anchor.bary.iter().sum();
                if anchor.face >= mesh.face_count()
                    || anchor.bary.iter().any(|&w| !(w >= 0.0))
                    || (sum - 1.0).abs() > 1e-9
                {
                    return Err(SynthError::BadAnchor { object, keypoint });
                }
            }
        }
        Ok(())
    }

    fn posed_with_trees(&self, frame: usize) -> Result<(Vec<PosedModel>, Vec<AabbTree>), SynthError> {
        let pose = self
            .trajectory
            .get(frame)
            .ok_or(SynthError::FrameOutOfRange {
                frame,
                frames: self.trajectory.len(),
            })?;
        let posed = self.models.pose_all(pose)?;
        let trees = posed
            .iter()
            .map(|m| AabbTree::build(&m.mesh))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((posed, trees))
    }

    /// Ray-casts one view of one frame into a z-depth map. Missed pixels
    /// stay at the invalid value; hits carry camera-frame depth plus the
    /// spec's Gaussian noise.
    pub fn render_depth(&self, frame: usize, view_index: usize) -> Result<DepthMap, SynthError> {
        let view = self
            .views
            .get(view_index)
            .ok_or(SynthError::ViewOutOfRange {
                view: view_index,
                views: self.views.len(),
            })?;
        let (posed, trees) = self.posed_with_trees(frame)?;
        let mut rng = stream(self.seed, STREAM_DEPTH, frame, view_index);
        let mut map = DepthMap::new(view.width, view.height);
        for row in 0..view.height {
            for col in 0..view.width {
                let ray = view.pixel_ray([col as f64 + 0.5, row as f64 + 0.5]);
                let mut nearest: Option<f64> = None;
                for (model, tree) in posed.iter().zip(&trees) {
                    if let Some(hit) = tree.ray_cast(&model.mesh, &ray) {
                        if nearest.map_or(true, |t| hit.t < t) {
                            nearest = Some(hit.t);
                        }
                    }
                }
                if let Some(t) = nearest {
                    let world = ray.origin + ray.direction * t;
                    let mut depth = view.to_camera(world).z;
                    if self.depth_noise_mm > 0.0 {
                        depth += self.depth_noise_mm * 1e-3 * normal(&mut rng);
                    }
                    map.set(row, col, depth);
                }
            }
        }
        Ok(map)
    }

    /// Depth maps for every view of a frame.
    pub fn render_all_depths(&self, frame: usize) -> Result<Vec<DepthMap>, SynthError> {
        (0..self.views.len())
            .map(|v| self.render_depth(frame, v))
            .collect()
    }

    /// Projects every ground-truth keypoint into every view, adds pixel
    /// noise, and marks a keypoint invisible when its sight line is
    /// blocked or it leaves the image. Hand joints use the skin-depth
    /// clearance; object keypoints the thin surface tolerance.
    pub fn annotate(&self, frame: usize) -> Result<AnnotationSet, SynthError> {
        let (posed, trees) = self.posed_with_trees(frame)?;
        let hand_count = self.models.hands.len();
        let mut views_out = Vec::with_capacity(self.views.len());
        for (v, view) in self.views.iter().enumerate() {
            let mut rng = stream(self.seed, STREAM_KEYPOINT, frame, v);
            let mut hands = Vec::with_capacity(hand_count);
            for posed_hand in &posed[..hand_count] {
                let obs = posed_hand
                    .joints
                    .iter()
                    .map(|&joint| {
                        self.observe(view, joint, HAND_JOINT_CLEARANCE, &posed, &trees, &mut rng)
                    })
                    .collect();
                hands.push(obs);
            }
            let mut objects = Vec::with_capacity(self.anchors.len());
            for (o, anchor_list) in self.anchors.iter().enumerate() {
                let mesh = &posed[hand_count + o].mesh;
                let obs = anchor_list
                    .iter()
                    .map(|anchor| {
                        let world = anchor.position_on(mesh);
                        self.observe(
                            view,
                            world,
                            SURFACE_VISIBILITY_TOLERANCE,
                            &posed,
                            &trees,
                            &mut rng,
                        )
                    })
                    .collect();
                objects.push(obs);
            }
            views_out.push(ViewAnnotations { hands, objects });
        }
        Ok(AnnotationSet {
            views: views_out,
            anchors: self.anchors.clone(),
        })
    }

    fn observe(
        &self,
        view: &CameraView,
        point: Vec3,
        clearance: f64,
        posed: &[PosedModel],
        trees: &[AabbTree],
        rng: &mut ChaCha8Rng,
    ) -> KeypointObs {
        let Ok(pixel) = view.project(point) else {
            return KeypointObs::HIDDEN;
        };
        let in_image = pixel[0] >= 0.0
            && pixel[0] < view.width as f64
            && pixel[1] >= 0.0
            && pixel[1] < view.height as f64;
        if !in_image {
            return KeypointObs::HIDDEN;
        }
        let center = view.center();
        let reach = (point - center).norm();
        let ray = Ray::new(center, point - center);
        for (model, tree) in posed.iter().zip(trees) {
            if let Some(hit) = tree.ray_cast(&model.mesh, &ray) {
                if hit.t < reach - clearance {
                    return KeypointObs::HIDDEN;
                }
            }
        }
        let pixel = if self.keypoint_noise_px > 0.0 {
            [
                pixel[0] + self.keypoint_noise_px * normal(rng),
                pixel[1] + self.keypoint_noise_px * normal(rng),
            ]
        } else {
            pixel
        };
        KeypointObs {
            pixel,
            visible: true,
        }
    }
}

/// `count` seeded random surface anchors per object, uniform over each
/// face index and uniform within the chosen triangle.
pub fn scatter_anchors(
    models: &SceneModels,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<SurfaceAnchor>>, SynthError> {
    let mut rng = stream(seed, STREAM_ANCHOR, 0, 0);
    models
        .objects
        .iter()
        .map(|mesh| {
            if mesh.face_count() == 0 {
                return Err(SynthError::Geometry(GeometryError::EmptyMesh));
            }
            Ok((0..count)
                .map(|_| {
                    let face = rng.random_range(0..mesh.face_count());
                    let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                    let s = libm::sqrt(r1);
                    SurfaceAnchor {
                        face,
                        bary: [1.0 - s, s * (1.0 - r2), s * r2],
                    }
                })
                .collect())
        })
        .collect()
}

/// Per-group Gaussian noise scales for building solver initializations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbMagnitudes {
    /// Applied to every hand θ component.
    pub hand_theta: f64,
    /// Radians, applied to each object axis-angle component.
    pub object_rotation: f64,
    /// Meters, applied to each object translation component.
    pub object_translation: f64,
}

impl PerturbMagnitudes {
    pub const ZERO: Self = Self {
        hand_theta: 0.0,
        object_rotation: 0.0,
        object_translation: 0.0,
    };
}

/// Adds independent Gaussian noise to each pose parameter, scaled per
/// group. Zero magnitudes leave their group bit-identical.
pub fn perturb(pose: &ScenePose, magnitudes: &PerturbMagnitudes, rng: &mut ChaCha8Rng) -> ScenePose {
    let mut out = pose.clone();
    if magnitudes.hand_theta > 0.0 {
        for hand in &mut out.hands {
            for theta in &mut hand.theta {
                *theta += magnitudes.hand_theta * normal(rng);
            }
        }
    }
    for obj in &mut out.objects {
        if magnitudes.object_rotation > 0.0 {
            obj.rotation += vec3(normal(rng), normal(rng), normal(rng)) * magnitudes.object_rotation;
        }
        if magnitudes.object_translation > 0.0 {
            obj.translation +=
                vec3(normal(rng), normal(rng), normal(rng)) * magnitudes.object_translation;
        }
    }
    out
}

/// A seeded RNG for `perturb`, separate from the rendering streams.
pub fn perturb_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    stream(seed, STREAM_PERTURB, frame, 0)
}

/// A parallel-jaw gripper as 96 surface points: two finger pads closing
/// along x, approaching along +z, and a palm plate at z = 0.
pub fn parallel_jaw_template() -> GripperTemplate {
    let lerp = |lo: f64, hi: f64, i: usize, n: usize| {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    };
    let mut points = Vec::with_capacity(96);
    for i in 0..6 {
        for j in 0..6 {
            points.push(vec3(
                lerp(-0.05, 0.05, i, 6),
                lerp(-0.012, 0.012, j, 6),
                0.0,
            ));
        }
    }
    for side in [-0.05, 0.05] {
        for j in 0..5 {
            for k in 0..6 {
                points.push(vec3(
                    side,
                    lerp(-0.012, 0.012, j, 5),
                    lerp(0.008, 0.048, k, 6),
                ));
            }
        }
    }
    GripperTemplate::new(points).expect("static template is non-empty")
}

/// Antipodal-style grasp candidates in the object's own frame: each picks
/// a surface point, backs the gripper off along the outward normal, aims
/// the approach axis at the surface, and spins a random roll about it.
pub fn generate_grasps(mesh: &TriMesh, count: usize, seed: u64) -> Result<GraspSet, SynthError> {
    if mesh.face_count() == 0 {
        return Err(SynthError::Geometry(GeometryError::EmptyMesh));
    }
    let mut rng = stream(seed, STREAM_GRASP, 0, 0);
    let mut grasps = Vec::with_capacity(count);
    for _ in 0..count {
        let face = rng.random_range(0..mesh.face_count());
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = libm::sqrt(r1);
        let bary = [1.0 - s, s * (1.0 - r2), s * r2];
        let (a, b, c) = mesh.face_vertices(face);
        let point = a * bary[0] + b * bary[1] + c * bary[2];
        let n = mesh.face_normal(face);
        let approach = -n;
        let (e1, e2) = n.any_orthonormal();
        let roll = rng.random_range(0.0..core::f64::consts::TAU);
        let x = e1 * libm::cos(roll) + e2 * libm::sin(roll);
        let y = approach.cross(x);
        let rot = Mat3::from_rows([
            [x.x, y.x, approach.x],
            [x.y, y.y, approach.y],
            [x.z, y.z, approach.z],
        ]);
        grasps.push(Grasp {
            translation: point + n * GRASP_STANDOFF,
            orientation: Quat::from_rotation_matrix(&rot),
        });
    }
    Ok(grasps)
}
