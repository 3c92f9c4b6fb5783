//! Central finite-difference audit of every analytic derivative the
//! solver consumes: the four energy terms, the skinned hand jacobian,
//! and the rigid body jacobian.
//!
//! Each seeded scene draws a posed hand, a posed object, a camera ring,
//! keypoint annotations, and a small point cloud hovering near the
//! surfaces, then compares analytic gradients against central
//! differences over every pose parameter. Errors are relative to the
//! largest gradient entry of the term, so a report value of 1e-6 means
//! six matching digits on the dominant components.

use dexfit_core::camera::PointCloud;
use dexfit_core::energy::{e_depth, e_kpt_hand, e_kpt_object, e_reg, AnnotationSet, Gradient};
use dexfit_core::math::{vec3, Vec3};
use dexfit_core::models::{
    procedural_hand, rigid_vertex_jacobian, HandPose, RigidPose, SceneModels, ScenePose,
};
use dexfit_core::synth::{box_mesh, cylinder_mesh, ring_rig, scatter_anchors, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::threads::map_indexed;

/// Central-difference step. Pose parameters are radians and meters, so
/// this sits well inside the smooth region while staying far above
/// double-precision roundoff on desk-scale energies.
const FD_STEP: f64 = 1e-6;

/// Tolerance the audit is judged against.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckGradReport {
    pub depth: f64,
    pub kpt_hand: f64,
    pub kpt_object: f64,
    pub reg: f64,
    pub hand_jacobian: f64,
    pub rigid_jacobian: f64,
}

impl CheckGradReport {
    pub const ZERO: Self = Self {
        depth: 0.0,
        kpt_hand: 0.0,
        kpt_object: 0.0,
        reg: 0.0,
        hand_jacobian: 0.0,
        rigid_jacobian: 0.0,
    };

    pub fn merge(&mut self, other: &Self) {
        self.depth = self.depth.max(other.depth);
        self.kpt_hand = self.kpt_hand.max(other.kpt_hand);
        self.kpt_object = self.kpt_object.max(other.kpt_object);
        self.reg = self.reg.max(other.reg);
        self.hand_jacobian = self.hand_jacobian.max(other.hand_jacobian);
        self.rigid_jacobian = self.rigid_jacobian.max(other.rigid_jacobian);
    }

    pub fn max(&self) -> f64 {
        self.rows().iter().map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn rows(&self) -> [(&'static str, f64); 6] {
        [
            ("depth", self.depth),
            ("keypoint_hand", self.kpt_hand),
            ("keypoint_object", self.kpt_object),
            ("regularizer", self.reg),
            ("hand_jacobian", self.hand_jacobian),
            ("rigid_jacobian", self.rigid_jacobian),
        ]
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// One randomized scene: shaped hand in a random pose, a box or cylinder
/// nearby, four ring cameras, anchors, annotations, and a cloud of points
/// scattered a few millimeters off the posed surfaces.
struct AuditScene {
    models: SceneModels,
    pose: ScenePose,
    views: Vec<dexfit_core::camera::CameraView>,
    annotations: AnnotationSet,
    cloud: PointCloud,
}

fn audit_scene(seed: u64, index: usize) -> AuditScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x6772_0000_0000 | index as u64);

    // β displaces vertices radially in meters, so subject-to-subject
    // variation lives at millimeter scale.
    let mut beta = [0.0; 10];
    for b in &mut beta {
        *b = 0.002 * normal(&mut rng);
    }
    let hand = procedural_hand(beta);
    let mut theta = vec![0.0; hand.dof_count()];
    for (i, t) in theta.iter_mut().enumerate() {
        *t = match i {
            0..=2 => 0.3 * normal(&mut rng),
            3..=5 => 0.03 * normal(&mut rng),
            _ => 0.25 * normal(&mut rng),
        };
    }

    let object = if index % 2 == 0 {
        box_mesh(vec3(
            0.04 + 0.03 * rng.random::<f64>(),
            0.03 + 0.03 * rng.random::<f64>(),
            0.03 + 0.04 * rng.random::<f64>(),
        ))
        .expect("box dims are positive")
    } else {
        cylinder_mesh(0.02 + 0.02 * rng.random::<f64>(), 0.06 + 0.05 * rng.random::<f64>(), 12)
            .expect("cylinder dims are positive")
    };
    let object_pose = RigidPose {
        rotation: vec3(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * 0.5,
        translation: vec3(0.12, 0.0, 0.0)
            + vec3(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * 0.02,
    };

    let models = SceneModels {
        hands: vec![hand],
        objects: vec![object],
    };
    let pose = ScenePose {
        hands: vec![HandPose { theta }],
        objects: vec![object_pose],
    };

    let mut scene = SceneSpec {
        models,
        trajectory: vec![pose],
        views: ring_rig(4, 0.6, 0.35),
        anchors: Vec::new(),
        seed: seed ^ (index as u64) << 8,
        depth_noise_mm: 0.0,
        keypoint_noise_px: 0.0,
    };

    // A draw can land every anchor on faces hidden from all four cameras
    // (the underside, say), which the object keypoint term rejects.
    // Rescatter until at least one anchor is seen somewhere.
    let mut annotations = None;
    for attempt in 0u64..64 {
        let anchor_seed = seed ^ index as u64 ^ (attempt << 40);
        scene.anchors =
            scatter_anchors(&scene.models, 4, anchor_seed).expect("objects have faces");
        let candidate = scene.annotate(0).expect("frame 0 exists");
        let seen = candidate
            .views
            .iter()
            .any(|v| v.objects.iter().flatten().any(|k| k.visible));
        if seen {
            annotations = Some(candidate);
            break;
        }
    }
    let annotations = annotations.expect("some anchor draw is visible");

    // Cloud points a few millimeters off random posed surface points, so
    // depth gradients see both signs and every distance-case branch.
    let posed = scene.models.pose_all(&scene.trajectory[0]).expect("pose is valid");
    let mut points = Vec::new();
    for _ in 0..40 {
        let model = &posed[rng.random_range(0..posed.len())];
        let face = rng.random_range(0..model.mesh.face_count());
        let (a, b, c) = model.mesh.face_vertices(face);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let on_face = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
        let off = vec3(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * 0.004;
        points.push(on_face + off);
    }

    // Audit away from the pose the annotations were rendered at. At that
    // exact pose every keypoint residual is zero, the true gradient
    // vanishes, and finite differences only see curvature noise, which
    // tells us nothing about the analytic formulas.
    let SceneSpec { models, mut trajectory, views, .. } = scene;
    let mut eval_pose = trajectory.remove(0);
    for t in &mut eval_pose.hands[0].theta {
        *t += 0.02 * normal(&mut rng);
    }
    eval_pose.objects[0].rotation +=
        vec3(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * 0.02;
    eval_pose.objects[0].translation +=
        vec3(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * 0.005;

    AuditScene {
        models,
        pose: eval_pose,
        views,
        annotations,
        cloud: PointCloud { points },
    }
}

fn pack(pose: &ScenePose) -> Vec<f64> {
    let mut flat = Vec::new();
    for hand in &pose.hands {
        flat.extend_from_slice(&hand.theta);
    }
    for object in &pose.objects {
        flat.extend_from_slice(&object.rotation.to_array());
        flat.extend_from_slice(&object.translation.to_array());
    }
    flat
}

fn pack_grad(grad: &Gradient) -> Vec<f64> {
    let mut flat = Vec::new();
    for hand in &grad.hands {
        flat.extend_from_slice(hand);
    }
    for object in &grad.objects {
        flat.extend_from_slice(object);
    }
    flat
}

fn unpack(flat: &[f64], like: &ScenePose) -> ScenePose {
    let mut pose = like.clone();
    let mut at = 0;
    for hand in &mut pose.hands {
        let dof = hand.theta.len();
        hand.theta.copy_from_slice(&flat[at..at + dof]);
        at += dof;
    }
    for object in &mut pose.objects {
        object.rotation = vec3(flat[at], flat[at + 1], flat[at + 2]);
        object.translation = vec3(flat[at + 3], flat[at + 4], flat[at + 5]);
        at += 6;
    }
    pose
}

/// Worst relative deviation between an analytic gradient and central
/// differences of `f` over every pose parameter.
fn gradient_deviation<F>(pose: &ScenePose, analytic: &Gradient, f: F) -> f64
where
    F: Fn(&ScenePose) -> f64,
{
    let flat = pack(pose);
    let analytic = pack_grad(analytic);
    let mut fd = vec![0.0; flat.len()];
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += FD_STEP;
        let mut minus = flat.clone();
        minus[i] -= FD_STEP;
        fd[i] = (f(&unpack(&plus, pose)) - f(&unpack(&minus, pose))) / (2.0 * FD_STEP);
    }
    let scale = analytic
        .iter()
        .chain(&fd)
        .fold(0.0f64, |m, &g| m.max(g.abs()))
        .max(1e-8);
    analytic
        .iter()
        .zip(&fd)
        .fold(0.0f64, |m, (a, f)| m.max((a - f).abs()))
        / scale
}

fn audit_energies(scene: &AuditScene) -> (f64, f64, f64, f64) {
    let AuditScene { models, pose, views, annotations, cloud } = scene;
    let (_, g_depth) = e_depth(models, pose, cloud).expect("depth term evaluates");
    let depth = gradient_deviation(pose, &g_depth, |p| {
        e_depth(models, p, cloud).expect("depth term evaluates").0
    });
    let (_, g_hand) = e_kpt_hand(models, pose, views, annotations).expect("hand term evaluates");
    let kpt_hand = gradient_deviation(pose, &g_hand, |p| {
        e_kpt_hand(models, p, views, annotations).expect("hand term evaluates").0
    });
    let (_, g_object) =
        e_kpt_object(models, pose, views, annotations).expect("object term evaluates");
    let kpt_object = gradient_deviation(pose, &g_object, |p| {
        e_kpt_object(models, p, views, annotations).expect("object term evaluates").0
    });
    let (_, g_reg) = e_reg(pose);
    let reg = gradient_deviation(pose, &g_reg, |p| e_reg(p).0);
    (depth, kpt_hand, kpt_object, reg)
}

fn audit_hand_jacobian(scene: &AuditScene) -> f64 {
    let hand = &scene.models.hands[0];
    let pose = &scene.pose.hands[0];
    let jac = hand.jacobian(pose).expect("jacobian evaluates");
    let base = hand.forward(pose).expect("forward evaluates");
    let dof = hand.dof_count();

    let mut worst_abs = 0.0f64;
    let mut scale = 1e-8f64;
    for k in 0..dof {
        let mut plus = pose.clone();
        plus.theta[k] += FD_STEP;
        let mut minus = pose.clone();
        minus.theta[k] -= FD_STEP;
        let fwd_plus = hand.forward(&plus).expect("forward evaluates");
        let fwd_minus = hand.forward(&minus).expect("forward evaluates");
        for v in 0..base.mesh.vertex_count() {
            let fd = (fwd_plus.mesh.vertices()[v] - fwd_minus.mesh.vertices()[v])
                * (0.5 / FD_STEP);
            let a = jac.vertex(v)[k];
            worst_abs = worst_abs.max((a - fd).norm());
            scale = scale.max(a.norm()).max(fd.norm());
        }
        for j in 0..base.joints.len() {
            let fd = (fwd_plus.joints[j] - fwd_minus.joints[j]) * (0.5 / FD_STEP);
            let a = jac.joint(j)[k];
            worst_abs = worst_abs.max((a - fd).norm());
            scale = scale.max(a.norm()).max(fd.norm());
        }
    }
    worst_abs / scale
}

fn audit_rigid_jacobian(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let pose = RigidPose {
            rotation: vec3(normal(rng), normal(rng), normal(rng)),
            translation: vec3(normal(rng), normal(rng), normal(rng)) * 0.2,
        };
        let vertex = vec3(normal(rng), normal(rng), normal(rng)) * 0.1;
        let jac = rigid_vertex_jacobian(&pose, vertex);

        let mut params = [0.0; 6];
        params[..3].copy_from_slice(&pose.rotation.to_array());
        params[3..].copy_from_slice(&pose.translation.to_array());
        let apply = |p: &[f64; 6]| -> Vec3 {
            RigidPose {
                rotation: vec3(p[0], p[1], p[2]),
                translation: vec3(p[3], p[4], p[5]),
            }
            .apply(vertex)
        };

        let mut worst_abs = 0.0f64;
        let mut scale = 1e-8f64;
        for k in 0..6 {
            let mut plus = params;
            plus[k] += FD_STEP;
            let mut minus = params;
            minus[k] -= FD_STEP;
            let fd = (apply(&plus) - apply(&minus)) * (0.5 / FD_STEP);
            worst_abs = worst_abs.max((jac[k] - fd).norm());
            scale = scale.max(jac[k].norm()).max(fd.norm());
        }
        worst = worst.max(worst_abs / scale);
    }
    worst
}

fn audit_one(seed: u64, index: usize) -> CheckGradReport {
    let scene = audit_scene(seed, index);
    let (depth, kpt_hand, kpt_object, reg) = audit_energies(&scene);
    let hand_jacobian = audit_hand_jacobian(&scene);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x7267_0000_0000 | index as u64);
    let rigid_jacobian = audit_rigid_jacobian(&mut rng);
    CheckGradReport {
        depth,
        kpt_hand,
        kpt_object,
        reg,
        hand_jacobian,
        rigid_jacobian,
    }
}

/// Runs the audit over `scene_count` seeded scenes on at most `cap`
/// workers and returns the worst relative error seen per derivative.
pub fn run(scene_count: usize, seed: u64, cap: usize) -> CheckGradReport {
    let reports = map_indexed(scene_count, cap, |i| audit_one(seed, i));
    let mut merged = CheckGradReport::ZERO;
    for report in &reports {
        merged.merge(report);
    }
    merged
}
