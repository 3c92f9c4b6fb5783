//! Scene spec files and the on-disk scene directory.
//!
//! A spec file describes a synthetic scene compactly: seed, frame count,
//! camera ring, noise levels, an optional hand, and shape-based objects
//! with simple linear motion. `gen-scene` expands it into a directory of
//! concrete artifacts (meshes, cameras, ground-truth poses, annotations,
//! depth maps, grasp candidates) that the other commands consume without
//! ever re-deriving anything from the spec.

use std::fs;
use std::path::{Path, PathBuf};

use dexfit_core::energy::AnnotationSet;
use dexfit_core::camera::{CameraView, SurfaceAnchor};
use dexfit_core::geometry::TriMesh;
use dexfit_core::grasp::GraspSet;
use dexfit_core::math::vec3;
use dexfit_core::models::{HandPose, RigidPose, SceneModels, ScenePose};
use dexfit_core::synth::{
    box_mesh, cylinder_mesh, generate_grasps, l_bracket_mesh, ring_rig, scatter_anchors,
    uv_sphere_mesh, SceneSpec,
};
use serde::{Deserialize, Serialize};

use super::annotations::load_annotations;
use super::camera::load_cameras;
use super::grasps::load_grasps;
use super::hand::load_hand;
use super::mesh::load_mesh;
use super::poses::{load_trajectory, RigidRecord};
use super::{invalid, to_json_bytes, FormatError};
use crate::manifest::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpecFile {
    pub seed: u64,
    pub frames: usize,
    #[serde(default = "RigSpec::default_ring")]
    pub rig: RigSpec,
    #[serde(default)]
    pub depth_noise_mm: f64,
    #[serde(default)]
    pub keypoint_noise_px: f64,
    #[serde(default)]
    pub hand: Option<HandSpec>,
    pub objects: Vec<ObjectSpec>,
    #[serde(default = "default_anchors_per_object")]
    pub anchors_per_object: usize,
    #[serde(default = "default_grasp_count")]
    pub grasp_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigSpec {
    pub views: usize,
    pub radius: f64,
    pub height: f64,
}

impl RigSpec {
    fn default_ring() -> Self {
        RigSpec {
            views: 8,
            radius: 0.6,
            height: 0.35,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandSpec {
    #[serde(default)]
    pub beta: [f64; 10],
    /// Full θ vector; omitted means the rest pose (all zeros).
    #[serde(default)]
    pub theta_start: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: ShapeSpec,
    #[serde(default = "RigidRecord::identity")]
    pub start: RigidRecord,
    /// Translation added every frame, millimeters.
    #[serde(default)]
    pub velocity_mm_per_frame: [f64; 3],
    /// Axis-angle increment added every frame, degrees.
    #[serde(default)]
    pub spin_deg_per_frame: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Box {
        extents: [f64; 3],
    },
    Cylinder {
        radius: f64,
        height: f64,
        segments: usize,
    },
    LBracket {
        outer_x: f64,
        outer_y: f64,
        thickness: f64,
        depth: f64,
    },
    Sphere {
        radius: f64,
        segments: usize,
        rings: usize,
    },
}

fn default_anchors_per_object() -> usize {
    8
}

fn default_grasp_count() -> usize {
    64
}

impl RigidRecord {
    fn identity() -> Self {
        RigidRecord {
            rotation: [0.0; 3],
            translation: [0.0; 3],
        }
    }

    fn to_rigid(&self) -> RigidPose {
        RigidPose {
            rotation: vec3(self.rotation[0], self.rotation[1], self.rotation[2]),
            translation: vec3(
                self.translation[0],
                self.translation[1],
                self.translation[2],
            ),
        }
    }
}

impl ShapeSpec {
    pub fn build(&self) -> Result<TriMesh, FormatError> {
        let mesh = match *self {
            ShapeSpec::Box { extents } => box_mesh(vec3(extents[0], extents[1], extents[2])),
            ShapeSpec::Cylinder {
                radius,
                height,
                segments,
            } => cylinder_mesh(radius, height, segments),
            ShapeSpec::LBracket {
                outer_x,
                outer_y,
                thickness,
                depth,
            } => l_bracket_mesh(outer_x, outer_y, thickness, depth),
            ShapeSpec::Sphere {
                radius,
                segments,
                rings,
            } => uv_sphere_mesh(radius, segments, rings),
        };
        mesh.map_err(|e| invalid(format!("shape rejected: {e}")))
    }
}

pub fn save_spec(path: &Path, spec: &SceneSpecFile) -> Result<(), FormatError> {
    write_atomic(path, &to_json_bytes(spec)?)?;
    Ok(())
}

pub fn load_spec(path: &Path) -> Result<SceneSpecFile, FormatError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Expands a spec file into the in-memory scene the oracle renders from,
/// plus the base grasp candidates for the first object.
pub fn build_scene(spec: &SceneSpecFile) -> Result<(SceneSpec, GraspSet), FormatError> {
    if spec.frames == 0 {
        return Err(invalid("a scene needs at least one frame"));
    }
    if spec.rig.views == 0 {
        return Err(invalid("a scene needs at least one view"));
    }
    let mut hands = Vec::new();
    let mut hand_start = Vec::new();
    if let Some(hand_spec) = &spec.hand {
        let model = dexfit_core::models::procedural_hand(hand_spec.beta);
        let theta = match &hand_spec.theta_start {
            Some(theta) => {
                if theta.len() != model.dof_count() {
                    return Err(invalid(format!(
                        "theta_start has {} entries, the hand has {} degrees of freedom",
                        theta.len(),
                        model.dof_count()
                    )));
                }
                theta.clone()
            }
            None => vec![0.0; model.dof_count()],
        };
        hands.push(model);
        hand_start.push(HandPose { theta });
    }
    let mut objects = Vec::new();
    for object in &spec.objects {
        objects.push(object.shape.build()?);
    }
    let models = SceneModels { hands, objects };

    let deg = std::f64::consts::PI / 180.0;
    let trajectory: Vec<ScenePose> = (0..spec.frames)
        .map(|t| ScenePose {
            hands: hand_start.clone(),
            objects: spec
                .objects
                .iter()
                .map(|o| {
                    let start = o.start.to_rigid();
                    let step = t as f64;
                    RigidPose {
                        rotation: start.rotation
                            + vec3(
                                o.spin_deg_per_frame[0],
                                o.spin_deg_per_frame[1],
                                o.spin_deg_per_frame[2],
                            ) * (deg * step),
                        translation: start.translation
                            + vec3(
                                o.velocity_mm_per_frame[0],
                                o.velocity_mm_per_frame[1],
                                o.velocity_mm_per_frame[2],
                            ) * (1e-3 * step),
                    }
                })
                .collect(),
        })
        .collect();

    let anchors = scatter_anchors(&models, spec.anchors_per_object, spec.seed)
        .map_err(|e| invalid(format!("anchor scatter failed: {e}")))?;
    let grasps = if models.objects.is_empty() {
        Vec::new()
    } else {
        generate_grasps(&models.objects[0], spec.grasp_count, spec.seed)
            .map_err(|e| invalid(format!("grasp generation failed: {e}")))?
    };

    let scene = SceneSpec {
        models,
        trajectory,
        views: ring_rig(spec.rig.views, spec.rig.radius, spec.rig.height),
        anchors,
        seed: spec.seed,
        depth_noise_mm: spec.depth_noise_mm,
        keypoint_noise_px: spec.keypoint_noise_px,
    };
    scene
        .validate()
        .map_err(|e| invalid(format!("scene rejected: {e}")))?;
    Ok((scene, grasps))
}

/// Path layout of a generated scene directory.
#[derive(Debug, Clone)]
pub struct SceneDir {
    pub root: PathBuf,
}

impl SceneDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        SceneDir { root: root.into() }
    }

    pub fn spec_path(&self) -> PathBuf {
        self.root.join("scene.json")
    }

    pub fn cameras_path(&self) -> PathBuf {
        self.root.join("cameras.json")
    }

    pub fn hand_mesh_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("hand_{i}.mesh"))
    }

    pub fn hand_sidecar_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("hand_{i}.json"))
    }

    pub fn object_mesh_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("object_{i}.mesh"))
    }

    pub fn trajectory_path(&self) -> PathBuf {
        self.root.join("gt_poses.json")
    }

    pub fn annotations_path(&self) -> PathBuf {
        self.root.join("annotations.json")
    }

    pub fn depth_dir(&self) -> PathBuf {
        self.root.join("depth")
    }

    pub fn depth_path(&self, frame: usize, view: usize) -> PathBuf {
        self.depth_dir().join(format!("f{frame:03}_v{view:02}.bin"))
    }

    pub fn grasps_path(&self) -> PathBuf {
        self.root.join("grasps.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

/// A scene directory read back into memory; depth maps stay on disk and
/// load per frame through [`SceneDir::depth_path`].
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub dir: SceneDir,
    pub spec: SceneSpecFile,
    pub models: SceneModels,
    pub views: Vec<CameraView>,
    pub trajectory: Vec<ScenePose>,
    pub anchors: Vec<Vec<SurfaceAnchor>>,
    pub annotations: Vec<AnnotationSet>,
    pub base_grasps: GraspSet,
}

pub fn load_scene(root: &Path) -> Result<LoadedScene, FormatError> {
    let dir = SceneDir::new(root);
    let spec = load_spec(&dir.spec_path())?;
    let views = load_cameras(&dir.cameras_path())?;
    let mut hands = Vec::new();
    if spec.hand.is_some() {
        hands.push(load_hand(&dir.hand_mesh_path(0), &dir.hand_sidecar_path(0))?);
    }
    let mut objects = Vec::new();
    for i in 0..spec.objects.len() {
        objects.push(load_mesh(&dir.object_mesh_path(i))?);
    }
    let models = SceneModels { hands, objects };
    let trajectory = load_trajectory(&dir.trajectory_path())?;
    let annotations = load_annotations(&dir.annotations_path())?;
    if trajectory.len() != spec.frames || annotations.len() != spec.frames {
        return Err(invalid("frame counts disagree across scene files"));
    }
    for set in &annotations {
        set.validate(&models, views.len())
            .map_err(|e| invalid(format!("annotations rejected: {e}")))?;
    }
    let base_grasps = if models.objects.is_empty() {
        Vec::new()
    } else {
        load_grasps(&dir.grasps_path())?
    };
    let anchors = annotations[0].anchors.clone();
    Ok(LoadedScene {
        dir,
        spec,
        models,
        views,
        trajectory,
        anchors,
        annotations,
        base_grasps,
    })
}
