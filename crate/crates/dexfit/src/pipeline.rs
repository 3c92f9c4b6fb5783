//! The work behind each subcommand, exposed as plain functions so the
//! binary stays a thin argument parser and tests can drive full runs
//! in-process.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use dexfit_core::camera::{merge_point_clouds, CameraError, PointCloud};
use dexfit_core::energy::EnergyError;
use dexfit_core::grasp::{
    default_epsilon_grid, precision_coverage_curve, CurvePoint, GraspError, HandoverScene,
    MatchConfig,
};
use dexfit_core::math::{quat_angle, Quat, Vec3};
use dexfit_core::metrics::{
    fit_similarity, mpjpe, pck_auc, reprojection_error, AlignMode, JointSet, MetricsError,
    JOINT_COUNT,
};
use dexfit_core::models::ModelError;
use dexfit_core::solver::{solve_sequence, FrameObservations, FrameSolve, SolveConfig, SolverError};
use dexfit_core::synth::{parallel_jaw_template, perturb, perturb_rng, PerturbMagnitudes, SynthError};

use crate::formats::depth::{load_depth, save_depth};
use crate::formats::scene::{build_scene, load_scene, LoadedScene, SceneDir, SceneSpecFile};
use crate::formats::report::ReportRow;
use crate::formats::{
    annotations::save_annotations, camera::save_cameras, grasps::save_grasps, hand::save_hand,
    mesh::save_mesh, poses::save_trajectory, scene::save_spec, FormatError,
};
use crate::threads::{map_indexed, worker_cap};

#[derive(Debug)]
pub enum PipelineError {
    Format(FormatError),
    Synth(SynthError),
    Solver(SolverError),
    Grasp(GraspError),
    Camera(CameraError),
    Energy(EnergyError),
    Model(ModelError),
    Metrics(MetricsError),
    Invalid(String),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Format(e) => write!(f, "{e}"),
            PipelineError::Synth(e) => write!(f, "{e}"),
            PipelineError::Solver(e) => write!(f, "{e}"),
            PipelineError::Grasp(e) => write!(f, "{e}"),
            PipelineError::Camera(e) => write!(f, "{e}"),
            PipelineError::Energy(e) => write!(f, "{e}"),
            PipelineError::Model(e) => write!(f, "{e}"),
            PipelineError::Metrics(e) => write!(f, "{e}"),
            PipelineError::Invalid(message) => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for PipelineError {}

macro_rules! from_error {
    ($variant:ident, $source:ty) => {
        impl From<$source> for PipelineError {
            fn from(e: $source) -> Self {
                PipelineError::$variant(e)
            }
        }
    };
}

from_error!(Format, FormatError);
from_error!(Synth, SynthError);
from_error!(Solver, SolverError);
from_error!(Grasp, GraspError);
from_error!(Camera, CameraError);
from_error!(Energy, EnergyError);
from_error!(Model, ModelError);
from_error!(Metrics, MetricsError);

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Format(FormatError::Io(e))
    }
}

fn invalid(message: impl Into<String>) -> PipelineError {
    PipelineError::Invalid(message.into())
}

/// How `solve` builds its frame-0 starting pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    /// Start from the ground-truth pose.
    Gt,
    /// Gaussian-perturb the ground truth: the magnitude reads as
    /// millimeters on translations, degrees on rotations, and 1/100 on
    /// hand θ entries, so `perturbed:5` means 5 mm, 5°, and σ = 0.05.
    Perturbed(f64),
}

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "gt" {
            return Ok(InitSpec::Gt);
        }
        if let Some(raw) = s.strip_prefix("perturbed:") {
            let raw = raw.strip_suffix("mm").unwrap_or(raw);
            let mm: f64 = raw
                .parse()
                .map_err(|_| format!("bad perturbation magnitude {raw:?}"))?;
            if !(mm >= 0.0) {
                return Err("perturbation magnitude must be non-negative".into());
            }
            return Ok(InitSpec::Perturbed(mm));
        }
        Err(format!("bad init {s:?}; expected gt or perturbed:<mm>"))
    }
}

impl InitSpec {
    pub fn magnitudes(mm: f64) -> PerturbMagnitudes {
        PerturbMagnitudes {
            hand_theta: mm / 100.0,
            object_rotation: mm * std::f64::consts::PI / 180.0,
            object_translation: mm * 1e-3,
        }
    }
}

/// Expands a spec file into a scene directory; returns the resolved spec
/// (seed override applied) and the output paths for the manifest.
pub fn gen_scene(
    spec_path: &Path,
    out_root: &Path,
    seed_override: Option<u64>,
) -> Result<(SceneSpecFile, Vec<String>), PipelineError> {
    let mut spec = crate::formats::scene::load_spec(spec_path)?;
    if let Some(seed) = seed_override {
        spec.seed = seed;
    }
    let (scene, grasps) = build_scene(&spec)?;
    let dir = SceneDir::new(out_root);
    std::fs::create_dir_all(dir.depth_dir())?;

    let mut outputs = Vec::new();
    let mut record = |path: std::path::PathBuf| {
        outputs.push(path.display().to_string());
        path
    };

    save_spec(&record(dir.spec_path()), &spec)?;
    save_cameras(&record(dir.cameras_path()), &scene.views)?;
    for (i, hand) in scene.models.hands.iter().enumerate() {
        save_hand(
            &record(dir.hand_mesh_path(i)),
            &record(dir.hand_sidecar_path(i)),
            hand,
        )?;
    }
    for (i, object) in scene.models.objects.iter().enumerate() {
        save_mesh(&record(dir.object_mesh_path(i)), object)?;
    }
    save_trajectory(&record(dir.trajectory_path()), &scene.trajectory)?;

    let annotations = (0..spec.frames)
        .map(|t| scene.annotate(t))
        .collect::<Result<Vec<_>, _>>()?;
    save_annotations(&record(dir.annotations_path()), &annotations)?;

    let views = scene.views.len();
    let maps = map_indexed(spec.frames * views, worker_cap(), |i| {
        scene.render_depth(i / views, i % views)
    });
    for (i, map) in maps.into_iter().enumerate() {
        save_depth(&record(dir.depth_path(i / views, i % views)), &map?)?;
    }

    if !scene.models.objects.is_empty() {
        save_grasps(&record(dir.grasps_path()), &grasps)?;
    }
    Ok((spec, outputs))
}

/// The fused observation cloud of one frame, from its stored depth maps.
pub fn frame_cloud(scene: &LoadedScene, frame: usize) -> Result<PointCloud, PipelineError> {
    let depths = (0..scene.views.len())
        .map(|v| load_depth(&scene.dir.depth_path(frame, v)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(merge_point_clouds(&scene.views, &depths)?)
}

pub struct SolveOutcome {
    pub init: dexfit_core::models::ScenePose,
    pub frames: Vec<FrameSolve>,
    /// The seed that shaped the init, when one was used at all.
    pub seed: Option<u64>,
}

/// Fits every frame of a stored scene, warm-starting each frame from the
/// previous solution.
pub fn solve(
    scene_root: &Path,
    init_spec: InitSpec,
    config: &SolveConfig,
    seed_override: Option<u64>,
) -> Result<SolveOutcome, PipelineError> {
    let scene = load_scene(scene_root)?;
    let frames = (0..scene.spec.frames)
        .map(|t| {
            Ok(FrameObservations {
                annotations: scene.annotations[t].clone(),
                cloud: frame_cloud(&scene, t)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let gt_start = scene.trajectory[0].clone();
    let (init, seed) = match init_spec {
        InitSpec::Gt => (gt_start, None),
        InitSpec::Perturbed(mm) => {
            let seed = seed_override.unwrap_or(scene.spec.seed);
            let init = perturb(
                &gt_start,
                &InitSpec::magnitudes(mm),
                &mut perturb_rng(seed, 0),
            );
            (init, Some(seed))
        }
    };
    let solved = solve_sequence(&scene.models, &scene.views, &frames, &init, config)?;
    Ok(SolveOutcome {
        init,
        frames: solved,
        seed,
    })
}

/// Precision-coverage sweep of the first frame's estimated object pose
/// against the scene's ground truth. The observed hand cloud is the
/// posed true hand's vertices; the reference set collides grasps against
/// the true hand and object surfaces.
pub fn eval_grasps(
    scene_root: &Path,
    estimated: &[FrameSolve],
    grid_points: Option<usize>,
) -> Result<Vec<CurvePoint>, PipelineError> {
    let scene = load_scene(scene_root)?;
    if scene.models.hands.is_empty() || scene.models.objects.is_empty() {
        return Err(invalid("grasp evaluation needs a hand and an object"));
    }
    let estimate = estimated
        .first()
        .ok_or_else(|| invalid("no solved frames"))?;
    if estimate.pose.objects.is_empty() {
        return Err(invalid("solved pose has no object"));
    }

    let gt = &scene.trajectory[0];
    let posed = scene.models.pose_all(gt)?;
    let hand_world = &posed[0].mesh;
    let object_world = &posed[scene.models.hands.len()].mesh;
    let hand_cloud = PointCloud {
        points: hand_world.vertices().to_vec(),
    };
    let grid = match grid_points {
        None => default_epsilon_grid(),
        Some(n) => {
            if n < 2 {
                return Err(invalid("the epsilon grid needs at least two points"));
            }
            (0..n).map(|i| 0.07 * i as f64 / (n - 1) as f64).collect()
        }
    };
    let handover = HandoverScene {
        base_grasps: &scene.base_grasps,
        gt_object_pose: gt.objects[0],
        object_world,
        hand_world,
    };
    Ok(precision_coverage_curve(
        &handover,
        &estimate.pose.objects[0],
        &hand_cloud,
        &parallel_jaw_template(),
        &MatchConfig::default(),
        &grid,
    )?)
}

/// Per-joint position errors (mm) after the chosen alignment.
fn joint_errors(pred: &JointSet, gt: &JointSet, mode: AlignMode) -> [f64; JOINT_COUNT] {
    let aligned: Vec<Vec3> = match mode {
        AlignMode::Absolute => pred.points.to_vec(),
        AlignMode::RootRelative => {
            let shift = gt.points[0] - pred.points[0];
            pred.points.iter().map(|&p| p + shift).collect()
        }
        AlignMode::Procrustes => {
            let t = fit_similarity(pred, gt);
            pred.points.iter().map(|&p| t.apply(p)).collect()
        }
    };
    core::array::from_fn(|j| (aligned[j] - gt.points[j]).norm())
}

/// Compares solved poses with the stored ground truth: per-frame MPJPE
/// under all alignments, object pose errors, pooled PCK curve areas, and
/// per-frame reprojection statistics of the solved joints against the
/// stored annotations.
pub fn metrics(
    scene_root: &Path,
    estimated: &[FrameSolve],
) -> Result<Vec<ReportRow>, PipelineError> {
    let scene = load_scene(scene_root)?;
    if estimated.len() != scene.spec.frames {
        return Err(invalid(format!(
            "solution has {} frames, the scene has {}",
            estimated.len(),
            scene.spec.frames
        )));
    }
    let modes = [
        (AlignMode::Absolute, "absolute"),
        (AlignMode::RootRelative, "root_relative"),
        (AlignMode::Procrustes, "procrustes"),
    ];
    let mut rows = Vec::new();
    let mut pooled: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    for (t, estimate) in estimated.iter().enumerate() {
        let id = format!("frame{t:03}");
        let gt_pose = &scene.trajectory[t];
        if let Some(hand) = scene.models.hands.first() {
            let pred = JointSet::from_meters(
                &hand.forward(&estimate.pose.hands[0])?.joints,
            )?;
            let gt = JointSet::from_meters(&hand.forward(&gt_pose.hands[0])?.joints)?;
            for (m, (mode, name)) in modes.iter().enumerate() {
                rows.push(ReportRow {
                    id: id.clone(),
                    mode: format!("mpjpe_{name}_mm"),
                    value: mpjpe(&pred, &gt, *mode),
                });
                pooled[m].extend(joint_errors(&pred, &gt, *mode));
            }
            let stats =
                reprojection_error(&pred, &scene.annotations[t], &scene.views, 0)?;
            for (j, stat) in stats.iter().enumerate() {
                if let Some(stat) = stat {
                    rows.push(ReportRow {
                        id: format!("{id}_joint{j:02}"),
                        mode: "reprojection_mean_px".into(),
                        value: stat.mean,
                    });
                    rows.push(ReportRow {
                        id: format!("{id}_joint{j:02}"),
                        mode: "reprojection_std_px".into(),
                        value: stat.std,
                    });
                }
            }
        }
        for (o, est) in estimate.pose.objects.iter().enumerate() {
            let gt = &gt_pose.objects[o];
            rows.push(ReportRow {
                id: id.clone(),
                mode: format!("object{o}_translation_err_mm"),
                value: (est.translation - gt.translation).norm() * 1e3,
            });
            let q_est = Quat::from_axis_angle(est.rotation);
            let q_gt = Quat::from_axis_angle(gt.rotation);
            rows.push(ReportRow {
                id: id.clone(),
                mode: format!("object{o}_rotation_err_deg"),
                value: 2.0 * quat_angle(q_est, q_gt) * 180.0 / std::f64::consts::PI,
            });
        }
    }

    if !scene.models.hands.is_empty() {
        for (m, (_, name)) in modes.iter().enumerate() {
            rows.push(ReportRow {
                id: "all".into(),
                mode: format!("pck_auc_{name}"),
                value: pck_auc(&pooled[m])?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::scene::{HandSpec, ObjectSpec, RigSpec, ShapeSpec};
    use crate::formats::poses::RigidRecord;

    fn tiny_spec() -> SceneSpecFile {
        SceneSpecFile {
            seed: 33,
            frames: 2,
            rig: RigSpec {
                views: 4,
                radius: 0.6,
                height: 0.35,
            },
            depth_noise_mm: 0.0,
            keypoint_noise_px: 0.0,
            hand: Some(HandSpec {
                beta: [0.0; 10],
                theta_start: None,
            }),
            objects: vec![ObjectSpec {
                shape: ShapeSpec::Box {
                    extents: [0.06, 0.04, 0.05],
                },
                start: RigidRecord {
                    rotation: [0.1, -0.2, 0.05],
                    translation: [0.13, 0.02, 0.01],
                },
                velocity_mm_per_frame: [2.0, 0.0, 0.0],
                spin_deg_per_frame: [0.0, 0.0, 0.0],
            }],
            anchors_per_object: 6,
            grasp_count: 12,
        }
    }

    fn write_tiny_scene(root: &Path) {
        let spec_path = root.join("spec.json");
        save_spec(&spec_path, &tiny_spec()).unwrap();
        gen_scene(&spec_path, &root.join("scene"), None).unwrap();
    }

    #[test]
    fn init_specs_parse_and_reject() {
        assert_eq!("gt".parse::<InitSpec>().unwrap(), InitSpec::Gt);
        assert_eq!(
            "perturbed:5".parse::<InitSpec>().unwrap(),
            InitSpec::Perturbed(5.0)
        );
        assert_eq!(
            "perturbed:2.5mm".parse::<InitSpec>().unwrap(),
            InitSpec::Perturbed(2.5)
        );
        assert!("perturbed:".parse::<InitSpec>().is_err());
        assert!("perturbed:-1".parse::<InitSpec>().is_err());
        assert!("best".parse::<InitSpec>().is_err());
    }

    #[test]
    fn generated_scenes_load_back_consistently() {
        let dir = tempfile::tempdir().unwrap();
        write_tiny_scene(dir.path());
        let scene = load_scene(&dir.path().join("scene")).unwrap();
        assert_eq!(scene.trajectory.len(), 2);
        assert_eq!(scene.views.len(), 4);
        assert_eq!(scene.models.hands.len(), 1);
        assert_eq!(scene.base_grasps.len(), 12);
        let cloud = frame_cloud(&scene, 0).unwrap();
        assert!(cloud.len() > 500, "cloud has {} points", cloud.len());
    }

    #[test]
    fn full_pipeline_runs_end_to_end_on_a_tiny_scene() {
        let dir = tempfile::tempdir().unwrap();
        write_tiny_scene(dir.path());
        let scene_root = dir.path().join("scene");
        let config = SolveConfig {
            iterations: 3,
            ..SolveConfig::default()
        };
        let outcome = solve(&scene_root, InitSpec::Perturbed(2.0), &config, None).unwrap();
        assert_eq!(outcome.frames.len(), 2);
        assert_eq!(outcome.frames[0].trace.len(), 4);

        let curve = eval_grasps(&scene_root, &outcome.frames, Some(5)).unwrap();
        assert_eq!(curve.len(), 5);
        assert_eq!(curve[0].epsilon, 0.0);
        assert!((curve[4].epsilon - 0.07).abs() < 1e-15);

        let rows = metrics(&scene_root, &outcome.frames).unwrap();
        assert!(rows.iter().any(|r| r.mode == "mpjpe_absolute_mm"));
        assert!(rows.iter().any(|r| r.mode == "pck_auc_procrustes"));
        assert!(rows
            .iter()
            .any(|r| r.mode == "object0_translation_err_mm"));
        assert!(rows.iter().any(|r| r.mode == "reprojection_mean_px"));
    }

    #[test]
    fn solving_from_gt_and_perturbed_inits_differ() {
        let dir = tempfile::tempdir().unwrap();
        write_tiny_scene(dir.path());
        let scene_root = dir.path().join("scene");
        let config = SolveConfig {
            iterations: 1,
            ..SolveConfig::default()
        };
        let a = solve(&scene_root, InitSpec::Gt, &config, None).unwrap();
        let b = solve(&scene_root, InitSpec::Perturbed(5.0), &config, None).unwrap();
        assert_ne!(a.init, b.init);
        // Same seed, same perturbation.
        let c = solve(&scene_root, InitSpec::Perturbed(5.0), &config, None).unwrap();
        assert_eq!(b.init, c.init);
        // Different seed, different perturbation.
        let d = solve(&scene_root, InitSpec::Perturbed(5.0), &config, Some(99)).unwrap();
        assert_ne!(b.init, d.init);
    }
}
