//! Core geometry, models, and optimization for multi-view hand and object
//! pose fitting.
//!
//! Everything here is deterministic and allocation-only: no files, threads,
//! or clocks. The companion `dexfit` crate layers IO and a command line on
//! top.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod camera;
pub mod energy;
pub mod geometry;
pub mod grasp;
pub mod math;
pub mod metrics;
pub mod models;
pub mod solver;
pub mod synth;

pub use camera::{CameraError, CameraView, DepthMap, PointCloud, SurfaceAnchor};
pub use energy::{AnnotationSet, EnergyError, EnergyReport, Gradient, KeypointObs, ViewAnnotations};
pub use geometry::{AabbTree, ClosestPointResult, GeometryError, Ray, RayHit, TriMesh};
pub use grasp::{
    build_reference_set, coverage, default_epsilon_grid, fps_sample, grasp_match,
    hand_collision_filter, precision, precision_coverage_curve, transform_grasps, CurvePoint,
    Grasp, GraspError, GraspSet, GripperTemplate, HandoverScene, MatchConfig, ReferenceSet,
};
pub use math::{Mat3, Quat, Vec3};
pub use metrics::{
    fit_similarity, mpjpe, pck_auc, pck_auc_over, reprojection_error, AlignMode, JointSet,
    JointStat, MetricsError, SimilarityTransform, JOINT_COUNT,
};
pub use models::{
    procedural_hand, HandModel, HandPose, ModelError, PosedModel, RigidPose, SceneModels,
    ScenePose,
};
pub use solver::{
    solve_frame, solve_sequence, AdamState, FrameObservations, FrameSolve, SolveConfig,
    SolverError,
};
pub use synth::{
    box_mesh, cylinder_mesh, generate_grasps, l_bracket_mesh, parallel_jaw_template, perturb,
    perturb_rng, ring_rig, scatter_anchors, uv_sphere_mesh, PerturbMagnitudes, SceneSpec,
    SynthError, GRASP_STANDOFF, HAND_JOINT_CLEARANCE, SURFACE_VISIBILITY_TOLERANCE,
};
