//! Adam-based pose fitting, per frame and over sequences.
//!
//! Each frame minimizes the total scene energy for a fixed number of
//! bias-corrected Adam steps over a flat parameter vector (hand θ blocks
//! first, then one axis-angle/translation block per object). Sequences warm
//! start: frame t begins at frame t−1's solution. Everything is
//! deterministic; the same inputs give bit-identical poses.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::camera::{CameraView, PointCloud};
use crate::energy::{e_total, AnnotationSet, EnergyError, EnergyReport, Gradient};
use crate::models::{SceneModels, ScenePose};

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    /// Non-positive learning rate or zero iterations.
    BadConfig,
    /// Parameter/gradient/moment shapes disagree.
    ShapeMismatch,
    /// Energy evaluation failed while solving the given frame.
    Energy { frame: usize, source: EnergyError },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::BadConfig => write!(f, "learning rate must be > 0 and iterations ≥ 1"),
            SolverError::ShapeMismatch => write!(f, "parameter shapes disagree"),
            SolverError::Energy { frame, source } => write!(f, "frame {frame}: {source}"),
        }
    }
}

impl core::error::Error for SolverError {}

/// Optimizer settings. Defaults: learning rate 0.01 for 100 iterations,
/// with the canonical Adam moment constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            iterations: 100,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.learning_rate > 0.0 && self.iterations >= 1 {
            Ok(())
        } else {
            Err(SolverError::BadConfig)
        }
    }
}

/// Adam moment accumulators plus hyperparameters, one slot per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    pub fn new(param_count: usize, config: &SolveConfig) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            alpha: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<(), SolverError> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(SolverError::ShapeMismatch);
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(self.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, t as f64);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.alpha * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
        Ok(())
    }
}

/// Everything observed in one frame.
#[derive(Debug, Clone)]
pub struct FrameObservations {
    pub annotations: AnnotationSet,
    pub cloud: PointCloud,
}

/// A solved frame: the pose after the fixed iteration budget, and the
/// energy trace (entry 0 is the energy at the initialization, entry i the
/// energy after step i; `iterations + 1` entries in total).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSolve {
    pub pose: ScenePose,
    pub trace: Vec<EnergyReport>,
}

fn pack(pose: &ScenePose) -> Vec<f64> {
    let mut flat = Vec::new();
    for hand in &pose.hands {
        flat.extend_from_slice(&hand.theta);
    }
    for obj in &pose.objects {
        flat.extend_from_slice(&obj.rotation.to_array());
        flat.extend_from_slice(&obj.translation.to_array());
    }
    flat
}

fn pack_grad(grad: &Gradient) -> Vec<f64> {
    let mut flat = Vec::new();
    for hand in &grad.hands {
        flat.extend_from_slice(hand);
    }
    for obj in &grad.objects {
        flat.extend_from_slice(obj);
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
    for obj in &mut pose.objects {
        obj.rotation = crate::math::Vec3::from_array([flat[at], flat[at + 1], flat[at + 2]]);
        obj.translation =
            crate::math::Vec3::from_array([flat[at + 3], flat[at + 4], flat[at + 5]]);
        at += 6;
    }
    pose
}

fn solve_frame_indexed(
    models: &SceneModels,
    views: &[CameraView],
    obs: &FrameObservations,
    init: &ScenePose,
    config: &SolveConfig,
    frame: usize,
) -> Result<FrameSolve, SolverError> {
    config.validate()?;
    let energy = |pose: &ScenePose| {
        e_total(models, pose, views, &obs.annotations, &obs.cloud)
            .map_err(|source| SolverError::Energy { frame, source })
    };

    let mut pose = init.clone();
    let mut params = pack(&pose);
    let mut adam = AdamState::new(params.len(), config);
    let mut trace = Vec::with_capacity(config.iterations + 1);

    let (report, mut grad) = energy(&pose)?;
    trace.push(report);
    for _ in 0..config.iterations {
        adam.step(&mut params, &pack_grad(&grad))?;
        pose = unpack(&params, init);
        // Keep object rotation magnitudes in [0, π]; hand θ is left alone
        // because the regularizer reads it directly.
        for obj in &mut pose.objects {
            *obj = obj.canonicalized();
        }
        params = pack(&pose);
        let (report, g) = energy(&pose)?;
        trace.push(report);
        grad = g;
    }
    Ok(FrameSolve { pose, trace })
}

/// Fits one frame: exactly `config.iterations` Adam steps from `init`, no
/// early stopping.
pub fn solve_frame(
    models: &SceneModels,
    views: &[CameraView],
    obs: &FrameObservations,
    init: &ScenePose,
    config: &SolveConfig,
) -> Result<FrameSolve, SolverError> {
    solve_frame_indexed(models, views, obs, init, config, 0)
}

/// Fits a sequence: the first frame starts at `first_init`, every later
/// frame at the previous frame's solution.
pub fn solve_sequence(
    models: &SceneModels,
    views: &[CameraView],
    frames: &[FrameObservations],
    first_init: &ScenePose,
    config: &SolveConfig,
) -> Result<Vec<FrameSolve>, SolverError> {
    let mut out: Vec<FrameSolve> = Vec::with_capacity(frames.len());
    let mut init = first_init.clone();
    for (i, obs) in frames.iter().enumerate() {
        let solved = solve_frame_indexed(models, views, obs, &init, config, i)?;
        init = solved.pose.clone();
        out.push(solved);
    }
    Ok(out)
}
