//! Pose files. A trajectory file is the plain per-frame scene poses
//! (ground truth); a solution file adds the solver's starting pose and
//! the per-frame energy trace.

use std::fs;
use std::path::Path;

use dexfit_core::energy::EnergyReport;
use dexfit_core::math::vec3;
use dexfit_core::models::{HandPose, RigidPose, ScenePose};
use dexfit_core::solver::FrameSolve;
use serde::{Deserialize, Serialize};

use super::{to_json_bytes, FormatError};
use crate::manifest::write_atomic;

#[derive(Debug, Serialize, Deserialize)]
pub struct PoseRecord {
    /// One full θ vector per hand.
    pub hands: Vec<Vec<f64>>,
    pub objects: Vec<RigidRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidRecord {
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRecord {
    frames: Vec<PoseRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionRecord {
    init: PoseRecord,
    frames: Vec<SolvedFrameRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolvedFrameRecord {
    pose: PoseRecord,
    trace: Vec<EnergyRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnergyRecord {
    depth: f64,
    kpt_hand: f64,
    kpt_object: f64,
    reg: f64,
    total: f64,
}

impl PoseRecord {
    pub fn from_pose(pose: &ScenePose) -> Self {
        PoseRecord {
            hands: pose.hands.iter().map(|h| h.theta.clone()).collect(),
            objects: pose
                .objects
                .iter()
                .map(|o| RigidRecord {
                    rotation: o.rotation.to_array(),
                    translation: o.translation.to_array(),
                })
                .collect(),
        }
    }

    pub fn to_pose(&self) -> ScenePose {
        ScenePose {
            hands: self
                .hands
                .iter()
                .map(|theta| HandPose {
                    theta: theta.clone(),
                })
                .collect(),
            objects: self
                .objects
                .iter()
                .map(|o| RigidPose {
                    rotation: vec3(o.rotation[0], o.rotation[1], o.rotation[2]),
                    translation: vec3(o.translation[0], o.translation[1], o.translation[2]),
                })
                .collect(),
        }
    }
}

fn report_to_record(r: &EnergyReport) -> EnergyRecord {
    EnergyRecord {
        depth: r.e_depth,
        kpt_hand: r.e_kpt_hand,
        kpt_object: r.e_kpt_object,
        reg: r.e_reg,
        total: r.e_total,
    }
}

fn record_to_report(r: &EnergyRecord) -> EnergyReport {
    EnergyReport {
        e_depth: r.depth,
        e_kpt_hand: r.kpt_hand,
        e_kpt_object: r.kpt_object,
        e_reg: r.reg,
        e_total: r.total,
    }
}

pub fn save_trajectory(path: &Path, frames: &[ScenePose]) -> Result<(), FormatError> {
    let record = TrajectoryRecord {
        frames: frames.iter().map(PoseRecord::from_pose).collect(),
    };
    write_atomic(path, &to_json_bytes(&record)?)?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<Vec<ScenePose>, FormatError> {
    let record: TrajectoryRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(record.frames.iter().map(PoseRecord::to_pose).collect())
}

pub fn save_solution(
    path: &Path,
    init: &ScenePose,
    frames: &[FrameSolve],
) -> Result<(), FormatError> {
    let record = SolutionRecord {
        init: PoseRecord::from_pose(init),
        frames: frames
            .iter()
            .map(|f| SolvedFrameRecord {
                pose: PoseRecord::from_pose(&f.pose),
                trace: f.trace.iter().map(report_to_record).collect(),
            })
            .collect(),
    };
    write_atomic(path, &to_json_bytes(&record)?)?;
    Ok(())
}

pub fn load_solution(path: &Path) -> Result<(ScenePose, Vec<FrameSolve>), FormatError> {
    let record: SolutionRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
    let frames = record
        .frames
        .iter()
        .map(|f| FrameSolve {
            pose: f.pose.to_pose(),
            trace: f.trace.iter().map(record_to_report).collect(),
        })
        .collect();
    Ok((record.init.to_pose(), frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_pose(shift: f64) -> ScenePose {
        ScenePose {
            hands: vec![HandPose {
                theta: vec![0.1 + shift, -0.2, 0.3, 0.0, 0.05, 0.0, 0.4, 0.0, 0.0],
            }],
            objects: vec![RigidPose {
                rotation: vec3(0.1, 0.2, -0.1),
                translation: vec3(0.12 + shift, 0.02, 0.01),
            }],
        }
    }

    #[test]
    fn trajectories_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt_poses.json");
        let frames = vec![sample_pose(0.0), sample_pose(0.002)];
        save_trajectory(&path, &frames).unwrap();
        assert_eq!(load_trajectory(&path).unwrap(), frames);
    }

    #[test]
    fn solutions_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.json");
        let report = EnergyReport {
            e_depth: 1.5,
            e_kpt_hand: 2.25,
            e_kpt_object: 0.125,
            e_reg: 0.011,
            e_total: 3.886,
        };
        let frames = vec![FrameSolve {
            pose: sample_pose(0.001),
            trace: vec![report, report],
        }];
        save_solution(&path, &sample_pose(0.0), &frames).unwrap();
        let (init, back) = load_solution(&path).unwrap();
        assert_eq!(init, sample_pose(0.0));
        assert_eq!(back, frames);
    }
}
