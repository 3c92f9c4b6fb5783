//! Hand model files: the rest mesh in the ASCII mesh format plus a JSON
//! sidecar carrying the skeleton (parents, −1 for the root), rest joint
//! positions, sparse skinning weights as `[vertex, joint, weight]`
//! triplets, the articulated joint list, and the shape coefficients.

use std::fs;
use std::path::Path;

use dexfit_core::math::vec3;
use dexfit_core::models::HandModel;
use serde::{Deserialize, Serialize};

use super::mesh::{load_mesh, save_mesh};
use super::{invalid, to_json_bytes, FormatError};
use crate::manifest::write_atomic;

#[derive(Debug, Serialize, Deserialize)]
struct HandRecord {
    parents: Vec<i64>,
    rest_joints: Vec<[f64; 3]>,
    weights: Vec<(usize, usize, f64)>,
    articulated: Vec<usize>,
    beta: [f64; 10],
}

pub fn save_hand(
    mesh_path: &Path,
    sidecar_path: &Path,
    model: &HandModel,
) -> Result<(), FormatError> {
    save_mesh(mesh_path, model.rest_mesh())?;
    let mut weights = Vec::new();
    for (v, row) in model.skinning_weights().iter().enumerate() {
        for &(j, w) in row {
            weights.push((v, j, w));
        }
    }
    let record = HandRecord {
        parents: model
            .parents()
            .iter()
            .enumerate()
            .map(|(j, &p)| if j == 0 { -1 } else { p as i64 })
            .collect(),
        rest_joints: model.rest_joints().iter().map(|j| j.to_array()).collect(),
        weights,
        articulated: model.articulated_joints().to_vec(),
        beta: *model.beta(),
    };
    write_atomic(sidecar_path, &to_json_bytes(&record)?)?;
    Ok(())
}

pub fn load_hand(mesh_path: &Path, sidecar_path: &Path) -> Result<HandModel, FormatError> {
    let mesh = load_mesh(mesh_path)?;
    let record: HandRecord = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
    if record.parents.is_empty() || record.parents[0] != -1 {
        return Err(invalid("joint 0 must be the root (parent -1)"));
    }
    let mut parents = Vec::with_capacity(record.parents.len());
    parents.push(0);
    for (j, &p) in record.parents.iter().enumerate().skip(1) {
        if p < 0 {
            return Err(invalid(format!("joint {j} has no parent")));
        }
        parents.push(p as usize);
    }
    let rest_joints = record
        .rest_joints
        .iter()
        .map(|p| vec3(p[0], p[1], p[2]))
        .collect();
    let mut weights = vec![Vec::new(); mesh.vertex_count()];
    for &(v, j, w) in &record.weights {
        if v >= weights.len() {
            return Err(invalid(format!("weight references missing vertex {v}")));
        }
        weights[v].push((j, w));
    }
    HandModel::new(
        mesh,
        parents,
        rest_joints,
        weights,
        record.articulated,
        record.beta,
    )
    .map_err(|e| invalid(format!("hand model rejected: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dexfit_core::models::{procedural_hand, HandPose};

    #[test]
    fn hand_models_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mesh_path = dir.path().join("hand.mesh");
        let sidecar_path = dir.path().join("hand.json");
        let mut beta = [0.0; 10];
        beta[0] = 0.004;
        beta[3] = -0.002;
        let model = procedural_hand(beta);
        save_hand(&mesh_path, &sidecar_path, &model).unwrap();
        let back = load_hand(&mesh_path, &sidecar_path).unwrap();

        assert_eq!(back.parents(), model.parents());
        assert_eq!(back.rest_joints(), model.rest_joints());
        assert_eq!(back.skinning_weights(), model.skinning_weights());
        assert_eq!(back.articulated_joints(), model.articulated_joints());
        assert_eq!(back.beta(), model.beta());

        // The loaded model poses identically, shape offsets included.
        let mut pose = HandPose::zeros(model.dof_count());
        pose.theta[0] = 0.2;
        pose.theta[17] = 0.5;
        let a = model.forward(&pose).unwrap();
        let b = back.forward(&pose).unwrap();
        assert_eq!(a.joints, b.joints);
        assert_eq!(a.mesh.vertices(), b.mesh.vertices());
    }

    #[test]
    fn root_parent_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let mesh_path = dir.path().join("hand.mesh");
        let sidecar_path = dir.path().join("hand.json");
        let model = procedural_hand([0.0; 10]);
        save_hand(&mesh_path, &sidecar_path, &model).unwrap();
        let text = fs::read_to_string(&sidecar_path)
            .unwrap()
            .replacen("-1", "0", 1);
        fs::write(&sidecar_path, text).unwrap();
        assert!(matches!(
            load_hand(&mesh_path, &sidecar_path),
            Err(FormatError::Invalid(_))
        ));
    }
}
