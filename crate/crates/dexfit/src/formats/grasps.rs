//! Grasp set files: a JSON list of `{t: [x, y, z], q: [w, x, y, z]}`
//! records, translations in meters and orientations as unit quaternions.

use std::fs;
use std::path::Path;

use dexfit_core::grasp::{Grasp, GraspSet};
use dexfit_core::math::{vec3, Quat};
use serde::{Deserialize, Serialize};

use super::{invalid, to_json_bytes, FormatError};
use crate::manifest::write_atomic;

#[derive(Debug, Serialize, Deserialize)]
struct GraspRecord {
    t: [f64; 3],
    q: [f64; 4],
}

pub fn save_grasps(path: &Path, grasps: &GraspSet) -> Result<(), FormatError> {
    let records: Vec<GraspRecord> = grasps
        .iter()
        .map(|g| GraspRecord {
            t: g.translation.to_array(),
            q: g.orientation.to_array(),
        })
        .collect();
    write_atomic(path, &to_json_bytes(&records)?)?;
    Ok(())
}

pub fn load_grasps(path: &Path) -> Result<GraspSet, FormatError> {
    let records: Vec<GraspRecord> = serde_json::from_str(&fs::read_to_string(path)?)?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Grasp::new(
                vec3(r.t[0], r.t[1], r.t[2]),
                Quat::from_array(r.q),
            )
            .map_err(|e| invalid(format!("grasp {i}: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use dexfit_core::synth::{box_mesh, generate_grasps};

    #[test]
    fn grasp_sets_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grasps.json");
        let mesh = box_mesh(vec3(0.06, 0.04, 0.05)).unwrap();
        let grasps = generate_grasps(&mesh, 32, 11).unwrap();
        save_grasps(&path, &grasps).unwrap();
        assert_eq!(load_grasps(&path).unwrap(), grasps);
    }

    #[test]
    fn non_unit_quaternions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grasps.json");
        std::fs::write(&path, r#"[{"t": [0, 0, 0], "q": [1, 1, 0, 0]}]"#).unwrap();
        assert!(matches!(load_grasps(&path), Err(FormatError::Invalid(_))));
    }
}
