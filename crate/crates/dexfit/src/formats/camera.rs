//! Camera rig files: a JSON list of per-view records with intrinsics and
//! world-to-camera extrinsics (rotation row-major, translation in meters).

use std::fs;
use std::path::Path;

use dexfit_core::camera::CameraView;
use dexfit_core::math::{vec3, Mat3};
use serde::{Deserialize, Serialize};

use super::{invalid, to_json_bytes, FormatError};
use crate::manifest::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl CameraRecord {
    pub fn from_view(view: &CameraView) -> Self {
        let r = &view.rotation;
        let rows = [r.row(0).to_array(), r.row(1).to_array(), r.row(2).to_array()];
        CameraRecord {
            fx: view.fx,
            fy: view.fy,
            cx: view.cx,
            cy: view.cy,
            width: view.width,
            height: view.height,
            rotation: [
                rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2],
                rows[2][0], rows[2][1], rows[2][2],
            ],
            translation: view.translation.to_array(),
        }
    }

    pub fn to_view(&self) -> Result<CameraView, FormatError> {
        let m = &self.rotation;
        let rotation = Mat3::from_rows([
            [m[0], m[1], m[2]],
            [m[3], m[4], m[5]],
            [m[6], m[7], m[8]],
        ]);
        let t = vec3(self.translation[0], self.translation[1], self.translation[2]);
        CameraView::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            rotation,
            t,
        )
        .map_err(|e| invalid(format!("camera rejected: {e}")))
    }
}

pub fn save_cameras(path: &Path, views: &[CameraView]) -> Result<(), FormatError> {
    let records: Vec<CameraRecord> = views.iter().map(CameraRecord::from_view).collect();
    write_atomic(path, &to_json_bytes(&records)?)?;
    Ok(())
}

pub fn load_cameras(path: &Path) -> Result<Vec<CameraView>, FormatError> {
    let records: Vec<CameraRecord> = serde_json::from_str(&fs::read_to_string(path)?)?;
    records.iter().map(CameraRecord::to_view).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use dexfit_core::synth::ring_rig;

    #[test]
    fn rigs_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cameras.json");
        let views = ring_rig(8, 0.6, 0.35);
        save_cameras(&path, &views).unwrap();
        assert_eq!(load_cameras(&path).unwrap(), views);
    }

    #[test]
    fn broken_rotations_are_rejected() {
        let mut record = CameraRecord::from_view(&ring_rig(1, 0.5, 0.2)[0]);
        record.rotation[0] += 0.1;
        assert!(matches!(record.to_view(), Err(FormatError::Invalid(_))));
    }
}
