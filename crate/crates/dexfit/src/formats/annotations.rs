//! Annotation files: one JSON document per sequence. Each frame carries
//! its per-view keypoint observations as `[u, v, gamma]` triples (gamma 1
//! visible, 0 hidden — hidden rows are written as zeros) and the surface
//! anchors that define the object keypoints on their rest meshes.

use std::fs;
use std::path::Path;

use dexfit_core::camera::SurfaceAnchor;
use dexfit_core::energy::{AnnotationSet, KeypointObs, ViewAnnotations};
use serde::{Deserialize, Serialize};

use super::{invalid, to_json_bytes, FormatError};
use crate::manifest::write_atomic;

#[derive(Debug, Serialize, Deserialize)]
struct SequenceRecord {
    frames: Vec<FrameRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    views: Vec<ViewRecord>,
    anchors: Vec<Vec<AnchorRecord>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ViewRecord {
    hands: Vec<Vec<[f64; 3]>>,
    objects: Vec<Vec<[f64; 3]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnchorRecord {
    face: usize,
    bary: [f64; 3],
}

fn obs_to_triple(obs: &KeypointObs) -> [f64; 3] {
    if obs.visible {
        [obs.pixel[0], obs.pixel[1], 1.0]
    } else {
        [0.0, 0.0, 0.0]
    }
}

fn triple_to_obs(t: [f64; 3]) -> Result<KeypointObs, FormatError> {
    match t[2] {
        g if g == 1.0 => Ok(KeypointObs {
            pixel: [t[0], t[1]],
            visible: true,
        }),
        g if g == 0.0 => Ok(KeypointObs::HIDDEN),
        g => Err(invalid(format!("visibility must be 0 or 1, got {g}"))),
    }
}

fn frame_to_record(set: &AnnotationSet) -> FrameRecord {
    FrameRecord {
        views: set
            .views
            .iter()
            .map(|v| ViewRecord {
                hands: v
                    .hands
                    .iter()
                    .map(|h| h.iter().map(obs_to_triple).collect())
                    .collect(),
                objects: v
                    .objects
                    .iter()
                    .map(|o| o.iter().map(obs_to_triple).collect())
                    .collect(),
            })
            .collect(),
        anchors: set
            .anchors
            .iter()
            .map(|list| {
                list.iter()
                    .map(|a| AnchorRecord {
                        face: a.face,
                        bary: a.bary,
                    })
                    .collect()
            })
            .collect(),
    }
}

fn record_to_frame(record: FrameRecord) -> Result<AnnotationSet, FormatError> {
    let mut views = Vec::with_capacity(record.views.len());
    for v in record.views {
        let mut hands = Vec::with_capacity(v.hands.len());
        for h in v.hands {
            hands.push(h.into_iter().map(triple_to_obs).collect::<Result<_, _>>()?);
        }
        let mut objects = Vec::with_capacity(v.objects.len());
        for o in v.objects {
            objects.push(o.into_iter().map(triple_to_obs).collect::<Result<_, _>>()?);
        }
        views.push(ViewAnnotations { hands, objects });
    }
    let anchors = record
        .anchors
        .into_iter()
        .map(|list| {
            list.into_iter()
                .map(|a| SurfaceAnchor {
                    face: a.face,
                    bary: a.bary,
                })
                .collect()
        })
        .collect();
    Ok(AnnotationSet { views, anchors })
}

pub fn save_annotations(path: &Path, frames: &[AnnotationSet]) -> Result<(), FormatError> {
    let record = SequenceRecord {
        frames: frames.iter().map(frame_to_record).collect(),
    };
    write_atomic(path, &to_json_bytes(&record)?)?;
    Ok(())
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationSet>, FormatError> {
    let record: SequenceRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
    record.frames.into_iter().map(record_to_frame).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_frame() -> AnnotationSet {
        AnnotationSet {
            views: vec![
                ViewAnnotations {
                    hands: vec![vec![
                        KeypointObs {
                            pixel: [12.5, 40.25],
                            visible: true,
                        },
                        KeypointObs::HIDDEN,
                    ]],
                    objects: vec![vec![KeypointObs {
                        pixel: [100.0, 3.0],
                        visible: true,
                    }]],
                },
                ViewAnnotations {
                    hands: vec![vec![KeypointObs::HIDDEN, KeypointObs::HIDDEN]],
                    objects: vec![vec![KeypointObs::HIDDEN]],
                },
            ],
            anchors: vec![vec![SurfaceAnchor {
                face: 4,
                bary: [0.25, 0.5, 0.25],
            }]],
        }
    }

    #[test]
    fn sequences_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.json");
        let frames = vec![sample_frame(), sample_frame()];
        save_annotations(&path, &frames).unwrap();
        assert_eq!(load_annotations(&path).unwrap(), frames);
    }

    #[test]
    fn hidden_pixels_are_canonicalized_to_zero() {
        let mut frame = sample_frame();
        frame.views[0].hands[0][1] = KeypointObs {
            pixel: [99.0, 99.0],
            visible: false,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.json");
        save_annotations(&path, &[frame]).unwrap();
        let back = load_annotations(&path).unwrap();
        assert_eq!(back[0].views[0].hands[0][1], KeypointObs::HIDDEN);
    }

    #[test]
    fn fractional_visibility_is_rejected() {
        assert!(triple_to_obs([1.0, 2.0, 0.5]).is_err());
    }
}
