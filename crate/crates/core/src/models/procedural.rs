//! Procedurally generated default hand.
//!
//! A compact, watertight stand-in for a scanned hand: an ellipsoidal palm
//! plus five capped finger tubes, 778 vertices and 1532 faces in total,
//! with 21 joints (wrist, then thumb/index/middle/ring/pinky blocks of
//! knuckle, middle joint, distal joint, tip). The components are disjoint
//! closed surfaces so inside/outside tests behave.
//!
//! Vertex and face layout is blockwise: palm first (198 vertices, 392
//! faces), then one 116-vertex / 228-face block per finger in the order
//! above. Tests rely on that layout to take components apart.

use alloc::vec;
use alloc::vec::Vec;

use super::HandModel;
use crate::geometry::TriMesh;
use crate::math::{vec3, Vec3};

const PALM_SEGMENTS: usize = 14;
const PALM_RINGS: usize = 14;
const FINGER_SEGMENTS: usize = 6;
const FINGER_RINGS: usize = 19;

const PALM_CENTER: Vec3 = vec3(0.0, 0.005, 0.0);
const PALM_SEMI_AXES: Vec3 = vec3(0.041, 0.050, 0.014);

/// Margin factor on the palm ellipsoid that finger geometry must clear.
const CLEARANCE: f64 = 1.08;

struct FingerSpec {
    /// Unit direction the finger extends along.
    dir: Vec3,
    /// Either a straight-up finger at this palm x offset, or a thumb-style
    /// ray from the palm center.
    x_offset: Option<f64>,
    length: f64,
    radius: f64,
}

fn finger_specs() -> [FingerSpec; 5] {
    [
        // Thumb leaves the palm sideways.
        FingerSpec {
            dir: vec3(-0.80, 0.58, 0.12).normalized(),
            x_offset: None,
            length: 0.050,
            radius: 0.0092,
        },
        FingerSpec {
            dir: vec3(0.0, 1.0, 0.0),
            x_offset: Some(-0.027),
            length: 0.065,
            radius: 0.0080,
        },
        FingerSpec {
            dir: vec3(0.0, 1.0, 0.0),
            x_offset: Some(-0.009),
            length: 0.071,
            radius: 0.0082,
        },
        FingerSpec {
            dir: vec3(0.0, 1.0, 0.0),
            x_offset: Some(0.009),
            length: 0.066,
            radius: 0.0078,
        },
        FingerSpec {
            dir: vec3(0.0, 1.0, 0.0),
            x_offset: Some(0.027),
            length: 0.051,
            radius: 0.0068,
        },
    ]
}

/// Normalized ellipsoid coordinate: < 1 inside the palm, 1 on it.
fn palm_level(p: Vec3) -> f64 {
    let d = p - PALM_CENTER;
    let s = vec3(
        d.x / PALM_SEMI_AXES.x,
        d.y / PALM_SEMI_AXES.y,
        d.z / PALM_SEMI_AXES.z,
    );
    s.norm_squared()
}

/// Builds the default hand model. β is the frozen per-subject shape offset;
/// pass zeros for the neutral hand.
pub fn procedural_hand(beta: [f64; 10]) -> HandModel {
    let mut vertices: Vec<Vec3> = Vec::with_capacity(778);
    let mut faces: Vec<[u32; 3]> = Vec::with_capacity(1532);

    append_palm(&mut vertices, &mut faces);

    let mut rest_joints = vec![vec3(0.0, -0.047, 0.0)];
    let mut weights: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0)]; vertices.len()];
    let mut articulated = Vec::with_capacity(15);

    for (f, spec) in finger_specs().iter().enumerate() {
        let start = finger_start(spec);
        let knuckle = 1 + 4 * f;
        articulated.extend([knuckle, knuckle + 1, knuckle + 2]);
        rest_joints.extend([
            start,
            start + spec.dir * (0.45 * spec.length),
            start + spec.dir * (0.73 * spec.length),
            start + spec.dir * spec.length,
        ]);
        let base = vertices.len();
        append_tube(&mut vertices, &mut faces, start, spec);
        for v in base..vertices.len() {
            let s = ((vertices[v] - start).dot(spec.dir) / spec.length).clamp(0.0, 1.0);
            weights.push(finger_weights(s, knuckle));
        }
        debug_assert_eq!(weights.len(), vertices.len());
    }

    let mut parents = vec![0usize; 21];
    for f in 0..5 {
        parents[1 + 4 * f] = 0;
        parents[2 + 4 * f] = 1 + 4 * f;
        parents[3 + 4 * f] = 2 + 4 * f;
        parents[4 + 4 * f] = 3 + 4 * f;
    }

    let mesh = TriMesh::new(vertices, faces).expect("procedural hand mesh is valid");
    HandModel::new(mesh, parents, rest_joints, weights, articulated, beta)
        .expect("procedural hand model is valid")
}

/// Skinning weights at normalized finger coordinate `s`, over the finger's
/// knuckle / middle / distal joints. Piecewise linear blends around the
/// joint boundaries keep rows convex and at most two entries wide.
fn finger_weights(s: f64, knuckle: usize) -> Vec<(usize, f64)> {
    let blend = |lo: f64, hi: f64| ((s - lo) / (hi - lo)).clamp(0.0, 1.0);
    if s < 0.37 {
        vec![(knuckle, 1.0)]
    } else if s < 0.53 {
        let t = blend(0.37, 0.53);
        vec![(knuckle, 1.0 - t), (knuckle + 1, t)]
    } else if s < 0.65 {
        vec![(knuckle + 1, 1.0)]
    } else if s < 0.81 {
        let t = blend(0.65, 0.81);
        vec![(knuckle + 1, 1.0 - t), (knuckle + 2, t)]
    } else {
        vec![(knuckle + 2, 1.0)]
    }
}

/// Where a finger's base pole sits: pushed along its direction until the
/// base cap clears the palm ellipsoid with margin.
fn finger_start(spec: &FingerSpec) -> Vec3 {
    let probe_ring = |start: Vec3| -> bool {
        // Base pole plus the first ring (radius grows to full within the
        // cap) must all sit outside the scaled ellipsoid.
        if palm_level(start) < CLEARANCE {
            return false;
        }
        let (e1, e2) = spec.dir.any_orthonormal();
        let ring_center = start + spec.dir * (0.3 * spec.radius);
        for k in 0..FINGER_SEGMENTS {
            let psi = core::f64::consts::TAU * k as f64 / FINGER_SEGMENTS as f64;
            let p = ring_center + (e1 * libm::cos(psi) + e2 * libm::sin(psi)) * spec.radius;
            if palm_level(p) < CLEARANCE {
                return false;
            }
        }
        true
    };

    match spec.x_offset {
        Some(x) => {
            // Straight finger: walk upward from the ellipse top at that x.
            let frac: f64 = 1.0 - (x / PALM_SEMI_AXES.x) * (x / PALM_SEMI_AXES.x);
            let mut y = PALM_CENTER.y + PALM_SEMI_AXES.y * libm::sqrt(frac.max(0.0));
            while !probe_ring(vec3(x, y, 0.0)) {
                y += 0.0005;
            }
            vec3(x, y, 0.0)
        }
        None => {
            // Thumb: walk outward from the palm center along its direction.
            let d = spec.dir;
            let mut t = 1.0
                / libm::sqrt(
                    (d.x / PALM_SEMI_AXES.x) * (d.x / PALM_SEMI_AXES.x)
                        + (d.y / PALM_SEMI_AXES.y) * (d.y / PALM_SEMI_AXES.y)
                        + (d.z / PALM_SEMI_AXES.z) * (d.z / PALM_SEMI_AXES.z),
                );
            while !probe_ring(PALM_CENTER + d * t) {
                t += 0.0005;
            }
            PALM_CENTER + d * t
        }
    }
}

fn append_palm(vertices: &mut Vec<Vec3>, faces: &mut Vec<[u32; 3]>) {
    let base = vertices.len() as u32;
    // Poles on the ±y axis; polar angle sweeps top to bottom.
    vertices.push(PALM_CENTER + vec3(0.0, PALM_SEMI_AXES.y, 0.0));
    for i in 1..=PALM_RINGS {
        let phi = core::f64::consts::PI * i as f64 / (PALM_RINGS + 1) as f64;
        for s in 0..PALM_SEGMENTS {
            let psi = core::f64::consts::TAU * s as f64 / PALM_SEGMENTS as f64;
            vertices.push(
                PALM_CENTER
                    + vec3(
                        PALM_SEMI_AXES.x * libm::sin(phi) * libm::cos(psi),
                        PALM_SEMI_AXES.y * libm::cos(phi),
                        PALM_SEMI_AXES.z * libm::sin(phi) * libm::sin(psi),
                    ),
            );
        }
    }
    vertices.push(PALM_CENTER - vec3(0.0, PALM_SEMI_AXES.y, 0.0));
    lathe_faces(faces, base, PALM_RINGS, PALM_SEGMENTS);
}

fn append_tube(vertices: &mut Vec<Vec3>, faces: &mut Vec<[u32; 3]>, start: Vec3, spec: &FingerSpec) {
    let base = vertices.len() as u32;
    let (e1, e2) = spec.dir.any_orthonormal();
    let tip = start + spec.dir * spec.length;
    vertices.push(start);
    for i in 0..FINGER_RINGS {
        let f = i as f64 / (FINGER_RINGS - 1) as f64;
        // Slight taper toward the tip, rounded ends.
        let r = spec.radius * (1.0 - 0.22 * f);
        let h = 0.3 * spec.radius + f * (spec.length - 0.3 * spec.radius - 0.3 * r);
        let center = start + spec.dir * h;
        for s in 0..FINGER_SEGMENTS {
            let psi = core::f64::consts::TAU * s as f64 / FINGER_SEGMENTS as f64;
            vertices.push(center + (e1 * libm::cos(psi) + e2 * libm::sin(psi)) * r);
        }
    }
    vertices.push(tip);
    lathe_faces(faces, base, FINGER_RINGS, FINGER_SEGMENTS);
}

/// Faces for a closed surface of `rings` rings of `segments` vertices
/// between two poles, laid out pole / rings / pole from `base`. Winding is
/// counter-clockwise seen from outside.
fn lathe_faces(faces: &mut Vec<[u32; 3]>, base: u32, rings: usize, segments: usize) {
    let segs = segments as u32;
    let ring = |i: u32, s: u32| base + 1 + i * segs + (s % segs);
    let top = base;
    let bottom = base + 1 + rings as u32 * segs;

    for s in 0..segs {
        faces.push([top, ring(0, s + 1), ring(0, s)]);
    }
    for i in 0..rings as u32 - 1 {
        for s in 0..segs {
            let (a, b) = (ring(i, s), ring(i, s + 1));
            let (c, d) = (ring(i + 1, s), ring(i + 1, s + 1));
            faces.push([a, b, c]);
            faces.push([b, d, c]);
        }
    }
    for s in 0..segs {
        faces.push([bottom, ring(rings as u32 - 1, s), ring(rings as u32 - 1, s + 1)]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AabbTree;
    use crate::models::HandPose;

    const PALM_VERTS: usize = 198;
    const PALM_FACES: usize = 392;
    const FINGER_VERTS: usize = 116;
    const FINGER_FACES: usize = 228;

    fn component(mesh: &TriMesh, vert_range: core::ops::Range<usize>, face_range: core::ops::Range<usize>) -> TriMesh {
        let verts = mesh.vertices()[vert_range.clone()].to_vec();
        let faces = mesh.faces()[face_range]
            .iter()
            .map(|f| f.map(|i| i - vert_range.start as u32))
            .collect();
        TriMesh::new(verts, faces).unwrap()
    }

    #[test]
    fn counts_and_closedness() {
        let hand = procedural_hand([0.0; 10]);
        let mesh = hand.rest_mesh();
        assert_eq!(mesh.vertex_count(), 778);
        assert_eq!(mesh.face_count(), 1532);
        assert_eq!(hand.joint_count(), 21);
        assert_eq!(hand.dof_count(), 51);
        assert!(mesh.is_closed());
    }

    #[test]
    fn components_are_closed_outward_and_disjoint() {
        let hand = procedural_hand([0.0; 10]);
        let mesh = hand.rest_mesh();

        let mut comps = vec![component(mesh, 0..PALM_VERTS, 0..PALM_FACES)];
        for f in 0..5 {
            let v0 = PALM_VERTS + f * FINGER_VERTS;
            let f0 = PALM_FACES + f * FINGER_FACES;
            comps.push(component(mesh, v0..v0 + FINGER_VERTS, f0..f0 + FINGER_FACES));
        }

        for comp in &comps {
            assert!(comp.is_closed());
            // Outward winding: each face normal points away from the
            // component centroid (all components are convex enough).
            let mut centroid = Vec3::ZERO;
            for &v in comp.vertices() {
                centroid += v;
            }
            centroid = centroid * (1.0 / comp.vertex_count() as f64);
            for f in 0..comp.face_count() {
                let (a, b, c) = comp.face_vertices(f);
                let mid = (a + b + c) * (1.0 / 3.0);
                assert!(
                    comp.face_normal(f).dot(mid - centroid) > 0.0,
                    "face {f} winds inward"
                );
            }
        }

        // No component's vertices fall inside any other component.
        for (i, a) in comps.iter().enumerate() {
            let tree = AabbTree::build(a).unwrap();
            for (j, b) in comps.iter().enumerate() {
                if i == j {
                    continue;
                }
                for &v in b.vertices() {
                    assert!(!tree.is_inside(a, v).unwrap(), "component {j} pokes into {i}");
                    assert!(tree.closest_point(a, v).distance > 3e-4);
                }
            }
        }
    }

    #[test]
    fn fingertip_joints_sit_on_tip_poles() {
        let hand = procedural_hand([0.0; 10]);
        for f in 0..5 {
            let tip_joint = hand.rest_joints()[4 + 4 * f];
            let tip_pole = hand.rest_mesh().vertices()[PALM_VERTS + f * FINGER_VERTS + FINGER_VERTS - 1];
            assert!((tip_joint - tip_pole).norm() < 1e-12);
        }
    }

    #[test]
    fn bending_index_knuckle_moves_only_that_finger() {
        let hand = procedural_hand([0.0; 10]);
        let mut pose = HandPose::zeros(51);
        // Index knuckle is joint 5; its block starts at 6 + 3*3 = 15.
        pose.theta[15] = 0.8;
        let posed = hand.forward(&pose).unwrap();
        let rest = hand.shaped_mesh().vertices();
        let moved = posed.mesh.vertices();
        let index_range = PALM_VERTS + FINGER_VERTS..PALM_VERTS + 2 * FINGER_VERTS;
        let mut max_outside = 0.0f64;
        let mut max_inside = 0.0f64;
        for v in 0..rest.len() {
            let d = (moved[v] - rest[v]).norm();
            if index_range.contains(&v) {
                max_inside = max_inside.max(d);
            } else {
                max_outside = max_outside.max(d);
            }
        }
        // Blend-band vertices recombine as x·(1−t) + x·t, so allow float
        // dust on the untouched fingers.
        assert!(max_outside < 1e-15);
        assert!(max_inside > 0.01);
    }

    #[test]
    fn nonzero_beta_inflates_the_hand() {
        let mut beta = [0.0; 10];
        beta[0] = 0.002;
        let hand = procedural_hand(beta);
        let rest = procedural_hand([0.0; 10]);
        let mut grew = 0;
        for (s, r) in hand
            .shaped_mesh()
            .vertices()
            .iter()
            .zip(rest.shaped_mesh().vertices())
        {
            if (*s - *r).norm() > 1e-4 {
                grew += 1;
            }
        }
        assert!(grew > 700);
        assert!(hand.shaped_mesh().is_closed());
    }
}
