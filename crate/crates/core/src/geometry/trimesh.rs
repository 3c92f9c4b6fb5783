//! Indexed triangle mesh with construction-time validation.

use alloc::vec::Vec;

use super::GeometryError;
use crate::math::{Aabb, Vec3};

/// An indexed triangle mesh.
///
/// Validated at construction: every face index is in bounds, no face repeats
/// a vertex, and no face has zero area. Whether the mesh is closed (every
/// undirected edge shared by exactly two faces) is recorded once here so
/// inside/outside tests can check it cheaply.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    closed: bool,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(GeometryError::NonFiniteVertex { vertex: i });
            }
        }
        for (f, idx) in faces.iter().enumerate() {
            for &i in idx {
                if i as usize >= vertices.len() {
                    return Err(GeometryError::FaceIndexOutOfBounds {
                        face: f,
                        index: i as usize,
                    });
                }
            }
            if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
                return Err(GeometryError::DuplicateVertexIndex { face: f });
            }
            let (a, b, c) = (
                vertices[idx[0] as usize],
                vertices[idx[1] as usize],
                vertices[idx[2] as usize],
            );
            if (b - a).cross(c - a).norm_squared() == 0.0 {
                return Err(GeometryError::DegenerateFace { face: f });
            }
        }
        let closed = edges_all_shared_twice(&faces);
        Ok(Self {
            vertices,
            faces,
            closed,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// The three corner positions of face `f`.
    pub fn face_vertices(&self, f: usize) -> (Vec3, Vec3, Vec3) {
        let [i, j, k] = self.faces[f];
        (
            self.vertices[i as usize],
            self.vertices[j as usize],
            self.vertices[k as usize],
        )
    }

    /// Outward face normal under counter-clockwise winding, unit length.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let (a, b, c) = self.face_vertices(f);
        (b - a).cross(c - a).normalized()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let (a, b, c) = self.face_vertices(f);
        0.5 * (b - a).cross(c - a).norm()
    }

    /// Whether every undirected edge is shared by exactly two faces.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Returns a copy with every vertex mapped through `f`. Faces and
    /// validation state carry over; the map must not collapse any face.
    pub fn map_vertices(&self, f: impl FnMut(Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().copied().map(f).collect(),
            faces: self.faces.clone(),
            closed: self.closed,
        }
    }

    /// Same topology with replaced vertex positions, skipping geometric
    /// revalidation. Intended for posing, where the deformation is smooth
    /// and cannot collapse faces.
    ///
    /// Panics if the vertex count changes.
    pub fn with_vertex_positions(&self, vertices: Vec<Vec3>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len());
        Self {
            vertices,
            faces: self.faces.clone(),
            closed: self.closed,
        }
    }
}

fn edges_all_shared_twice(faces: &[[u32; 3]]) -> bool {
    if faces.is_empty() {
        return false;
    }
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(faces.len() * 3);
    for idx in faces {
        for (i, j) in [(idx[0], idx[1]), (idx[1], idx[2]), (idx[2], idx[0])] {
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    let mut pos = 0;
    while pos < edges.len() {
        let mut run = 1;
        while pos + run < edges.len() && edges[pos + run] == edges[pos] {
            run += 1;
        }
        if run != 2 {
            return false;
        }
        pos += 2;
    }
    true
}
