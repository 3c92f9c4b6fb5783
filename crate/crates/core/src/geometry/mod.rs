//! Triangle meshes and accelerated spatial queries.
//!
//! [`TriMesh`] is the geometric substrate for everything else: depth-term
//! distance queries, visibility ray casts, surface anchoring, and collision
//! tests. [`AabbTree`] indexes a mesh's faces so closest-point and ray
//! queries avoid exhaustive face enumeration. Both are immutable once built;
//! any number of threads may query them concurrently.

mod tree;
mod tri;
mod trimesh;

pub use tree::{AabbNode, AabbNodeKind, AabbTree, ClosestPointResult, RayHit};
pub use tri::{closest_point_on_triangle, ray_triangle_intersection};
pub use trimesh::TriMesh;

use crate::math::Vec3;
use core::fmt;

/// A ray with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Self {
            origin,
            direction: direction.normalized(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeometryError {
    /// The mesh has no faces.
    EmptyMesh,
    /// An inside/outside test was requested on a mesh that is not closed
    /// (some edge is not shared by exactly two faces).
    NotClosed,
    /// A face references a vertex index past the end of the vertex list.
    FaceIndexOutOfBounds { face: usize, index: usize },
    /// A face uses the same vertex twice.
    DuplicateVertexIndex { face: usize },
    /// A face has zero area.
    DegenerateFace { face: usize },
    /// A vertex coordinate is NaN or infinite.
    NonFiniteVertex { vertex: usize },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::EmptyMesh => write!(f, "empty mesh"),
            GeometryError::NotClosed => write!(f, "mesh not closed"),
            GeometryError::FaceIndexOutOfBounds { face, index } => {
                write!(f, "face {face} references out-of-bounds vertex {index}")
            }
            GeometryError::DuplicateVertexIndex { face } => {
                write!(f, "face {face} repeats a vertex index")
            }
            GeometryError::DegenerateFace { face } => {
                write!(f, "face {face} has zero area")
            }
            GeometryError::NonFiniteVertex { vertex } => {
                write!(f, "vertex {vertex} has a non-finite coordinate")
            }
        }
    }
}

impl core::error::Error for GeometryError {}
