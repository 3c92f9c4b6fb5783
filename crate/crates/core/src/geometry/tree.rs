//! Bounding-box tree over mesh faces.
//!
//! Faces are partitioned by sorting on the centroid coordinate along the
//! longest axis of the node's box and splitting at the median, so the tree
//! is balanced and its construction is deterministic: the same mesh always
//! yields the same tree. Queries prune subtrees whose box cannot beat the
//! current best candidate and break exact ties toward the lowest face index,
//! which makes results independent of traversal order.

use alloc::vec::Vec;

use super::tri::{closest_point_on_triangle, ray_triangle_intersection};
use super::{GeometryError, Ray, TriMesh};
use crate::math::{Aabb, Vec3};

const LEAF_FACE_LIMIT: usize = 4;

/// Minimum ray parameter accepted by casts, so rays started on a surface do
/// not immediately hit it.
const RAY_T_MIN: f64 = 1e-9;

/// Barycentric slack under which a ray hit counts as grazing an edge or
/// vertex, making crossing parity unreliable.
const GRAZE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AabbNodeKind {
    Internal { left: u32, right: u32 },
    /// Range into the face order array.
    Leaf { start: u32, end: u32 },
}

#[derive(Debug, Clone, Copy)]
pub struct AabbNode {
    pub aabb: Aabb,
    pub kind: AabbNodeKind,
}

/// Closest point on a mesh to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPointResult {
    /// The surface point.
    pub point: Vec3,
    /// Face the point lies on. Exact distance ties resolve to the lowest
    /// face index.
    pub face: usize,
    /// Barycentric coordinates of `point` in that face's corners.
    pub bary: [f64; 3],
    /// Euclidean distance from the query to `point`.
    pub distance: f64,
}

/// First intersection of a ray with a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub face: usize,
    /// Ray parameter; the hit point is `origin + t * direction`.
    pub t: f64,
    pub bary: [f64; 3],
}

/// A static bounding-box tree over the faces of one mesh.
///
/// The tree stores face indices, not geometry, so it must only be queried
/// with the mesh it was built from. Queries take `&self` and the mesh; both
/// are immutable, so concurrent queries are safe.
#[derive(Debug, Clone)]
pub struct AabbTree {
    nodes: Vec<AabbNode>,
    face_order: Vec<u32>,
    root: u32,
}

impl AabbTree {
    /// Builds the tree. Fails on a mesh with no faces.
    pub fn build(mesh: &TriMesh) -> Result<Self, GeometryError> {
        if mesh.face_count() == 0 {
            return Err(GeometryError::EmptyMesh);
        }
        let n = mesh.face_count();
        let mut boxes = Vec::with_capacity(n);
        let mut centroids = Vec::with_capacity(n);
        for f in 0..n {
            let (a, b, c) = mesh.face_vertices(f);
            boxes.push(Aabb::from_points([a, b, c]));
            centroids.push((a + b + c) * (1.0 / 3.0));
        }
        let mut face_order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_FACE_LIMIT + 2);
        let root = build_node(&mut nodes, &mut face_order, 0, n, &boxes, &centroids);
        Ok(Self {
            nodes,
            face_order,
            root,
        })
    }

    pub fn nodes(&self) -> &[AabbNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root as usize
    }

    /// Face indices in leaf storage order; a permutation of `0..face_count`.
    pub fn face_order(&self) -> &[u32] {
        &self.face_order
    }

    pub fn height(&self) -> usize {
        fn depth(nodes: &[AabbNode], i: u32) -> usize {
            match nodes[i as usize].kind {
                AabbNodeKind::Leaf { .. } => 1,
                AabbNodeKind::Internal { left, right } => {
                    1 + depth(nodes, left).max(depth(nodes, right))
                }
            }
        }
        depth(&self.nodes, self.root)
    }

    /// Closest point on the mesh surface to `query`.
    ///
    /// Branch and bound: subtrees are visited only while their box could
    /// still contain a closer point (or tie the current best, so that exact
    /// ties still resolve to the lowest face index).
    pub fn closest_point(&self, mesh: &TriMesh, query: Vec3) -> ClosestPointResult {
        let mut best = ClosestPointResult {
            point: Vec3::ZERO,
            face: usize::MAX,
            bary: [0.0; 3],
            distance: f64::INFINITY,
        };
        let mut best_d2 = f64::INFINITY;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(self.root);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i as usize];
            if node.aabb.distance_squared(query) > best_d2 {
                continue;
            }
            match node.kind {
                AabbNodeKind::Leaf { start, end } => {
                    for &f in &self.face_order[start as usize..end as usize] {
                        let f = f as usize;
                        let (a, b, c) = mesh.face_vertices(f);
                        let (q, bary) = closest_point_on_triangle(query, a, b, c);
                        let d2 = (query - q).norm_squared();
                        if d2 < best_d2 || (d2 == best_d2 && f < best.face) {
                            best_d2 = d2;
                            best = ClosestPointResult {
                                point: q,
                                face: f,
                                bary,
                                distance: libm::sqrt(d2),
                            };
                        }
                    }
                }
                AabbNodeKind::Internal { left, right } => {
                    let dl = self.nodes[left as usize].aabb.distance_squared(query);
                    let dr = self.nodes[right as usize].aabb.distance_squared(query);
                    // Push the farther child first so the nearer one is
                    // examined first and prunes more.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }

    /// Closest-point results for a batch of queries, in input order.
    pub fn distance_batch(&self, mesh: &TriMesh, queries: &[Vec3]) -> Vec<ClosestPointResult> {
        queries
            .iter()
            .map(|&q| self.closest_point(mesh, q))
            .collect()
    }

    /// Nearest intersection of `ray` with the mesh at `t > 1e-9`.
    ///
    /// Ties at identical `t` resolve to the lowest face index.
    pub fn ray_cast(&self, mesh: &TriMesh, ray: &Ray) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(self.root);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i as usize];
            let t_max = best.map_or(f64::INFINITY, |h| h.t);
            if !node.aabb.intersects_ray(ray.origin, ray.direction, t_max) {
                continue;
            }
            match node.kind {
                AabbNodeKind::Leaf { start, end } => {
                    for &f in &self.face_order[start as usize..end as usize] {
                        let f = f as usize;
                        let (a, b, c) = mesh.face_vertices(f);
                        if let Some((t, u, v)) =
                            ray_triangle_intersection(ray.origin, ray.direction, a, b, c)
                        {
                            if t <= RAY_T_MIN {
                                continue;
                            }
                            let better = match best {
                                None => true,
                                Some(h) => t < h.t || (t == h.t && f < h.face),
                            };
                            if better {
                                best = Some(RayHit {
                                    face: f,
                                    t,
                                    bary: [1.0 - u - v, u, v],
                                });
                            }
                        }
                    }
                }
                AabbNodeKind::Internal { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        best
    }

    /// All intersections with `t > 1e-9`, sorted by `t` then face index.
    pub fn ray_cast_all(&self, mesh: &TriMesh, ray: &Ray) -> Vec<RayHit> {
        let mut hits = Vec::new();
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(self.root);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i as usize];
            if !node
                .aabb
                .intersects_ray(ray.origin, ray.direction, f64::INFINITY)
            {
                continue;
            }
            match node.kind {
                AabbNodeKind::Leaf { start, end } => {
                    for &f in &self.face_order[start as usize..end as usize] {
                        let f = f as usize;
                        let (a, b, c) = mesh.face_vertices(f);
                        if let Some((t, u, v)) =
                            ray_triangle_intersection(ray.origin, ray.direction, a, b, c)
                        {
                            if t > RAY_T_MIN {
                                hits.push(RayHit {
                                    face: f,
                                    t,
                                    bary: [1.0 - u - v, u, v],
                                });
                            }
                        }
                    }
                }
                AabbNodeKind::Internal { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        hits.sort_unstable_by(|x, y| x.t.total_cmp(&y.t).then(x.face.cmp(&y.face)));
        hits
    }

    /// Whether `point` is inside the mesh, by ray-crossing parity.
    ///
    /// Requires a closed mesh. The test direction is perturbed and the cast
    /// repeated whenever a hit grazes an edge or vertex, where parity would
    /// be ambiguous.
    pub fn is_inside(&self, mesh: &TriMesh, point: Vec3) -> Result<bool, GeometryError> {
        if !mesh.is_closed() {
            return Err(GeometryError::NotClosed);
        }
        // Arbitrary irrational-leaning start direction; rotated golden-angle
        // style between attempts so retries never repeat.
        let mut dir = Vec3::new(0.577_350_3, 0.211_324_9, 0.788_675_1).normalized();
        for attempt in 0..32 {
            let ray = Ray::new(point, dir);
            let hits = self.ray_cast_all(mesh, &ray);
            let grazed = hits
                .iter()
                .any(|h| h.bary.iter().any(|&b| b < GRAZE_EPS || b > 1.0 - GRAZE_EPS));
            if !grazed {
                return Ok(hits.len() % 2 == 1);
            }
            let k = attempt as f64 + 1.0;
            dir = Vec3::new(
                libm::sin(2.399_963 * k + 0.3),
                libm::cos(1.732_05 * k + 1.1),
                libm::sin(0.618_034 * k + 2.7) + 0.1,
            )
            .normalized();
        }
        // Every probe direction grazed; fall back to the last parity.
        let hits = self.ray_cast_all(mesh, &Ray::new(point, dir));
        Ok(hits.len() % 2 == 1)
    }
}

fn build_node(
    nodes: &mut Vec<AabbNode>,
    face_order: &mut [u32],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centroids: &[Vec3],
) -> u32 {
    let mut aabb = Aabb::EMPTY;
    for &f in &face_order[start..end] {
        aabb = aabb.union(&boxes[f as usize]);
    }
    if end - start <= LEAF_FACE_LIMIT {
        nodes.push(AabbNode {
            aabb,
            kind: AabbNodeKind::Leaf {
                start: start as u32,
                end: end as u32,
            },
        });
        return (nodes.len() - 1) as u32;
    }
    let axis = aabb.longest_axis();
    face_order[start..end].sort_unstable_by(|&x, &y| {
        centroids[x as usize][axis]
            .total_cmp(&centroids[y as usize][axis])
            .then(x.cmp(&y))
    });
    let mid = start + (end - start) / 2;
    let left = build_node(nodes, face_order, start, mid, boxes, centroids);
    let right = build_node(nodes, face_order, mid, end, boxes, centroids);
    nodes.push(AabbNode {
        aabb,
        kind: AabbNodeKind::Internal { left, right },
    });
    (nodes.len() - 1) as u32
}
