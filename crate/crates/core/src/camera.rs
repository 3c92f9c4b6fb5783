//! Pinhole multi-camera model.
//!
//! World points project through per-view extrinsics (world to camera) and
//! intrinsics to continuous pixel coordinates `(x, y)` = (column, row).
//! Depth maps back-project to world points and merge into a single cloud;
//! image-space keypoints anchor to mesh surfaces by ray casting. All types
//! here are immutable values, safe to share across threads.

use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{AabbTree, Ray, TriMesh};
use crate::math::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CameraError {
    /// Camera-frame z at or below the near cutoff (1e-6 m).
    BehindCamera,
    /// Back-projection requested with depth ≤ 0.
    NonPositiveDepth,
    /// fx or fy not strictly positive.
    BadFocalLength,
    /// Extrinsic rotation not orthonormal with determinant +1 (within 1e-9).
    BadRotation,
    /// View list and depth list disagree in length or resolution.
    ResolutionMismatch,
    /// A keypoint ray missed the mesh it should anchor to.
    KeypointOffObject,
}

impl fmt::Display for CameraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CameraError::BehindCamera => write!(f, "behind camera"),
            CameraError::NonPositiveDepth => write!(f, "depth must be positive"),
            CameraError::BadFocalLength => write!(f, "focal length must be positive"),
            CameraError::BadRotation => write!(f, "extrinsic rotation is not a rotation matrix"),
            CameraError::ResolutionMismatch => {
                write!(f, "depth maps do not match the camera views")
            }
            CameraError::KeypointOffObject => write!(f, "keypoint off object"),
        }
    }
}

impl core::error::Error for CameraError {}

/// One calibrated view: intrinsics plus world-to-camera extrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// World-to-camera rotation.
    pub rotation: Mat3,
    /// World-to-camera translation, meters.
    pub translation: Vec3,
}

impl CameraView {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: Mat3,
        translation: Vec3,
    ) -> Result<Self, CameraError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CameraError::BadFocalLength);
        }
        if !rotation.is_rotation(1e-9) {
            return Err(CameraError::BadRotation);
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// World point expressed in this camera's frame.
    pub fn to_camera(&self, x_world: Vec3) -> Vec3 {
        self.rotation * x_world + self.translation
    }

    /// Camera position in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// Projects a world point to pixel coordinates `(x, y)`.
    ///
    /// The result may fall outside the image bounds; callers decide whether
    /// that matters. Points at or behind the camera plane are an error.
    pub fn project(&self, x_world: Vec3) -> Result<[f64; 2], CameraError> {
        let p = self.to_camera(x_world);
        if p.z <= 1e-6 {
            return Err(CameraError::BehindCamera);
        }
        Ok([
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ])
    }

    /// Projection and its derivative with respect to the world point.
    ///
    /// Row `i` of the returned pair's second element is the gradient of
    /// pixel coordinate `i`.
    pub fn project_with_jacobian(
        &self,
        x_world: Vec3,
    ) -> Result<([f64; 2], [Vec3; 2]), CameraError> {
        let p = self.to_camera(x_world);
        if p.z <= 1e-6 {
            return Err(CameraError::BehindCamera);
        }
        let pixel = [
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ];
        let inv_z = 1.0 / p.z;
        // d pixel / d p_cam, then chain through p_cam = R x + t.
        let du_dp = Vec3::new(self.fx * inv_z, 0.0, -self.fx * p.x * inv_z * inv_z);
        let dv_dp = Vec3::new(0.0, self.fy * inv_z, -self.fy * p.y * inv_z * inv_z);
        let rt = self.rotation.transpose();
        Ok((pixel, [rt * du_dp, rt * dv_dp]))
    }

    /// World point seen at `pixel` with camera-frame depth `depth`.
    pub fn backproject(&self, pixel: [f64; 2], depth: f64) -> Result<Vec3, CameraError> {
        if depth <= 0.0 {
            return Err(CameraError::NonPositiveDepth);
        }
        let p_cam = Vec3::new(
            (pixel[0] - self.cx) / self.fx * depth,
            (pixel[1] - self.cy) / self.fy * depth,
            depth,
        );
        Ok(self.rotation.transpose() * (p_cam - self.translation))
    }

    /// World-space ray from the camera center through `pixel`.
    pub fn pixel_ray(&self, pixel: [f64; 2]) -> Ray {
        let dir_cam = Vec3::new(
            (pixel[0] - self.cx) / self.fx,
            (pixel[1] - self.cy) / self.fy,
            1.0,
        );
        Ray::new(self.center(), self.rotation.transpose() * dir_cam)
    }
}

/// Per-pixel depth in meters, row-major. `0.0` marks a missing return.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

pub const INVALID_DEPTH: f64 = 0.0;

impl DepthMap {
    /// An all-invalid map.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: alloc::vec![INVALID_DEPTH; width as usize * height as usize],
        }
    }

    /// Wraps existing row-major data; `0.0` entries are invalid pixels.
    pub fn from_data(width: u32, height: u32, data: Vec<f64>) -> Option<Self> {
        (data.len() == width as usize * height as usize).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: u32, col: u32) -> f64 {
        self.data[row as usize * self.width as usize + col as usize]
    }

    pub fn set(&mut self, row: u32, col: u32, depth: f64) {
        self.data[row as usize * self.width as usize + col as usize] = depth;
    }

    pub fn is_valid(&self, row: u32, col: u32) -> bool {
        self.get(row, col) > 0.0
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0).count()
    }
}

/// Unordered set of world points, meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A point pinned to a model's rest mesh as face plus barycentric
/// coordinates. Established once, then reused for every frame and view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceAnchor {
    pub face: usize,
    pub bary: [f64; 3],
}

impl SurfaceAnchor {
    /// The anchored position on a mesh (rest or posed, as long as face
    /// indices match the mesh the anchor was created on).
    pub fn position_on(&self, mesh: &TriMesh) -> Vec3 {
        let (a, b, c) = mesh.face_vertices(self.face);
        a * self.bary[0] + b * self.bary[1] + c * self.bary[2]
    }
}

/// Back-projects every valid pixel of every view into one world cloud.
///
/// Pixels are taken at their centers (`col + 0.5`, `row + 0.5`). Output
/// order is view-major, then row-major within a view, so the cloud is
/// reproducible.
pub fn merge_point_clouds(
    views: &[CameraView],
    depths: &[DepthMap],
) -> Result<PointCloud, CameraError> {
    if views.len() != depths.len() {
        return Err(CameraError::ResolutionMismatch);
    }
    let mut points = Vec::new();
    for (view, depth) in views.iter().zip(depths) {
        if depth.width() != view.width || depth.height() != view.height {
            return Err(CameraError::ResolutionMismatch);
        }
        for row in 0..depth.height() {
            for col in 0..depth.width() {
                let d = depth.get(row, col);
                if d > 0.0 {
                    let pixel = [col as f64 + 0.5, row as f64 + 0.5];
                    // Depth is positive here, so backproject cannot fail.
                    points.push(view.backproject(pixel, d).unwrap());
                }
            }
        }
    }
    Ok(PointCloud { points })
}

/// Anchors an image-space keypoint to the surface it lands on.
///
/// Casts the camera ray through `pixel` at the mesh (already posed for the
/// anchoring frame) and records the nearest hit in face/barycentric form.
pub fn anchor_keypoint(
    view: &CameraView,
    pixel: [f64; 2],
    mesh: &TriMesh,
    tree: &AabbTree,
) -> Result<SurfaceAnchor, CameraError> {
    let ray = view.pixel_ray(pixel);
    let hit = tree
        .ray_cast(mesh, &ray)
        .ok_or(CameraError::KeypointOffObject)?;
    Ok(SurfaceAnchor {
        face: hit.face,
        bary: hit.bary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{rotation, vec3};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_view() -> CameraView {
        CameraView::new(100.0, 100.0, 50.0, 50.0, 100, 100, Mat3::IDENTITY, Vec3::ZERO).unwrap()
    }

    fn random_view(rng: &mut ChaCha8Rng) -> CameraView {
        let axis = vec3(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalized();
        let angle: f64 = rng.random_range(0.0..3.0);
        CameraView::new(
            rng.random_range(200.0..800.0),
            rng.random_range(200.0..800.0),
            rng.random_range(100.0..500.0),
            rng.random_range(100.0..400.0),
            640,
            480,
            rotation(axis * angle),
            vec3(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            ),
        )
        .unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let v = identity_view();
        assert_eq!(v.project(vec3(0.0, 0.0, 2.0)).unwrap(), [50.0, 50.0]);
    }

    #[test]
    fn pinhole_arithmetic() {
        let v = identity_view();
        let px = v.project(vec3(0.2, 0.0, 2.0)).unwrap();
        assert!((px[0] - 60.0).abs() < 1e-12);
        assert!((px[1] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let v = identity_view();
        assert_eq!(
            v.project(vec3(0.1, 0.2, 0.0)),
            Err(CameraError::BehindCamera)
        );
        assert_eq!(
            v.project(vec3(0.0, 0.0, -1.0)),
            Err(CameraError::BehindCamera)
        );
    }

    #[test]
    fn backproject_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let v = random_view(&mut rng);
            // Point in front of this camera: walk out along a pixel ray.
            let pixel = [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)];
            let depth = rng.random_range(0.3..4.0);
            let x = v.backproject(pixel, depth).unwrap();
            let px = v.project(x).unwrap();
            assert!((px[0] - pixel[0]).abs() < 1e-6 && (px[1] - pixel[1]).abs() < 1e-6);
            let x2 = v.backproject(px, v.to_camera(x).z).unwrap();
            assert!((x - x2).norm() < 1e-9);
        }
    }

    #[test]
    fn backproject_axis_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_view(&mut rng);
        let x = v.backproject([v.cx, v.cy], 2.0).unwrap();
        assert!((v.to_camera(x) - vec3(0.0, 0.0, 2.0)).norm() < 1e-12);
        assert_eq!(v.backproject([1.0, 1.0], 0.0), Err(CameraError::NonPositiveDepth));
    }

    #[test]
    fn projection_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let v = random_view(&mut rng);
            let x = v.backproject(
                [rng.random_range(100.0..500.0), rng.random_range(100.0..400.0)],
                rng.random_range(0.5..3.0),
            )
            .unwrap();
            let (_, jac) = v.project_with_jacobian(x).unwrap();
            let h = 1e-6;
            for axis in 0..3 {
                let mut dx = Vec3::ZERO;
                dx[axis] = h;
                let plus = v.project(x + dx).unwrap();
                let minus = v.project(x - dx).unwrap();
                for row in 0..2 {
                    let fd = (plus[row] - minus[row]) / (2.0 * h);
                    assert!(
                        (jac[row][axis] - fd).abs() <= 1e-4 * fd.abs().max(1.0),
                        "row {row} axis {axis}: analytic {} vs fd {fd}",
                        jac[row][axis]
                    );
                }
            }
        }
    }

    #[test]
    fn merge_respects_validity_and_order() {
        let views = vec![identity_view(), identity_view()];
        let empty = DepthMap::new(100, 100);
        assert!(merge_point_clouds(&views, &[empty.clone(), empty.clone()])
            .unwrap()
            .is_empty());

        let mut one = DepthMap::new(100, 100);
        one.set(50, 50, 2.0);
        let cloud = merge_point_clouds(&views[..1], &[one.clone()]).unwrap();
        assert_eq!(cloud.len(), 1);
        let expected = views[0].backproject([50.5, 50.5], 2.0).unwrap();
        assert!((cloud.points[0] - expected).norm() < 1e-15);

        assert_eq!(
            merge_point_clouds(&views, &[one]),
            Err(CameraError::ResolutionMismatch)
        );
    }

    #[test]
    fn anchor_round_trip_on_tetrahedron() {
        let mesh = TriMesh::new(
            vec![
                vec3(-0.1, -0.1, 2.0),
                vec3(0.1, -0.1, 2.0),
                vec3(0.0, 0.1, 2.0),
                vec3(0.0, 0.0, 2.3),
            ],
            vec![[0, 1, 2], [0, 3, 1], [1, 3, 2], [0, 2, 3]],
        )
        .unwrap();
        let tree = AabbTree::build(&mesh).unwrap();
        let v = identity_view();

        // Aim at vertex 0: the anchor's dominant barycentric corner must be
        // that vertex on some incident face.
        let px = v.project(vec3(-0.1, -0.1, 2.0)).unwrap();
        let anchor = anchor_keypoint(&v, px, &mesh, &tree).unwrap();
        let pos = anchor.position_on(&mesh);
        assert!((pos - vec3(-0.1, -0.1, 2.0)).norm() < 1e-9);

        // Interior pixel anchors to the front face and reprojects to itself.
        let center_px = v.project(vec3(0.0, 0.0, 2.0)).unwrap();
        let anchor = anchor_keypoint(&v, center_px, &mesh, &tree).unwrap();
        let reproj = v.project(anchor.position_on(&mesh)).unwrap();
        assert!((reproj[0] - center_px[0]).abs() < 1e-9);
        assert!((reproj[1] - center_px[1]).abs() < 1e-9);

        assert_eq!(
            anchor_keypoint(&v, [5.0, 5.0], &mesh, &tree),
            Err(CameraError::KeypointOffObject)
        );
    }
}
