//! Per-triangle geometric primitives.

use crate::math::Vec3;

/// Closest point on triangle `(a, b, c)` to `p`, with its barycentric
/// coordinates `(u, v, w)` such that the returned point is
/// `u*a + v*b + w*c` and `u + v + w = 1`.
///
/// Uses the Voronoi-region walk: classify `p` against the vertex, edge, and
/// face regions of the triangle and project accordingly. The triangle must
/// be non-degenerate.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;

    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, [1.0, 0.0, 0.0]);
    }

    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, [0.0, 1.0, 0.0]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }

    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, [0.0, 0.0, 1.0]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Ray/triangle intersection.
///
/// Returns `(t, u, v)` where the hit point is `origin + t*direction` and
/// equals `(1-u-v)*a + u*b + v*c`. Negative `t` values are reported; callers
/// filter. Returns `None` when the ray is parallel to the triangle plane or
/// the intersection falls outside the triangle.
pub fn ray_triangle_intersection(
    origin: Vec3,
    direction: Vec3,
    a: Vec3,
    b: Vec3,
    c: Vec3,
) -> Option<(f64, f64, f64)> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = direction.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = direction.dot(qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    Some((t, u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;

    const A: Vec3 = vec3(0.0, 0.0, 0.0);
    const B: Vec3 = vec3(1.0, 0.0, 0.0);
    const C: Vec3 = vec3(0.0, 1.0, 0.0);

    #[test]
    fn interior_projection() {
        let (q, bary) = closest_point_on_triangle(vec3(0.25, 0.25, 3.0), A, B, C);
        assert_eq!(q, vec3(0.25, 0.25, 0.0));
        assert!((bary[0] - 0.5).abs() < 1e-15);
        assert!((bary[1] - 0.25).abs() < 1e-15);
        assert!((bary[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn vertex_and_edge_regions() {
        let (q, bary) = closest_point_on_triangle(vec3(-1.0, -1.0, 0.0), A, B, C);
        assert_eq!(q, A);
        assert_eq!(bary, [1.0, 0.0, 0.0]);

        let (q, bary) = closest_point_on_triangle(vec3(0.5, -2.0, 0.0), A, B, C);
        assert_eq!(q, vec3(0.5, 0.0, 0.0));
        assert!((bary[0] - 0.5).abs() < 1e-15 && (bary[1] - 0.5).abs() < 1e-15);
        assert_eq!(bary[2], 0.0);

        // Hypotenuse edge region.
        let (q, _) = closest_point_on_triangle(vec3(1.0, 1.0, 0.0), A, B, C);
        assert!((q - vec3(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn barycentrics_reconstruct_point() {
        // Random-ish queries: the returned point must match its own
        // barycentric expansion.
        let a = vec3(0.3, -0.2, 0.7);
        let b = vec3(1.4, 0.5, -0.3);
        let c = vec3(-0.6, 1.1, 0.2);
        for k in 0..64 {
            let s = k as f64 * 0.37;
            let p = vec3(libm::sin(s) * 2.0, libm::cos(1.7 * s) * 2.0, s * 0.1 - 1.0);
            let (q, [u, v, w]) = closest_point_on_triangle(p, a, b, c);
            let rebuilt = a * u + b * v + c * w;
            assert!((q - rebuilt).norm() < 1e-12);
            assert!((u + v + w - 1.0).abs() < 1e-12);
            assert!(u >= -1e-12 && v >= -1e-12 && w >= -1e-12);
        }
    }

    #[test]
    fn ray_hits_and_misses() {
        let (t, u, v) =
            ray_triangle_intersection(vec3(0.25, 0.25, 5.0), vec3(0.0, 0.0, -1.0), A, B, C)
                .unwrap();
        assert!((t - 5.0).abs() < 1e-12);
        assert!((u - 0.25).abs() < 1e-12 && (v - 0.25).abs() < 1e-12);

        // Behind the origin: reported with negative t.
        let (t, _, _) =
            ray_triangle_intersection(vec3(0.25, 0.25, -2.0), vec3(0.0, 0.0, -1.0), A, B, C)
                .unwrap();
        assert!((t + 2.0).abs() < 1e-12);

        assert!(
            ray_triangle_intersection(vec3(2.0, 2.0, 5.0), vec3(0.0, 0.0, -1.0), A, B, C)
                .is_none()
        );
        // Parallel to the plane.
        assert!(
            ray_triangle_intersection(vec3(0.2, 0.2, 1.0), vec3(1.0, 0.0, 0.0), A, B, C).is_none()
        );
    }
}
