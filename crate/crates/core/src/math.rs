//! Small fixed-size linear algebra: 3-vectors, 3x3 matrices, unit
//! quaternions, axis-angle rotations, and axis-aligned boxes.
//!
//! Everything is `f64`. Scalar transcendentals go through `libm` so results
//! are identical on every platform and the crate stays `no_std`-clean.

use core::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

/// A 3D vector (also used for points, in meters).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

impl Vec3 {
    pub const ZERO: Vec3 = vec3(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Self { x: v, y: v, z: v }
    }

    /// Unit vector along coordinate axis `i` (0 = x, 1 = y, 2 = z).
    pub fn axis(i: usize) -> Self {
        let mut v = Self::ZERO;
        v[i] = 1.0;
        v
    }

    pub fn dot(self, rhs: Self) -> f64 {
        self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    pub fn cross(self, rhs: Self) -> Self {
        Self {
            x: self.y * rhs.z - self.z * rhs.y,
            y: self.z * rhs.x - self.x * rhs.z,
            z: self.x * rhs.y - self.y * rhs.x,
        }
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    pub fn distance(self, rhs: Self) -> f64 {
        (self - rhs).norm()
    }

    pub fn distance_squared(self, rhs: Self) -> f64 {
        (self - rhs).norm_squared()
    }

    /// Returns `self / |self|`; the zero vector is returned unchanged.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            self
        }
    }

    pub fn min(self, rhs: Self) -> Self {
        Self {
            x: self.x.min(rhs.x),
            y: self.y.min(rhs.y),
            z: self.z.min(rhs.z),
        }
    }

    pub fn max(self, rhs: Self) -> Self {
        Self {
            x: self.x.max(rhs.x),
            y: self.y.max(rhs.y),
            z: self.z.max(rhs.z),
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        vec3(a[0], a[1], a[2])
    }

    /// Any unit vector orthogonal to `self` (which must be non-zero).
    /// An orthonormal pair completing `self` (assumed unit) to a
    /// right-handed frame: `e1 × e2 = self`.
    pub fn any_orthonormal(self) -> (Self, Self) {
        let pick = if self.x.abs() < 0.9 {
            Vec3::axis(0)
        } else {
            Vec3::axis(1)
        };
        let e1 = self.cross(pick).normalized();
        let e2 = self.cross(e1);
        (e1, e2)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index out of range: {i}"),
        }
    }
}

impl core::ops::IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index out of range: {i}"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        vec3(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        vec3(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, rhs: Vec3) {
        *self = *self - rhs;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        vec3(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        vec3(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        vec3(self.x / s, self.y / s, self.z / s)
    }
}

/// A row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub rows: [[f64; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub const ZERO: Mat3 = Mat3 { rows: [[0.0; 3]; 3] };

    pub const fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self { rows }
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self {
            rows: [
                [c0.x, c1.x, c2.x],
                [c0.y, c1.y, c2.y],
                [c0.z, c1.z, c2.z],
            ],
        }
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.rows[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        vec3(self.rows[0][j], self.rows[1][j], self.rows[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3::from_cols(self.row(0), self.row(1), self.row(2))
    }

    pub fn determinant(&self) -> f64 {
        self.row(0).dot(self.row(1).cross(self.row(2)))
    }

    pub fn trace(&self) -> f64 {
        self.rows[0][0] + self.rows[1][1] + self.rows[2][2]
    }

    /// Cross-product (skew-symmetric) matrix: `skew(v) * u == v.cross(u)`.
    pub fn skew(v: Vec3) -> Mat3 {
        Mat3::from_rows([
            [0.0, -v.z, v.y],
            [v.z, 0.0, -v.x],
            [-v.y, v.x, 0.0],
        ])
    }

    /// Outer product `a * b^T`.
    pub fn outer(a: Vec3, b: Vec3) -> Mat3 {
        Mat3::from_rows([
            [a.x * b.x, a.x * b.y, a.x * b.z],
            [a.y * b.x, a.y * b.y, a.y * b.z],
            [a.z * b.x, a.z * b.y, a.z * b.z],
        ])
    }

    /// Checks orthonormality with determinant +1 within `tol`.
    pub fn is_rotation(&self, tol: f64) -> bool {
        let rtr = self.transpose() * *self;
        let mut max_dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                max_dev = max_dev.max((rtr.rows[i][j] - want).abs());
            }
        }
        max_dev <= tol && (self.determinant() - 1.0).abs() <= tol
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        vec3(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }
}

impl Mul<Mat3> for Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.row(i).dot(rhs.col(j));
            }
        }
        Mat3::from_rows(out)
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        let mut out = self.rows;
        for row in &mut out {
            for cell in row {
                *cell *= s;
            }
        }
        Mat3::from_rows(out)
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, rhs: Mat3) -> Mat3 {
        let mut out = self.rows;
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell += rhs.rows[i][j];
            }
        }
        Mat3::from_rows(out)
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        self + rhs * -1.0
    }
}

/// Rodrigues' formula: the rotation matrix for an axis-angle vector.
///
/// Uses a second-order Taylor expansion of the trigonometric coefficients
/// below `angle^2 = 1e-14` so the result stays smooth through zero.
pub fn rotation(axis_angle: Vec3) -> Mat3 {
    let theta2 = axis_angle.norm_squared();
    let k = Mat3::skew(axis_angle);
    let (a, b) = if theta2 < 1e-14 {
        // sin(t)/t and (1-cos(t))/t^2
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = libm::sqrt(theta2);
        (libm::sin(theta) / theta, (1.0 - libm::cos(theta)) / theta2)
    };
    Mat3::IDENTITY + k * a + (k * k) * b
}

/// Partial derivatives of `rotation(w)` with respect to each component of
/// `w`: `out[i] = dR/dw_i`.
///
/// Closed form from the rotation's exponential parameterization,
///   dR/dw_i = ((w_i [w]x + [w x ((I - R) e_i)]x) / |w|^2) R,
/// with the `[e_i]x` limit at the origin.
pub fn rotation_derivatives(axis_angle: Vec3) -> [Mat3; 3] {
    let theta2 = axis_angle.norm_squared();
    if theta2 < 1e-14 {
        return [
            Mat3::skew(Vec3::axis(0)),
            Mat3::skew(Vec3::axis(1)),
            Mat3::skew(Vec3::axis(2)),
        ];
    }
    let r = rotation(axis_angle);
    let mut out = [Mat3::ZERO; 3];
    for (i, slot) in out.iter_mut().enumerate() {
        let e = Vec3::axis(i);
        let v = axis_angle.cross(e - r * e);
        *slot = (Mat3::skew(axis_angle) * axis_angle[i] + Mat3::skew(v)) * (1.0 / theta2) * r;
    }
    out
}

/// Wraps an axis-angle vector so its magnitude lies in `[0, pi]`.
pub fn canonicalize_axis_angle(axis_angle: Vec3) -> Vec3 {
    let mut w = axis_angle;
    let mut theta = w.norm();
    if theta <= core::f64::consts::PI {
        return w;
    }
    // Reduce modulo 2*pi, then flip to the short side if needed.
    let two_pi = 2.0 * core::f64::consts::PI;
    let wrapped = theta - libm::floor(theta / two_pi) * two_pi;
    w = w * (wrapped / theta);
    theta = wrapped;
    if theta > core::f64::consts::PI {
        w = w * ((theta - two_pi) / theta);
    }
    w
}

/// A quaternion `w + xi + yj + zk`; unit length when it encodes a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn dot(self, rhs: Self) -> f64 {
        self.w * rhs.w + self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    /// Hamilton product.
    pub fn mul(self, r: Self) -> Self {
        Self::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }

    /// The unit quaternion rotating by ‖v‖ radians about v.
    pub fn from_axis_angle(v: Vec3) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            // sin(θ/2)/θ → 1/2 as θ → 0.
            return Quat::new(1.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z).normalized();
        }
        let half = 0.5 * angle;
        let s = libm::sin(half) / angle;
        Quat::new(libm::cos(half), s * v.x, s * v.y, s * v.z)
    }

    /// Shepperd's method; branch choice keeps the extraction well-conditioned.
    pub fn from_rotation_matrix(m: &Mat3) -> Self {
        let r = &m.rows;
        let trace = m.trace();
        let q = if trace > 0.0 {
            let s = libm::sqrt(trace + 1.0) * 2.0;
            Quat::new(
                0.25 * s,
                (r[2][1] - r[1][2]) / s,
                (r[0][2] - r[2][0]) / s,
                (r[1][0] - r[0][1]) / s,
            )
        } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
            let s = libm::sqrt(1.0 + r[0][0] - r[1][1] - r[2][2]) * 2.0;
            Quat::new(
                (r[2][1] - r[1][2]) / s,
                0.25 * s,
                (r[0][1] + r[1][0]) / s,
                (r[0][2] + r[2][0]) / s,
            )
        } else if r[1][1] > r[2][2] {
            let s = libm::sqrt(1.0 + r[1][1] - r[0][0] - r[2][2]) * 2.0;
            Quat::new(
                (r[0][2] - r[2][0]) / s,
                (r[0][1] + r[1][0]) / s,
                0.25 * s,
                (r[1][2] + r[2][1]) / s,
            )
        } else {
            let s = libm::sqrt(1.0 + r[2][2] - r[0][0] - r[1][1]) * 2.0;
            Quat::new(
                (r[1][0] - r[0][1]) / s,
                (r[0][2] + r[2][0]) / s,
                (r[1][2] + r[2][1]) / s,
                0.25 * s,
            )
        };
        q.normalized()
    }

    pub fn to_rotation_matrix(self) -> Mat3 {
        let Quat { w, x, y, z } = self;
        Mat3::from_rows([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// The angle in radians between two unit quaternions, double cover absorbed.
pub fn quat_angle(a: Quat, b: Quat) -> f64 {
    libm::acos(a.dot(b).abs().clamp(-1.0, 1.0))
}

/// An axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// An empty box that unions correctly with anything.
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::splat(f64::INFINITY),
        max: Vec3::splat(f64::NEG_INFINITY),
    };

    pub fn from_points<I: IntoIterator<Item = Vec3>>(points: I) -> Self {
        let mut b = Self::EMPTY;
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(&self, rhs: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(rhs.min),
            max: self.max.max(rhs.max),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn longest_axis(&self) -> usize {
        let d = self.max - self.min;
        if d.x >= d.y && d.x >= d.z {
            0
        } else if d.y >= d.z {
            1
        } else {
            2
        }
    }

    /// Squared distance from `p` to the box (0 when inside).
    pub fn distance_squared(&self, p: Vec3) -> f64 {
        let c = vec3(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        );
        (p - c).norm_squared()
    }

    /// Slab test: does the ray `origin + t*dir` hit the box for some
    /// `t` in `[0, t_max]`?
    pub fn intersects_ray(&self, origin: Vec3, dir: Vec3, t_max: f64) -> bool {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for i in 0..3 {
            let inv = 1.0 / dir[i];
            let mut near = (self.min[i] - origin[i]) * inv;
            let mut far = (self.max[i] - origin[i]) * inv;
            if near > far {
                core::mem::swap(&mut near, &mut far);
            }
            // NaN from 0/0 (ray parallel, origin on the slab boundary)
            // must not shrink the interval.
            if near.is_nan() || far.is_nan() {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return false;
                }
                continue;
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}
