//! Rigid transforms, axis-angle rotations, pinhole projection and
//! bounding-box extraction.
//!
//! Rotations are stored as a canonical axis-angle 3-vector (direction =
//! axis, norm = angle in radians, norm ≤ π). Translations are meters in
//! the camera frame. Degrees and centimeters appear only at I/O
//! boundaries.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum camera-frame depth for a projectable point, in meters.
pub const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("need at least {required} vertices, got {got}")]
    TooFewVertices { required: usize, got: usize },
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertices} vertices")]
    TriangleIndexOutOfRange {
        triangle: usize,
        index: usize,
        vertices: usize,
    },
    #[error("non-finite coordinate in mesh data")]
    NonFiniteVertex,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// A rigid transform from object frame to camera frame.
///
/// `e` is the axis-angle rotation vector (canonical branch, ‖e‖ ≤ π),
/// `t` the translation in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub e: Vector3<f64>,
    pub t: Vector3<f64>,
}

impl Pose {
    /// Builds a pose, wrapping the rotation vector onto the canonical
    /// branch ‖e‖ ≤ π.
    pub fn new(e: Vector3<f64>, t: Vector3<f64>) -> Self {
        Self {
            e: canonicalize_expmap(e),
            t,
        }
    }

    pub fn identity() -> Self {
        Self {
            e: Vector3::zeros(),
            t: Vector3::zeros(),
        }
    }

    /// Builds a pose from a rotation matrix and translation.
    pub fn from_matrix(rotation: &Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self {
            e: log_rotation(rotation),
            t,
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rot_from_expmap(self.e)
    }

    /// Maps an object-frame point into the camera frame.
    pub fn transform_point(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.t
    }

    /// Composes `self` with an extra object-frame rotation of `angle`
    /// radians about `axis`: R ← R·Rot_axis(angle), t unchanged.
    ///
    /// Right-multiplication adds `angle` to the pose's rotation angle
    /// about that object axis.
    pub fn rotated_about_axis(&self, axis: Vector3<f64>, angle: f64) -> Pose {
        let extra = rot_from_expmap(axis.normalize() * angle);
        Pose::from_matrix(&(self.rotation() * extra), self.t)
    }
}

/// Zero-skew pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidIntrinsics(msg));
        if !(self.fx.is_finite() && self.fy.is_finite() && self.cx.is_finite() && self.cy.is_finite())
        {
            return bad("non-finite parameter".into());
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return bad(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy));
        }
        if self.cx < 0.0 || self.cx >= self.width as f64 {
            return bad(format!("cx={} outside [0, {})", self.cx, self.width));
        }
        if self.cy < 0.0 || self.cy >= self.height as f64 {
            return bad(format!("cy={} outside [0, {})", self.cy, self.height));
        }
        Ok(())
    }
}

/// Triangle mesh in the object coordinate frame (meters).
///
/// The vertex list doubles as the vertex set used by the pose-accuracy
/// metrics, so a bare point cloud (empty triangle list) is a valid model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshModel {
    pub name: String,
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl MeshModel {
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, GeometryError> {
        if vertices.is_empty() {
            return Err(GeometryError::TooFewVertices {
                required: 1,
                got: 0,
            });
        }
        if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite())) {
            return Err(GeometryError::NonFiniteVertex);
        }
        for (ti, tri) in triangles.iter().enumerate() {
            for &idx in tri {
                if idx >= vertices.len() {
                    return Err(GeometryError::TriangleIndexOutOfRange {
                        triangle: ti,
                        index: idx,
                        vertices: vertices.len(),
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            vertices,
            triangles,
        })
    }
}

/// The eight corners of an object's axis-aligned 3D bounding box.
///
/// Corner `i` selects per axis: x = max if bit 0 of `i` is set else min,
/// y by bit 1, z by bit 2. The ordering is canonical and stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCorners3D {
    pub corners: [Vector3<f64>; 8],
}

/// The eight predicted 2D corner projections, ordered like
/// [`BoxCorners3D`] index-for-index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerProjection {
    pub points: [Vector2<f64>; 8],
}

impl CornerProjection {
    /// Root-mean-square point distance to another corner set.
    pub fn rms_distance(&self, other: &CornerProjection) -> f64 {
        let sum: f64 = self
            .points
            .iter()
            .zip(other.points.iter())
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        (sum / 8.0).sqrt()
    }
}

/// Rodrigues construction: rotation matrix from an axis-angle vector.
///
/// The zero vector maps to the identity; angles below 1e-8 use the
/// second-order series of sin θ/θ and (1 − cos θ)/θ².
pub fn rot_from_expmap(e: Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = e.norm_squared();
    let theta = theta_sq.sqrt();
    let k = skew(e);
    let (a, b) = if theta < 1e-8 {
        // sinθ/θ ≈ 1 − θ²/6, (1−cosθ)/θ² ≈ 1/2 − θ²/24
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Inverse of [`rot_from_expmap`] on the canonical branch: returns e with
/// ‖e‖ ∈ [0, π] such that `rot_from_expmap(e) == r`.
///
/// The angle comes from atan2 of the skew norm against the trace, which
/// stays well-conditioned at both ends of [0, π]; near π the axis is
/// recovered from the symmetric part, where the skew part vanishes.
pub fn log_rotation(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // vee(R − Rᵀ)/2 = sinθ · axis
    let s = Vector3::new(
        (r[(2, 1)] - r[(1, 2)]) * 0.5,
        (r[(0, 2)] - r[(2, 0)]) * 0.5,
        (r[(1, 0)] - r[(0, 1)]) * 0.5,
    );
    let sin_theta = s.norm();
    let theta = sin_theta.atan2(cos_theta);
    if theta < 1e-7 {
        // θ/sinθ ≈ 1 + θ²/6
        return s * (1.0 + theta * theta / 6.0);
    }
    if cos_theta > -0.99 {
        // sharing the measured sinθ between numerator and denominator
        // keeps the axis direction accurate
        return s * (theta / sin_theta);
    }
    // Near π: (R + Rᵀ)/2 − cosθ·I = (1 − cosθ)·aaᵀ.
    let m = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
    let one_minus_cos = 1.0 - cos_theta;
    let diag = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
    let i = (0..3)
        .max_by(|&a, &b| diag[a].partial_cmp(&diag[b]).unwrap())
        .unwrap();
    let mut axis = Vector3::zeros();
    axis[i] = (diag[i] / one_minus_cos).max(0.0).sqrt();
    for j in 0..3 {
        if j != i {
            axis[j] = m[(i, j)] / (one_minus_cos * axis[i]);
        }
    }
    axis.normalize_mut();
    // Fix the sign from the (tiny but directionally reliable) skew part;
    // at exactly π both signs are equivalent, pick a deterministic one.
    let dot = axis.dot(&s);
    if dot < 0.0 || (dot == 0.0 && first_nonzero_is_negative(&axis)) {
        axis = -axis;
    }
    axis * theta
}

fn first_nonzero_is_negative(v: &Vector3<f64>) -> bool {
    for i in 0..3 {
        if v[i] != 0.0 {
            return v[i] < 0.0;
        }
    }
    false
}

/// Wraps an axis-angle vector onto the canonical branch ‖e‖ ≤ π.
pub fn canonicalize_expmap(e: Vector3<f64>) -> Vector3<f64> {
    let theta = e.norm();
    if theta <= std::f64::consts::PI {
        return e;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut wrapped = theta % two_pi;
    let axis = e / theta;
    if wrapped > std::f64::consts::PI {
        wrapped -= two_pi; // negative: flip the axis below
    }
    axis * wrapped
}

pub(crate) fn skew(v: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Projects an object-frame point through `pose` and the pinhole camera.
///
/// Fails when the transformed point is not strictly in front of the
/// camera (z ≤ [`MIN_DEPTH`]).
pub fn project(
    k: &CameraIntrinsics,
    pose: &Pose,
    point: Vector3<f64>,
) -> Result<Vector2<f64>, GeometryError> {
    project_camera_point(k, pose.transform_point(point))
}

/// Projects a camera-frame point directly.
pub fn project_camera_point(
    k: &CameraIntrinsics,
    p: Vector3<f64>,
) -> Result<Vector2<f64>, GeometryError> {
    if p.z <= MIN_DEPTH {
        return Err(GeometryError::BehindCamera { z: p.z });
    }
    Ok(Vector2::new(
        k.fx * p.x / p.z + k.cx,
        k.fy * p.y / p.z + k.cy,
    ))
}

/// Axis-aligned bounding-box corners of a mesh, in canonical bit order.
pub fn bbox_corners(mesh: &MeshModel) -> BoxCorners3D {
    let mut lo = mesh.vertices[0];
    let mut hi = mesh.vertices[0];
    for v in &mesh.vertices[1..] {
        for i in 0..3 {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    let mut corners = [Vector3::zeros(); 8];
    for (i, c) in corners.iter_mut().enumerate() {
        *c = Vector3::new(
            if i & 1 != 0 { hi.x } else { lo.x },
            if i & 2 != 0 { hi.y } else { lo.y },
            if i & 4 != 0 { hi.z } else { lo.z },
        );
    }
    BoxCorners3D { corners }
}

/// Maximum pairwise distance between mesh vertices, in meters.
pub fn diameter(mesh: &MeshModel) -> Result<f64, GeometryError> {
    let v = &mesh.vertices;
    if v.len() < 2 {
        return Err(GeometryError::TooFewVertices {
            required: 2,
            got: v.len(),
        });
    }
    let mut best = 0.0f64;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            let d = (v[i] - v[j]).norm_squared();
            if d > best {
                best = d;
            }
        }
    }
    Ok(best.sqrt())
}

/// The camera-frame counterpart of mirroring the image left-right about
/// the vertical line x = cx: R ← F·R·F and t ← F·t with F = diag(−1,1,1).
///
/// F·R·F has determinant +1, so the result is again a proper pose. For
/// any object point M the identity
/// `mirror_points_x(project(pose, F·M)) == project(reflect_pose_x(pose), M)`
/// holds exactly; when the object's bounding box is symmetric about the
/// object-frame x = 0 plane, F·M ranges over the box corners with bit 0
/// of the corner index flipped (see
/// [`crate::symmetry::corner_permutation_under_mirror`]).
pub fn reflect_pose_x(pose: &Pose) -> Pose {
    let f = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
    let r = f * pose.rotation() * f;
    Pose::from_matrix(&r, Vector3::new(-pose.t.x, pose.t.y, pose.t.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn random_unit(rng: &mut StdRng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n < 1.0 {
                return v / n;
            }
        }
    }

    pub(crate) fn random_pose(rng: &mut StdRng) -> Pose {
        let axis = random_unit(rng);
        let angle = rng.gen_range(0.0..PI);
        Pose::new(
            axis * angle,
            Vector3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(0.5..3.0),
            ),
        )
    }

    #[test]
    fn expmap_zero_is_identity() {
        let r = rot_from_expmap(Vector3::zeros());
        assert_relative_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn expmap_quarter_turn_about_z() {
        let r = rot_from_expmap(Vector3::new(0.0, 0.0, PI / 2.0));
        let p = r * Vector3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(p, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn expmap_log_round_trip() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let e = random_unit(&mut rng) * rng.gen_range(1e-12..PI - 1e-12);
            let r = rot_from_expmap(e);
            // orthonormal, det +1
            assert_relative_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-9);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-9);
            let back = log_rotation(&r);
            assert_relative_eq!(back, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_near_pi_is_stable() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..200 {
            let e = random_unit(&mut rng) * (PI - 1e-9);
            let back = log_rotation(&rot_from_expmap(e));
            assert_relative_eq!(back, e, epsilon = 1e-7);
        }
        // exactly π: the reconstructed rotation must match even though the
        // sign of the axis is a convention
        let e = Vector3::new(0.0, 0.0, PI);
        let back = log_rotation(&rot_from_expmap(e));
        assert_relative_eq!(
            rot_from_expmap(back),
            rot_from_expmap(e),
            epsilon = 1e-9
        );
    }

    #[test]
    fn canonicalize_wraps_long_vectors() {
        let e = Vector3::new(0.0, 0.0, 1.5 * PI);
        let c = canonicalize_expmap(e);
        assert!(c.norm() <= PI + 1e-12);
        assert_relative_eq!(rot_from_expmap(c), rot_from_expmap(e), epsilon = 1e-9);
    }

    #[test]
    fn project_on_optical_axis() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1, 1).unwrap();
        let p = project(&k, &Pose::identity(), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(p, Vector2::new(0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn project_off_axis_pixels() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let p = project(&k, &Pose::identity(), Vector3::new(0.1, 0.0, 1.0)).unwrap();
        assert_relative_eq!(p, Vector2::new(370.0, 240.0), epsilon = 1e-12);
    }

    #[test]
    fn project_rejects_points_behind_camera() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let r = project(&k, &Pose::identity(), Vector3::new(0.0, 0.0, -1.0));
        assert!(matches!(r, Err(GeometryError::BehindCamera { .. })));
    }

    /// Independently coded homogeneous-matrix projection pipeline.
    fn project_homogeneous(k: &CameraIntrinsics, pose: &Pose, m: Vector3<f64>) -> Vector2<f64> {
        use nalgebra::{Matrix3x4, Matrix4, Vector4};
        let kmat = Matrix3::new(k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0);
        let mut rt = Matrix4::identity();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation());
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&pose.t);
        let p34 = Matrix3x4::new(
            1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        );
        let h = kmat * p34 * rt * Vector4::new(m.x, m.y, m.z, 1.0);
        Vector2::new(h.x / h.z, h.y / h.z)
    }

    #[test]
    fn project_matches_homogeneous_oracle() {
        let k = CameraIntrinsics::new(520.0, 490.0, 315.5, 242.5, 640, 480).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..500 {
            let pose = random_pose(&mut rng);
            let m = Vector3::new(
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
            );
            let a = project(&k, &pose, m).unwrap();
            let b = project_homogeneous(&k, &pose, m);
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn bbox_of_unit_cube_is_its_corners() {
        let mesh = crate::shapes::cuboid("cube", 1.0, 1.0, 1.0);
        let bb = bbox_corners(&mesh);
        assert_relative_eq!(bb.corners[0], Vector3::new(-0.5, -0.5, -0.5));
        assert_relative_eq!(bb.corners[1], Vector3::new(0.5, -0.5, -0.5));
        assert_relative_eq!(bb.corners[2], Vector3::new(-0.5, 0.5, -0.5));
        assert_relative_eq!(bb.corners[7], Vector3::new(0.5, 0.5, 0.5));
    }

    #[test]
    fn bbox_of_tetrahedron() {
        let mesh = MeshModel::new(
            "tetra",
            vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 2.0, 0.0),
                Vector3::new(0.0, 0.0, 3.0),
            ],
            vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
        )
        .unwrap();
        let bb = bbox_corners(&mesh);
        assert_relative_eq!(bb.corners[0], Vector3::new(0.0, 0.0, 0.0));
        assert_relative_eq!(bb.corners[7], Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn bbox_contains_all_vertices_and_is_order_invariant() {
        let mut rng = StdRng::seed_from_u64(3);
        let mut verts: Vec<Vector3<f64>> = (0..100)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let mesh = MeshModel::new("cloud", verts.clone(), vec![]).unwrap();
        let bb = bbox_corners(&mesh);
        let (lo, hi) = (bb.corners[0], bb.corners[7]);
        for v in &verts {
            for i in 0..3 {
                assert!(lo[i] <= v[i] && v[i] <= hi[i]);
            }
        }
        // permutation invariance
        verts.reverse();
        verts.swap(0, 50);
        let mesh2 = MeshModel::new("cloud", verts, vec![]).unwrap();
        assert_eq!(bbox_corners(&mesh2).corners, bb.corners);
    }

    #[test]
    fn diameter_examples() {
        let cube = crate::shapes::cuboid("cube", 1.0, 1.0, 1.0);
        assert_relative_eq!(diameter(&cube).unwrap(), 3.0f64.sqrt(), epsilon = 1e-12);

        let two = MeshModel::new(
            "pair",
            vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.2, 0.0, 0.0)],
            vec![],
        )
        .unwrap();
        assert_relative_eq!(diameter(&two).unwrap(), 0.2, epsilon = 1e-15);

        let one = MeshModel::new("single", vec![Vector3::zeros()], vec![]).unwrap();
        assert!(matches!(
            diameter(&one),
            Err(GeometryError::TooFewVertices { .. })
        ));
    }

    #[test]
    fn diameter_matches_brute_force() {
        let mut rng = StdRng::seed_from_u64(4);
        let verts: Vec<Vector3<f64>> = (0..200)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        // element-by-element oracle written without norm()
        let mut expect = 0.0f64;
        for a in &verts {
            for b in &verts {
                let dx = a.x - b.x;
                let dy = a.y - b.y;
                let dz = a.z - b.z;
                let d = (dx * dx + dy * dy + dz * dz).sqrt();
                if d > expect {
                    expect = d;
                }
            }
        }
        let mesh = MeshModel::new("cloud", verts, vec![]).unwrap();
        assert_eq!(diameter(&mesh).unwrap(), expect);
    }

    #[test]
    fn reflect_identity_pose_flips_tx() {
        let pose = Pose::new(Vector3::zeros(), Vector3::new(0.1, 0.0, 1.0));
        let refl = reflect_pose_x(&pose);
        assert_relative_eq!(refl.e, Vector3::zeros(), epsilon = 1e-15);
        assert_relative_eq!(refl.t, Vector3::new(-0.1, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn reflect_is_involution() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let pose = random_pose(&mut rng);
            let back = reflect_pose_x(&reflect_pose_x(&pose));
            assert_relative_eq!(back.rotation(), pose.rotation(), epsilon = 1e-12);
            assert_relative_eq!(back.t, pose.t, epsilon = 1e-12);
        }
    }

    #[test]
    fn mirror_identity_on_mirrored_object_point() {
        // mirror(project(pose, F·M)) == project(reflect(pose), M)
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..300 {
            let pose = random_pose(&mut rng);
            let m = Vector3::new(
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
            );
            let fm = Vector3::new(-m.x, m.y, m.z);
            let lhs = crate::symmetry::mirror_points_x(&[project(&k, &pose, fm).unwrap()], k.cx)[0];
            let rhs = project(&k, &reflect_pose_x(&pose), m).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 10.0, 0.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 9.0, 9.0, 10, 10).is_ok());
    }

    #[test]
    fn mesh_rejects_bad_triangle_index() {
        let r = MeshModel::new(
            "bad",
            vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        );
        assert!(matches!(
            r,
            Err(GeometryError::TriangleIndexOutOfRange { .. })
        ));
    }
}
