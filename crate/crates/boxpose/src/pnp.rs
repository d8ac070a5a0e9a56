//! Pose recovery from 2D–3D point correspondences.
//!
//! [`solve_pnp`] runs a normalized DLT to get a linear estimate of the
//! projection, projects it onto a rigid pose, and polishes the result
//! with Levenberg–Marquardt on the pixel reprojection error. With the
//! eight well-spread bounding-box corners this is accurate and needs no
//! robust estimation — corner predictions are treated as outlier-free.

use crate::geometry::{
    project_camera_point, rot_from_expmap, skew, CameraIntrinsics, CornerProjection, Pose,
    BoxCorners3D, MIN_DEPTH,
};
use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Matrix6, Vector2, Vector3, Vector6};
use thiserror::Error;

/// Initial Levenberg–Marquardt damping factor.
const LM_LAMBDA_INIT: f64 = 1e-3;
/// Damping multiplier on a rejected step / divisor on an accepted one.
const LM_LAMBDA_STEP: f64 = 10.0;
/// Damping ceiling; beyond this the iteration has stalled.
const LM_LAMBDA_MAX: f64 = 1e15;
/// Convergence thresholds on the step norm and gradient norm.
const LM_STEP_TOL: f64 = 1e-10;
const LM_GRAD_TOL: f64 = 1e-10;
const LM_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error)]
pub enum PnpError {
    #[error("need at least {required} correspondences, got {got}")]
    TooFewPoints { required: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("refinement diverged at iteration {iteration}: a point left the camera's field of view and damping could not recover")]
    Diverged { iteration: usize },
}

/// 2D–3D correspondences: object-frame points paired with their pixel
/// observations, and the camera they were observed through.
#[derive(Debug, Clone)]
pub struct Correspondences {
    pub pairs: Vec<(Vector3<f64>, Vector2<f64>)>,
    pub intrinsics: CameraIntrinsics,
}

impl Correspondences {
    pub fn new(pairs: Vec<(Vector3<f64>, Vector2<f64>)>, intrinsics: CameraIntrinsics) -> Self {
        Self { pairs, intrinsics }
    }

    /// Pairs each bounding-box corner with its predicted projection.
    pub fn from_box(
        corners3d: &BoxCorners3D,
        projection: &CornerProjection,
        intrinsics: CameraIntrinsics,
    ) -> Self {
        let pairs = corners3d
            .corners
            .iter()
            .zip(projection.points.iter())
            .map(|(&m, &p)| (m, p))
            .collect();
        Self { pairs, intrinsics }
    }
}

/// A recovered pose together with its fit quality.
#[derive(Debug, Clone, Copy)]
pub struct PnpSolution {
    pub pose: Pose,
    /// Root-mean-square reprojection distance in pixels.
    pub reprojection_rms: f64,
    /// Accepted Levenberg–Marquardt iterations.
    pub iterations: usize,
}

/// Linear pose estimate via the Direct Linear Transform.
///
/// Solves for the 3×4 projection in normalized coordinates, then
/// projects its left 3×3 block onto the nearest rotation (polar
/// factor via SVD with determinant correction).
pub fn solve_pnp_dlt(c: &Correspondences) -> Result<Pose, PnpError> {
    let n = c.pairs.len();
    if n < 6 {
        return Err(PnpError::TooFewPoints {
            required: 6,
            got: n,
        });
    }

    // Centroid and isotropic scale of the object points.
    let centroid: Vector3<f64> =
        c.pairs.iter().map(|(m, _)| m).sum::<Vector3<f64>>() / n as f64;
    let mean_dist: f64 = c
        .pairs
        .iter()
        .map(|(m, _)| (m - centroid).norm())
        .sum::<f64>()
        / n as f64;
    if mean_dist <= f64::EPSILON {
        return Err(PnpError::DegenerateConfiguration("coincident object points"));
    }
    let scale = 3.0f64.sqrt() / mean_dist;

    // Coplanarity check on the raw 3D points: the DLT solution family is
    // not unique for planar configurations.
    let mut centered = DMatrix::<f64>::zeros(n, 3);
    for (i, (m, _)) in c.pairs.iter().enumerate() {
        let d = (m - centroid) * scale;
        centered.set_row(i, &nalgebra::RowVector3::new(d.x, d.y, d.z).into());
    }
    let sv = centered.singular_values();
    if sv[2] < 1e-8 * sv[0] {
        return Err(PnpError::DegenerateConfiguration("coplanar object points"));
    }

    let k = &c.intrinsics;
    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, (m, px)) in c.pairs.iter().enumerate() {
        let p = (m - centroid) * scale;
        let u = (px.x - k.cx) / k.fx;
        let v = (px.y - k.cy) / k.fy;
        let (r0, r1) = (2 * i, 2 * i + 1);
        a[(r0, 0)] = p.x;
        a[(r0, 1)] = p.y;
        a[(r0, 2)] = p.z;
        a[(r0, 3)] = 1.0;
        a[(r0, 8)] = -u * p.x;
        a[(r0, 9)] = -u * p.y;
        a[(r0, 10)] = -u * p.z;
        a[(r0, 11)] = -u;
        a[(r1, 4)] = p.x;
        a[(r1, 5)] = p.y;
        a[(r1, 6)] = p.z;
        a[(r1, 7)] = 1.0;
        a[(r1, 8)] = -v * p.x;
        a[(r1, 9)] = -v * p.y;
        a[(r1, 10)] = -v * p.z;
        a[(r1, 11)] = -v;
    }

    let svd = a.svd(true, true);
    let singular = &svd.singular_values;
    if singular[10] < 1e-10 * singular[0] {
        return Err(PnpError::DegenerateConfiguration(
            "rank-deficient design matrix",
        ));
    }
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or(PnpError::DegenerateConfiguration("svd failed"))?;
    let p_vec = v_t.row(11);

    // Reassemble P and undo the 3D normalization: P·[x;1] must equal
    // P_norm·[scale·(x − centroid); 1].
    let mut m_mat = Matrix3::zeros();
    let mut p4 = Vector3::zeros();
    for r in 0..3 {
        for col in 0..3 {
            m_mat[(r, col)] = p_vec[4 * r + col] * scale;
        }
        p4[r] = p_vec[4 * r + 3]
            - scale
                * (p_vec[4 * r] * centroid.x
                    + p_vec[4 * r + 1] * centroid.y
                    + p_vec[4 * r + 2] * centroid.z);
    }

    // Fix the overall scale: rows of s·R have norm |s|. The sign is
    // disambiguated by cheirality: the projective depths λᵢ = m₃·Mᵢ + p₃₄
    // must come out positive for points in front of the camera.
    let mut s = (m_mat.row(0).norm() + m_mat.row(1).norm() + m_mat.row(2).norm()) / 3.0;
    let mut in_front = 0usize;
    for (m, _) in &c.pairs {
        let lambda = m_mat.row(2).transpose().dot(m) + p4.z;
        if lambda > 0.0 {
            in_front += 1;
        }
    }
    if 2 * in_front < n {
        s = -s;
    }
    let rotation = nearest_rotation(&(m_mat / s));
    let t = p4 / s;

    // The object centroid must sit in front of the camera.
    if (rotation * centroid + t).z <= 0.0 {
        return Err(PnpError::DegenerateConfiguration(
            "object centroid behind camera",
        ));
    }

    Ok(Pose::from_matrix(&rotation, t))
}

/// Nearest rotation matrix in the Frobenius norm.
fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let d = (u * v_t).determinant();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum())) * v_t
}

/// Residual vector (2n) of pixel reprojection errors at `params`,
/// or `None` if a point falls behind the camera.
fn residuals(
    params: &Vector6<f64>,
    c: &Correspondences,
) -> Option<DVector<f64>> {
    let e = Vector3::new(params[0], params[1], params[2]);
    let t = Vector3::new(params[3], params[4], params[5]);
    let r = rot_from_expmap(e);
    let mut res = DVector::zeros(2 * c.pairs.len());
    for (i, (m, observed)) in c.pairs.iter().enumerate() {
        let p = r * m + t;
        if p.z <= MIN_DEPTH {
            return None;
        }
        let proj = project_camera_point(&c.intrinsics, p).ok()?;
        res[2 * i] = proj.x - observed.x;
        res[2 * i + 1] = proj.y - observed.y;
        if !res[2 * i].is_finite() || !res[2 * i + 1].is_finite() {
            return None;
        }
    }
    Some(res)
}

/// Right Jacobian of SO(3): exp((e + δ)ˆ) ≈ exp(eˆ)·exp((Jr(e)·δ)ˆ).
fn right_jacobian_so3(e: Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = e.norm_squared();
    let theta = theta_sq.sqrt();
    let k = skew(e);
    let (c2, c3) = if theta < 1e-4 {
        (
            0.5 - theta_sq / 24.0 + theta_sq * theta_sq / 720.0,
            1.0 / 6.0 - theta_sq / 120.0 + theta_sq * theta_sq / 5040.0,
        )
    } else {
        (
            (1.0 - theta.cos()) / theta_sq,
            (theta - theta.sin()) / (theta_sq * theta),
        )
    };
    Matrix3::identity() - k * c2 + k * k * c3
}

/// Analytic Jacobian (2n×6) of the reprojection residuals with respect
/// to [e, t].
pub(crate) fn reprojection_jacobian(
    params: &Vector6<f64>,
    c: &Correspondences,
) -> DMatrix<f64> {
    let e = Vector3::new(params[0], params[1], params[2]);
    let t = Vector3::new(params[3], params[4], params[5]);
    let r = rot_from_expmap(e);
    let jr = right_jacobian_so3(e);
    let (fx, fy) = (c.intrinsics.fx, c.intrinsics.fy);
    let mut jac = DMatrix::zeros(2 * c.pairs.len(), 6);
    for (i, (m, _)) in c.pairs.iter().enumerate() {
        let p = r * m + t;
        let inv_z = 1.0 / p.z;
        // ∂(u,v)/∂p
        let a = Matrix2x3::new(
            fx * inv_z,
            0.0,
            -fx * p.x * inv_z * inv_z,
            0.0,
            fy * inv_z,
            -fy * p.y * inv_z * inv_z,
        );
        // ∂p/∂e = −R·[m]ˆ·Jr(e), ∂p/∂t = I
        let dp_de = -r * skew(*m) * jr;
        let block_e = a * dp_de;
        let block_t = a;
        for row in 0..2 {
            for col in 0..3 {
                jac[(2 * i + row, col)] = block_e[(row, col)];
                jac[(2 * i + row, 3 + col)] = block_t[(row, col)];
            }
        }
    }
    jac
}

fn rms_from_residuals(res: &DVector<f64>) -> f64 {
    let n_points = res.len() / 2;
    (res.norm_squared() / n_points as f64).sqrt()
}

/// Levenberg–Marquardt minimization of the summed squared reprojection
/// error, starting from `init`.
///
/// Only improving steps are accepted, so the returned RMS never exceeds
/// the RMS at `init`. Terminates when the step norm or gradient norm
/// drops below 1e-10 or after 100 iterations.
pub fn refine_pnp(init: &Pose, c: &Correspondences) -> Result<PnpSolution, PnpError> {
    if c.pairs.is_empty() {
        return Err(PnpError::TooFewPoints {
            required: 3,
            got: 0,
        });
    }
    let mut params = Vector6::new(init.e.x, init.e.y, init.e.z, init.t.x, init.t.y, init.t.z);
    let mut res = residuals(&params, c).ok_or(PnpError::Diverged { iteration: 0 })?;
    let mut cost = res.norm_squared();
    let mut lambda = LM_LAMBDA_INIT;
    let mut accepted = 0usize;

    'outer: for _ in 0..LM_MAX_ITERATIONS {
        let jac = reprojection_jacobian(&params, c);
        let gradient = jac.transpose() * &res;
        if gradient.norm() < LM_GRAD_TOL {
            break;
        }
        let hessian = jac.transpose() * &jac;

        loop {
            let mut damped = Matrix6::from_iterator(hessian.iter().copied());
            for d in 0..6 {
                damped[(d, d)] += lambda * hessian[(d, d)].max(1e-12);
            }
            let rhs = Vector6::from_iterator(gradient.iter().map(|g| -g));
            let step = match damped.cholesky() {
                Some(chol) => chol.solve(&rhs),
                None => {
                    lambda *= LM_LAMBDA_STEP;
                    if lambda > LM_LAMBDA_MAX {
                        break 'outer;
                    }
                    continue;
                }
            };
            if step.norm() < LM_STEP_TOL {
                break 'outer;
            }
            let candidate = params + step;
            match residuals(&candidate, c) {
                Some(new_res) => {
                    let new_cost = new_res.norm_squared();
                    if new_cost < cost {
                        params = candidate;
                        res = new_res;
                        cost = new_cost;
                        lambda = (lambda / LM_LAMBDA_STEP).max(1e-12);
                        accepted += 1;
                        break;
                    }
                    lambda *= LM_LAMBDA_STEP;
                }
                // candidate pushed a point behind the camera
                None => lambda *= LM_LAMBDA_STEP,
            }
            if lambda > LM_LAMBDA_MAX {
                if !cost.is_finite() {
                    return Err(PnpError::Diverged { iteration: accepted });
                }
                break 'outer;
            }
        }
    }

    Ok(PnpSolution {
        pose: Pose::new(
            Vector3::new(params[0], params[1], params[2]),
            Vector3::new(params[3], params[4], params[5]),
        ),
        reprojection_rms: rms_from_residuals(&res),
        iterations: accepted,
    })
}

/// Full solve: DLT initialization followed by LM refinement.
pub fn solve_pnp(c: &Correspondences) -> Result<PnpSolution, PnpError> {
    let init = solve_pnp_dlt(c)?;
    refine_pnp(&init, c)
}

/// RMS reprojection distance of a pose over the correspondences, in
/// pixels.
pub fn reprojection_rms(pose: &Pose, c: &Correspondences) -> Option<f64> {
    let params = Vector6::new(pose.e.x, pose.e.y, pose.e.z, pose.t.x, pose.t.y, pose.t.z);
    residuals(&params, c).map(|r| rms_from_residuals(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bbox_corners, project};
    use crate::metrics::{rotation_error, translation_error};
    use crate::shapes;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn cube_correspondences(pose: &Pose, k: &CameraIntrinsics) -> Correspondences {
        let mesh = shapes::cuboid("cube", 0.1, 0.12, 0.16);
        let bb = bbox_corners(&mesh);
        let pairs = bb
            .corners
            .iter()
            .map(|&m| (m, project(k, pose, m).unwrap()))
            .collect();
        Correspondences::new(pairs, *k)
    }

    fn random_pose(rng: &mut StdRng) -> Pose {
        let axis = Vector3::new(
            rng.gen_range(-1.0f64..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        Pose::new(
            axis * rng.gen_range(0.0..PI),
            Vector3::new(
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.15..0.15),
                rng.gen_range(0.5..3.0),
            ),
        )
    }

    #[test]
    fn dlt_recovers_noiseless_pose() {
        let k = camera();
        let mut rng = StdRng::seed_from_u64(50);
        for _ in 0..100 {
            let pose = random_pose(&mut rng);
            let c = cube_correspondences(&pose, &k);
            let est = solve_pnp_dlt(&c).unwrap();
            assert!(rotation_error(&est, &pose) < 1e-6);
            assert!(translation_error(&est, &pose) < 1e-6);
        }
    }

    #[test]
    fn dlt_too_few_points() {
        let k = camera();
        let pose = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0));
        let mut c = cube_correspondences(&pose, &k);
        c.pairs.truncate(5);
        assert!(matches!(
            solve_pnp_dlt(&c),
            Err(PnpError::TooFewPoints { got: 5, .. })
        ));
    }

    #[test]
    fn dlt_rejects_coplanar_points() {
        let k = camera();
        let pose = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0));
        let pairs = (0..8)
            .map(|i| {
                let m = Vector3::new(
                    0.05 * (i % 4) as f64,
                    0.04 * (i / 4) as f64,
                    0.0,
                );
                (m, project(&k, &pose, m).unwrap())
            })
            .collect();
        let c = Correspondences::new(pairs, k);
        assert!(matches!(
            solve_pnp_dlt(&c),
            Err(PnpError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn refine_at_ground_truth_is_fixed_point() {
        let k = camera();
        let pose = Pose::new(Vector3::new(0.2, -0.4, 0.1), Vector3::new(0.05, 0.02, 1.2));
        let c = cube_correspondences(&pose, &k);
        let sol = refine_pnp(&pose, &c).unwrap();
        // zero residual: the gradient test fires before any step is taken
        assert_eq!(sol.pose.e, pose.e);
        assert_eq!(sol.pose.t, pose.t);
        assert_eq!(sol.iterations, 0);
        assert!(sol.reprojection_rms < 1e-9);
    }

    #[test]
    fn refine_errors_when_init_is_behind_camera() {
        let k = camera();
        let pose = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0));
        let c = cube_correspondences(&pose, &k);
        let behind = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, -1.0));
        assert!(matches!(
            refine_pnp(&behind, &c),
            Err(PnpError::Diverged { iteration: 0 })
        ));
    }

    #[test]
    fn analytic_jacobian_matches_central_differences() {
        let k = camera();
        let mut rng = StdRng::seed_from_u64(51);
        for _ in 0..25 {
            let pose = random_pose(&mut rng);
            let c = cube_correspondences(&pose, &k);
            // evaluate at a point that is not the optimum
            let params = Vector6::new(
                pose.e.x + 0.05,
                pose.e.y - 0.03,
                pose.e.z + 0.02,
                pose.t.x + 0.01,
                pose.t.y - 0.01,
                pose.t.z + 0.02,
            );
            let analytic = reprojection_jacobian(&params, &c);
            let h = 1e-6;
            let mut numeric = DMatrix::zeros(2 * c.pairs.len(), 6);
            for col in 0..6 {
                let mut plus = params;
                let mut minus = params;
                plus[col] += h;
                minus[col] -= h;
                let rp = residuals(&plus, &c).unwrap();
                let rm = residuals(&minus, &c).unwrap();
                for row in 0..numeric.nrows() {
                    numeric[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
                }
            }
            let max_diff = (&analytic - &numeric).abs().max();
            assert!(max_diff < 1e-5, "max Jacobian difference {max_diff}");
        }
    }

    #[test]
    fn solve_identity_cube_round_trip() {
        let k = camera();
        let pose = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0));
        let c = cube_correspondences(&pose, &k);
        let sol = solve_pnp(&c).unwrap();
        assert!(rotation_error(&sol.pose, &pose) < 1e-6f64.to_radians());
        assert!(translation_error(&sol.pose, &pose) < 1e-6);
    }

    #[test]
    fn refinement_never_increases_rms_under_noise() {
        let k = camera();
        let mut rng = StdRng::seed_from_u64(52);
        let noise = Normal::new(0.0, 1.0).unwrap();
        for _ in 0..50 {
            let pose = random_pose(&mut rng);
            let mut c = cube_correspondences(&pose, &k);
            for (_, px) in &mut c.pairs {
                px.x += noise.sample(&mut rng);
                px.y += noise.sample(&mut rng);
            }
            let init = match solve_pnp_dlt(&c) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let init_rms = reprojection_rms(&init, &c).unwrap();
            let sol = refine_pnp(&init, &c).unwrap();
            assert!(sol.reprojection_rms <= init_rms + 1e-12);
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let k = camera();
        let mut rng = StdRng::seed_from_u64(53);
        let pose = random_pose(&mut rng);
        let mut c = cube_correspondences(&pose, &k);
        let noise = Normal::new(0.0, 2.0).unwrap();
        for (_, px) in &mut c.pairs {
            px.x += noise.sample(&mut rng);
            px.y += noise.sample(&mut rng);
        }
        let a = solve_pnp(&c).unwrap();
        let b = solve_pnp(&c).unwrap();
        assert_eq!(a.pose.e, b.pose.e);
        assert_eq!(a.pose.t, b.pose.t);
        assert_eq!(a.reprojection_rms, b.reprojection_rms);
    }

    #[test]
    fn noisy_corners_still_pass_5cm5deg_mostly() {
        // 2 px corner noise at ~1 m depth: record-keeping check that the
        // solve stays within the 5cm 5° budget nearly always
        let k = camera();
        let mut rng = StdRng::seed_from_u64(54);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let mut passes = 0;
        let trials = 200;
        for _ in 0..trials {
            let axis = Vector3::new(
                rng.gen_range(-1.0f64..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            let pose = Pose::new(
                axis * rng.gen_range(0.0..PI),
                Vector3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), 1.0),
            );
            let mut c = cube_correspondences(&pose, &k);
            for (_, px) in &mut c.pairs {
                px.x += noise.sample(&mut rng);
                px.y += noise.sample(&mut rng);
            }
            if let Ok(sol) = solve_pnp(&c) {
                if crate::metrics::metric_5cm5deg(&sol.pose, &pose, 5.0, 5.0).pass {
                    passes += 1;
                }
            }
        }
        assert!(
            passes as f64 >= 0.95 * trials as f64,
            "only {passes}/{trials} passed"
        );
    }

    #[test]
    fn dlt_round_trip_tight_tolerances() {
        let k = camera();
        let mut rng = StdRng::seed_from_u64(55);
        for _ in 0..200 {
            let pose = random_pose(&mut rng);
            let c = cube_correspondences(&pose, &k);
            let sol = solve_pnp(&c).unwrap();
            assert!(rotation_error(&sol.pose, &pose).to_degrees() < 0.01);
            assert!(translation_error(&sol.pose, &pose) < 1e-4);
        }
    }

    #[test]
    fn reprojection_rms_none_behind_camera() {
        let k = camera();
        let pose = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0));
        let c = cube_correspondences(&pose, &k);
        let behind = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, -1.0));
        assert!(reprojection_rms(&behind, &c).is_none());
        assert_relative_eq!(reprojection_rms(&pose, &c).unwrap(), 0.0, epsilon = 1e-9);
    }
}
