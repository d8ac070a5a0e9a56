//! Iterative pose refinement: render the object at the current estimate,
//! ask an updater for a correction to the corner projections, apply it
//! additively, and re-solve PnP.
//!
//! The trained update network of the full system is out of scope; the
//! updater is a trait with three implementations: a damped oracle
//! (returns γ·(target − current), for synthetic studies), per-frame
//! deltas read from a file, and a zero no-op.

use crate::geometry::{
    bbox_corners, project, BoxCorners3D, CameraIntrinsics, CornerProjection, GeometryError,
    MeshModel, Pose,
};
use crate::pnp::{solve_pnp, Correspondences, PnpError};
use crate::render::{render_mask, BinaryImage, RenderError};
use nalgebra::Vector2;
use std::collections::HashMap;
use thiserror::Error;

/// Default number of refinement iterations.
pub const DEFAULT_ITERATIONS: usize = 2;

#[derive(Debug, Error)]
pub enum UpdaterError {
    #[error("no delta on file for frame {frame}, iteration {iteration}")]
    MissingDelta { frame: u64, iteration: usize },
    #[error("non-finite delta for frame {frame}, iteration {iteration}")]
    NonFiniteDelta { frame: u64, iteration: usize },
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("refinement needs at least one iteration")]
    ZeroIterations,
    #[error("iteration {iteration}: {source}")]
    Render {
        iteration: usize,
        #[source]
        source: RenderError,
    },
    #[error("iteration {iteration}: {source}")]
    Pnp {
        iteration: usize,
        #[source]
        source: PnpError,
    },
    #[error("iteration {iteration}: {source}")]
    Projection {
        iteration: usize,
        #[source]
        source: GeometryError,
    },
    #[error("iteration {iteration}: {source}")]
    Updater {
        iteration: usize,
        #[source]
        source: UpdaterError,
    },
}

/// Call context passed to the updater.
#[derive(Debug, Clone, Copy)]
pub struct UpdateContext {
    pub frame: u64,
    /// 1-based refinement iteration.
    pub iteration: usize,
}

/// Source of corner corrections.
pub trait CornerUpdater {
    fn delta(
        &self,
        current: &CornerProjection,
        rendered: &BinaryImage,
        ctx: &UpdateContext,
    ) -> Result<[Vector2<f64>; 8], UpdaterError>;
}

/// Returns γ·(target − current): γ = 1 jumps straight to the target,
/// γ ∈ (0, 1) contracts the corner error geometrically.
#[derive(Debug, Clone, Copy)]
pub struct DampedOracleUpdater {
    pub gamma: f64,
    pub target: CornerProjection,
}

impl CornerUpdater for DampedOracleUpdater {
    fn delta(
        &self,
        current: &CornerProjection,
        _rendered: &BinaryImage,
        _ctx: &UpdateContext,
    ) -> Result<[Vector2<f64>; 8], UpdaterError> {
        let mut out = [Vector2::zeros(); 8];
        for (i, d) in out.iter_mut().enumerate() {
            *d = (self.target.points[i] - current.points[i]) * self.gamma;
        }
        Ok(out)
    }
}

/// No-op updater; the refinement loop is a fixed point under it.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroUpdater;

impl CornerUpdater for ZeroUpdater {
    fn delta(
        &self,
        _current: &CornerProjection,
        _rendered: &BinaryImage,
        _ctx: &UpdateContext,
    ) -> Result<[Vector2<f64>; 8], UpdaterError> {
        Ok([Vector2::zeros(); 8])
    }
}

/// Per-frame, per-iteration deltas read from a file (see
/// [`crate::formats::read_corner_deltas`]).
#[derive(Debug, Clone, Default)]
pub struct FileCornerDeltas {
    deltas: HashMap<(u64, usize), [Vector2<f64>; 8]>,
}

impl FileCornerDeltas {
    pub fn new(deltas: HashMap<(u64, usize), [Vector2<f64>; 8]>) -> Self {
        Self { deltas }
    }
}

impl CornerUpdater for FileCornerDeltas {
    fn delta(
        &self,
        _current: &CornerProjection,
        _rendered: &BinaryImage,
        ctx: &UpdateContext,
    ) -> Result<[Vector2<f64>; 8], UpdaterError> {
        self.deltas
            .get(&(ctx.frame, ctx.iteration))
            .copied()
            .ok_or(UpdaterError::MissingDelta {
                frame: ctx.frame,
                iteration: ctx.iteration,
            })
    }
}

/// One entry of a refinement trace.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RefinementStep {
    pub pose: Pose,
    /// Running corner estimate after this iteration's update (the
    /// initial projection for step 0).
    pub corners: CornerProjection,
    /// RMS distance from this step's corners to the final corners.
    pub corner_rms_to_final: f64,
    /// RMS reprojection distance of `pose` against `corners`, in pixels.
    pub reprojection_rms: f64,
}

/// Trace of a refinement run; `steps.len() == iterations + 1` with the
/// initial state first.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RefinementTrace {
    pub steps: Vec<RefinementStep>,
}

impl RefinementTrace {
    pub fn final_pose(&self) -> Pose {
        self.steps.last().expect("trace is never empty").pose
    }
}

fn project_corners(
    corners3d: &BoxCorners3D,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<CornerProjection, GeometryError> {
    let mut points = [Vector2::zeros(); 8];
    for (p, &m) in points.iter_mut().zip(corners3d.corners.iter()) {
        *p = project(k, pose, m)?;
    }
    Ok(CornerProjection { points })
}

/// Runs `iterations` rounds of render → update → re-solve, starting from
/// `init`. The corner estimate is carried additively across iterations;
/// it is seeded from the initial pose's own projections, so the zero
/// updater leaves the pose unchanged.
pub fn refine_pose(
    init: &Pose,
    corners3d: &BoxCorners3D,
    k: &CameraIntrinsics,
    mesh: &MeshModel,
    updater: &dyn CornerUpdater,
    iterations: usize,
    frame: u64,
) -> Result<RefinementTrace, RefineError> {
    if iterations == 0 {
        return Err(RefineError::ZeroIterations);
    }
    let mut corners = project_corners(corners3d, init, k)
        .map_err(|source| RefineError::Projection {
            iteration: 0,
            source,
        })?;
    let mut pose = *init;
    let mut steps = vec![RefinementStep {
        pose,
        corners,
        corner_rms_to_final: 0.0,
        reprojection_rms: 0.0,
    }];

    for iteration in 1..=iterations {
        let mask = render_mask(mesh, &pose, k).map_err(|source| RefineError::Render {
            iteration,
            source,
        })?;
        let ctx = UpdateContext { frame, iteration };
        let delta = updater
            .delta(&corners, &mask, &ctx)
            .map_err(|source| RefineError::Updater { iteration, source })?;
        if delta.iter().any(|d| !d.x.is_finite() || !d.y.is_finite()) {
            return Err(RefineError::Updater {
                iteration,
                source: UpdaterError::NonFiniteDelta { frame, iteration },
            });
        }
        for (c, d) in corners.points.iter_mut().zip(delta.iter()) {
            *c += d;
        }
        let solution = solve_pnp(&Correspondences::from_box(corners3d, &corners, *k))
            .map_err(|source| RefineError::Pnp { iteration, source })?;
        pose = solution.pose;
        steps.push(RefinementStep {
            pose,
            corners,
            corner_rms_to_final: 0.0,
            reprojection_rms: solution.reprojection_rms,
        });
    }

    let final_corners = steps.last().unwrap().corners;
    for step in &mut steps {
        step.corner_rms_to_final = step.corners.rms_distance(&final_corners);
    }
    Ok(RefinementTrace { steps })
}

/// Convenience wrapper deriving the box corners from the mesh.
pub fn refine_pose_for_mesh(
    init: &Pose,
    k: &CameraIntrinsics,
    mesh: &MeshModel,
    updater: &dyn CornerUpdater,
    iterations: usize,
    frame: u64,
) -> Result<RefinementTrace, RefineError> {
    refine_pose(init, &bbox_corners(mesh), k, mesh, updater, iterations, frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{rotation_error, translation_error};
    use crate::shapes;
    use nalgebra::Vector3;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn setup() -> (MeshModel, BoxCorners3D, CameraIntrinsics, Pose, Pose) {
        let mesh = shapes::cuboid("c", 0.1, 0.12, 0.16);
        let bb = bbox_corners(&mesh);
        let k = camera();
        let gt = Pose::new(Vector3::new(0.3, -0.2, 0.5), Vector3::new(0.05, -0.03, 1.1));
        let init = Pose::new(
            gt.e + Vector3::new(0.08, -0.05, 0.06),
            gt.t + Vector3::new(0.02, 0.015, -0.06),
        );
        (mesh, bb, k, gt, init)
    }

    #[test]
    fn oracle_gamma_one_converges_in_one_iteration() {
        let (mesh, bb, k, gt, init) = setup();
        let target = {
            let mut points = [Vector2::zeros(); 8];
            for (p, &m) in points.iter_mut().zip(bb.corners.iter()) {
                *p = project(&k, &gt, m).unwrap();
            }
            CornerProjection { points }
        };
        let updater = DampedOracleUpdater { gamma: 1.0, target };
        let trace = refine_pose(&init, &bb, &k, &mesh, &updater, 1, 0).unwrap();
        assert_eq!(trace.steps.len(), 2);
        assert!(trace.steps[1].corners.rms_distance(&target) < 1e-6);
        assert!(rotation_error(&trace.final_pose(), &gt) < 1e-6);
        assert!(translation_error(&trace.final_pose(), &gt) < 1e-6);
    }

    #[test]
    fn oracle_gamma_half_contracts_geometrically() {
        let (mesh, bb, k, gt, init) = setup();
        let target = {
            let mut points = [Vector2::zeros(); 8];
            for (p, &m) in points.iter_mut().zip(bb.corners.iter()) {
                *p = project(&k, &gt, m).unwrap();
            }
            CornerProjection { points }
        };
        let updater = DampedOracleUpdater { gamma: 0.5, target };
        let iterations = 6;
        let trace = refine_pose(&init, &bb, &k, &mesh, &updater, iterations, 0).unwrap();
        let e0 = trace.steps[0].corners.rms_distance(&target);
        for (i, step) in trace.steps.iter().enumerate() {
            let expected = e0 * 0.5f64.powi(i as i32);
            let got = step.corners.rms_distance(&target);
            assert!(
                (got - expected).abs() <= 1e-6 * e0.max(1.0),
                "iteration {i}: rms {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn zero_updater_is_fixed_point() {
        let (mesh, bb, k, _gt, init) = setup();
        let trace = refine_pose(&init, &bb, &k, &mesh, &ZeroUpdater, 3, 0).unwrap();
        assert_eq!(trace.steps.len(), 4);
        for step in &trace.steps {
            assert!(rotation_error(&step.pose, &init) < 1e-9);
            assert!(translation_error(&step.pose, &init) < 1e-9);
        }
    }

    #[test]
    fn trace_is_deterministic() {
        let (mesh, bb, k, gt, init) = setup();
        let target = {
            let mut points = [Vector2::zeros(); 8];
            for (p, &m) in points.iter_mut().zip(bb.corners.iter()) {
                *p = project(&k, &gt, m).unwrap();
            }
            CornerProjection { points }
        };
        let updater = DampedOracleUpdater { gamma: 0.7, target };
        let a = refine_pose(&init, &bb, &k, &mesh, &updater, 4, 0).unwrap();
        let b = refine_pose(&init, &bb, &k, &mesh, &updater, 4, 0).unwrap();
        for (sa, sb) in a.steps.iter().zip(b.steps.iter()) {
            assert_eq!(sa.pose.e, sb.pose.e);
            assert_eq!(sa.pose.t, sb.pose.t);
            assert_eq!(sa.corners.points, sb.corners.points);
        }
    }

    #[test]
    fn missing_file_delta_reports_iteration() {
        let (mesh, bb, k, _gt, init) = setup();
        let mut deltas = HashMap::new();
        deltas.insert((7u64, 1usize), [Vector2::new(0.1, 0.0); 8]);
        let updater = FileCornerDeltas::new(deltas);
        // frame 7 has iteration 1 but not 2
        let err = refine_pose(&init, &bb, &k, &mesh, &updater, 2, 7).unwrap_err();
        match err {
            RefineError::Updater { iteration, .. } => assert_eq!(iteration, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_iterations_is_an_error() {
        let (mesh, bb, k, _gt, init) = setup();
        assert!(matches!(
            refine_pose(&init, &bb, &k, &mesh, &ZeroUpdater, 0, 0),
            Err(RefineError::ZeroIterations)
        ));
    }
}
