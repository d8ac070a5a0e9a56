//! Pose-accuracy metrics: 2D projection distance, average 3D vertex
//! distance with matched (ADD) or closest (ADI) vertices, and the
//! 5cm 5° translation/rotation test.
//!
//! A pose passes a metric when its error is strictly below the
//! threshold.

use crate::geometry::{project, CameraIntrinsics, GeometryError, MeshModel, Pose};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Default 2D-projection pass threshold in pixels.
pub const DEFAULT_PROJECTION_THRESHOLD_PX: f64 = 5.0;
/// Default ADD/ADI threshold as a fraction of the object diameter.
pub const DEFAULT_ADD_FRACTION: f64 = 0.1;
/// Default translation threshold of the 5cm 5° test, in centimeters.
pub const DEFAULT_TRANSLATION_THRESHOLD_CM: f64 = 5.0;
/// Default rotation threshold of the 5cm 5° test, in degrees.
pub const DEFAULT_ROTATION_THRESHOLD_DEG: f64 = 5.0;

/// Error value of a metric, in its native unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricValue {
    Pixels(f64),
    Meters(f64),
    CmDeg { cm: f64, deg: f64 },
}

/// Outcome of one correctness test: the measured error, the threshold it
/// was compared against, and the strict-inequality verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOutcome {
    pub value: MetricValue,
    pub threshold: MetricValue,
    pub pass: bool,
}

impl MetricOutcome {
    fn scalar(value: f64, threshold: f64, unit: fn(f64) -> MetricValue) -> Self {
        Self {
            value: unit(value),
            threshold: unit(threshold),
            pass: value < threshold,
        }
    }
}

/// Mean pixel distance between the projections of the mesh vertices
/// under the two poses.
pub fn projection_error_px(
    est: &Pose,
    gt: &Pose,
    k: &CameraIntrinsics,
    mesh: &MeshModel,
) -> Result<f64, GeometryError> {
    let mut sum = 0.0;
    for &v in &mesh.vertices {
        let a = project(k, est, v)?;
        let b = project(k, gt, v)?;
        sum += (a - b).norm();
    }
    Ok(sum / mesh.vertices.len() as f64)
}

pub fn metric_2d_projection(
    est: &Pose,
    gt: &Pose,
    k: &CameraIntrinsics,
    mesh: &MeshModel,
    threshold_px: f64,
) -> Result<MetricOutcome, GeometryError> {
    let value = projection_error_px(est, gt, k, mesh)?;
    Ok(MetricOutcome::scalar(value, threshold_px, MetricValue::Pixels))
}

/// Average matched-vertex 3D distance between the two posed models,
/// in meters.
pub fn distance_add(est: &Pose, gt: &Pose, mesh: &MeshModel) -> f64 {
    let (re, rg) = (est.rotation(), gt.rotation());
    let sum: f64 = mesh
        .vertices
        .iter()
        .map(|&v| ((re * v + est.t) - (rg * v + gt.t)).norm())
        .sum();
    sum / mesh.vertices.len() as f64
}

pub fn metric_add(
    est: &Pose,
    gt: &Pose,
    mesh: &MeshModel,
    diameter_fraction: f64,
) -> Result<MetricOutcome, GeometryError> {
    let threshold = diameter_fraction * crate::geometry::diameter(mesh)?;
    Ok(MetricOutcome::scalar(
        distance_add(est, gt, mesh),
        threshold,
        MetricValue::Meters,
    ))
}

/// Average closest-vertex 3D distance: each estimated vertex is matched
/// to the nearest ground-truth vertex, which makes the measure invariant
/// under the object's self-symmetries. Always ≤ [`distance_add`].
///
/// Nearest neighbors are found through a uniform grid; the result is
/// exact, the grid only prunes the search.
pub fn distance_adi(est: &Pose, gt: &Pose, mesh: &MeshModel) -> f64 {
    let (re, rg) = (est.rotation(), gt.rotation());
    let gt_pts: Vec<Vector3<f64>> = mesh.vertices.iter().map(|&v| rg * v + gt.t).collect();
    let grid = PointGrid::build(&gt_pts);
    let sum: f64 = mesh
        .vertices
        .iter()
        .map(|&v| grid.nearest_distance(re * v + est.t))
        .sum();
    sum / mesh.vertices.len() as f64
}

pub fn metric_adi(
    est: &Pose,
    gt: &Pose,
    mesh: &MeshModel,
    diameter_fraction: f64,
) -> Result<MetricOutcome, GeometryError> {
    let threshold = diameter_fraction * crate::geometry::diameter(mesh)?;
    Ok(MetricOutcome::scalar(
        distance_adi(est, gt, mesh),
        threshold,
        MetricValue::Meters,
    ))
}

/// Geodesic angle between the two pose rotations, in radians.
pub fn rotation_error(est: &Pose, gt: &Pose) -> f64 {
    let rel = est.rotation() * gt.rotation().transpose();
    ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
}

/// Euclidean translation error in meters.
pub fn translation_error(est: &Pose, gt: &Pose) -> f64 {
    (est.t - gt.t).norm()
}

/// The 5cm 5° test: both the translation error and the geodesic rotation
/// error must be strictly below their thresholds.
pub fn metric_5cm5deg(est: &Pose, gt: &Pose, threshold_cm: f64, threshold_deg: f64) -> MetricOutcome {
    let cm = translation_error(est, gt) * 100.0;
    let deg = rotation_error(est, gt).to_degrees();
    MetricOutcome {
        value: MetricValue::CmDeg { cm, deg },
        threshold: MetricValue::CmDeg {
            cm: threshold_cm,
            deg: threshold_deg,
        },
        pass: cm < threshold_cm && deg < threshold_deg,
    }
}

/// Uniform grid over a fixed point set answering exact nearest-neighbor
/// distance queries.
struct PointGrid {
    points: Vec<Vector3<f64>>,
    origin: Vector3<f64>,
    cell: f64,
    dims: [i64; 3],
    buckets: Vec<Vec<u32>>,
}

impl PointGrid {
    fn build(points: &[Vector3<f64>]) -> Self {
        assert!(!points.is_empty());
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent = (hi - lo).amax().max(1e-12);
        let per_axis = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell = extent / per_axis;
        let dims = [
            Self::index_of(hi.x, lo.x, cell) + 1,
            Self::index_of(hi.y, lo.y, cell) + 1,
            Self::index_of(hi.z, lo.z, cell) + 1,
        ];
        let mut buckets = vec![Vec::new(); (dims[0] * dims[1] * dims[2]) as usize];
        for (i, p) in points.iter().enumerate() {
            let c = [
                Self::index_of(p.x, lo.x, cell).clamp(0, dims[0] - 1),
                Self::index_of(p.y, lo.y, cell).clamp(0, dims[1] - 1),
                Self::index_of(p.z, lo.z, cell).clamp(0, dims[2] - 1),
            ];
            buckets[Self::flat(c, dims)].push(i as u32);
        }
        Self {
            points: points.to_vec(),
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    fn index_of(x: f64, origin: f64, cell: f64) -> i64 {
        ((x - origin) / cell).floor() as i64
    }

    fn flat(c: [i64; 3], dims: [i64; 3]) -> usize {
        ((c[2] * dims[1] + c[1]) * dims[0] + c[0]) as usize
    }

    /// Distance from `q` to its nearest stored point.
    fn nearest_distance(&self, q: Vector3<f64>) -> f64 {
        let qc = [
            Self::index_of(q.x, self.origin.x, self.cell),
            Self::index_of(q.y, self.origin.y, self.cell),
            Self::index_of(q.z, self.origin.z, self.cell),
        ];
        // Largest Chebyshev cell distance that can still hold points.
        let max_ring = (0..3)
            .map(|a| qc[a].max(self.dims[a] - 1 - qc[a]).max(-qc[a]))
            .max()
            .unwrap()
            .max(0);
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            // Every point in an unvisited cell (Chebyshev distance ≥
            // ring) is more than (ring − 1)·cell away, so once best is
            // below that no farther ring can improve it. The slack
            // absorbs the float rounding of the cell assignment.
            if ring > 0 && best <= ((ring - 1) as f64) * self.cell * (1.0 - 1e-9) {
                break;
            }
            self.scan_ring(qc, ring, q, &mut best);
        }
        best
    }

    fn scan_ring(&self, qc: [i64; 3], ring: i64, q: Vector3<f64>, best: &mut f64) {
        let lo = [qc[0] - ring, qc[1] - ring, qc[2] - ring];
        let hi = [qc[0] + ring, qc[1] + ring, qc[2] + ring];
        for z in lo[2].max(0)..=hi[2].min(self.dims[2] - 1) {
            for y in lo[1].max(0)..=hi[1].min(self.dims[1] - 1) {
                for x in lo[0].max(0)..=hi[0].min(self.dims[0] - 1) {
                    let on_shell = (x - qc[0]).abs() == ring
                        || (y - qc[1]).abs() == ring
                        || (z - qc[2]).abs() == ring;
                    if !on_shell && ring > 0 {
                        continue;
                    }
                    for &idx in &self.buckets[Self::flat([x, y, z], self.dims)] {
                        let d = (self.points[idx as usize] - q).norm();
                        if d < *best {
                            *best = d;
                        }
                    }
                }
            }
        }
    }
}
