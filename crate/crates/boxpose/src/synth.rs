//! Seeded synthetic ground truth: random poses, noisy corner
//! predictions, occluder bookkeeping and ideal score maps.
//!
//! Every frame draws from its own RNG substream (the frame id selects
//! the stream), so generation is reproducible and order-independent
//! regardless of how frames are parallelized.

use crate::geometry::{
    bbox_corners, project, CameraIntrinsics, CornerProjection, GeometryError, MeshModel, Pose,
};
use crate::render::{mask_visible_fraction, render_mask, BinaryImage, RenderError};
use crate::segmentation::{
    ScoreGrid, SegmentationError, COARSE_HEIGHT, COARSE_WIDTH, FINE_HEIGHT, FINE_WIDTH,
    WORKING_HEIGHT, WORKING_WIDTH,
};
use crate::symmetry::{
    fold_rotation, mirror_corner_projection, rotation_angle_about_axis, SymmetryError,
    SymmetrySpec,
};
use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    BadConfig(String),
    #[error("rejection sampling failed after {attempts} attempts")]
    RejectionFailure { attempts: usize },
    #[error("score maps need a {}x{} working image, got {got_w}x{got_h}", WORKING_WIDTH, WORKING_HEIGHT)]
    WorkingImage { got_w: u32, got_h: u32 },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
}

/// Knobs of the synthetic generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Object-center depth range in meters.
    pub depth_range: (f64, f64),
    /// Cap on the rotation angle from identity; `None` samples uniformly
    /// over all rotations.
    pub max_rotation_angle: Option<f64>,
    /// Restrict the rotation about the symmetry axis to the trainable
    /// fold range (symmetric / quasi-symmetric objects).
    pub restrict_to_fold_range: bool,
    /// Training-window scale factor range.
    pub scale_range: (f64, f64),
    /// Maximum window-center shift from the object center, in pixels.
    pub max_shift_px: f64,
    /// Standard deviation of the corner prediction noise, in pixels.
    pub corner_noise_sigma: f64,
    /// Occluder count range per frame.
    pub occluder_count: (u32, u32),
    /// Occluder size range relative to the object's mask extent.
    pub occluder_rel_size: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            depth_range: (0.8, 2.0),
            max_rotation_angle: None,
            restrict_to_fold_range: false,
            scale_range: (0.8, 1.2),
            max_shift_px: 8.0,
            corner_noise_sigma: 0.0,
            occluder_count: (0, 0),
            occluder_rel_size: (0.1, 0.4),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::BadConfig(m));
        if !(self.depth_range.0 > 0.0 && self.depth_range.1 >= self.depth_range.0) {
            return bad(format!("depth range {:?}", self.depth_range));
        }
        if !(self.scale_range.0 > 0.0 && self.scale_range.1 >= self.scale_range.0) {
            return bad(format!("scale range {:?}", self.scale_range));
        }
        if self.corner_noise_sigma < 0.0 || !self.corner_noise_sigma.is_finite() {
            return bad(format!("corner noise sigma {}", self.corner_noise_sigma));
        }
        if self.max_shift_px < 0.0 {
            return bad(format!("max shift {}", self.max_shift_px));
        }
        if self.occluder_count.1 < self.occluder_count.0 {
            return bad(format!("occluder count {:?}", self.occluder_count));
        }
        if !(self.occluder_rel_size.0 > 0.0
            && self.occluder_rel_size.1 >= self.occluder_rel_size.0)
        {
            return bad(format!("occluder size {:?}", self.occluder_rel_size));
        }
        if let Some(a) = self.max_rotation_angle {
            if !(0.0..=std::f64::consts::PI).contains(&a) {
                return bad(format!("max rotation angle {a}"));
            }
        }
        Ok(())
    }
}

/// One generated frame: ground truth plus the synthetic predictions a
/// corner predictor would emit for it.
#[derive(Debug, Clone)]
pub struct SynthFrame {
    pub frame: u64,
    pub object: String,
    pub gt_pose: Pose,
    pub gt_corners: CornerProjection,
    /// What the (noisy, fold-aware) corner predictor reports.
    pub predicted_corners: CornerProjection,
    /// Region label for symmetric / quasi-symmetric objects.
    pub region: Option<u8>,
    /// Training-window bookkeeping.
    pub window_center: Vector2<f64>,
    pub window_scale: f64,
    /// Fraction of the silhouette left visible by the occluders.
    pub visibility: f64,
    pub coarse_scores: Option<ScoreGrid>,
    pub fine_scores: Option<ScoreGrid>,
}

/// RNG substream for one frame of a seeded dataset.
pub fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame.wrapping_add(1));
    rng
}

/// Uniformly distributed random rotation (subgroup algorithm): a random
/// rotation about z composed with a half-turn about a random axis.
pub fn uniform_rotation<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let theta = rng.gen_range(0.0..two_pi);
    let phi = rng.gen_range(0.0..two_pi);
    let z: f64 = rng.gen_range(0.0..1.0);
    let v = Vector3::new(phi.cos() * z.sqrt(), phi.sin() * z.sqrt(), (1.0 - z).sqrt());
    let reflect = Matrix3::from_fn(|i, j| 2.0 * v[i] * v[j] - if i == j { 1.0 } else { 0.0 });
    let rz = Matrix3::new(
        theta.cos(),
        -theta.sin(),
        0.0,
        theta.sin(),
        theta.cos(),
        0.0,
        0.0,
        0.0,
        1.0,
    );
    reflect * rz
}

/// Uniform direction on the unit sphere.
fn uniform_direction<R: Rng>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Perturbs a pose the way the refinement studies sample around ground
/// truth: rotation axis uniform on the sphere with angle uniform in
/// [0, max_angle], translation offset uniform in a ball of radius
/// `relative_translation`·‖t‖.
pub fn perturb_pose<R: Rng>(
    pose: &Pose,
    max_angle: f64,
    relative_translation: f64,
    rng: &mut R,
) -> Pose {
    let axis = uniform_direction(rng);
    let angle = rng.gen_range(0.0..=max_angle);
    let dir = uniform_direction(rng);
    let radius = relative_translation * pose.t.norm() * rng.gen_range(0.0f64..=1.0).cbrt();
    Pose::from_matrix(
        &(crate::geometry::rot_from_expmap(axis * angle) * pose.rotation()),
        pose.t + dir * radius,
    )
}

/// A mesh/camera/symmetry bundle frames are generated against.
#[derive(Debug, Clone, Copy)]
pub struct SynthScene<'a> {
    pub mesh: &'a MeshModel,
    pub spec: &'a SymmetrySpec,
    pub intrinsics: &'a CameraIntrinsics,
    pub config: &'a SynthConfig,
}

impl SynthScene<'_> {
    /// Samples a pose whose object center projects inside the image.
    ///
    /// Rotation is uniform over SO(3) (optionally angle-capped);
    /// objects of revolution are canonicalized to a zero rotation about
    /// their axis, and the fold-range restriction clamps the axis
    /// rotation of symmetric objects into [0, α).
    pub fn gen_pose<R: Rng>(&self, rng: &mut R) -> Result<Pose, SynthError> {
        self.config.validate()?;
        let k = self.intrinsics;
        let margin = 10.0f64.min(k.width as f64 * 0.4);
        const ATTEMPTS: usize = 1000;
        for _ in 0..ATTEMPTS {
            let mut rotation = match self.config.max_rotation_angle {
                None => uniform_rotation(rng),
                Some(a) if a == 0.0 => Matrix3::identity(),
                Some(a) => {
                    let axis = uniform_direction(rng);
                    crate::geometry::rot_from_expmap(axis * rng.gen_range(0.0..=a))
                }
            };
            rotation = self.constrain_axis_rotation(rotation, rng);

            let z = rng.gen_range(self.config.depth_range.0..=self.config.depth_range.1);
            let x_lo = (margin - k.cx) * z / k.fx;
            let x_hi = ((k.width as f64 - margin) - k.cx) * z / k.fx;
            let y_lo = (margin - k.cy) * z / k.fy;
            let y_hi = ((k.height as f64 - margin) - k.cy) * z / k.fy;
            let t = Vector3::new(
                rng.gen_range(x_lo..=x_hi),
                rng.gen_range(y_lo..=y_hi),
                z,
            );
            let pose = Pose::from_matrix(&rotation, t);
            let center = project(k, &pose, Vector3::zeros())?;
            if center.x >= 0.0
                && center.x < k.width as f64
                && center.y >= 0.0
                && center.y < k.height as f64
            {
                return Ok(pose);
            }
        }
        Err(SynthError::RejectionFailure { attempts: ATTEMPTS })
    }

    fn constrain_axis_rotation<R: Rng>(&self, rotation: Matrix3<f64>, rng: &mut R) -> Matrix3<f64> {
        let Some(axis) = self.spec.axis() else {
            return rotation;
        };
        match self.spec {
            SymmetrySpec::Revolution { .. } => {
                let beta = rotation_angle_about_axis(&rotation, axis);
                rotation * crate::geometry::rot_from_expmap(axis * -beta)
            }
            SymmetrySpec::Symmetric { alpha, .. } | SymmetrySpec::QuasiSymmetric { alpha, .. } => {
                if !self.config.restrict_to_fold_range {
                    return rotation;
                }
                let beta = rotation_angle_about_axis(&rotation, axis);
                let target = rng.gen_range(0.0..*alpha);
                rotation * crate::geometry::rot_from_expmap(axis * (target - beta))
            }
            SymmetrySpec::Asymmetric => rotation,
        }
    }

    /// Projects all eight box corners of the mesh under `pose`.
    pub fn gt_corners(&self, pose: &Pose) -> Result<CornerProjection, SynthError> {
        let bb = bbox_corners(self.mesh);
        let mut points = [Vector2::zeros(); 8];
        for (p, &m) in points.iter_mut().zip(bb.corners.iter()) {
            *p = project(self.intrinsics, pose, m)?;
        }
        Ok(CornerProjection { points })
    }

    /// The corner slots an ideal fold-aware predictor would emit:
    /// the appearance pose has the symmetry twist folded into the
    /// trainable range, and mirrored regions are emitted as the
    /// mirrored-back representation the pipeline inverts.
    fn predictor_corners(&self, gt: &Pose) -> Result<(CornerProjection, Option<u8>), SynthError> {
        let Some(axis) = self.spec.axis() else {
            return Ok((self.gt_corners(gt)?, None));
        };
        let beta = rotation_angle_about_axis(&gt.rotation(), axis);
        let fold = fold_rotation(beta, self.spec)?;
        let base = match self.spec {
            SymmetrySpec::Revolution { .. } => gt.rotated_about_axis(axis, -beta),
            SymmetrySpec::QuasiSymmetric { alpha, .. } if fold.add_half_turn => {
                gt.rotated_about_axis(axis, -alpha)
            }
            _ => *gt,
        };
        let corners = self.corners_of(&base)?;
        let corners = if fold.mirror {
            mirror_corner_projection(&corners, self.intrinsics.cx)
        } else {
            corners
        };
        let region = match self.spec {
            SymmetrySpec::Symmetric { .. } | SymmetrySpec::QuasiSymmetric { .. } => {
                Some(fold.region)
            }
            _ => None,
        };
        Ok((corners, region))
    }

    fn corners_of(&self, pose: &Pose) -> Result<CornerProjection, SynthError> {
        let bb = bbox_corners(self.mesh);
        let mut points = [Vector2::zeros(); 8];
        for (p, &m) in points.iter_mut().zip(bb.corners.iter()) {
            *p = project(self.intrinsics, pose, m)?;
        }
        Ok(CornerProjection { points })
    }

    /// Generates the full frame payload for a sampled pose: ground-truth
    /// and noisy predicted corners, window bookkeeping, occluder
    /// visibility, and (optionally) ideal score maps.
    pub fn gen_window<R: Rng>(
        &self,
        frame: u64,
        pose: &Pose,
        rng: &mut R,
        with_score_maps: bool,
    ) -> Result<SynthFrame, SynthError> {
        let cfg = self.config;
        cfg.validate()?;
        let gt_corners = self.gt_corners(pose)?;
        let (mut predicted, region) = self.predictor_corners(pose)?;

        // Noise values are always drawn so that datasets differing only
        // in sigma share the same underlying randomness.
        for p in &mut predicted.points {
            let nx: f64 = StandardNormal.sample(rng);
            let ny: f64 = StandardNormal.sample(rng);
            p.x += cfg.corner_noise_sigma * nx;
            p.y += cfg.corner_noise_sigma * ny;
        }

        let center = project(self.intrinsics, pose, Vector3::zeros())?;
        let shift = Vector2::new(
            rng.gen_range(-cfg.max_shift_px..=cfg.max_shift_px),
            rng.gen_range(-cfg.max_shift_px..=cfg.max_shift_px),
        );
        let window_center = center + shift;
        let window_scale = rng.gen_range(cfg.scale_range.0..=cfg.scale_range.1);

        let needs_mask = with_score_maps || cfg.occluder_count.1 > 0;
        let (visibility, coarse, fine) = if needs_mask {
            let mask = render_mask(self.mesh, pose, self.intrinsics)?;
            let occluders = self.gen_occluders(&mask, rng);
            let visibility = if mask.count() == 0 {
                0.0
            } else {
                mask_visible_fraction(&mask, &occluders)?
            };
            if with_score_maps {
                let (c, f) = gen_score_maps(&mask)?;
                (visibility, Some(c), Some(f))
            } else {
                (visibility, None, None)
            }
        } else {
            (1.0, None, None)
        };

        Ok(SynthFrame {
            frame,
            object: self.mesh.name.clone(),
            gt_pose: *pose,
            gt_corners,
            predicted_corners: predicted,
            region,
            window_center,
            window_scale,
            visibility,
            coarse_scores: coarse,
            fine_scores: fine,
        })
    }

    /// Samples a pose and generates its frame from the per-frame RNG
    /// substream.
    pub fn gen_frame(&self, frame: u64, with_score_maps: bool) -> Result<SynthFrame, SynthError> {
        let mut rng = frame_rng(self.config.seed, frame);
        let pose = self.gen_pose(&mut rng)?;
        self.gen_window(frame, &pose, &mut rng, with_score_maps)
    }

    /// Rectangular occluder masks sized relative to the object's
    /// silhouette extent.
    fn gen_occluders<R: Rng>(&self, mask: &BinaryImage, rng: &mut R) -> BinaryImage {
        let cfg = self.config;
        let mut occluders = BinaryImage::new(mask.width(), mask.height());
        let count = rng.gen_range(cfg.occluder_count.0..=cfg.occluder_count.1);
        if count == 0 || mask.count() == 0 {
            return occluders;
        }
        // silhouette bounding box
        let (mut min_x, mut min_y) = (u32::MAX, u32::MAX);
        let (mut max_x, mut max_y) = (0u32, 0u32);
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if mask.get(x, y) {
                    min_x = min_x.min(x);
                    min_y = min_y.min(y);
                    max_x = max_x.max(x);
                    max_y = max_y.max(y);
                }
            }
        }
        let (w, h) = (
            (max_x - min_x + 1) as f64,
            (max_y - min_y + 1) as f64,
        );
        for _ in 0..count {
            let ow = rng.gen_range(cfg.occluder_rel_size.0..=cfg.occluder_rel_size.1) * w;
            let oh = rng.gen_range(cfg.occluder_rel_size.0..=cfg.occluder_rel_size.1) * h;
            let cx = rng.gen_range((min_x as f64 - 0.25 * w)..=(max_x as f64 + 0.25 * w));
            let cy = rng.gen_range((min_y as f64 - 0.25 * h)..=(max_y as f64 + 0.25 * h));
            let x0 = ((cx - ow / 2.0).floor().max(0.0)) as u32;
            let x1 = ((cx + ow / 2.0).ceil().min(mask.width() as f64)) as u32;
            let y0 = ((cy - oh / 2.0).floor().max(0.0)) as u32;
            let y1 = ((cy + oh / 2.0).ceil().min(mask.height() as f64)) as u32;
            for y in y0..y1 {
                for x in x0..x1 {
                    occluders.set(x, y, true);
                }
            }
        }
        occluders
    }
}

/// Ideal network outputs for a rendered silhouette: per-cell coverage
/// fractions on the coarse (32×24) and fine (64×48) lattices.
pub fn gen_score_maps(mask: &BinaryImage) -> Result<(ScoreGrid, ScoreGrid), SynthError> {
    if mask.width() != WORKING_WIDTH || mask.height() != WORKING_HEIGHT {
        return Err(SynthError::WorkingImage {
            got_w: mask.width(),
            got_h: mask.height(),
        });
    }
    let average = |cells_w: usize, cells_h: usize, cell_px: u32| -> ScoreGrid {
        let mut grid = ScoreGrid::zeros(cells_w, cells_h);
        for row in 0..cells_h {
            for col in 0..cells_w {
                let mut active = 0u32;
                for dy in 0..cell_px {
                    for dx in 0..cell_px {
                        let x = col as u32 * cell_px + dx;
                        let y = row as u32 * cell_px + dy;
                        if mask.get(x, y) {
                            active += 1;
                        }
                    }
                }
                grid.set(col, row, active as f64 / (cell_px * cell_px) as f64);
            }
        }
        grid
    };
    Ok((
        average(COARSE_WIDTH, COARSE_HEIGHT, 16),
        average(FINE_WIDTH, FINE_HEIGHT, 8),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn working_camera() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 256.0, 192.0, WORKING_WIDTH, WORKING_HEIGHT).unwrap()
    }

    #[test]
    fn degenerate_ranges_give_fixed_pose() {
        let mesh = shapes::cuboid("c", 0.1, 0.1, 0.1);
        let k = working_camera();
        let cfg = SynthConfig {
            depth_range: (1.0, 1.0),
            max_rotation_angle: Some(0.0),
            max_shift_px: 0.0,
            ..Default::default()
        };
        let scene = SynthScene {
            mesh: &mesh,
            spec: &SymmetrySpec::Asymmetric,
            intrinsics: &k,
            config: &cfg,
        };
        let mut rng = frame_rng(1, 0);
        let pose = scene.gen_pose(&mut rng).unwrap();
        assert_relative_eq!(pose.e, Vector3::zeros(), epsilon = 1e-15);
        assert_relative_eq!(pose.t.z, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn restricted_sampling_never_leaves_fold_range() {
        let mesh = shapes::cuboid("c", 0.1, 0.1, 0.2);
        let k = working_camera();
        let alpha = PI / 2.0;
        let spec = SymmetrySpec::symmetric(alpha, Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let cfg = SynthConfig {
            restrict_to_fold_range: true,
            ..Default::default()
        };
        let scene = SynthScene {
            mesh: &mesh,
            spec: &spec,
            intrinsics: &k,
            config: &cfg,
        };
        for frame in 0..10_000u64 {
            let mut rng = frame_rng(3, frame);
            let pose = scene.gen_pose(&mut rng).unwrap();
            let beta =
                rotation_angle_about_axis(&pose.rotation(), Vector3::new(0.0, 0.0, 1.0));
            assert!(
                beta < alpha - 1e-9 || beta > 2.0 * PI - 1e-9,
                "frame {frame}: beta {beta}"
            );
        }
    }

    #[test]
    fn revolution_twist_is_canonicalized_to_zero() {
        let mesh = shapes::cylinder("cyl", 0.05, 0.15, 24);
        let k = working_camera();
        let spec = SymmetrySpec::revolution(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let cfg = SynthConfig::default();
        let scene = SynthScene {
            mesh: &mesh,
            spec: &spec,
            intrinsics: &k,
            config: &cfg,
        };
        for frame in 0..100u64 {
            let mut rng = frame_rng(4, frame);
            let pose = scene.gen_pose(&mut rng).unwrap();
            let beta =
                rotation_angle_about_axis(&pose.rotation(), Vector3::new(0.0, 0.0, 1.0));
            assert!(beta < 1e-9 || beta > 2.0 * PI - 1e-9, "beta {beta}");
        }
    }

    #[test]
    fn same_seed_reproduces_pose() {
        let mesh = shapes::cuboid("c", 0.1, 0.1, 0.1);
        let k = working_camera();
        let cfg = SynthConfig::default();
        let scene = SynthScene {
            mesh: &mesh,
            spec: &SymmetrySpec::Asymmetric,
            intrinsics: &k,
            config: &cfg,
        };
        let a = scene.gen_pose(&mut frame_rng(9, 5)).unwrap();
        let b = scene.gen_pose(&mut frame_rng(9, 5)).unwrap();
        assert_eq!(a.e, b.e);
        assert_eq!(a.t, b.t);
    }

    #[test]
    fn zero_sigma_predictions_equal_ground_truth() {
        let mesh = shapes::cuboid("c", 0.1, 0.12, 0.16);
        let k = working_camera();
        let cfg = SynthConfig::default();
        let scene = SynthScene {
            mesh: &mesh,
            spec: &SymmetrySpec::Asymmetric,
            intrinsics: &k,
            config: &cfg,
        };
        let frame = scene.gen_frame(0, false).unwrap();
        for i in 0..8 {
            assert_relative_eq!(
                frame.predicted_corners.points[i],
                frame.gt_corners.points[i],
                epsilon = 1e-12
            );
        }
        assert_eq!(frame.visibility, 1.0);
    }

    #[test]
    fn noise_magnitude_matches_half_normal_mean() {
        let mesh = shapes::cuboid("c", 0.1, 0.12, 0.16);
        let k = working_camera();
        let sigma = 2.0;
        let cfg = SynthConfig {
            corner_noise_sigma: sigma,
            ..Default::default()
        };
        let scene = SynthScene {
            mesh: &mesh,
            spec: &SymmetrySpec::Asymmetric,
            intrinsics: &k,
            config: &cfg,
        };
        let mut sum = 0.0;
        let mut n = 0usize;
        for frame_id in 0..6_250u64 {
            let frame = scene.gen_frame(frame_id, false).unwrap();
            for i in 0..8 {
                let d = frame.predicted_corners.points[i] - frame.gt_corners.points[i];
                sum += d.x.abs() + d.y.abs();
                n += 2;
            }
        }
        let mean = sum / n as f64;
        let expected = sigma * (2.0 / PI).sqrt();
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "mean {mean}, expected {expected}"
        );
    }

    #[test]
    fn covering_occluder_zeroes_visibility() {
        let mesh = shapes::cuboid("c", 0.1, 0.12, 0.16);
        let k = working_camera();
        let cfg = SynthConfig {
            occluder_count: (1, 1),
            occluder_rel_size: (8.0, 10.0),
            ..Default::default()
        };
        let scene = SynthScene {
            mesh: &mesh,
            spec: &SymmetrySpec::Asymmetric,
            intrinsics: &k,
            config: &cfg,
        };
        let frame = scene.gen_frame(0, false).unwrap();
        assert_eq!(frame.visibility, 0.0);
        assert!(frame.visibility <= 0.1);
    }

    #[test]
    fn score_map_cells_reflect_coverage() {
        let mut mask = BinaryImage::new(WORKING_WIDTH, WORKING_HEIGHT);
        // fully cover coarse cell (2, 1): pixels x in [32,48), y in [16,32)
        for y in 16..32 {
            for x in 32..48 {
                mask.set(x, y, true);
            }
        }
        let (coarse, fine) = gen_score_maps(&mask).unwrap();
        assert_eq!(coarse.get(2, 1), 1.0);
        assert_eq!(coarse.get(0, 0), 0.0);
        assert_eq!(fine.get(4, 2), 1.0);
        assert_eq!(fine.get(5, 3), 1.0);

        let empty = BinaryImage::new(WORKING_WIDTH, WORKING_HEIGHT);
        let (c0, f0) = gen_score_maps(&empty).unwrap();
        for row in 0..COARSE_HEIGHT {
            for col in 0..COARSE_WIDTH {
                assert_eq!(c0.get(col, row), 0.0);
            }
        }
        for row in 0..FINE_HEIGHT {
            for col in 0..FINE_WIDTH {
                assert_eq!(f0.get(col, row), 0.0);
            }
        }
    }

    #[test]
    fn score_maps_require_working_image() {
        let mask = BinaryImage::new(640, 480);
        assert!(matches!(
            gen_score_maps(&mask),
            Err(SynthError::WorkingImage { .. })
        ));
    }

    #[test]
    fn segmentation_centroid_tracks_projected_center() {
        let mesh = shapes::cuboid("c", 0.12, 0.14, 0.1);
        let k = working_camera();
        let cfg = SynthConfig::default();
        let scene = SynthScene {
            mesh: &mesh,
            spec: &SymmetrySpec::Asymmetric,
            intrinsics: &k,
            config: &cfg,
        };
        let params = crate::segmentation::SegmentationParams::default();
        let mut checked = 0;
        for frame_id in 0..100u64 {
            let frame = scene.gen_frame(frame_id, true).unwrap();
            let det = crate::segmentation::segment_object(
                &frame.object,
                frame.coarse_scores.as_ref().unwrap(),
                frame.fine_scores.as_ref(),
                &params,
            )
            .unwrap();
            if !det.present {
                continue;
            }
            // true 2D object center = centroid of the rendered silhouette
            let mask = render_mask(&mesh, &frame.gt_pose, &k).unwrap();
            let truth = mask.centroid().unwrap();
            let err = (det.center.unwrap() - truth).norm();
            assert!(err < 8.0, "frame {frame_id}: centroid off by {err} px");
            checked += 1;
        }
        assert!(checked > 80, "only {checked} frames had detections");
    }

    #[test]
    fn perturbation_respects_bounds() {
        let mut rng = frame_rng(11, 0);
        let pose = Pose::new(Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.0, 0.0, 1.0));
        for _ in 0..500 {
            let p = perturb_pose(&pose, 15f64.to_radians(), 0.1, &mut rng);
            let rot_err = crate::metrics::rotation_error(&p, &pose);
            let t_err = crate::metrics::translation_error(&p, &pose);
            assert!(rot_err <= 15f64.to_radians() + 1e-9);
            assert!(t_err <= 0.1 * pose.t.norm() + 1e-9);
        }
    }
}
