//! Rotation-angle folding for objects with an axis of rotational
//! symmetry, and the image-mirroring trick that lets a predictor trained
//! on a restricted angle range cover the full range.
//!
//! For an object with symmetry angle α the rotation about the symmetry
//! axis is only defined modulo α. Predictors are assumed to cover angles
//! β in [0, α/2); inputs with β in [α/2, α) are handled by mirroring the
//! image left–right, running the predictor, and mirroring its output
//! back. Quasi-symmetric objects (identical halves up to small details,
//! apparent symmetry angle π) additionally carry an add-π flag resolved
//! by a four-region classifier. Objects of revolution collapse to a
//! single canonical angle of 0.

use crate::geometry::{BoxCorners3D, CornerProjection};
use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use thiserror::Error;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Error)]
pub enum SymmetryError {
    #[error("rotation angle {beta} outside [0, 2π)")]
    AngleOutOfRange { beta: f64 },
    #[error("{op} is undefined for {kind} objects")]
    UnsupportedKind { op: &'static str, kind: &'static str },
    #[error("invalid symmetry spec: {0}")]
    InvalidSpec(String),
    #[error("no region label for frame {frame}")]
    MissingRegionLabel { frame: u64 },
    #[error("horizontal-axis mirroring is not implemented; only objects with a roughly vertical symmetry axis in the image are supported")]
    HorizontalMirrorUnimplemented,
}

/// Rotational-symmetry class of an object.
///
/// `alpha` is the symmetry angle in radians; `axis` the symmetry axis in
/// the object frame (unit length).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymmetrySpec {
    Asymmetric,
    Revolution { axis: Vector3<f64> },
    Symmetric { alpha: f64, axis: Vector3<f64> },
    QuasiSymmetric { alpha: f64, axis: Vector3<f64> },
}

impl SymmetrySpec {
    pub fn symmetric(alpha: f64, axis: Vector3<f64>) -> Result<Self, SymmetryError> {
        let s = Self::Symmetric { alpha, axis };
        s.validate()?;
        Ok(s)
    }

    pub fn quasi_symmetric(alpha: f64, axis: Vector3<f64>) -> Result<Self, SymmetryError> {
        let s = Self::QuasiSymmetric { alpha, axis };
        s.validate()?;
        Ok(s)
    }

    pub fn revolution(axis: Vector3<f64>) -> Result<Self, SymmetryError> {
        let s = Self::Revolution { axis };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SymmetryError> {
        if let Some(axis) = self.axis() {
            if !(axis.x.is_finite() && axis.y.is_finite() && axis.z.is_finite()) {
                return Err(SymmetryError::InvalidSpec("non-finite axis".into()));
            }
            if (axis.norm() - 1.0).abs() > 1e-6 {
                return Err(SymmetryError::InvalidSpec(format!(
                    "axis must be unit length, got norm {}",
                    axis.norm()
                )));
            }
        }
        match *self {
            Self::Symmetric { alpha, .. } => {
                if !alpha.is_finite() || alpha <= 0.0 || alpha >= TWO_PI {
                    return Err(SymmetryError::InvalidSpec(format!(
                        "symmetry angle {alpha} outside (0, 2π)"
                    )));
                }
                let turns = TWO_PI / alpha;
                if (turns - turns.round()).abs() * alpha > 1e-9 {
                    return Err(SymmetryError::InvalidSpec(format!(
                        "symmetry angle {alpha} does not divide 2π"
                    )));
                }
            }
            Self::QuasiSymmetric { alpha, .. } => {
                // The four-region add-π scheme only closes over [0, 2π)
                // when the apparent symmetry is a half turn.
                if !alpha.is_finite() || (alpha - PI).abs() > 1e-9 {
                    return Err(SymmetryError::InvalidSpec(format!(
                        "quasi-symmetric objects must have a half-turn apparent symmetry (angle π), got {alpha}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn axis(&self) -> Option<Vector3<f64>> {
        match *self {
            Self::Asymmetric => None,
            Self::Revolution { axis }
            | Self::Symmetric { axis, .. }
            | Self::QuasiSymmetric { axis, .. } => Some(axis),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Self::Symmetric { alpha, .. } | Self::QuasiSymmetric { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Asymmetric => "asymmetric",
            Self::Revolution { .. } => "revolution",
            Self::Symmetric { .. } => "symmetric",
            Self::QuasiSymmetric { .. } => "quasi_symmetric",
        }
    }

    /// Pose ambiguity means the 6D-pose metric must use the
    /// closest-vertex distance instead of the matched-vertex one.
    pub fn is_ambiguous(&self) -> bool {
        !matches!(self, Self::Asymmetric)
    }
}

#[derive(Serialize, Deserialize)]
struct RawSymmetrySpec {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis: Option<[f64; 3]>,
}

impl Serialize for SymmetrySpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        RawSymmetrySpec {
            kind: self.kind_name().to_string(),
            alpha_deg: self.alpha().map(|a| a.to_degrees()),
            axis: self.axis().map(|a| [a.x, a.y, a.z]),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SymmetrySpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = RawSymmetrySpec::deserialize(de)?;
        let axis = |raw: &RawSymmetrySpec| -> Result<Vector3<f64>, D::Error> {
            let a = raw
                .axis
                .ok_or_else(|| D::Error::custom("symmetry spec requires an axis"))?;
            Ok(Vector3::new(a[0], a[1], a[2]))
        };
        let alpha = |raw: &RawSymmetrySpec| -> Result<f64, D::Error> {
            raw.alpha_deg
                .map(f64::to_radians)
                .ok_or_else(|| D::Error::custom("symmetry spec requires alpha_deg"))
        };
        let spec = match raw.kind.as_str() {
            "asymmetric" => SymmetrySpec::Asymmetric,
            "revolution" => SymmetrySpec::Revolution { axis: axis(&raw)? },
            "symmetric" => SymmetrySpec::Symmetric {
                alpha: alpha(&raw)?,
                axis: axis(&raw)?,
            },
            "quasi_symmetric" => SymmetrySpec::QuasiSymmetric {
                alpha: alpha(&raw)?,
                axis: axis(&raw)?,
            },
            other => return Err(D::Error::custom(format!("unknown symmetry kind `{other}`"))),
        };
        spec.validate().map_err(D::Error::custom)?;
        Ok(spec)
    }
}

/// Result of folding a rotation angle into the predictor's range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// Folded angle in radians, in [0, α/2) away from region boundaries.
    pub beta_canonical: f64,
    /// The input image must be mirrored left–right (and the prediction
    /// mirrored back) before use.
    pub mirror: bool,
    /// A half turn about the symmetry axis must be added back to the
    /// recovered pose (quasi-symmetric objects only).
    pub add_half_turn: bool,
    /// Region index the angle fell in (1–2 symmetric, 1–4 quasi).
    pub region: u8,
}

fn check_angle(beta: f64) -> Result<(), SymmetryError> {
    if !beta.is_finite() || !(0.0..TWO_PI).contains(&beta) {
        return Err(SymmetryError::AngleOutOfRange { beta });
    }
    Ok(())
}

/// Region of a rotation angle: {1, 2} over one symmetry period for
/// symmetric objects, {1, 2, 3, 4} over the full turn for quasi-symmetric
/// ones. Intervals are half-open on the right.
pub fn classify_region(beta: f64, spec: &SymmetrySpec) -> Result<u8, SymmetryError> {
    check_angle(beta)?;
    match *spec {
        SymmetrySpec::Asymmetric => Err(SymmetryError::UnsupportedKind {
            op: "classify_region",
            kind: "asymmetric",
        }),
        SymmetrySpec::Revolution { .. } => Err(SymmetryError::UnsupportedKind {
            op: "classify_region",
            kind: "revolution",
        }),
        SymmetrySpec::Symmetric { alpha, .. } => {
            let b = beta.rem_euclid(alpha);
            Ok(if b < alpha / 2.0 { 1 } else { 2 })
        }
        SymmetrySpec::QuasiSymmetric { alpha, .. } => {
            // boundaries at α/2, α, 3α/2 with α = π
            Ok(if beta < alpha / 2.0 {
                1
            } else if beta < alpha {
                2
            } else if beta < 1.5 * alpha {
                3
            } else {
                4
            })
        }
    }
}

/// Folds a rotation angle into the canonical predictor range [0, α/2).
///
/// Symmetric: region 2 folds to α − β with the mirror flag set.
/// Quasi-symmetric: β is first reduced by a half turn (recorded in
/// `add_half_turn`), then folded as symmetric with α = π. Objects of
/// revolution always fold to 0; asymmetric objects fold to themselves.
pub fn fold_rotation(beta: f64, spec: &SymmetrySpec) -> Result<FoldResult, SymmetryError> {
    match *spec {
        SymmetrySpec::Asymmetric => {
            check_angle(beta)?;
            Ok(FoldResult {
                beta_canonical: beta,
                mirror: false,
                add_half_turn: false,
                region: 1,
            })
        }
        SymmetrySpec::Revolution { .. } => {
            if !beta.is_finite() {
                return Err(SymmetryError::AngleOutOfRange { beta });
            }
            Ok(FoldResult {
                beta_canonical: 0.0,
                mirror: false,
                add_half_turn: false,
                region: 1,
            })
        }
        SymmetrySpec::Symmetric { alpha, .. } => {
            let region = classify_region(beta, spec)?;
            let b = beta.rem_euclid(alpha);
            let (beta_canonical, mirror) = if region == 1 {
                (b, false)
            } else {
                (alpha - b, true)
            };
            Ok(FoldResult {
                beta_canonical,
                mirror,
                add_half_turn: false,
                region,
            })
        }
        SymmetrySpec::QuasiSymmetric { alpha, .. } => {
            let region = classify_region(beta, spec)?;
            let add_half_turn = beta >= alpha;
            let b = beta.rem_euclid(alpha);
            let (beta_canonical, mirror) = if b < alpha / 2.0 {
                (b, false)
            } else {
                (alpha - b, true)
            };
            Ok(FoldResult {
                beta_canonical,
                mirror,
                add_half_turn,
                region,
            })
        }
    }
}

/// Exact inverse of [`fold_rotation`] modulo the object's pose
/// equivalence (α for symmetric objects, 2π for quasi-symmetric).
pub fn unfold_rotation(fr: &FoldResult, spec: &SymmetrySpec) -> f64 {
    match *spec {
        SymmetrySpec::Asymmetric => fr.beta_canonical,
        SymmetrySpec::Revolution { .. } => 0.0,
        SymmetrySpec::Symmetric { alpha, .. } => {
            if fr.mirror {
                alpha - fr.beta_canonical
            } else {
                fr.beta_canonical
            }
        }
        SymmetrySpec::QuasiSymmetric { alpha, .. } => {
            let b = if fr.mirror {
                alpha - fr.beta_canonical
            } else {
                fr.beta_canonical
            };
            if fr.add_half_turn {
                b + alpha
            } else {
                b
            }
        }
    }
}

/// Mirrors 2D points left–right about the vertical line x = cx.
pub fn mirror_points_x(points: &[Vector2<f64>], cx: f64) -> Vec<Vector2<f64>> {
    points
        .iter()
        .map(|p| Vector2::new(2.0 * cx - p.x, p.y))
        .collect()
}

/// Index permutation relating corner prediction slots before and after a
/// left–right mirror: mirroring swaps the min-x and max-x corners, i.e.
/// flips bit 0 of the canonical corner index.
pub fn corner_permutation_under_mirror(_box: &BoxCorners3D) -> [usize; 8] {
    [1, 0, 3, 2, 5, 4, 7, 6]
}

/// Mirrors a corner prediction back into the un-mirrored image: each
/// point is reflected about x = cx and the prediction slots are permuted
/// so that slot i again refers to box corner i. Involution.
pub fn mirror_corner_projection(corners: &CornerProjection, cx: f64) -> CornerProjection {
    let perm = [1, 0, 3, 2, 5, 4, 7, 6];
    let mut points = [Vector2::zeros(); 8];
    for (i, p) in points.iter_mut().enumerate() {
        let src = corners.points[perm[i]];
        *p = Vector2::new(2.0 * cx - src.x, src.y);
    }
    CornerProjection { points }
}

/// Rotation angle about a fixed object-frame axis, in [0, 2π).
///
/// Uses the swing–twist decomposition: the returned angle β is the unique
/// one such that `r = swing · Rot_axis(β)` with the swing containing no
/// rotation about `axis`.
pub fn rotation_angle_about_axis(r: &Matrix3<f64>, axis: Vector3<f64>) -> f64 {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let v = q.vector();
    let d = v.dot(&axis.normalize());
    let beta = 2.0 * d.atan2(q.w);
    beta.rem_euclid(TWO_PI)
}

/// Run-time region decision for a frame.
///
/// The trained classifier of the full system is out of scope; the two
/// implementations here are the ground-truth-angle classifier (for
/// synthetic evaluation) and a lookup into per-frame labels read from a
/// file.
pub trait RegionClassifier {
    fn classify(
        &self,
        frame: u64,
        gt_rotation: &Matrix3<f64>,
        spec: &SymmetrySpec,
    ) -> Result<u8, SymmetryError>;
}

/// Classifier that computes the region from the ground-truth rotation.
#[derive(Debug, Default, Clone, Copy)]
pub struct GroundTruthClassifier;

impl RegionClassifier for GroundTruthClassifier {
    fn classify(
        &self,
        _frame: u64,
        gt_rotation: &Matrix3<f64>,
        spec: &SymmetrySpec,
    ) -> Result<u8, SymmetryError> {
        let axis = spec.axis().ok_or(SymmetryError::UnsupportedKind {
            op: "classify",
            kind: "asymmetric",
        })?;
        let beta = rotation_angle_about_axis(gt_rotation, axis);
        classify_region(beta, spec)
    }
}

/// Classifier backed by per-frame region labels.
#[derive(Debug, Default, Clone)]
pub struct FileRegionLabels {
    labels: HashMap<u64, u8>,
}

impl FileRegionLabels {
    pub fn new(labels: HashMap<u64, u8>) -> Self {
        Self { labels }
    }
}

impl RegionClassifier for FileRegionLabels {
    fn classify(
        &self,
        frame: u64,
        _gt_rotation: &Matrix3<f64>,
        _spec: &SymmetrySpec,
    ) -> Result<u8, SymmetryError> {
        self.labels
            .get(&frame)
            .copied()
            .ok_or(SymmetryError::MissingRegionLabel { frame })
    }
}

/// Image mirror direction. Only the vertical-axis (left–right) variant is
/// implemented; selecting `Horizontal` is an error at configuration time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MirrorAxis {
    Vertical,
    Horizontal,
}

impl MirrorAxis {
    pub fn require_supported(self) -> Result<(), SymmetryError> {
        match self {
            MirrorAxis::Vertical => Ok(()),
            MirrorAxis::Horizontal => Err(SymmetryError::HorizontalMirrorUnimplemented),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn z_axis() -> Vector3<f64> {
        Vector3::new(0.0, 0.0, 1.0)
    }

    #[test]
    fn classify_examples() {
        let sym = SymmetrySpec::symmetric(PI, z_axis()).unwrap();
        assert_eq!(classify_region(120f64.to_radians(), &sym).unwrap(), 2);
        assert_eq!(classify_region(0.0, &sym).unwrap(), 1);

        let quasi = SymmetrySpec::quasi_symmetric(PI, z_axis()).unwrap();
        assert_eq!(classify_region(200f64.to_radians(), &quasi).unwrap(), 3);
        assert_eq!(classify_region(100f64.to_radians(), &quasi).unwrap(), 2);
        assert_eq!(classify_region(280f64.to_radians(), &quasi).unwrap(), 4);
    }

    #[test]
    fn classify_domain_errors() {
        let sym = SymmetrySpec::symmetric(PI, z_axis()).unwrap();
        assert!(classify_region(-0.1, &sym).is_err());
        assert!(classify_region(TWO_PI, &sym).is_err());
        assert!(classify_region(1.0, &SymmetrySpec::Asymmetric).is_err());
    }

    #[test]
    fn fold_examples() {
        let sym = SymmetrySpec::symmetric(PI, z_axis()).unwrap();
        let f = fold_rotation(120f64.to_radians(), &sym).unwrap();
        assert_relative_eq!(f.beta_canonical, 60f64.to_radians(), epsilon = 1e-12);
        assert!(f.mirror && !f.add_half_turn);

        let f = fold_rotation(30f64.to_radians(), &sym).unwrap();
        assert_relative_eq!(f.beta_canonical, 30f64.to_radians(), epsilon = 1e-12);
        assert!(!f.mirror);

        let quasi = SymmetrySpec::quasi_symmetric(PI, z_axis()).unwrap();
        let f = fold_rotation(300f64.to_radians(), &quasi).unwrap();
        assert_relative_eq!(f.beta_canonical, 60f64.to_radians(), epsilon = 1e-9);
        assert!(f.mirror && f.add_half_turn);
        assert_eq!(f.region, 4);
    }

    #[test]
    fn unfold_examples() {
        let sym = SymmetrySpec::symmetric(PI, z_axis()).unwrap();
        let beta = unfold_rotation(
            &FoldResult {
                beta_canonical: 60f64.to_radians(),
                mirror: true,
                add_half_turn: false,
                region: 2,
            },
            &sym,
        );
        assert_relative_eq!(beta, 120f64.to_radians(), epsilon = 1e-12);

        let quasi = SymmetrySpec::quasi_symmetric(PI, z_axis()).unwrap();
        let beta = unfold_rotation(
            &FoldResult {
                beta_canonical: 60f64.to_radians(),
                mirror: true,
                add_half_turn: true,
                region: 4,
            },
            &quasi,
        );
        assert_relative_eq!(beta, 300f64.to_radians(), epsilon = 1e-9);

        let rev = SymmetrySpec::revolution(z_axis()).unwrap();
        assert_eq!(
            unfold_rotation(
                &FoldResult {
                    beta_canonical: 0.0,
                    mirror: false,
                    add_half_turn: false,
                    region: 1,
                },
                &rev
            ),
            0.0
        );
    }

    #[test]
    fn fold_unfold_round_trip_all_kinds() {
        let mut rng = StdRng::seed_from_u64(42);
        let specs = [
            SymmetrySpec::Asymmetric,
            SymmetrySpec::revolution(z_axis()).unwrap(),
            SymmetrySpec::symmetric(PI / 2.0, z_axis()).unwrap(),
            SymmetrySpec::quasi_symmetric(PI, z_axis()).unwrap(),
        ];
        for spec in &specs {
            for _ in 0..25_000 {
                let beta: f64 = rng.gen_range(0.0..TWO_PI);
                let fold = fold_rotation(beta, spec).unwrap();
                // canonical range
                if let Some(alpha) = spec.alpha() {
                    assert!(fold.beta_canonical >= 0.0 && fold.beta_canonical <= alpha / 2.0);
                }
                let back = unfold_rotation(&fold, spec);
                let modulus = match spec {
                    SymmetrySpec::Symmetric { alpha, .. } => *alpha,
                    SymmetrySpec::Revolution { .. } => f64::INFINITY, // any angle is equivalent
                    _ => TWO_PI,
                };
                if modulus.is_finite() {
                    let diff = (back - beta).rem_euclid(modulus);
                    let dist = diff.min(modulus - diff);
                    assert!(dist < 1e-9, "beta={beta} back={back} spec={spec:?}");
                }
            }
        }
    }

    #[test]
    fn mirror_points_example_and_involution() {
        let pts = [Vector2::new(370.0, 200.0)];
        let m = mirror_points_x(&pts, 320.0);
        assert_relative_eq!(m[0], Vector2::new(270.0, 200.0), epsilon = 1e-12);
        let back = mirror_points_x(&m, 320.0);
        assert_relative_eq!(back[0], pts[0], epsilon = 1e-12);
    }

    #[test]
    fn corner_permutation_is_bit_flip_involution() {
        let mesh = crate::shapes::cuboid("c", 0.2, 0.2, 0.2);
        let bb = crate::geometry::bbox_corners(&mesh);
        let perm = corner_permutation_under_mirror(&bb);
        assert_eq!(perm, [1, 0, 3, 2, 5, 4, 7, 6]);
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(perm[p], i);
            assert_eq!(p, i ^ 1);
        }
    }

    #[test]
    fn mirror_corner_projection_is_involution() {
        let mut rng = StdRng::seed_from_u64(9);
        let mut points = [Vector2::zeros(); 8];
        for p in &mut points {
            *p = Vector2::new(rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0));
        }
        let c = CornerProjection { points };
        let back = mirror_corner_projection(&mirror_corner_projection(&c, 320.0), 320.0);
        for i in 0..8 {
            assert_relative_eq!(back.points[i], c.points[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn twist_angle_of_pure_axis_rotation() {
        for &beta in &[0.0, 0.4, PI / 2.0, PI, 4.2, TWO_PI - 1e-6] {
            let r = crate::geometry::rot_from_expmap(z_axis() * beta);
            let got = rotation_angle_about_axis(&r, z_axis());
            let diff = (got - beta).rem_euclid(TWO_PI);
            assert!(diff.min(TWO_PI - diff) < 1e-9, "beta={beta} got={got}");
        }
    }

    #[test]
    fn twist_angle_survives_swing() {
        // compose an off-axis swing with a known twist: the twist must be
        // recovered regardless of the swing
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..200 {
            let beta = rng.gen_range(0.0..TWO_PI);
            let swing_axis = Vector3::new(rng.gen_range(-1.0..1.0), 0.0, 0.0)
                + Vector3::new(0.0, rng.gen_range(-1.0..1.0), 0.0);
            if swing_axis.norm() < 1e-3 {
                continue;
            }
            let swing = crate::geometry::rot_from_expmap(
                swing_axis.normalize() * rng.gen_range(0.0..1.2),
            );
            let r = swing * crate::geometry::rot_from_expmap(z_axis() * beta);
            let got = rotation_angle_about_axis(&r, z_axis());
            let diff = (got - beta).rem_euclid(TWO_PI);
            assert!(diff.min(TWO_PI - diff) < 1e-9, "beta={beta} got={got}");
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"kind":"symmetric","alpha_deg":90,"axis":[0,0,1]}"#;
        let spec: SymmetrySpec = serde_json::from_str(json).unwrap();
        match spec {
            SymmetrySpec::Symmetric { alpha, axis } => {
                assert_relative_eq!(alpha, PI / 2.0, epsilon = 1e-12);
                assert_relative_eq!(axis, z_axis(), epsilon = 1e-12);
            }
            _ => panic!("wrong kind"),
        }
        let back: SymmetrySpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);

        assert!(serde_json::from_str::<SymmetrySpec>(
            r#"{"kind":"symmetric","alpha_deg":100,"axis":[0,0,1]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<SymmetrySpec>(r#"{"kind":"asymmetric"}"#).is_ok());
    }

    #[test]
    fn horizontal_mirror_is_rejected() {
        assert!(MirrorAxis::Vertical.require_supported().is_ok());
        assert!(MirrorAxis::Horizontal.require_supported().is_err());
    }
}
