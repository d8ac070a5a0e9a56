//! Software rasterization of a mesh into a binary silhouette mask.
//!
//! A pixel is active when its center (x + 0.5, y + 0.5) lies inside the
//! projection of at least one triangle whose three vertices are all in
//! front of the near plane. Triangles crossing the near plane are
//! discarded, not clipped — acceptable for convex desk-scale objects.
//! There is no face culling: silhouettes need both windings.

use crate::geometry::{CameraIntrinsics, GeometryError, MeshModel, Pose};
use nalgebra::Vector2;
use std::io::Write;
use thiserror::Error;

/// Near-plane depth in meters below which triangle vertices are culled.
pub const NEAR_PLANE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("no triangle lies fully in front of the near plane")]
    BehindCamera,
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("mask is empty")]
    EmptyMask,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Binary image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[(y * self.width + x) as usize] = value;
    }

    /// Number of active pixels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Mean of active pixel centers, or `None` when empty.
    pub fn centroid(&self) -> Option<Vector2<f64>> {
        let mut sum = Vector2::zeros();
        let mut n = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sum += Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                    n += 1;
                }
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Left–right mirrored copy (column x ↔ column width−1−x).
    pub fn mirrored_lr(&self) -> Self {
        let mut out = Self::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }
}

/// Renders the object's binary silhouette as seen from `pose`.
pub fn render_mask(
    mesh: &MeshModel,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<BinaryImage, RenderError> {
    if mesh.triangles.is_empty() {
        return Err(RenderError::EmptyMesh);
    }
    let rotation = pose.rotation();
    let camera_pts: Vec<_> = mesh
        .vertices
        .iter()
        .map(|&v| rotation * v + pose.t)
        .collect();

    let mut image = BinaryImage::new(k.width, k.height);
    let mut any_in_front = false;
    for tri in &mesh.triangles {
        let p = [camera_pts[tri[0]], camera_pts[tri[1]], camera_pts[tri[2]]];
        if p.iter().any(|q| q.z <= NEAR_PLANE) {
            continue;
        }
        any_in_front = true;
        let v: Vec<Vector2<f64>> = p
            .iter()
            .map(|q| Vector2::new(k.fx * q.x / q.z + k.cx, k.fy * q.y / q.z + k.cy))
            .collect();
        fill_triangle(&mut image, v[0], v[1], v[2]);
    }
    if !any_in_front {
        return Err(RenderError::BehindCamera);
    }
    Ok(image)
}

/// Signed double area of (a, b, p); positive when p is on the interior
/// side of a→b for our normalized winding (screen coordinates, y down).
#[inline]
fn edge_value(a: Vector2<f64>, b: Vector2<f64>, p: Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Boundary ownership: a pixel center exactly on an edge belongs to the
/// triangle for which that edge is a top edge (horizontal, interior
/// below) or a left edge (going up in y-down coordinates).
#[inline]
fn is_top_left(a: Vector2<f64>, b: Vector2<f64>) -> bool {
    (a.y == b.y && b.x > a.x) || b.y < a.y
}

fn fill_triangle(image: &mut BinaryImage, v0: Vector2<f64>, mut v1: Vector2<f64>, mut v2: Vector2<f64>) {
    let orientation = edge_value(v0, v1, v2);
    if orientation == 0.0 {
        return; // degenerate sliver
    }
    if orientation < 0.0 {
        std::mem::swap(&mut v1, &mut v2);
    }

    let min_x = v0.x.min(v1.x).min(v2.x).floor().max(0.0) as i64;
    let max_x = v0.x.max(v1.x).max(v2.x).ceil().min(image.width as f64) as i64;
    let min_y = v0.y.min(v1.y).min(v2.y).floor().max(0.0) as i64;
    let max_y = v0.y.max(v1.y).max(v2.y).ceil().min(image.height as f64) as i64;
    if min_x >= max_x || min_y >= max_y {
        return;
    }

    let edges = [(v0, v1), (v1, v2), (v2, v0)];
    let inclusive = [
        is_top_left(v0, v1),
        is_top_left(v1, v2),
        is_top_left(v2, v0),
    ];
    for y in min_y..max_y {
        for x in min_x..max_x {
            let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let mut inside = true;
            for (e, &incl) in edges.iter().zip(&inclusive) {
                let w = edge_value(e.0, e.1, p);
                if w < 0.0 || (w == 0.0 && !incl) {
                    inside = false;
                    break;
                }
            }
            if inside {
                image.set(x as u32, y as u32, true);
            }
        }
    }
}

/// Fraction of the object mask not hidden by the occluder mask:
/// |mask ∧ ¬occluded| / |mask|.
pub fn mask_visible_fraction(
    mask: &BinaryImage,
    occluded: &BinaryImage,
) -> Result<f64, RenderError> {
    if (mask.width, mask.height) != (occluded.width, occluded.height) {
        return Err(RenderError::DimensionMismatch {
            a: (mask.width, mask.height),
            b: (occluded.width, occluded.height),
        });
    }
    let total = mask.count();
    if total == 0 {
        return Err(RenderError::EmptyMask);
    }
    let visible = mask
        .data
        .iter()
        .zip(occluded.data.iter())
        .filter(|(&m, &o)| m && !o)
        .count();
    Ok(visible as f64 / total as f64)
}

/// Writes the mask as a binary PGM (P5, maxval 255, active = 255).
pub fn write_pgm<W: Write>(mask: &BinaryImage, mut out: W) -> std::io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", mask.width, mask.height)?;
    let bytes: Vec<u8> = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    out.write_all(&bytes)
}
