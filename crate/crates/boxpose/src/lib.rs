//! boxpose — a 6D object-pose estimation and evaluation toolkit.
//!
//! The pose of a rigid object is represented indirectly by the 2D image
//! projections of the eight corners of its 3D bounding box. Corner
//! predictions (from files or from the synthetic oracle) are turned into
//! poses with a PnP solver, optionally refined with a render-and-update
//! loop, and scored with the standard pose-accuracy metrics.
//!
//! Pipeline stages, one module each:
//!
//! 1. [`geometry`] — rigid transforms, axis-angle rotations, pinhole
//!    projection, bounding boxes.
//! 2. [`segmentation`] — score-map post-processing that locates objects in
//!    2D (binarize, largest component, coarse-to-fine fusion, centroid).
//! 3. [`pnp`] — pose recovery from 2D–3D corner correspondences
//!    (DLT initialization + Levenberg–Marquardt refinement).
//! 4. [`symmetry`] — rotation-angle folding and the image-mirroring trick
//!    for objects with an axis of rotational symmetry.
//! 5. [`render`] — binary silhouette rasterization.
//! 6. [`refine`] — iterative corner-update refinement loop.
//! 7. [`metrics`] — 2D-projection, ADD/ADI and 5cm 5° correctness tests.
//! 8. [`synth`] — seeded synthetic ground-truth generation.
//! 9. [`formats`] / [`harness`] — dataset I/O, end-to-end evaluation and
//!    report aggregation.

pub mod formats;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod pnp;
pub mod refine;
pub mod render;
pub mod segmentation;
pub mod shapes;
pub mod symmetry;
pub mod synth;

pub use geometry::{BoxCorners3D, CameraIntrinsics, CornerProjection, MeshModel, Pose};
pub use symmetry::{FoldResult, SymmetrySpec};
