//! Deterministic post-processing of coarse/fine segmentation score maps:
//! binarize, keep the largest connected component, gate a finer score
//! map with it, and read off the object's 2D center as the mask
//! centroid.
//!
//! Score maps live on a fixed lattice over a 512×384 working image:
//! the coarse grid is 32×24 (16 px cells), the fine grid 64×48 (8 px
//! cells, 2×2 fine cells per coarse cell). The networks producing the
//! scores are out of scope; scores arrive from files or from the
//! synthetic generator.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COARSE_WIDTH: usize = 32;
pub const COARSE_HEIGHT: usize = 24;
pub const FINE_WIDTH: usize = 64;
pub const FINE_HEIGHT: usize = 48;
/// Working-image size the score lattices are defined over.
pub const WORKING_WIDTH: u32 = 512;
pub const WORKING_HEIGHT: u32 = 384;
/// Pixel pitch of one cell in each lattice.
pub const COARSE_CELL_PX: f64 = 16.0;
pub const FINE_CELL_PX: f64 = 8.0;

pub const DEFAULT_TAU1: f64 = 0.5;
pub const DEFAULT_TAU2: f64 = 0.5;
pub const DEFAULT_MIN_CELLS: usize = 2;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("score grid must be {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    BadDimensions {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("score {value} at cell ({col},{row}) outside [0, 1]")]
    ScoreOutOfRange { col: usize, row: usize, value: f64 },
    #[error("threshold {0} outside (0, 1)")]
    BadThreshold(f64),
    #[error("mask is empty")]
    EmptyMask,
    #[error("coarse mask is active but no fine scores were provided")]
    MissingFineScores,
}

/// Dense grid of scores in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScoreGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, SegmentationError> {
        assert_eq!(data.len(), width * height);
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(SegmentationError::ScoreOutOfRange {
                    col: i % width,
                    row: i / width,
                    value: v,
                });
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn expect_dims(&self, w: usize, h: usize) -> Result<(), SegmentationError> {
        if self.width != w || self.height != h {
            return Err(SegmentationError::BadDimensions {
                expected_w: w,
                expected_h: h,
                got_w: self.width,
                got_h: self.height,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }
}

/// Binary cell mask on the same lattices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl CellMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        self.data[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&b| !b)
    }

    /// True when every active cell of `self` is also active in `other`.
    pub fn is_subset_of(&self, other: &CellMask) -> bool {
        self.data
            .iter()
            .zip(other.data.iter())
            .all(|(&a, &b)| !a || b)
    }

    pub fn active_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(col, row) {
                    out.push((col, row));
                }
            }
        }
        out
    }
}

/// Thresholds a score grid: a cell is active iff its score is strictly
/// greater than `tau`.
pub fn binarize(scores: &ScoreGrid, tau: f64) -> Result<CellMask, SegmentationError> {
    if !tau.is_finite() || tau <= 0.0 || tau >= 1.0 {
        return Err(SegmentationError::BadThreshold(tau));
    }
    let mut mask = CellMask::new(scores.width, scores.height);
    for row in 0..scores.height {
        for col in 0..scores.width {
            mask.set(col, row, scores.get(col, row) > tau);
        }
    }
    Ok(mask)
}

/// Keeps only the largest 4-connected component. Ties are broken in
/// favor of the component whose smallest row-major cell index is
/// smallest. An empty mask stays empty.
pub fn largest_component(mask: &CellMask) -> CellMask {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![usize::MAX; w * h];
    let mut sizes: Vec<usize> = Vec::new();
    let mut queue = Vec::new();
    for start in 0..w * h {
        if !mask.data[start] || labels[start] != usize::MAX {
            continue;
        }
        // new component; `start` is its minimum row-major index because
        // the scan itself is row-major
        let label = sizes.len();
        let mut size = 0usize;
        queue.push(start);
        labels[start] = label;
        while let Some(idx) = queue.pop() {
            size += 1;
            let (col, row) = (idx % w, idx / w);
            let mut try_push = |c: usize, r: usize| {
                let j = r * w + c;
                if mask.data[j] && labels[j] == usize::MAX {
                    labels[j] = label;
                    queue.push(j);
                }
            };
            if col > 0 {
                try_push(col - 1, row);
            }
            if col + 1 < w {
                try_push(col + 1, row);
            }
            if row > 0 {
                try_push(col, row - 1);
            }
            if row + 1 < h {
                try_push(col, row + 1);
            }
        }
        sizes.push(size);
    }
    if sizes.is_empty() {
        return mask.clone();
    }
    // earlier label wins ties (smaller first cell index)
    let best = (0..sizes.len())
        .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
        .unwrap();
    let mut out = CellMask::new(w, h);
    for (idx, &label) in labels.iter().enumerate() {
        if label == best {
            out.data[idx] = true;
        }
    }
    out
}

/// Visibility decision: the object counts as present when the largest
/// component has at least `min_cells` cells.
pub fn presence(mask: &CellMask, min_cells: usize) -> bool {
    largest_component(mask).count() >= min_cells
}

/// Gates fine scores with the coarse mask: a fine cell is active iff its
/// parent coarse cell (2×2 fine cells per coarse cell) is active and the
/// fine score is strictly greater than `tau2`.
pub fn refine(
    coarse_mask: &CellMask,
    fine_scores: &ScoreGrid,
    tau2: f64,
) -> Result<CellMask, SegmentationError> {
    if !tau2.is_finite() || tau2 <= 0.0 || tau2 >= 1.0 {
        return Err(SegmentationError::BadThreshold(tau2));
    }
    fine_scores.expect_dims(FINE_WIDTH, FINE_HEIGHT)?;
    if coarse_mask.width * 2 != FINE_WIDTH || coarse_mask.height * 2 != FINE_HEIGHT {
        return Err(SegmentationError::BadDimensions {
            expected_w: COARSE_WIDTH,
            expected_h: COARSE_HEIGHT,
            got_w: coarse_mask.width,
            got_h: coarse_mask.height,
        });
    }
    let mut out = CellMask::new(FINE_WIDTH, FINE_HEIGHT);
    for row in 0..FINE_HEIGHT {
        for col in 0..FINE_WIDTH {
            let gated = coarse_mask.get(col / 2, row / 2);
            out.set(col, row, gated && fine_scores.get(col, row) > tau2);
        }
    }
    Ok(out)
}

/// Centroid of the active fine cells in working-image pixels; fine cell
/// (c, r) has its center at (8c + 4, 8r + 4).
pub fn centroid(mask: &CellMask) -> Result<Vector2<f64>, SegmentationError> {
    let mut sum = Vector2::zeros();
    let mut n = 0usize;
    for row in 0..mask.height {
        for col in 0..mask.width {
            if mask.get(col, row) {
                sum += Vector2::new(
                    FINE_CELL_PX * col as f64 + FINE_CELL_PX / 2.0,
                    FINE_CELL_PX * row as f64 + FINE_CELL_PX / 2.0,
                );
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(SegmentationError::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// Parameters of the post-processing pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub tau1: f64,
    pub tau2: f64,
    pub min_cells: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            tau1: DEFAULT_TAU1,
            tau2: DEFAULT_TAU2,
            min_cells: DEFAULT_MIN_CELLS,
        }
    }
}

/// Result of the full per-object pipeline.
///
/// When present, every active cell of `mask` lies inside the footprint
/// of the single selected coarse component (the fine mask itself may
/// still have gaps where fine scores fell below τ₂).
#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub object: String,
    pub present: bool,
    pub mask: CellMask,
    pub center: Option<Vector2<f64>>,
}

/// Full pipeline: binarize coarse scores, keep the largest component,
/// decide presence, gate the fine scores and take the centroid.
///
/// A frame whose coarse component passes the size test but whose gated
/// fine mask comes out empty is reported absent — there is nothing to
/// take a centroid of.
pub fn segment_object(
    object: impl Into<String>,
    coarse_scores: &ScoreGrid,
    fine_scores: Option<&ScoreGrid>,
    params: &SegmentationParams,
) -> Result<DetectionResult, SegmentationError> {
    coarse_scores.expect_dims(COARSE_WIDTH, COARSE_HEIGHT)?;
    let object = object.into();
    let coarse = largest_component(&binarize(coarse_scores, params.tau1)?);
    if coarse.count() < params.min_cells {
        return Ok(DetectionResult {
            object,
            present: false,
            mask: CellMask::new(FINE_WIDTH, FINE_HEIGHT),
            center: None,
        });
    }
    let fine_scores = fine_scores.ok_or(SegmentationError::MissingFineScores)?;
    let mask = refine(&coarse, fine_scores, params.tau2)?;
    if mask.is_empty() {
        return Ok(DetectionResult {
            object,
            present: false,
            mask,
            center: None,
        });
    }
    let center = centroid(&mask)?;
    Ok(DetectionResult {
        object,
        present: true,
        mask,
        center: Some(center),
    })
}
