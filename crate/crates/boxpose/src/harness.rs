//! End-to-end evaluation: per-frame corner → pose recovery with symmetry
//! unfolding and optional refinement, the three correctness metrics, and
//! aggregation into per-object pass-rate tables.
//!
//! Frames are scored in parallel and merged in frame order, so reports
//! are byte-identical no matter how many worker threads run.

use crate::formats::{FormatError, FrameRecord, LoadedDataset};
use crate::geometry::{bbox_corners, project, BoxCorners3D, CameraIntrinsics, MeshModel, Pose};
use crate::metrics::{
    self, MetricOutcome, MetricValue, DEFAULT_ADD_FRACTION, DEFAULT_PROJECTION_THRESHOLD_PX,
    DEFAULT_ROTATION_THRESHOLD_DEG, DEFAULT_TRANSLATION_THRESHOLD_CM,
};
use crate::pnp::{solve_pnp, Correspondences};
use crate::refine::{
    refine_pose, CornerUpdater, DampedOracleUpdater, FileCornerDeltas, DEFAULT_ITERATIONS,
};
use crate::symmetry::{
    classify_region, mirror_corner_projection, rotation_angle_about_axis, MirrorAxis,
    SymmetryError, SymmetrySpec,
};
use crate::synth::{SynthConfig, SynthFrame, SynthScene};
use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Frames with at most this visible fraction are excluded from scoring.
pub const DEFAULT_MIN_VISIBILITY: f64 = 0.1;
/// Symmetry-axis tilt from the image vertical beyond which the mirror
/// trick is on shaky ground; such frames are counted in the report.
pub const TILT_WARNING_DEG: f64 = 30.0;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error("frame {frame} ({object}): {message}")]
    FrameFailure {
        frame: u64,
        object: String,
        message: String,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where refinement corner updates come from.
#[derive(Debug, Clone, Default)]
pub enum RefineSource {
    /// No refinement pass.
    #[default]
    Off,
    /// Damped oracle against the ground-truth corner projections.
    Oracle { gamma: f64 },
    /// Per-frame deltas read from a file.
    Deltas(HashMap<(u64, usize), [Vector2<f64>; 8]>),
}

/// Evaluation switches; defaults match the metric definitions.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub threshold_px: f64,
    pub add_fraction: f64,
    pub cm_threshold: f64,
    pub deg_threshold: f64,
    /// Refinement iterations (used when `refine` is not `Off`).
    pub iterations: usize,
    pub refine: RefineSource,
    /// Worker threads; 0 uses the global default.
    pub jobs: usize,
    /// Turn the first frame-level failure into a hard error.
    pub strict: bool,
    /// Uniformly subsample metric vertices of large meshes.
    pub max_vertices: Option<usize>,
    /// Seed for the vertex subsample.
    pub seed: u64,
    pub mirror_axis: MirrorAxis,
    pub min_visibility: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            threshold_px: DEFAULT_PROJECTION_THRESHOLD_PX,
            add_fraction: DEFAULT_ADD_FRACTION,
            cm_threshold: DEFAULT_TRANSLATION_THRESHOLD_CM,
            deg_threshold: DEFAULT_ROTATION_THRESHOLD_DEG,
            iterations: DEFAULT_ITERATIONS,
            refine: RefineSource::Off,
            jobs: 0,
            strict: false,
            max_vertices: None,
            seed: 0,
            mirror_axis: MirrorAxis::Vertical,
            min_visibility: DEFAULT_MIN_VISIBILITY,
        }
    }
}

/// Everything evaluation needs to know about one object.
#[derive(Debug, Clone)]
pub struct ObjectContext {
    pub mesh: MeshModel,
    /// Vertex set the metrics run on (subsampled when requested).
    pub metric_mesh: MeshModel,
    pub spec: SymmetrySpec,
    pub corners3d: BoxCorners3D,
    pub diameter: f64,
}

impl ObjectContext {
    pub fn build(
        mesh: MeshModel,
        spec: SymmetrySpec,
        max_vertices: Option<usize>,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        let corners3d = bbox_corners(&mesh);
        let diameter = crate::geometry::diameter(&mesh)
            .map_err(|e| HarnessError::Format(FormatError::Geometry(e)))?;
        let metric_mesh = match max_vertices {
            Some(n) if mesh.vertices.len() > n => subsample_mesh(&mesh, n, seed),
            _ => mesh.clone(),
        };
        Ok(Self {
            mesh,
            metric_mesh,
            spec,
            corners3d,
            diameter,
        })
    }
}

/// Deterministic uniform vertex subsample (metrics only; the bounding
/// box and diameter always come from the full mesh).
fn subsample_mesh(mesh: &MeshModel, n: usize, seed: u64) -> MeshModel {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let mut indices: Vec<usize> = (0..mesh.vertices.len()).collect();
    indices.shuffle(&mut rng);
    indices.truncate(n);
    indices.sort_unstable();
    let vertices = indices.iter().map(|&i| mesh.vertices[i]).collect();
    MeshModel::new(mesh.name.clone(), vertices, vec![]).expect("subsample is non-empty")
}

/// Scores of one evaluated frame.
#[derive(Debug, Clone, Serialize)]
pub struct FrameScores {
    pub est_pose: Pose,
    pub projection: MetricOutcome,
    pub projection_error_px: f64,
    pub pose6d: MetricOutcome,
    pub pose6d_error_m: f64,
    pub cm_deg: MetricOutcome,
    pub translation_cm: f64,
    pub rotation_deg: f64,
    pub tilt_warning: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FrameStatus {
    Evaluated(FrameScores),
    /// Visibility at or below the cutoff.
    Filtered,
    Failed {
        message: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameResult {
    pub frame: u64,
    pub object: String,
    #[serde(flatten)]
    pub status: FrameStatus,
}

fn mirror_and_add_flags(spec: &SymmetrySpec, region: u8) -> (bool, bool) {
    match spec {
        SymmetrySpec::Symmetric { .. } => (region == 2, false),
        SymmetrySpec::QuasiSymmetric { .. } => (region == 2 || region == 4, region >= 3),
        _ => (false, false),
    }
}

/// Recovers a pose from one frame record: mirror the corners back if the
/// region label says so, solve PnP, restore the half turn for
/// quasi-symmetric regions 3/4, then optionally refine.
pub fn solve_frame(
    record: &FrameRecord,
    ctx: &ObjectContext,
    k: &CameraIntrinsics,
    options: &EvalOptions,
    region_override: Option<u8>,
) -> Result<Pose, String> {
    if let Some(pose) = record.pose {
        // direct-pose baseline records bypass PnP entirely
        return Ok(pose);
    }
    let mut corners = record
        .corner_projection()
        .ok_or_else(|| "record has neither corners nor pose".to_string())?;

    let mut add_half_turn = false;
    if ctx.spec.alpha().is_some() {
        let region = match region_override.or(record.region) {
            Some(r) => r,
            None => {
                // ground-truth-angle classifier fallback
                let axis = ctx.spec.axis().expect("symmetric specs have an axis");
                let beta = rotation_angle_about_axis(&record.gt.rotation(), axis);
                classify_region(beta, &ctx.spec).map_err(|e| e.to_string())?
            }
        };
        let (mirror, add) = mirror_and_add_flags(&ctx.spec, region);
        add_half_turn = add;
        if mirror {
            corners = mirror_corner_projection(&corners, k.cx);
        }
    }

    let solution = solve_pnp(&Correspondences::from_box(&ctx.corners3d, &corners, *k))
        .map_err(|e| e.to_string())?;
    let mut pose = solution.pose;
    if add_half_turn {
        let axis = ctx.spec.axis().expect("quasi specs have an axis");
        let alpha = ctx.spec.alpha().expect("quasi specs have an angle");
        pose = pose.rotated_about_axis(axis, alpha);
    }

    match &options.refine {
        RefineSource::Off => {}
        source => {
            if options.iterations > 0 {
                let oracle_target;
                let deltas_ref;
                let updater: &dyn CornerUpdater = match source {
                    RefineSource::Oracle { gamma } => {
                        let mut points = [Vector2::zeros(); 8];
                        for (p, &m) in points.iter_mut().zip(ctx.corners3d.corners.iter()) {
                            *p = project(k, &record.gt, m).map_err(|e| e.to_string())?;
                        }
                        oracle_target = DampedOracleUpdater {
                            gamma: *gamma,
                            target: crate::geometry::CornerProjection { points },
                        };
                        &oracle_target
                    }
                    RefineSource::Deltas(map) => {
                        deltas_ref = FileCornerDeltas::new(map.clone());
                        &deltas_ref
                    }
                    RefineSource::Off => unreachable!(),
                };
                let trace = refine_pose(
                    &pose,
                    &ctx.corners3d,
                    k,
                    &ctx.mesh,
                    updater,
                    options.iterations,
                    record.frame,
                )
                .map_err(|e| e.to_string())?;
                pose = trace.final_pose();
            }
        }
    }
    Ok(pose)
}

fn tilt_warning(spec: &SymmetrySpec, gt: &Pose) -> bool {
    let Some(axis) = spec.axis() else {
        return false;
    };
    let cam_axis = gt.rotation() * axis;
    let in_plane = (cam_axis.x * cam_axis.x + cam_axis.y * cam_axis.y).sqrt();
    if in_plane < 1e-9 {
        return true; // axis points along the optical axis
    }
    let tilt = cam_axis.x.abs().atan2(cam_axis.y.abs()).to_degrees();
    tilt > TILT_WARNING_DEG
}

fn score_frame(
    record: &FrameRecord,
    ctx: &ObjectContext,
    k: &CameraIntrinsics,
    options: &EvalOptions,
    region_override: Option<u8>,
) -> FrameStatus {
    if record.visibility.unwrap_or(1.0) <= options.min_visibility {
        return FrameStatus::Filtered;
    }
    let est = match solve_frame(record, ctx, k, options, region_override) {
        Ok(p) => p,
        Err(message) => return FrameStatus::Failed { message },
    };

    let projection =
        match metrics::metric_2d_projection(&est, &record.gt, k, &ctx.metric_mesh, options.threshold_px)
        {
            Ok(m) => m,
            Err(e) => {
                return FrameStatus::Failed {
                    message: e.to_string(),
                }
            }
        };
    let projection_error_px = match projection.value {
        MetricValue::Pixels(v) => v,
        _ => unreachable!(),
    };

    let threshold_m = options.add_fraction * ctx.diameter;
    let pose6d_error_m = if ctx.spec.is_ambiguous() {
        metrics::distance_adi(&est, &record.gt, &ctx.metric_mesh)
    } else {
        metrics::distance_add(&est, &record.gt, &ctx.metric_mesh)
    };
    let pose6d = MetricOutcome {
        value: MetricValue::Meters(pose6d_error_m),
        threshold: MetricValue::Meters(threshold_m),
        pass: pose6d_error_m < threshold_m,
    };

    let cm_deg = metrics::metric_5cm5deg(&est, &record.gt, options.cm_threshold, options.deg_threshold);
    let (translation_cm, rotation_deg) = match cm_deg.value {
        MetricValue::CmDeg { cm, deg } => (cm, deg),
        _ => unreachable!(),
    };

    FrameStatus::Evaluated(FrameScores {
        est_pose: est,
        projection,
        projection_error_px,
        pose6d,
        pose6d_error_m,
        cm_deg,
        translation_cm,
        rotation_deg,
        tilt_warning: tilt_warning(&ctx.spec, &record.gt),
    })
}

/// Per-object, per-metric aggregate.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub metric: String,
    pub unit: String,
    /// Percentage of scored (evaluated + failed) frames that passed.
    pub pass_rate_pct: f64,
    pub mean_error: f64,
    pub median_error: f64,
    /// Second error dimension (rotation, for the 5cm 5° metric).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_error_2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_error_2: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObjectReport {
    pub object: String,
    pub frames: usize,
    pub evaluated: usize,
    pub filtered: usize,
    pub failed: usize,
    pub metrics: Vec<MetricReport>,
}

/// Everything the run echoes so results stay comparable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub threshold_px: f64,
    pub add_fraction: f64,
    pub cm_threshold: f64,
    pub deg_threshold: f64,
    pub iterations: usize,
    pub refine: String,
    pub max_vertices: Option<usize>,
    pub seed: u64,
    pub min_visibility: f64,
    pub pnp_method: String,
    pub diameter_definition: String,
    pub rotation_error_definition: String,
    /// object id → which 6D-pose distance scored it.
    pub pose6d_metric: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub objects: Vec<ObjectReport>,
    pub total_frames: usize,
    pub evaluated_frames: usize,
    pub filtered_frames: usize,
    pub failed_frames: usize,
    /// Symmetric frames whose axis was strongly tilted away from the
    /// image vertical.
    pub tilt_warnings: usize,
    pub config: ConfigEcho,
}

fn median(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn metric_report(
    metric: &str,
    unit: &str,
    passes: usize,
    scored: usize,
    errors: &mut Vec<f64>,
    errors2: Option<&mut Vec<f64>>,
) -> MetricReport {
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = if errors.is_empty() {
        f64::NAN
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    };
    let (mean2, median2) = match errors2 {
        Some(e2) => {
            e2.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = if e2.is_empty() {
                f64::NAN
            } else {
                e2.iter().sum::<f64>() / e2.len() as f64
            };
            (Some(m), Some(median(e2)))
        }
        None => (None, None),
    };
    MetricReport {
        metric: metric.to_string(),
        unit: unit.to_string(),
        pass_rate_pct: if scored == 0 {
            0.0
        } else {
            100.0 * passes as f64 / scored as f64
        },
        mean_error: mean,
        median_error: median(errors),
        mean_error_2: mean2,
        median_error_2: median2,
    }
}

/// Evaluates frame records against their objects.
///
/// Frame-level errors mark the frame failed (counting against every
/// pass rate) unless `strict`, which aborts on the first one.
pub fn evaluate(
    frames: &[FrameRecord],
    intrinsics: &CameraIntrinsics,
    objects: &BTreeMap<String, ObjectContext>,
    region_labels: Option<&HashMap<u64, u8>>,
    options: &EvalOptions,
) -> Result<EvalReport, HarnessError> {
    options.mirror_axis.require_supported()?;
    for record in frames {
        if !objects.contains_key(&record.object) {
            return Err(HarnessError::Format(FormatError::Invalid(format!(
                "frame {} references unknown object `{}`",
                record.frame, record.object
            ))));
        }
    }

    let score_all = || -> Vec<FrameResult> {
        frames
            .par_iter()
            .map(|record| {
                let ctx = &objects[&record.object];
                let region_override = region_labels.and_then(|m| m.get(&record.frame)).copied();
                FrameResult {
                    frame: record.frame,
                    object: record.object.clone(),
                    status: score_frame(record, ctx, intrinsics, options, region_override),
                }
            })
            .collect()
    };
    let results = if options.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
            .install(score_all)
    } else {
        score_all()
    };

    if options.strict {
        for r in &results {
            if let FrameStatus::Failed { message } = &r.status {
                return Err(HarnessError::FrameFailure {
                    frame: r.frame,
                    object: r.object.clone(),
                    message: message.clone(),
                });
            }
        }
    }

    Ok(aggregate(&results, objects, options))
}

/// Aggregates per-frame results into the report (same input order ⇒
/// same output bytes).
pub fn aggregate(
    results: &[FrameResult],
    objects: &BTreeMap<String, ObjectContext>,
    options: &EvalOptions,
) -> EvalReport {
    struct Acc {
        frames: usize,
        evaluated: usize,
        filtered: usize,
        failed: usize,
        proj_pass: usize,
        pose6d_pass: usize,
        cmdeg_pass: usize,
        proj_errors: Vec<f64>,
        pose6d_errors: Vec<f64>,
        cm_errors: Vec<f64>,
        deg_errors: Vec<f64>,
        tilt: usize,
    }
    impl Acc {
        fn new() -> Self {
            Self {
                frames: 0,
                evaluated: 0,
                filtered: 0,
                failed: 0,
                proj_pass: 0,
                pose6d_pass: 0,
                cmdeg_pass: 0,
                proj_errors: Vec::new(),
                pose6d_errors: Vec::new(),
                cm_errors: Vec::new(),
                deg_errors: Vec::new(),
                tilt: 0,
            }
        }
    }

    let mut accs: BTreeMap<&str, Acc> = BTreeMap::new();
    for r in results {
        let acc = accs.entry(r.object.as_str()).or_insert_with(Acc::new);
        acc.frames += 1;
        match &r.status {
            FrameStatus::Filtered => acc.filtered += 1,
            FrameStatus::Failed { .. } => acc.failed += 1,
            FrameStatus::Evaluated(s) => {
                acc.evaluated += 1;
                acc.proj_pass += s.projection.pass as usize;
                acc.pose6d_pass += s.pose6d.pass as usize;
                acc.cmdeg_pass += s.cm_deg.pass as usize;
                acc.proj_errors.push(s.projection_error_px);
                acc.pose6d_errors.push(s.pose6d_error_m);
                acc.cm_errors.push(s.translation_cm);
                acc.deg_errors.push(s.rotation_deg);
                acc.tilt += s.tilt_warning as usize;
            }
        }
    }

    let mut object_reports = Vec::new();
    let (mut total, mut evaluated, mut filtered, mut failed, mut tilt) = (0, 0, 0, 0, 0);
    for (object, mut acc) in accs {
        let scored = acc.evaluated + acc.failed;
        let ambiguous = objects
            .get(object)
            .map(|c| c.spec.is_ambiguous())
            .unwrap_or(false);
        let pose6d_name = if ambiguous { "6d_pose_adi" } else { "6d_pose_add" };
        let metrics = vec![
            metric_report(
                "2d_projection",
                "px",
                acc.proj_pass,
                scored,
                &mut acc.proj_errors,
                None,
            ),
            metric_report(
                pose6d_name,
                "m",
                acc.pose6d_pass,
                scored,
                &mut acc.pose6d_errors,
                None,
            ),
            metric_report(
                "5cm_5deg",
                "cm,deg",
                acc.cmdeg_pass,
                scored,
                &mut acc.cm_errors,
                Some(&mut acc.deg_errors),
            ),
        ];
        total += acc.frames;
        evaluated += acc.evaluated;
        filtered += acc.filtered;
        failed += acc.failed;
        tilt += acc.tilt;
        object_reports.push(ObjectReport {
            object: object.to_string(),
            frames: acc.frames,
            evaluated: acc.evaluated,
            filtered: acc.filtered,
            failed: acc.failed,
            metrics,
        });
    }

    let pose6d_metric = objects
        .iter()
        .map(|(id, c)| {
            (
                id.clone(),
                if c.spec.is_ambiguous() { "adi" } else { "add" }.to_string(),
            )
        })
        .collect();

    EvalReport {
        objects: object_reports,
        total_frames: total,
        evaluated_frames: evaluated,
        filtered_frames: filtered,
        failed_frames: failed,
        tilt_warnings: tilt,
        config: ConfigEcho {
            threshold_px: options.threshold_px,
            add_fraction: options.add_fraction,
            cm_threshold: options.cm_threshold,
            deg_threshold: options.deg_threshold,
            iterations: options.iterations,
            refine: match &options.refine {
                RefineSource::Off => "off".to_string(),
                RefineSource::Oracle { gamma } => format!("oracle(gamma={gamma})"),
                RefineSource::Deltas(_) => "file-deltas".to_string(),
            },
            max_vertices: options.max_vertices,
            seed: options.seed,
            min_visibility: options.min_visibility,
            pnp_method: "dlt+lm-reprojection".to_string(),
            diameter_definition: "max pairwise vertex distance".to_string(),
            rotation_error_definition: "geodesic angle".to_string(),
            pose6d_metric,
        },
    }
}

/// Evaluates a dataset loaded from a manifest.
pub fn evaluate_dataset(
    dataset: &LoadedDataset,
    options: &EvalOptions,
) -> Result<EvalReport, HarnessError> {
    let contexts = build_contexts(dataset, options)?;
    evaluate(
        &dataset.frames,
        &dataset.intrinsics,
        &contexts,
        dataset.region_labels.as_ref(),
        options,
    )
}

pub fn build_contexts(
    dataset: &LoadedDataset,
    options: &EvalOptions,
) -> Result<BTreeMap<String, ObjectContext>, HarnessError> {
    let mut contexts = BTreeMap::new();
    for (id, mesh) in &dataset.meshes {
        let spec = dataset.specs[id];
        contexts.insert(
            id.clone(),
            ObjectContext::build(mesh.clone(), spec, options.max_vertices, options.seed)?,
        );
    }
    Ok(contexts)
}

// ---------------------------------------------------------------------
// threshold sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub thresholds_px: Vec<f64>,
    /// Pass rates (%) per object, in object order; one value per
    /// threshold.
    pub per_object: BTreeMap<String, Vec<f64>>,
    pub overall: Vec<f64>,
    pub scored_frames: usize,
}

/// 2D-projection pass rate as a function of the pixel threshold.
pub fn threshold_sweep(
    frames: &[FrameRecord],
    intrinsics: &CameraIntrinsics,
    objects: &BTreeMap<String, ObjectContext>,
    region_labels: Option<&HashMap<u64, u8>>,
    options: &EvalOptions,
    thresholds_px: &[f64],
) -> Result<SweepReport, HarnessError> {
    options.mirror_axis.require_supported()?;
    // score once; recount passes per threshold from the stored errors
    let score_all = || -> Vec<FrameResult> {
        frames
            .par_iter()
            .map(|record| {
                let ctx = &objects[&record.object];
                let region_override = region_labels.and_then(|m| m.get(&record.frame)).copied();
                FrameResult {
                    frame: record.frame,
                    object: record.object.clone(),
                    status: score_frame(record, ctx, intrinsics, options, region_override),
                }
            })
            .collect()
    };
    let results = if options.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
            .install(score_all)
    } else {
        score_all()
    };

    let mut per_object: BTreeMap<String, (Vec<usize>, usize)> = BTreeMap::new();
    for r in &results {
        let entry = per_object
            .entry(r.object.clone())
            .or_insert_with(|| (vec![0; thresholds_px.len()], 0));
        match &r.status {
            FrameStatus::Filtered => {}
            FrameStatus::Failed { .. } => entry.1 += 1,
            FrameStatus::Evaluated(s) => {
                entry.1 += 1;
                for (slot, &thr) in entry.0.iter_mut().zip(thresholds_px) {
                    if s.projection_error_px < thr {
                        *slot += 1;
                    }
                }
            }
        }
    }

    let mut report = SweepReport {
        thresholds_px: thresholds_px.to_vec(),
        per_object: BTreeMap::new(),
        overall: vec![0.0; thresholds_px.len()],
        scored_frames: 0,
    };
    let mut overall_pass = vec![0usize; thresholds_px.len()];
    let mut overall_scored = 0usize;
    for (object, (passes, scored)) in per_object {
        let rates = passes
            .iter()
            .map(|&p| {
                if scored == 0 {
                    0.0
                } else {
                    100.0 * p as f64 / scored as f64
                }
            })
            .collect();
        for (o, p) in overall_pass.iter_mut().zip(&passes) {
            *o += p;
        }
        overall_scored += scored;
        report.per_object.insert(object, rates);
    }
    report.scored_frames = overall_scored;
    report.overall = overall_pass
        .iter()
        .map(|&p| {
            if overall_scored == 0 {
                0.0
            } else {
                100.0 * p as f64 / overall_scored as f64
            }
        })
        .collect();
    Ok(report)
}

// ---------------------------------------------------------------------
// report rendering

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "object,metric,unit,pass_rate_pct,mean_error,median_error,mean_error_2,median_error_2\n",
        );
        for obj in &self.objects {
            for m in &obj.metrics {
                let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    obj.object,
                    m.metric,
                    m.unit,
                    m.pass_rate_pct,
                    m.mean_error,
                    m.median_error,
                    fmt(m.mean_error_2),
                    fmt(m.median_error_2),
                ));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14}{:>7}{:>7}{:>7}{:>7}   {:>12}{:>12}{:>12}\n",
            "object", "frames", "eval", "filt", "fail", "2d-proj %", "6d-pose %", "5cm5deg %"
        ));
        for obj in &self.objects {
            let rate = |name: &str| {
                obj.metrics
                    .iter()
                    .find(|m| m.metric.starts_with(name))
                    .map(|m| m.pass_rate_pct)
                    .unwrap_or(f64::NAN)
            };
            out.push_str(&format!(
                "{:<14}{:>7}{:>7}{:>7}{:>7}   {:>12.1}{:>12.1}{:>12.1}\n",
                obj.object,
                obj.frames,
                obj.evaluated,
                obj.filtered,
                obj.failed,
                rate("2d_projection"),
                rate("6d_pose"),
                rate("5cm_5deg"),
            ));
        }
        out.push_str(&format!(
            "\nframes: {} total, {} evaluated, {} filtered (visibility <= {}), {} failed\n",
            self.total_frames,
            self.evaluated_frames,
            self.filtered_frames,
            self.config.min_visibility,
            self.failed_frames,
        ));
        if self.tilt_warnings > 0 {
            out.push_str(&format!(
                "warning: {} frames with symmetry axis tilted > {TILT_WARNING_DEG} deg from image vertical\n",
                self.tilt_warnings
            ));
        }
        out.push_str(&format!(
            "config: threshold {} px, add fraction {}, {} cm / {} deg, refine {}, pnp {}, diameter = {}\n",
            self.config.threshold_px,
            self.config.add_fraction,
            self.config.cm_threshold,
            self.config.deg_threshold,
            self.config.refine,
            self.config.pnp_method,
            self.config.diameter_definition,
        ));
        out
    }
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("object");
        for t in &self.thresholds_px {
            out.push_str(&format!(",{t}px"));
        }
        out.push('\n');
        for (object, rates) in &self.per_object {
            out.push_str(object);
            for r in rates {
                out.push_str(&format!(",{r}"));
            }
            out.push('\n');
        }
        out.push_str("overall");
        for r in &self.overall {
            out.push_str(&format!(",{r}"));
        }
        out.push('\n');
        out
    }

    /// Minimal SVG line plot of pass rate vs threshold.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const ML: f64 = 50.0;
        const MB: f64 = 40.0;
        const MT: f64 = 20.0;
        const MR: f64 = 20.0;
        let x_max = self
            .thresholds_px
            .iter()
            .cloned()
            .fold(1.0f64, f64::max);
        let x_of = |t: f64| ML + (t / x_max) * (W - ML - MR);
        let y_of = |rate: f64| H - MB - (rate / 100.0) * (H - MT - MB);
        let mut svg = format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        svg.push_str(&format!(
            r#"<rect width="{W}" height="{H}" fill="white"/>"#
        ));
        // axes
        svg.push_str(&format!(
            r#"<line x1="{ML}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{ML}" y1="{MT}" x2="{ML}" y2="{y0}" stroke="black"/>"#,
            y0 = H - MB,
            x1 = W - MR,
        ));
        for pct in [0, 25, 50, 75, 100] {
            let y = y_of(pct as f64);
            svg.push_str(&format!(
                r#"<text x="{x}" y="{y}" font-size="10" text-anchor="end">{pct}%</text>"#,
                x = ML - 5.0,
                y = y + 3.0,
            ));
        }
        for &t in &self.thresholds_px {
            svg.push_str(&format!(
                r#"<text x="{x}" y="{y}" font-size="10" text-anchor="middle">{t}</text>"#,
                x = x_of(t),
                y = H - MB + 14.0,
            ));
        }
        let palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
        let mut draw = |rates: &[f64], color: &str, label: &str, idx: usize| {
            let pts: Vec<String> = self
                .thresholds_px
                .iter()
                .zip(rates)
                .map(|(&t, &r)| format!("{:.2},{:.2}", x_of(t), y_of(r)))
                .collect();
            svg.push_str(&format!(
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            ));
            svg.push_str(&format!(
                r#"<text x="{x}" y="{y}" font-size="11" fill="{color}">{label}</text>"#,
                x = ML + 10.0,
                y = MT + 14.0 * (idx as f64 + 1.0),
            ));
        };
        for (i, (object, rates)) in self.per_object.iter().enumerate() {
            draw(rates, palette[i % palette.len()], object, i);
        }
        let n = self.per_object.len();
        draw(&self.overall, "#000000", "overall", n);
        svg.push_str("</svg>");
        svg
    }
}

// ---------------------------------------------------------------------
// synthetic dataset emission

/// One object entry of a generated dataset.
pub struct DatasetObject {
    pub mesh: MeshModel,
    pub spec: SymmetrySpec,
}

/// What the generator should write.
pub struct DatasetRequest {
    pub objects: Vec<DatasetObject>,
    pub frames: usize,
    pub config: SynthConfig,
    pub with_score_maps: bool,
    /// Emit direct-pose baseline records (perturbed by the given caps)
    /// instead of corner records.
    pub direct: Option<DirectNoise>,
}

#[derive(Debug, Clone, Copy)]
pub struct DirectNoise {
    pub max_rotation: f64,
    pub relative_translation: f64,
}

pub fn synth_frame_to_record(f: &SynthFrame) -> FrameRecord {
    let mut record = FrameRecord {
        frame: f.frame,
        object: f.object.clone(),
        gt: f.gt_pose,
        corners: None,
        pose: None,
        region: f.region,
        visibility: Some(f.visibility),
    };
    record.set_corners(&f.predicted_corners);
    record
}

/// Generates frames in memory (round-robin over the objects).
pub fn generate_frames(
    request: &DatasetRequest,
    intrinsics: &CameraIntrinsics,
) -> Result<(Vec<FrameRecord>, Vec<SynthFrame>), HarnessError> {
    let mut records = Vec::with_capacity(request.frames);
    let mut synth_frames = Vec::with_capacity(request.frames);
    for frame_id in 0..request.frames as u64 {
        let obj = &request.objects[frame_id as usize % request.objects.len()];
        let scene = SynthScene {
            mesh: &obj.mesh,
            spec: &obj.spec,
            intrinsics,
            config: &request.config,
        };
        let frame = scene.gen_frame(frame_id, request.with_score_maps)?;
        let mut record = synth_frame_to_record(&frame);
        if let Some(direct) = request.direct {
            let mut rng = crate::synth::frame_rng(request.config.seed ^ 0xd1ec7, frame_id);
            record.corners = None;
            record.pose = Some(crate::synth::perturb_pose(
                &frame.gt_pose,
                direct.max_rotation,
                direct.relative_translation,
                &mut rng,
            ));
        }
        records.push(record);
        synth_frames.push(frame);
    }
    Ok((records, synth_frames))
}

/// Writes a self-contained dataset directory (meshes, specs, intrinsics,
/// frames, optional score maps, manifest) and returns the manifest path.
pub fn write_dataset(
    dir: &Path,
    request: &DatasetRequest,
    intrinsics: &CameraIntrinsics,
) -> Result<PathBuf, HarnessError> {
    let io_err = |path: &Path, source: std::io::Error| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir.join("meshes")).map_err(|e| io_err(dir, e))?;
    std::fs::create_dir_all(dir.join("specs")).map_err(|e| io_err(dir, e))?;

    let (records, synth_frames) = generate_frames(request, intrinsics)?;

    let mut objects = BTreeMap::new();
    for obj in &request.objects {
        let mesh_rel = format!("meshes/{}.json", obj.mesh.name);
        let mesh_path = dir.join(&mesh_rel);
        std::fs::write(&mesh_path, crate::formats::mesh_to_json(&obj.mesh))
            .map_err(|e| io_err(&mesh_path, e))?;
        let symmetry = match obj.spec {
            SymmetrySpec::Asymmetric => None,
            spec => {
                let rel = format!("specs/{}.json", obj.mesh.name);
                let path = dir.join(&rel);
                std::fs::write(&path, serde_json::to_string(&spec).expect("spec serializes"))
                    .map_err(|e| io_err(&path, e))?;
                Some(rel)
            }
        };
        objects.insert(
            obj.mesh.name.clone(),
            crate::formats::ManifestObject {
                mesh: mesh_rel,
                symmetry,
            },
        );
    }

    let intrinsics_path = dir.join("intrinsics.json");
    std::fs::write(
        &intrinsics_path,
        serde_json::to_string(intrinsics).expect("intrinsics serialize"),
    )
    .map_err(|e| io_err(&intrinsics_path, e))?;

    let frames_path = dir.join("frames.jsonl");
    let mut buf = Vec::new();
    crate::formats::write_frame_records(&mut buf, &records)?;
    std::fs::write(&frames_path, &buf).map_err(|e| io_err(&frames_path, e))?;

    let score_maps = if request.with_score_maps {
        let path = dir.join("score_maps.jsonl");
        let mut out = Vec::new();
        for f in &synth_frames {
            if let (Some(coarse), fine) = (&f.coarse_scores, &f.fine_scores) {
                let rec = crate::formats::ScoreMapRecord::from_grids(
                    f.frame,
                    &f.object,
                    coarse,
                    fine.as_ref(),
                );
                serde_json::to_writer(&mut out, &rec).expect("score map serializes");
                out.push(b'\n');
            }
        }
        std::fs::write(&path, &out).map_err(|e| io_err(&path, e))?;
        Some("score_maps.jsonl".to_string())
    } else {
        None
    };

    let manifest = crate::formats::RunManifest {
        frames: "frames.jsonl".to_string(),
        intrinsics: "intrinsics.json".to_string(),
        objects,
        score_maps,
        region_labels: None,
        synth_config: Some(request.config),
    };
    let manifest_path = dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| io_err(&manifest_path, e))?;
    Ok(manifest_path)
}

/// Prints one frame's pose as the `solve` subcommand's JSON output.
pub fn pose_to_json(pose: &Pose, reprojection_rms: f64) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        e: &'a Vector3<f64>,
        t: &'a Vector3<f64>,
        reprojection_rms_px: f64,
    }
    serde_json::to_string_pretty(&Out {
        e: &pose.e,
        t: &pose.t,
        reprojection_rms_px: reprojection_rms,
    })
    .expect("pose serializes")
}

pub fn write_text_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    let mut file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(text.as_bytes())
        .map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
}
