//! Command-line front end: pose solving, dataset evaluation, threshold
//! sweeps, refinement traces, segmentation post-processing and synthetic
//! dataset generation.

use boxpose::formats::{self, FrameRecord};
use boxpose::geometry::CornerProjection;
use boxpose::harness::{
    self, DatasetObject, DatasetRequest, DirectNoise, EvalOptions, HarnessError, RefineSource,
};
use boxpose::refine::{CornerUpdater, DampedOracleUpdater, FileCornerDeltas};
use boxpose::segmentation::SegmentationParams;
use boxpose::shapes;
use boxpose::symmetry::{MirrorAxis, SymmetrySpec};
use boxpose::synth::SynthConfig;
use clap::{Args, Parser, Subcommand};
use nalgebra::{Vector2, Vector3};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit codes: 0 success, 2 frame-level failure under --strict,
/// 3 I/O or format error.
const EXIT_FRAME_FAILURE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "boxpose", version, about = "6D object-pose estimation and evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct MetricFlags {
    /// 2D-projection pass threshold in pixels.
    #[arg(long = "threshold-px", default_value_t = 5.0)]
    threshold_px: f64,
    /// ADD/ADI threshold as a fraction of the object diameter.
    #[arg(long = "add-frac", default_value_t = 0.1)]
    add_frac: f64,
    /// Translation threshold of the 5cm 5° test, centimeters.
    #[arg(long, default_value_t = 5.0)]
    cm: f64,
    /// Rotation threshold of the 5cm 5° test, degrees.
    #[arg(long, default_value_t = 5.0)]
    deg: f64,
    /// Uniformly subsample metric vertices of meshes larger than this.
    #[arg(long = "max-vertices")]
    max_vertices: Option<usize>,
    /// Worker threads (0 = automatic).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Abort on the first frame-level failure.
    #[arg(long)]
    strict: bool,
    /// Refinement iterations.
    #[arg(long, default_value_t = 2)]
    iterations: usize,
    /// Refine with a damped corner oracle of this gain.
    #[arg(long = "oracle-gamma")]
    oracle_gamma: Option<f64>,
    /// Refine with per-frame corner deltas from this JSON-lines file.
    #[arg(long)]
    deltas: Option<PathBuf>,
    /// Seed for deterministic vertex subsampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Image mirror direction used by the symmetry trick.
    #[arg(long = "mirror-axis", value_enum, default_value_t = MirrorAxisArg::Vertical)]
    mirror_axis: MirrorAxisArg,
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq)]
enum MirrorAxisArg {
    Vertical,
    Horizontal,
}

impl From<MirrorAxisArg> for MirrorAxis {
    fn from(v: MirrorAxisArg) -> Self {
        match v {
            MirrorAxisArg::Vertical => MirrorAxis::Vertical,
            MirrorAxisArg::Horizontal => MirrorAxis::Horizontal,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one frame: corner projections → pose (prints pose JSON).
    Solve {
        /// Mesh file (.obj or .json).
        #[arg(long)]
        mesh: PathBuf,
        /// Intrinsics JSON file.
        #[arg(long)]
        intrinsics: PathBuf,
        /// JSON file with the 8 corner projections: [[x,y],…].
        #[arg(long)]
        corners: PathBuf,
        /// Symmetry spec JSON (needed together with --region).
        #[arg(long)]
        symmetry: Option<PathBuf>,
        /// Region label of the frame (mirrors/adds the half turn back).
        #[arg(long)]
        region: Option<u8>,
    },
    /// Evaluate a dataset manifest and print the report.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        flags: MetricFlags,
        /// Write the report as JSON.
        #[arg(long = "out-json")]
        out_json: Option<PathBuf>,
        /// Write the report as CSV.
        #[arg(long = "out-csv")]
        out_csv: Option<PathBuf>,
    },
    /// 2D-projection pass rate as a function of the pixel threshold.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        flags: MetricFlags,
        /// Comma-separated pixel thresholds.
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,15,20,30")]
        thresholds: Vec<f64>,
        #[arg(long = "out-csv")]
        out_csv: Option<PathBuf>,
        /// Write an SVG plot of the sweep.
        #[arg(long = "out-svg")]
        out_svg: Option<PathBuf>,
    },
    /// Refine one frame and print the per-iteration trace as JSON.
    Refine {
        #[arg(long)]
        manifest: PathBuf,
        /// Frame id to refine.
        #[arg(long)]
        frame: u64,
        #[command(flatten)]
        flags: MetricFlags,
    },
    /// Post-process score maps into per-object 2D centers (JSON lines).
    SegmentPost {
        /// Score-map JSON-lines file.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        tau1: f64,
        #[arg(long, default_value_t = 0.5)]
        tau2: f64,
        /// Minimum coarse-component size for presence.
        #[arg(long = "min-cells", default_value_t = 2)]
        min_cells: usize,
    },
    /// Generate a synthetic dataset directory with a manifest.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Total number of frames (round-robin over the objects).
        #[arg(long, default_value_t = 500)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corner prediction noise, pixels.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Object set: comma-separated names out of
        /// cuboid,box90,tagged,spool.
        #[arg(long, value_delimiter = ',', default_value = "cuboid,box90,tagged,spool")]
        objects: Vec<String>,
        /// Depth range in meters.
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [0.8, 2.0])]
        depth: Vec<f64>,
        /// Occluder count range per frame.
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [0u32, 0u32])]
        occluders: Vec<u32>,
        /// Also emit ideal score maps (needs the 512×384 camera).
        #[arg(long = "with-score-maps")]
        with_score_maps: bool,
        /// Emit direct-pose baseline records instead of corners.
        #[arg(long)]
        direct: bool,
        /// Rotation cap of the direct-pose perturbation, degrees.
        #[arg(long = "direct-rot-deg", default_value_t = 0.0)]
        direct_rot_deg: f64,
        /// Relative translation cap of the direct-pose perturbation.
        #[arg(long = "direct-trans-rel", default_value_t = 0.0)]
        direct_trans_rel: f64,
        /// Dump each frame's rendered silhouette as PGM into this
        /// directory.
        #[arg(long = "dump-masks")]
        dump_masks: Option<PathBuf>,
    },
}

fn eval_options(flags: &MetricFlags) -> Result<EvalOptions, CliError> {
    let refine = match (&flags.oracle_gamma, &flags.deltas) {
        (Some(_), Some(_)) => {
            return Err(CliError::new(
                EXIT_IO,
                "pass either --oracle-gamma or --deltas, not both".into(),
            ))
        }
        (Some(gamma), None) => RefineSource::Oracle { gamma: *gamma },
        (None, Some(path)) => {
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))?;
            let map = formats::read_corner_deltas(std::io::BufReader::new(file))
                .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
            RefineSource::Deltas(map)
        }
        (None, None) => RefineSource::Off,
    };
    Ok(EvalOptions {
        threshold_px: flags.threshold_px,
        add_fraction: flags.add_frac,
        cm_threshold: flags.cm,
        deg_threshold: flags.deg,
        iterations: flags.iterations,
        refine,
        jobs: flags.jobs,
        strict: flags.strict,
        max_vertices: flags.max_vertices,
        seed: flags.seed,
        mirror_axis: flags.mirror_axis.into(),
        min_visibility: boxpose::harness::DEFAULT_MIN_VISIBILITY,
    })
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: String) -> Self {
        Self { code, message }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::FrameFailure { .. } => EXIT_FRAME_FAILURE,
            _ => EXIT_IO,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<formats::FormatError> for CliError {
    fn from(e: formats::FormatError) -> Self {
        CliError::new(EXIT_IO, e.to_string())
    }
}

fn write_out(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve {
            mesh,
            intrinsics,
            corners,
            symmetry,
            region,
        } => {
            let mesh = formats::read_mesh_file(&mesh)?;
            let k = formats::read_intrinsics_file(&intrinsics)?;
            let text = std::fs::read_to_string(&corners)
                .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", corners.display())))?;
            let points: [[f64; 2]; 8] = serde_json::from_str(&text)
                .map_err(|e| CliError::new(EXIT_IO, format!("corners: {e}")))?;
            let spec = match &symmetry {
                Some(p) => formats::read_symmetry_spec_file(p)?,
                None => SymmetrySpec::Asymmetric,
            };
            let ctx = harness::ObjectContext::build(mesh, spec, None, 0)?;
            let record = FrameRecord {
                frame: 0,
                object: ctx.mesh.name.clone(),
                // ground truth is unknown here; solve_frame only needs it
                // for the classifier fallback, which an explicit region
                // label bypasses
                gt: boxpose::geometry::Pose::identity(),
                corners: Some(points),
                pose: None,
                region,
                visibility: None,
            };
            if spec.alpha().is_some() && region.is_none() {
                return Err(CliError::new(
                    EXIT_IO,
                    "symmetric objects need --region for a single-frame solve".into(),
                ));
            }
            let options = EvalOptions::default();
            let pose = harness::solve_frame(&record, &ctx, &k, &options, None)
                .map_err(|e| CliError::new(EXIT_FRAME_FAILURE, e))?;
            let projection = record.corner_projection().expect("corners were set");
            let rms = compute_rms(&ctx, &k, &pose, &projection, region, &spec);
            println!("{}", harness::pose_to_json(&pose, rms));
            Ok(())
        }
        Command::Evaluate {
            manifest,
            flags,
            out_json,
            out_csv,
        } => {
            let dataset = formats::load_dataset(&manifest)?;
            let options = eval_options(&flags)?;
            let report = harness::evaluate_dataset(&dataset, &options)?;
            print!("{}", report.to_text());
            if let Some(path) = out_json {
                write_out(&path, &report.to_json())?;
            }
            if let Some(path) = out_csv {
                write_out(&path, &report.to_csv())?;
            }
            Ok(())
        }
        Command::Sweep {
            manifest,
            flags,
            thresholds,
            out_csv,
            out_svg,
        } => {
            let dataset = formats::load_dataset(&manifest)?;
            let options = eval_options(&flags)?;
            let contexts = harness::build_contexts(&dataset, &options)?;
            let sweep = harness::threshold_sweep(
                &dataset.frames,
                &dataset.intrinsics,
                &contexts,
                dataset.region_labels.as_ref(),
                &options,
                &thresholds,
            )?;
            print!("{}", sweep.to_csv());
            if let Some(path) = out_csv {
                write_out(&path, &sweep.to_csv())?;
            }
            if let Some(path) = out_svg {
                write_out(&path, &sweep.to_svg())?;
            }
            Ok(())
        }
        Command::Refine {
            manifest,
            frame,
            flags,
        } => {
            let dataset = formats::load_dataset(&manifest)?;
            let mut options = eval_options(&flags)?;
            let record = dataset
                .frames
                .iter()
                .find(|r| r.frame == frame)
                .ok_or_else(|| CliError::new(EXIT_IO, format!("no frame {frame} in dataset")))?
                .clone();
            let contexts = harness::build_contexts(&dataset, &options)?;
            let ctx = &contexts[&record.object];

            // initial pose from the un-refined pipeline
            let refine_source = std::mem::take(&mut options.refine);
            let init = harness::solve_frame(&record, ctx, &dataset.intrinsics, &options, None)
                .map_err(|e| CliError::new(EXIT_FRAME_FAILURE, e))?;

            let oracle;
            let file_deltas;
            let updater: &dyn CornerUpdater = match &refine_source {
                RefineSource::Oracle { gamma } => {
                    let mut points = [Vector2::zeros(); 8];
                    for (p, &m) in points.iter_mut().zip(ctx.corners3d.corners.iter()) {
                        *p = boxpose::geometry::project(&dataset.intrinsics, &record.gt, m)
                            .map_err(|e| CliError::new(EXIT_FRAME_FAILURE, e.to_string()))?;
                    }
                    oracle = DampedOracleUpdater {
                        gamma: *gamma,
                        target: CornerProjection { points },
                    };
                    &oracle
                }
                RefineSource::Deltas(map) => {
                    file_deltas = FileCornerDeltas::new(map.clone());
                    &file_deltas
                }
                RefineSource::Off => {
                    return Err(CliError::new(
                        EXIT_IO,
                        "refine needs --oracle-gamma or --deltas".into(),
                    ))
                }
            };
            let trace = boxpose::refine::refine_pose(
                &init,
                &ctx.corners3d,
                &dataset.intrinsics,
                &ctx.mesh,
                updater,
                flags.iterations.max(1),
                frame,
            )
            .map_err(|e| CliError::new(EXIT_FRAME_FAILURE, e.to_string()))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&trace)
                    .expect("trace serializes")
            );
            Ok(())
        }
        Command::SegmentPost {
            scores,
            tau1,
            tau2,
            min_cells,
        } => {
            let file = std::fs::File::open(&scores)
                .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", scores.display())))?;
            let records = formats::read_score_maps(std::io::BufReader::new(file))?;
            let params = SegmentationParams {
                tau1,
                tau2,
                min_cells,
            };
            for rec in &records {
                let coarse = rec.coarse_grid()?;
                let fine = rec.fine_grid()?;
                let det = boxpose::segmentation::segment_object(
                    &rec.object,
                    &coarse,
                    fine.as_ref(),
                    &params,
                )
                .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
                let center = det.center.map(|c| [c.x, c.y]);
                println!(
                    "{}",
                    serde_json::json!({
                        "frame": rec.frame,
                        "object": rec.object,
                        "present": det.present,
                        "center": center,
                        "cells": det.mask.count(),
                    })
                );
            }
            Ok(())
        }
        Command::Synth {
            out,
            frames,
            seed,
            sigma,
            objects,
            depth,
            occluders,
            with_score_maps,
            direct,
            direct_rot_deg,
            direct_trans_rel,
            dump_masks,
        } => {
            let objects = objects
                .iter()
                .map(|name| builtin_object(name))
                .collect::<Result<Vec<_>, _>>()?;
            let config = SynthConfig {
                seed,
                corner_noise_sigma: sigma,
                depth_range: (depth[0], depth[1]),
                occluder_count: (occluders[0], occluders[1]),
                ..Default::default()
            };
            let request = DatasetRequest {
                objects,
                frames,
                config,
                with_score_maps,
                direct: direct.then_some(DirectNoise {
                    max_rotation: direct_rot_deg.to_radians(),
                    relative_translation: direct_trans_rel,
                }),
            };
            let k = synth_camera();
            let manifest = harness::write_dataset(&out, &request, &k)?;
            if let Some(mask_dir) = dump_masks {
                std::fs::create_dir_all(&mask_dir)
                    .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", mask_dir.display())))?;
                let (records, _) = harness::generate_frames(&request, &k)?;
                for record in &records {
                    let obj = request
                        .objects
                        .iter()
                        .find(|o| o.mesh.name == record.object)
                        .expect("object exists");
                    let mask = boxpose::render::render_mask(&obj.mesh, &record.gt, &k)
                        .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
                    let path = mask_dir.join(format!("frame_{:05}.pgm", record.frame));
                    let file = std::fs::File::create(&path)
                        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))?;
                    boxpose::render::write_pgm(&mask, std::io::BufWriter::new(file))
                        .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
                }
            }
            println!("{}", manifest.display());
            Ok(())
        }
    }
}

fn compute_rms(
    ctx: &harness::ObjectContext,
    k: &boxpose::geometry::CameraIntrinsics,
    pose: &boxpose::geometry::Pose,
    observed: &CornerProjection,
    region: Option<u8>,
    spec: &SymmetrySpec,
) -> f64 {
    // reproduce the corner correction the solver applied
    let corrected = match (spec, region) {
        (SymmetrySpec::Symmetric { .. }, Some(2))
        | (SymmetrySpec::QuasiSymmetric { .. }, Some(2))
        | (SymmetrySpec::QuasiSymmetric { .. }, Some(4)) => {
            boxpose::symmetry::mirror_corner_projection(observed, k.cx)
        }
        _ => *observed,
    };
    // undo the half turn so the reprojection matches the corrected corners
    let compare_pose = match (spec, region) {
        (SymmetrySpec::QuasiSymmetric { alpha, axis }, Some(r)) if r >= 3 => {
            pose.rotated_about_axis(*axis, -alpha)
        }
        _ => *pose,
    };
    let c = boxpose::pnp::Correspondences::from_box(&ctx.corners3d, &corrected, *k);
    boxpose::pnp::reprojection_rms(&compare_pose, &c).unwrap_or(f64::NAN)
}

fn synth_camera() -> boxpose::geometry::CameraIntrinsics {
    boxpose::geometry::CameraIntrinsics::new(500.0, 500.0, 256.0, 192.0, 512, 384)
        .expect("default camera is valid")
}

fn builtin_object(name: &str) -> Result<DatasetObject, CliError> {
    let z = Vector3::new(0.0, 0.0, 1.0);
    let obj = match name {
        "cuboid" => DatasetObject {
            mesh: shapes::cuboid("cuboid", 0.08, 0.12, 0.2),
            spec: SymmetrySpec::Asymmetric,
        },
        "box90" => DatasetObject {
            mesh: shapes::cuboid("box90", 0.1, 0.1, 0.2),
            spec: SymmetrySpec::symmetric(std::f64::consts::FRAC_PI_2, z)
                .expect("90° spec is valid"),
        },
        "tagged" => DatasetObject {
            mesh: shapes::cuboid("tagged", 0.1, 0.15, 0.2),
            spec: SymmetrySpec::quasi_symmetric(std::f64::consts::PI, z)
                .expect("half-turn spec is valid"),
        },
        "spool" => DatasetObject {
            mesh: shapes::cylinder("spool", 0.05, 0.15, 48),
            spec: SymmetrySpec::revolution(z).expect("revolution spec is valid"),
        },
        other => {
            return Err(CliError::new(
                EXIT_IO,
                format!("unknown object `{other}` (expected cuboid, box90, tagged or spool)"),
            ))
        }
    };
    Ok(obj)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
