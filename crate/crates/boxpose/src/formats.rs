//! File formats: mesh ingestion (ASCII OBJ subset and JSON), camera
//! intrinsics, symmetry specs, and the JSON-lines records for frames,
//! score maps, region labels and refinement deltas.
//!
//! Every parser takes untrusted text and returns a validated value or an
//! error; none of them panic on malformed input.

use crate::geometry::{CameraIntrinsics, CornerProjection, GeometryError, MeshModel, Pose};
use crate::segmentation::{
    ScoreGrid, SegmentationError, COARSE_HEIGHT, COARSE_WIDTH, FINE_HEIGHT, FINE_WIDTH,
};
use crate::symmetry::{SymmetryError, SymmetrySpec};
use crate::synth::SynthConfig;
use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------
// meshes

/// Parses the ASCII OBJ subset: `v x y z` vertex lines and `f i j k`
/// triangle lines (1-based indices, `i/…` attribute suffixes ignored).
/// Other keywords and comments are skipped.
pub fn parse_obj(name: &str, text: &str) -> Result<MeshModel, FormatError> {
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut triangles: Vec<[i64; 3]> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_no, "vertex needs 3 coordinates"))?;
                    *c = tok
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad coordinate `{tok}`")))?;
                    if !c.is_finite() {
                        return Err(parse_err(line_no, "non-finite coordinate"));
                    }
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(parse_err(
                        line_no,
                        format!("face must be a triangle, got {} vertices", refs.len()),
                    ));
                }
                let mut tri = [0i64; 3];
                for (slot, r) in tri.iter_mut().zip(&refs) {
                    let first = r.split('/').next().unwrap_or("");
                    let v: i64 = first
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad face index `{r}`")))?;
                    if v < 1 {
                        return Err(parse_err(
                            line_no,
                            format!("face index {v} must be positive (relative indices unsupported)"),
                        ));
                    }
                    *slot = v;
                }
                triangles.push(tri);
            }
            _ => {} // vn, vt, usemtl, o, g, s, mtllib, ...
        }
    }
    let tri_usize: Vec<[usize; 3]> = triangles
        .iter()
        .map(|t| [t[0] as usize - 1, t[1] as usize - 1, t[2] as usize - 1])
        .collect();
    Ok(MeshModel::new(name, vertices, tri_usize)?)
}

#[derive(Serialize, Deserialize)]
struct RawMeshJson {
    vertices: Vec<[f64; 3]>,
    #[serde(default)]
    triangles: Vec<[u32; 3]>,
    #[serde(default)]
    name: Option<String>,
}

/// Parses the JSON mesh format
/// `{"vertices": [[x,y,z],…], "triangles": [[i,j,k],…]}`.
pub fn parse_mesh_json(default_name: &str, text: &str) -> Result<MeshModel, FormatError> {
    let raw: RawMeshJson = serde_json::from_str(text)?;
    let vertices = raw
        .vertices
        .iter()
        .map(|v| Vector3::new(v[0], v[1], v[2]))
        .collect();
    let triangles = raw
        .triangles
        .iter()
        .map(|t| [t[0] as usize, t[1] as usize, t[2] as usize])
        .collect();
    Ok(MeshModel::new(
        raw.name.as_deref().unwrap_or(default_name),
        vertices,
        triangles,
    )?)
}

pub fn mesh_to_json(mesh: &MeshModel) -> String {
    let raw = RawMeshJson {
        vertices: mesh.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
        triangles: mesh
            .triangles
            .iter()
            .map(|t| [t[0] as u32, t[1] as u32, t[2] as u32])
            .collect(),
        name: Some(mesh.name.clone()),
    };
    serde_json::to_string(&raw).expect("mesh serializes")
}

/// Reads a mesh file, dispatching on the `.obj` extension; everything
/// else is treated as JSON.
pub fn read_mesh_file(path: &Path) -> Result<MeshModel, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh");
    if path.extension().and_then(|e| e.to_str()) == Some("obj") {
        parse_obj(name, &text)
    } else {
        parse_mesh_json(name, &text)
    }
}

// ---------------------------------------------------------------------
// intrinsics and symmetry specs

/// Parses `{"fx":…,"fy":…,"cx":…,"cy":…,"width":…,"height":…}` and
/// validates it.
pub fn parse_intrinsics_json(text: &str) -> Result<CameraIntrinsics, FormatError> {
    let k: CameraIntrinsics = serde_json::from_str(text)?;
    k.validate()?;
    Ok(k)
}

/// Parses `{"kind":…,"alpha_deg":…,"axis":[…]}`; validation happens in
/// the deserializer.
pub fn parse_symmetry_spec_json(text: &str) -> Result<SymmetrySpec, FormatError> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_intrinsics_file(path: &Path) -> Result<CameraIntrinsics, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_intrinsics_json(&text)
}

pub fn read_symmetry_spec_file(path: &Path) -> Result<SymmetrySpec, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_symmetry_spec_json(&text)
}

// ---------------------------------------------------------------------
// frame records

/// One evaluation frame: ground truth plus either predicted corner
/// projections (the normal path, solved through PnP) or a directly
/// predicted pose (the baseline path, scored as-is).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FrameRecord {
    pub frame: u64,
    pub object: String,
    pub gt: Pose,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corners: Option<[[f64; 2]; 8]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility: Option<f64>,
}

impl FrameRecord {
    pub fn validate(&self) -> Result<(), FormatError> {
        match (&self.corners, &self.pose) {
            (Some(_), Some(_)) => {
                return Err(FormatError::Invalid(format!(
                    "frame {}: both corners and pose present",
                    self.frame
                )))
            }
            (None, None) => {
                return Err(FormatError::Invalid(format!(
                    "frame {}: neither corners nor pose present",
                    self.frame
                )))
            }
            _ => {}
        }
        if let Some(c) = &self.corners {
            if c.iter().flatten().any(|v| !v.is_finite()) {
                return Err(FormatError::Invalid(format!(
                    "frame {}: non-finite corner",
                    self.frame
                )));
            }
        }
        for pose in self.pose.iter().chain(std::iter::once(&self.gt)) {
            let finite = pose.e.iter().chain(pose.t.iter()).all(|v| v.is_finite());
            if !finite {
                return Err(FormatError::Invalid(format!(
                    "frame {}: non-finite pose",
                    self.frame
                )));
            }
        }
        if let Some(v) = self.visibility {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(FormatError::Invalid(format!(
                    "frame {}: visibility {v} outside [0, 1]",
                    self.frame
                )));
            }
        }
        if let Some(r) = self.region {
            if !(1..=4).contains(&r) {
                return Err(FormatError::Invalid(format!(
                    "frame {}: region {r} outside 1..=4",
                    self.frame
                )));
            }
        }
        Ok(())
    }

    pub fn corner_projection(&self) -> Option<CornerProjection> {
        self.corners.map(|c| {
            let mut points = [Vector2::zeros(); 8];
            for (p, xy) in points.iter_mut().zip(c.iter()) {
                *p = Vector2::new(xy[0], xy[1]);
            }
            CornerProjection { points }
        })
    }

    pub fn set_corners(&mut self, corners: &CornerProjection) {
        let mut out = [[0.0; 2]; 8];
        for (slot, p) in out.iter_mut().zip(corners.points.iter()) {
            *slot = [p.x, p.y];
        }
        self.corners = Some(out);
        self.pose = None;
    }
}

/// Parses and validates a single frame-record JSON line.
pub fn parse_frame_record_line(line: &str) -> Result<FrameRecord, FormatError> {
    let record: FrameRecord = serde_json::from_str(line)?;
    record.validate()?;
    Ok(record)
}

pub fn read_frame_records<R: BufRead>(reader: R) -> Result<Vec<FrameRecord>, FormatError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| parse_err(idx + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            parse_frame_record_line(&line).map_err(|e| parse_err(idx + 1, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_frame_records<W: Write>(
    mut writer: W,
    records: &[FrameRecord],
) -> Result<(), FormatError> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n").map_err(|source| FormatError::Io {
            path: PathBuf::from("<writer>"),
            source,
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// score maps

/// Per-frame, per-object score maps; the fine map may be absent when
/// the coarse pass already declared the object absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreMapRecord {
    pub frame: u64,
    pub object: String,
    pub coarse: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fine: Option<Vec<Vec<f64>>>,
}

fn rows_to_grid(rows: &[Vec<f64>], w: usize, h: usize) -> Result<ScoreGrid, FormatError> {
    if rows.len() != h || rows.iter().any(|r| r.len() != w) {
        return Err(FormatError::Invalid(format!(
            "score grid must be {h} rows of {w} values"
        )));
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(ScoreGrid::new(w, h, data)?)
}

impl ScoreMapRecord {
    pub fn coarse_grid(&self) -> Result<ScoreGrid, FormatError> {
        rows_to_grid(&self.coarse, COARSE_WIDTH, COARSE_HEIGHT)
    }

    pub fn fine_grid(&self) -> Result<Option<ScoreGrid>, FormatError> {
        self.fine
            .as_ref()
            .map(|rows| rows_to_grid(rows, FINE_WIDTH, FINE_HEIGHT))
            .transpose()
    }

    pub fn from_grids(frame: u64, object: &str, coarse: &ScoreGrid, fine: Option<&ScoreGrid>) -> Self {
        let to_rows = |g: &ScoreGrid| -> Vec<Vec<f64>> {
            (0..g.height())
                .map(|r| (0..g.width()).map(|c| g.get(c, r)).collect())
                .collect()
        };
        Self {
            frame,
            object: object.to_string(),
            coarse: to_rows(coarse),
            fine: fine.map(to_rows),
        }
    }
}

/// Parses and validates one score-map JSON line.
pub fn parse_score_map_line(line: &str) -> Result<ScoreMapRecord, FormatError> {
    let record: ScoreMapRecord = serde_json::from_str(line)?;
    record.coarse_grid()?;
    record.fine_grid()?;
    Ok(record)
}

pub fn read_score_maps<R: BufRead>(reader: R) -> Result<Vec<ScoreMapRecord>, FormatError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| parse_err(idx + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_score_map_line(&line).map_err(|e| parse_err(idx + 1, e.to_string()))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// region labels

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegionLabelRecord {
    pub frame: u64,
    pub region: u8,
}

/// Parses one `{"frame":id,"region":n}` line.
pub fn parse_region_label_line(line: &str) -> Result<RegionLabelRecord, FormatError> {
    let record: RegionLabelRecord = serde_json::from_str(line)?;
    if !(1..=4).contains(&record.region) {
        return Err(FormatError::Invalid(format!(
            "region {} outside 1..=4",
            record.region
        )));
    }
    Ok(record)
}

pub fn read_region_labels<R: BufRead>(reader: R) -> Result<HashMap<u64, u8>, FormatError> {
    let mut out = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| parse_err(idx + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            parse_region_label_line(&line).map_err(|e| parse_err(idx + 1, e.to_string()))?;
        out.insert(record.frame, record.region);
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// refinement deltas

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CornerDeltaRecord {
    pub frame: u64,
    pub iter: usize,
    pub delta: [[f64; 2]; 8],
}

/// Parses one `{"frame":id,"iter":k,"delta":[[dx,dy]×8]}` line.
pub fn parse_delta_line(line: &str) -> Result<CornerDeltaRecord, FormatError> {
    let record: CornerDeltaRecord = serde_json::from_str(line)?;
    if record.delta.iter().flatten().any(|v| !v.is_finite()) {
        return Err(FormatError::Invalid(format!(
            "frame {} iter {}: non-finite delta",
            record.frame, record.iter
        )));
    }
    Ok(record)
}

pub fn read_corner_deltas<R: BufRead>(
    reader: R,
) -> Result<HashMap<(u64, usize), [Vector2<f64>; 8]>, FormatError> {
    let mut out = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| parse_err(idx + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_delta_line(&line).map_err(|e| parse_err(idx + 1, e.to_string()))?;
        let mut delta = [Vector2::zeros(); 8];
        for (d, xy) in delta.iter_mut().zip(record.delta.iter()) {
            *d = Vector2::new(xy[0], xy[1]);
        }
        out.insert((record.frame, record.iter), delta);
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// run manifest

/// Per-object entries of the run manifest; paths are relative to the
/// manifest file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestObject {
    pub mesh: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<String>,
}

/// Top-level run configuration referencing the dataset files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub frames: String,
    pub intrinsics: String,
    pub objects: BTreeMap<String, ManifestObject>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_maps: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_labels: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth_config: Option<SynthConfig>,
}

/// Parses a manifest document (no path resolution).
pub fn parse_manifest_json(text: &str) -> Result<RunManifest, FormatError> {
    let manifest: RunManifest = serde_json::from_str(text)?;
    if manifest.objects.is_empty() {
        return Err(FormatError::Invalid("manifest lists no objects".into()));
    }
    Ok(manifest)
}

/// A manifest with every referenced file loaded and validated.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub manifest: RunManifest,
    pub intrinsics: CameraIntrinsics,
    pub meshes: BTreeMap<String, MeshModel>,
    pub specs: BTreeMap<String, SymmetrySpec>,
    pub frames: Vec<FrameRecord>,
    pub region_labels: Option<HashMap<u64, u8>>,
}

pub fn load_dataset(manifest_path: &Path) -> Result<LoadedDataset, FormatError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|source| FormatError::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let manifest = parse_manifest_json(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let intrinsics = read_intrinsics_file(&base.join(&manifest.intrinsics))?;

    let mut meshes = BTreeMap::new();
    let mut specs = BTreeMap::new();
    for (id, entry) in &manifest.objects {
        let mesh = read_mesh_file(&base.join(&entry.mesh))?;
        let spec = match &entry.symmetry {
            Some(p) => read_symmetry_spec_file(&base.join(p))?,
            None => SymmetrySpec::Asymmetric,
        };
        meshes.insert(id.clone(), mesh);
        specs.insert(id.clone(), spec);
    }

    let frames_path = base.join(&manifest.frames);
    let file = std::fs::File::open(&frames_path).map_err(|source| FormatError::Io {
        path: frames_path.clone(),
        source,
    })?;
    let frames = read_frame_records(std::io::BufReader::new(file))?;
    for f in &frames {
        if !meshes.contains_key(&f.object) {
            return Err(FormatError::Invalid(format!(
                "frame {} references unknown object `{}`",
                f.frame, f.object
            )));
        }
    }

    let region_labels = match &manifest.region_labels {
        Some(p) => {
            let path = base.join(p);
            let file = std::fs::File::open(&path).map_err(|source| FormatError::Io {
                path: path.clone(),
                source,
            })?;
            Some(read_region_labels(std::io::BufReader::new(file))?)
        }
        None => None,
    };

    Ok(LoadedDataset {
        manifest,
        intrinsics,
        meshes,
        specs,
        frames,
        region_labels,
    })
}
