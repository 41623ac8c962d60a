//! 3D aggregation of per-slice detections, matching against ground truth,
//! and FROC analysis.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ClusterParams;
use crate::detection::{Detection2D, LesionKind};
use crate::error::{Error, Result};
use crate::volume::{write_atomic, VoxelSpacing};

/// One annotated (or implanted) lesion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLesion {
    pub patient_id: String,
    pub kind: LesionKind,
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
    pub diameter_mm: f64,
}

impl GroundTruthLesion {
    pub fn centroid_mm(&self) -> [f64; 3] {
        [self.x_mm, self.y_mm, self.z_mm]
    }

    pub fn distance_mm(&self, p: [f64; 3]) -> f64 {
        distance(self.centroid_mm(), p)
    }

    pub fn match_radius_mm(&self, min_radius_mm: f64) -> f64 {
        min_radius_mm.max(self.diameter_mm / 2.0)
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Detections linked across neighboring slices.
#[derive(Debug, Clone, PartialEq)]
pub struct LesionCluster {
    pub kind: LesionKind,
    /// Inclusive `(first, last)` slice indices.
    pub slice_span: (usize, usize),
    pub centroid_mm: [f64; 3],
    pub mean_score: f64,
    pub member_count: usize,
    pub mean_diameter_mm: f64,
}

impl LesionCluster {
    /// Slice holding the cluster centroid, rounded to the nearest index.
    pub fn mid_slice(&self, spacing: VoxelSpacing) -> usize {
        let k = (self.centroid_mm[2] / spacing.slice_thickness_mm).round() as usize;
        k.clamp(self.slice_span.0, self.slice_span.1)
    }
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Transitively links same-kind detections on the same or adjacent slices
/// whose in-plane centroids are within `link_radius_mm`, then drops groups
/// with fewer than `min_persistence` members.
pub fn cluster_detections(
    detections: &[Detection2D],
    spacing: VoxelSpacing,
    link_radius_mm: f64,
    min_persistence: usize,
) -> Vec<LesionCluster> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by_key(|&i| (detections[i].kind, detections[i].slice_index));
    let dets: Vec<&Detection2D> = order.iter().map(|&i| &detections[i]).collect();

    let link_px2 = (link_radius_mm / spacing.in_plane_mm).powi(2);
    let mut sets = DisjointSet::new(dets.len());
    for i in 0..dets.len() {
        for j in i + 1..dets.len() {
            let (a, b) = (dets[i], dets[j]);
            if b.kind != a.kind || b.slice_index > a.slice_index + 1 {
                break;
            }
            let dx = a.centroid_px.0 - b.centroid_px.0;
            let dy = a.centroid_px.1 - b.centroid_px.1;
            if dx * dx + dy * dy <= link_px2 {
                sets.union(i, j);
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<&Detection2D>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        groups.entry(sets.find(i)).or_default().push(d);
    }
    let mut clusters: Vec<LesionCluster> = groups
        .into_values()
        .filter(|members| members.len() >= min_persistence)
        .map(|members| {
            let n = members.len() as f64;
            let mean =
                |f: &dyn Fn(&Detection2D) -> f64| members.iter().map(|d| f(d)).sum::<f64>() / n;
            LesionCluster {
                kind: members[0].kind,
                slice_span: (
                    members.iter().map(|d| d.slice_index).min().unwrap_or(0),
                    members.iter().map(|d| d.slice_index).max().unwrap_or(0),
                ),
                centroid_mm: [
                    mean(&|d| d.centroid_px.0) * spacing.in_plane_mm,
                    mean(&|d| d.centroid_px.1) * spacing.in_plane_mm,
                    mean(&|d| d.slice_index as f64) * spacing.slice_thickness_mm,
                ],
                mean_score: mean(&|d| d.score),
                member_count: members.len(),
                mean_diameter_mm: mean(&|d| d.equiv_diameter_mm),
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        (a.kind, a.slice_span.0)
            .cmp(&(b.kind, b.slice_span.0))
            .then(a.centroid_mm[0].total_cmp(&b.centroid_mm[0]))
            .then(a.centroid_mm[1].total_cmp(&b.centroid_mm[1]))
    });
    clusters
}

/// Per-patient outcome of matching clusters to truths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl MatchCounts {
    pub fn truths(&self) -> usize {
        self.tp + self.fn_
    }
}

/// Greedy one-to-one matching by ascending 3D centroid distance. A pair is
/// eligible when the distance is within `max(min_radius_mm, diameter / 2)`.
/// Ties prefer the cluster starting on the earlier slice.
pub fn match_clusters(
    clusters: &[LesionCluster],
    truths: &[GroundTruthLesion],
    min_radius_mm: f64,
) -> MatchCounts {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, c) in clusters.iter().enumerate() {
        for (ti, t) in truths.iter().enumerate() {
            let d = t.distance_mm(c.centroid_mm);
            if d <= t.match_radius_mm(min_radius_mm) {
                pairs.push((d, ci, ti));
            }
        }
    }
    pairs.sort_by(|a, b| {
        let (ca, cb) = (&clusters[a.1], &clusters[b.1]);
        a.0.total_cmp(&b.0)
            .then(ca.slice_span.0.cmp(&cb.slice_span.0))
            .then(ca.centroid_mm[0].total_cmp(&cb.centroid_mm[0]))
            .then(ca.centroid_mm[1].total_cmp(&cb.centroid_mm[1]))
            .then(ca.centroid_mm[2].total_cmp(&cb.centroid_mm[2]))
            .then(a.2.cmp(&b.2))
    });
    let mut cluster_used = vec![false; clusters.len()];
    let mut truth_used = vec![false; truths.len()];
    let mut tp = 0;
    for (_, ci, ti) in pairs {
        if !cluster_used[ci] && !truth_used[ti] {
            cluster_used[ci] = true;
            truth_used[ti] = true;
            tp += 1;
        }
    }
    MatchCounts {
        tp,
        fp: clusters.len() - tp,
        fn_: truths.len() - tp,
    }
}

/// `ΣTP / (ΣTP + ΣFN)` over all patients.
pub fn sensitivity(counts: &[MatchCounts]) -> Result<f64> {
    let tp: usize = counts.iter().map(|c| c.tp).sum();
    let truths: usize = counts.iter().map(MatchCounts::truths).sum();
    if truths == 0 {
        return Err(Error::UndefinedMetric(
            "sensitivity needs at least one ground-truth lesion".into(),
        ));
    }
    Ok(tp as f64 / truths as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpRates {
    /// `ΣFP / patients`, the usual FROC abscissa.
    pub mean_fp: f64,
    /// Lesion-free patients with at least one false positive, as a fraction of
    /// all lesion-free patients. `None` when every patient has a lesion.
    pub patient_rate: Option<f64>,
}

/// One [`MatchCounts`] per patient.
pub fn fp_per_patient(counts: &[MatchCounts]) -> Result<FpRates> {
    if counts.is_empty() {
        return Err(Error::UndefinedMetric("no patients to average over".into()));
    }
    let fp: usize = counts.iter().map(|c| c.fp).sum();
    let normals: Vec<&MatchCounts> = counts.iter().filter(|c| c.truths() == 0).collect();
    let patient_rate = (!normals.is_empty())
        .then(|| normals.iter().filter(|c| c.fp > 0).count() as f64 / normals.len() as f64);
    Ok(FpRates {
        mean_fp: fp as f64 / counts.len() as f64,
        patient_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrocPoint {
    /// Score threshold (CB) or minimum persistence (OB).
    pub threshold: f64,
    pub sensitivity: f64,
    pub fp_per_patient: f64,
    pub patient_rate: Option<f64>,
}

/// One point per operating point, ordered by false positives, then sensitivity.
pub fn froc_curve(per_threshold: &[(f64, Vec<MatchCounts>)]) -> Result<Vec<FrocPoint>> {
    if per_threshold.len() < 2 {
        return Err(Error::Parameter(
            "a FROC curve needs at least two operating points".into(),
        ));
    }
    let mut points = per_threshold
        .iter()
        .map(|(threshold, counts)| {
            let rates = fp_per_patient(counts)?;
            Ok(FrocPoint {
                threshold: *threshold,
                sensitivity: sensitivity(counts)?,
                fp_per_patient: rates.mean_fp,
                patient_rate: rates.patient_rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        a.fp_per_patient
            .total_cmp(&b.fp_per_patient)
            .then(a.sensitivity.total_cmp(&b.sensitivity))
    });
    Ok(points)
}

/// True when sensitivity never drops as false positives grow.
pub fn is_monotone(curve: &[FrocPoint]) -> bool {
    curve
        .windows(2)
        .all(|w| w[1].fp_per_patient >= w[0].fp_per_patient && w[1].sensitivity >= w[0].sensitivity)
}

/// Highest sensitivity among points with at most `max_fp` false positives per patient.
pub fn best_sensitivity_at(curve: &[FrocPoint], max_fp: f64) -> Option<f64> {
    curve
        .iter()
        .filter(|p| p.fp_per_patient <= max_fp)
        .map(|p| p.sensitivity)
        .max_by(f64::total_cmp)
}

/// Drops points repeating the previous point's sensitivity, false-positive
/// rate and patient rate, keeping the earliest (strictest) threshold.
pub fn collapse_duplicates(curve: &[FrocPoint]) -> Vec<FrocPoint> {
    let mut out: Vec<FrocPoint> = Vec::with_capacity(curve.len());
    for p in curve {
        let same = out.last().is_some_and(|q| {
            q.sensitivity == p.sensitivity
                && q.fp_per_patient == p.fp_per_patient
                && q.patient_rate == p.patient_rate
        });
        if !same {
            out.push(*p);
        }
    }
    out
}

/// Everything one patient contributes to a sweep.
#[derive(Debug, Clone)]
pub struct PatientDetections {
    pub patient_id: String,
    pub spacing: VoxelSpacing,
    /// All detections; CB entries carry their lesion score.
    pub detections: Vec<Detection2D>,
    pub truths: Vec<GroundTruthLesion>,
}

impl PatientDetections {
    fn counts(
        &self,
        kind: LesionKind,
        min_score: f64,
        persistence: usize,
        params: &ClusterParams,
    ) -> MatchCounts {
        let dets: Vec<Detection2D> = self
            .detections
            .iter()
            .filter(|d| d.kind == kind && d.score >= min_score)
            .cloned()
            .collect();
        let clusters = cluster_detections(&dets, self.spacing, params.link_radius_mm, persistence);
        let truths: Vec<GroundTruthLesion> = self
            .truths
            .iter()
            .filter(|t| t.kind == kind)
            .cloned()
            .collect();
        match_clusters(&clusters, &truths, params.min_match_radius_mm)
    }
}

/// CB operating points: one per score threshold.
pub fn sweep_cb(
    patients: &[PatientDetections],
    thresholds: &[f64],
    params: &ClusterParams,
) -> Result<Vec<FrocPoint>> {
    let rows: Vec<(f64, Vec<MatchCounts>)> = thresholds
        .iter()
        .map(|&t| {
            let counts = patients
                .iter()
                .map(|p| p.counts(LesionKind::CloseBorder, t, params.min_persistence, params))
                .collect();
            (t, counts)
        })
        .collect();
    froc_curve(&rows)
}

/// OB operating points: one per minimum cluster persistence.
pub fn sweep_ob(
    patients: &[PatientDetections],
    persistences: &[usize],
    params: &ClusterParams,
) -> Result<Vec<FrocPoint>> {
    let rows: Vec<(f64, Vec<MatchCounts>)> = persistences
        .iter()
        .map(|&p| {
            let counts = patients
                .iter()
                .map(|pd| pd.counts(LesionKind::OpenBorder, f64::NEG_INFINITY, p.max(1), params))
                .collect();
            (p as f64, counts)
        })
        .collect();
    froc_curve(&rows)
}

// --- delimited text files -------------------------------------------------

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}

pub const GROUND_TRUTH_HEADER: [&str; 6] =
    ["patient_id", "kind", "x_mm", "y_mm", "z_mm", "diameter_mm"];

pub fn write_ground_truth(path: &Path, truths: &[GroundTruthLesion]) -> Result<()> {
    write_atomic(path, &csv_bytes(truths, &GROUND_TRUTH_HEADER)?)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthLesion>> {
    let truths: Vec<GroundTruthLesion> = read_csv(path)?;
    if let Some(t) = truths
        .iter()
        .find(|t| t.diameter_mm.is_nan() || t.diameter_mm <= 0.0)
    {
        return Err(Error::Format(format!(
            "{}: lesion of patient {} has non-positive diameter",
            path.display(),
            t.patient_id
        )));
    }
    Ok(truths)
}

/// Row of a per-slice detection file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub patient_id: String,
    pub kind: LesionKind,
    pub slice: usize,
    pub x_px: f64,
    pub y_px: f64,
    pub diameter_mm: f64,
    pub score: f64,
    pub bbox_x0: usize,
    pub bbox_y0: usize,
    pub bbox_x1: usize,
    pub bbox_y1: usize,
}

pub const DETECTION_HEADER: [&str; 11] = [
    "patient_id",
    "kind",
    "slice",
    "x_px",
    "y_px",
    "diameter_mm",
    "score",
    "bbox_x0",
    "bbox_y0",
    "bbox_x1",
    "bbox_y1",
];

impl DetectionRecord {
    pub fn new(patient_id: &str, d: &Detection2D) -> Self {
        Self {
            patient_id: patient_id.to_string(),
            kind: d.kind,
            slice: d.slice_index,
            x_px: d.centroid_px.0,
            y_px: d.centroid_px.1,
            diameter_mm: d.equiv_diameter_mm,
            score: d.score,
            bbox_x0: d.roi_bbox.0,
            bbox_y0: d.roi_bbox.1,
            bbox_x1: d.roi_bbox.2,
            bbox_y1: d.roi_bbox.3,
        }
    }

    pub fn to_detection(&self) -> Detection2D {
        Detection2D {
            slice_index: self.slice,
            centroid_px: (self.x_px, self.y_px),
            equiv_diameter_mm: self.diameter_mm,
            score: self.score,
            kind: self.kind,
            roi_bbox: (self.bbox_x0, self.bbox_y0, self.bbox_x1, self.bbox_y1),
        }
    }
}

pub fn write_detections(path: &Path, patient_id: &str, dets: &[Detection2D]) -> Result<()> {
    let rows: Vec<DetectionRecord> = dets
        .iter()
        .map(|d| DetectionRecord::new(patient_id, d))
        .collect();
    write_atomic(path, &csv_bytes(&rows, &DETECTION_HEADER)?)
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    read_csv(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub patient_id: String,
    pub kind: LesionKind,
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
    pub first_slice: usize,
    pub last_slice: usize,
    pub members: usize,
    pub score: f64,
    pub diameter_mm: f64,
}

pub const CLUSTER_HEADER: [&str; 10] = [
    "patient_id",
    "kind",
    "x_mm",
    "y_mm",
    "z_mm",
    "first_slice",
    "last_slice",
    "members",
    "score",
    "diameter_mm",
];

pub fn write_clusters(path: &Path, patient_id: &str, clusters: &[LesionCluster]) -> Result<()> {
    let rows: Vec<ClusterRecord> = clusters
        .iter()
        .map(|c| ClusterRecord {
            patient_id: patient_id.to_string(),
            kind: c.kind,
            x_mm: c.centroid_mm[0],
            y_mm: c.centroid_mm[1],
            z_mm: c.centroid_mm[2],
            first_slice: c.slice_span.0,
            last_slice: c.slice_span.1,
            members: c.member_count,
            score: c.mean_score,
            diameter_mm: c.mean_diameter_mm,
        })
        .collect();
    write_atomic(path, &csv_bytes(&rows, &CLUSTER_HEADER)?)
}

pub fn read_clusters(path: &Path) -> Result<Vec<ClusterRecord>> {
    read_csv(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FrocRecord {
    threshold: f64,
    sensitivity: f64,
    mean_fp: f64,
    /// Empty when undefined.
    patient_rate: Option<f64>,
}

pub const FROC_HEADER: [&str; 4] = ["threshold", "sensitivity", "mean_fp", "patient_rate"];

pub fn froc_to_csv(curve: &[FrocPoint]) -> Result<Vec<u8>> {
    let rows: Vec<FrocRecord> = curve
        .iter()
        .map(|p| FrocRecord {
            threshold: p.threshold,
            sensitivity: p.sensitivity,
            mean_fp: p.fp_per_patient,
            patient_rate: p.patient_rate,
        })
        .collect();
    csv_bytes(&rows, &FROC_HEADER)
}

pub fn read_froc(path: &Path) -> Result<Vec<FrocPoint>> {
    let rows: Vec<FrocRecord> = read_csv(path)?;
    Ok(rows
        .into_iter()
        .map(|r| FrocPoint {
            threshold: r.threshold,
            sensitivity: r.sensitivity,
            fp_per_patient: r.mean_fp,
            patient_rate: r.patient_rate,
        })
        .collect())
}
