//! Close-border lesions: enclosed holes in the bone mask, classified by the perceptron.

use crate::config::{CadConfig, CandidateParams};
use crate::detection::{Detection2D, LesionKind};
use crate::error::{Error, Result};
use crate::eval::GroundTruthLesion;
use crate::features::{extract_feature_vector, FeatureVector, Roi};
use crate::imaging::{
    binarize, equivalent_diameter_mm, extract_holes, fill_se_for_diameter, kapur_threshold,
    morph_close, normalize_slice, reject_lower_third, BinaryImage, Blob, NormalizedSlice,
};
use crate::mlp::{Label, LabeledSample, MlpModel};
use crate::volume::{CtVolume, GrayscaleSlice, VoxelSpacing};

/// Per-slice preprocessing shared by both detectors.
#[derive(Debug, Clone)]
pub struct PreparedSlice {
    pub normalized: NormalizedSlice,
    /// `None` when the slice has a single gray level.
    pub threshold: Option<u8>,
    pub binary: BinaryImage,
    /// Binary mask after the small-hole closing.
    pub closed: BinaryImage,
}

/// Normalization, maximum-entropy binarization and a closing with a disk
/// that fills holes up to `fill_mm`.
pub fn prepare_slice(
    slice: &GrayscaleSlice,
    spacing: VoxelSpacing,
    fill_mm: f64,
) -> Result<PreparedSlice> {
    let normalized = normalize_slice(slice);
    let (threshold, binary) = match kapur_threshold(&normalized) {
        Ok(t) => (Some(t), binarize(&normalized, t)),
        Err(Error::DegenerateInput(_)) => (None, BinaryImage::empty(slice.width(), slice.height())),
        Err(e) => return Err(e),
    };
    let se = fill_se_for_diameter(fill_mm, spacing)?;
    let closed = morph_close(&binary, &se);
    Ok(PreparedSlice {
        normalized,
        threshold,
        binary,
        closed,
    })
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub blob: Blob,
    pub roi: Roi,
}

/// Holes of the closed mask larger than `min_hole_mm`, outside the bottom third.
pub fn candidates_from_prepared(
    prep: &PreparedSlice,
    spacing: VoxelSpacing,
    params: &CandidateParams,
) -> Result<Vec<Candidate>> {
    if prep.threshold.is_none() {
        return Ok(Vec::new());
    }
    let holes: Vec<Blob> = extract_holes(&prep.closed)
        .into_iter()
        .filter(|b| equivalent_diameter_mm(b, spacing) > params.min_hole_mm)
        .collect();
    reject_lower_third(holes, prep.closed.height())
        .into_iter()
        .map(|blob| {
            let roi = Roi::around_blob(&prep.normalized, &blob, params.roi_margin_px)?;
            Ok(Candidate { blob, roi })
        })
        .collect()
}

pub fn detect_candidates(
    slice: &GrayscaleSlice,
    spacing: VoxelSpacing,
    params: &CandidateParams,
) -> Result<Vec<Candidate>> {
    let prep = prepare_slice(slice, spacing, params.fill_mm)?;
    candidates_from_prepared(&prep, spacing, params)
}

/// Every candidate with its lesion score, regardless of threshold.
pub fn score_candidates(
    candidates: &[Candidate],
    slice_index: usize,
    spacing: VoxelSpacing,
    params: &CandidateParams,
    model: &MlpModel,
) -> Result<Vec<Detection2D>> {
    candidates
        .iter()
        .map(|c| {
            let fv = extract_feature_vector(&c.roi, params.glcm_levels)?;
            let (score, _) = model.forward(&fv)?;
            Ok(Detection2D {
                slice_index,
                centroid_px: c.blob.centroid,
                equiv_diameter_mm: equivalent_diameter_mm(&c.blob, spacing),
                score,
                kind: LesionKind::CloseBorder,
                roi_bbox: c.blob.bbox,
            })
        })
        .collect()
}

/// Candidates the model labels lesion at `threshold`.
pub fn run_cb_slice(
    slice: &GrayscaleSlice,
    slice_index: usize,
    spacing: VoxelSpacing,
    params: &CandidateParams,
    model: &MlpModel,
    threshold: f64,
) -> Result<Vec<Detection2D>> {
    let candidates = detect_candidates(slice, spacing, params)?;
    let scored = score_candidates(&candidates, slice_index, spacing, params, model)?;
    Ok(apply_threshold(scored, threshold))
}

pub fn apply_threshold(detections: Vec<Detection2D>, threshold: f64) -> Vec<Detection2D> {
    detections
        .into_iter()
        .filter(|d| d.score >= threshold)
        .collect()
}

/// A volume and the lesions implanted or annotated in it.
#[derive(Debug, Clone)]
pub struct AnnotatedVolume {
    pub volume: CtVolume,
    pub truths: Vec<GroundTruthLesion>,
}

/// Whether a candidate at `(x_px, y_px)` on `slice_index` lies on a CB truth.
fn overlaps_truth(
    centroid_px: (f64, f64),
    slice_index: usize,
    spacing: VoxelSpacing,
    truths: &[GroundTruthLesion],
    min_match_radius_mm: f64,
) -> bool {
    let p = [
        centroid_px.0 * spacing.in_plane_mm,
        centroid_px.1 * spacing.in_plane_mm,
        slice_index as f64 * spacing.slice_thickness_mm,
    ];
    truths
        .iter()
        .filter(|t| t.kind == LesionKind::CloseBorder)
        .any(|t| t.distance_mm(p) <= t.match_radius_mm(min_match_radius_mm))
}

/// Feature vectors of every candidate in every slice, labeled lesion when the
/// candidate lies within the match radius of a close-border truth.
pub fn build_training_pool(
    volumes: &[AnnotatedVolume],
    cfg: &CadConfig,
) -> Result<Vec<LabeledSample>> {
    use rayon::prelude::*;
    let mut pool = Vec::new();
    for av in volumes {
        let spacing = av.volume.spacing();
        let per_slice: Vec<Vec<LabeledSample>> = av
            .volume
            .slices()
            .par_iter()
            .enumerate()
            .map(|(k, slice)| {
                detect_candidates(slice, spacing, &cfg.candidates)?
                    .into_iter()
                    .map(|c| {
                        let features: FeatureVector =
                            extract_feature_vector(&c.roi, cfg.candidates.glcm_levels)?;
                        let lesion = overlaps_truth(
                            c.blob.centroid,
                            k,
                            spacing,
                            &av.truths,
                            cfg.cluster.min_match_radius_mm,
                        );
                        Ok(LabeledSample {
                            features,
                            label: if lesion { Label::Lesion } else { Label::Normal },
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        pool.extend(per_slice.into_iter().flatten());
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool(format!(
            "no close-border candidates in {} volume(s)",
            volumes.len()
        )));
    }
    Ok(pool)
}
