//! Whole-volume detection: both pipelines on every slice, then 3D clustering.

use rayon::prelude::*;

use crate::cb::{candidates_from_prepared, prepare_slice, score_candidates};
use crate::config::{CadConfig, ClusterParams};
use crate::detection::{Detection2D, LesionKind};
use crate::error::Result;
use crate::eval::{cluster_detections, LesionCluster};
use crate::imaging::{fill_se_for_diameter, morph_close};
use crate::mlp::MlpModel;
use crate::ob::{detections_from_stages, stages_from_closed};
use crate::volume::{CtVolume, GrayscaleSlice};

/// Scored CB candidates (any score) followed by OB detections for one slice.
/// Without a model only the OB pipeline runs.
pub fn scan_slice(
    slice: &GrayscaleSlice,
    slice_index: usize,
    cfg: &CadConfig,
    model: Option<&MlpModel>,
) -> Result<Vec<Detection2D>> {
    let spacing = cfg.spacing;
    let prep = prepare_slice(slice, spacing, cfg.candidates.fill_mm)?;
    let mut out = match model {
        Some(model) => {
            let candidates = candidates_from_prepared(&prep, spacing, &cfg.candidates)?;
            score_candidates(&candidates, slice_index, spacing, &cfg.candidates, model)?
        }
        None => Vec::new(),
    };
    // Both pipelines close with a 5 mm disk by default; reuse it when they agree.
    let closed = if cfg.open_border.small_fill_mm == cfg.candidates.fill_mm {
        prep.closed
    } else {
        morph_close(
            &prep.binary,
            &fill_se_for_diameter(cfg.open_border.small_fill_mm, spacing)?,
        )
    };
    let stages = stages_from_closed(prep.binary, &closed, spacing, &cfg.open_border)?;
    out.extend(detections_from_stages(&stages, slice_index, spacing));
    Ok(out)
}

/// [`scan_slice`] over every slice in parallel, merged in slice order.
pub fn scan_volume(
    volume: &CtVolume,
    cfg: &CadConfig,
    model: Option<&MlpModel>,
) -> Result<Vec<Detection2D>> {
    let cfg = CadConfig {
        spacing: volume.spacing(),
        ..cfg.clone()
    };
    let per_slice: Vec<Vec<Detection2D>> = volume
        .slices()
        .par_iter()
        .enumerate()
        .map(|(k, s)| scan_slice(s, k, &cfg, model))
        .collect::<Result<_>>()?;
    Ok(per_slice.into_iter().flatten().collect())
}

/// Keeps OB detections and CB detections scoring at least `threshold`.
pub fn apply_cb_threshold(detections: &[Detection2D], threshold: f64) -> Vec<Detection2D> {
    detections
        .iter()
        .filter(|d| d.kind == LesionKind::OpenBorder || d.score >= threshold)
        .cloned()
        .collect()
}

pub fn cluster_all(
    detections: &[Detection2D],
    volume: &CtVolume,
    params: &ClusterParams,
) -> Vec<LesionCluster> {
    cluster_detections(
        detections,
        volume.spacing(),
        params.link_radius_mm,
        params.min_persistence,
    )
}

#[derive(Debug, Clone)]
pub struct VolumeDetections {
    /// Detections that passed the CB threshold, in slice order.
    pub detections: Vec<Detection2D>,
    pub clusters: Vec<LesionCluster>,
}

pub fn detect_volume(
    volume: &CtVolume,
    cfg: &CadConfig,
    model: &MlpModel,
    threshold: f64,
) -> Result<VolumeDetections> {
    let all = scan_volume(volume, cfg, Some(model))?;
    let detections = apply_cb_threshold(&all, threshold);
    let clusters = cluster_all(&detections, volume, &cfg.cluster);
    Ok(VolumeDetections {
        detections,
        clusters,
    })
}
