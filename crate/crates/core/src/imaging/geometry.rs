use super::Blob;
use crate::volume::VoxelSpacing;

/// Diameter of the circle with the blob's physical area.
pub fn equivalent_diameter_mm(blob: &Blob, spacing: VoxelSpacing) -> f64 {
    2.0 * (blob.area_px as f64 * spacing.px_area_mm2() / std::f64::consts::PI).sqrt()
}

/// Drops blobs whose centroid lies in the bottom third of the image.
pub fn reject_lower_third(blobs: Vec<Blob>, image_height: usize) -> Vec<Blob> {
    let limit = 2.0 * image_height as f64 / 3.0;
    blobs
        .into_iter()
        .filter(|b| b.centroid.1 <= limit)
        .collect()
}
