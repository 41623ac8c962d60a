//! Open-border lesions: gaps in the cortical outline that a 30 mm closing
//! bridges but a 5 mm closing does not.
//!
//! 1. normalize the slice, 2. binarize at the maximum-entropy threshold,
//! 3. close with the small disk and clear the bottom third,
//! 4. close the result with the large disk,
//! 5. take (4) minus (3) and keep blobs strictly between the two diameters,
//! 6. report each surviving blob centroid.
//!
//! Difference blobs lying inside an enclosed hole of (3) have an intact
//! border; they belong to the close-border detector and are not reported.

use crate::cb::prepare_slice;
use crate::config::OpenBorderParams;
use crate::detection::{Detection2D, LesionKind};
use crate::error::{Error, Result};
use crate::imaging::{
    connected_components, equivalent_diameter_mm, fill_se_for_diameter, hole_mask, morph_close,
    BinaryImage, Blob, Polarity,
};
use crate::volume::{GrayscaleSlice, VoxelSpacing};

/// Pixelwise `a AND NOT b`.
pub fn subtract(a: &BinaryImage, b: &BinaryImage) -> Result<BinaryImage> {
    if !a.same_shape(b) {
        return Err(Error::Contract(format!(
            "cannot subtract {}x{} mask from {}x{} mask",
            b.width(),
            b.height(),
            a.width(),
            a.height()
        )));
    }
    let mask = a
        .mask()
        .iter()
        .zip(b.mask())
        .map(|(&x, &y)| x && !y)
        .collect();
    BinaryImage::new(a.width(), a.height(), mask)
}

/// First row of the bottom third: rows with `y > 2·height/3`.
pub fn bottom_third_start(height: usize) -> usize {
    2 * height / 3 + 1
}

/// Intermediate images of the pipeline, kept for display.
#[derive(Debug, Clone)]
pub struct ObStages {
    pub binary: BinaryImage,
    pub small_closed: BinaryImage,
    pub large_closed: BinaryImage,
    pub difference: BinaryImage,
    pub blobs: Vec<Blob>,
}

/// Runs steps 3–5 on an already binarized and small-closed mask.
pub fn stages_from_closed(
    binary: BinaryImage,
    closed: &BinaryImage,
    spacing: VoxelSpacing,
    params: &OpenBorderParams,
) -> Result<ObStages> {
    let mut small_closed = closed.clone();
    small_closed.clear_rows_from(bottom_third_start(small_closed.height()));
    let large = fill_se_for_diameter(params.large_fill_mm, spacing)?;
    let large_closed = morph_close(&small_closed, &large);
    let difference = subtract(&large_closed, &small_closed)?;
    let enclosed = hole_mask(&small_closed);
    let blobs = connected_components(&difference, Polarity::Foreground)
        .into_iter()
        .filter(|b| {
            let d = equivalent_diameter_mm(b, spacing);
            d > params.min_diameter_mm && d < params.max_diameter_mm
        })
        .filter(|b| {
            // A difference component sits inside a single background region of
            // the step-3 mask, so one pixel decides whether it is enclosed.
            let (x, y) = b.pixels[0];
            !enclosed.get(x as usize, y as usize)
        })
        .collect();
    Ok(ObStages {
        binary,
        small_closed,
        large_closed,
        difference,
        blobs,
    })
}

pub fn ob_stages(
    slice: &GrayscaleSlice,
    spacing: VoxelSpacing,
    params: &OpenBorderParams,
) -> Result<ObStages> {
    let prep = prepare_slice(slice, spacing, params.small_fill_mm)?;
    stages_from_closed(prep.binary, &prep.closed, spacing, params)
}

pub fn detections_from_stages(
    stages: &ObStages,
    slice_index: usize,
    spacing: VoxelSpacing,
) -> Vec<Detection2D> {
    stages
        .blobs
        .iter()
        .map(|b| Detection2D {
            slice_index,
            centroid_px: b.centroid,
            equiv_diameter_mm: equivalent_diameter_mm(b, spacing),
            score: 1.0,
            kind: LesionKind::OpenBorder,
            roi_bbox: b.bbox,
        })
        .collect()
}

pub fn run_ob_slice(
    slice: &GrayscaleSlice,
    slice_index: usize,
    spacing: VoxelSpacing,
    params: &OpenBorderParams,
) -> Result<Vec<Detection2D>> {
    let stages = ob_stages(slice, spacing, params)?;
    Ok(detections_from_stages(&stages, slice_index, spacing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn subtract_identities() {
        let a = BinaryImage::from_fn(16, 16, |x, y| (x + y) % 3 == 0);
        assert_eq!(subtract(&a, &a).unwrap().count(), 0);
        assert_eq!(subtract(&a, &BinaryImage::empty(16, 16)).unwrap(), a);
        assert!(matches!(
            subtract(&a, &BinaryImage::empty(16, 17)),
            Err(Error::Contract(_))
        ));
    }

    proptest! {
        #[test]
        fn subtract_matches_pixel_loop(
            a in prop::collection::vec(any::<bool>(), 18 * 16),
            b in prop::collection::vec(any::<bool>(), 18 * 16),
        ) {
            let ia = BinaryImage::new(18, 16, a.clone()).unwrap();
            let ib = BinaryImage::new(18, 16, b.clone()).unwrap();
            let d = subtract(&ia, &ib).unwrap();
            for i in 0..a.len() {
                prop_assert_eq!(d.mask()[i], a[i] && !b[i]);
            }
        }
    }

    #[test]
    fn bottom_third_rows() {
        assert_eq!(bottom_third_start(512), 342);
        assert_eq!(bottom_third_start(300), 201);
    }

    #[test]
    fn constant_slice_yields_nothing() {
        let slice = GrayscaleSlice::new(64, 64, vec![1234; 64 * 64]).unwrap();
        let dets = run_ob_slice(
            &slice,
            0,
            VoxelSpacing::new(1.0, 1.0).unwrap(),
            &OpenBorderParams::default(),
        )
        .unwrap();
        assert!(dets.is_empty());
    }
}
