//! Browser demo: render a synthetic mandible slice, outline close-border
//! candidates, and step through the open-border pipeline.
//!
//! [`DemoState`] does the work and is plain Rust; [`Demo`] is its JavaScript face.

use mandible_cad::cb::{candidates_from_prepared, prepare_slice};
use mandible_cad::config::{CandidateParams, OpenBorderParams};
use mandible_cad::imaging::{normalize_slice, BinaryImage, Blob, NormalizedSlice};
use mandible_cad::ob::stages_from_closed;
use mandible_cad::phantom::{render_slice, ArcGeometry, LesionSpec, PhantomSpec};
use mandible_cad::{Error, GrayscaleSlice, LesionKind, Result};
use wasm_bindgen::prelude::*;

const SIZE: usize = 256;
const PIXEL_MM: f64 = 0.4;
const N_SLICES: usize = 40;
const SLICE_MM: f64 = 0.5;
const CB_ANGLE: f64 = 240.0;
const OB_ANGLE: f64 = 300.0;

const CANDIDATE_TINT: [u8; 3] = [230, 60, 60];
const OB_TINT: [u8; 3] = [60, 200, 90];
const DIFFERENCE_TINT: [u8; 3] = [240, 200, 40];

/// Which open-border intermediate image to show.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObStage {
    Binary,
    SmallClosed,
    LargeClosed,
    Difference,
    Detections,
}

impl ObStage {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "binary" => Self::Binary,
            "small-closed" => Self::SmallClosed,
            "large-closed" => Self::LargeClosed,
            "difference" => Self::Difference,
            "detections" => Self::Detections,
            other => return Err(Error::Parameter(format!("unknown stage {other:?}"))),
        })
    }
}

pub struct DemoState {
    spec: PhantomSpec,
    slice_index: usize,
    slice: GrayscaleSlice,
    normalized: NormalizedSlice,
}

impl DemoState {
    /// A 256×256×40 phantom with one close-border lesion and one open-border
    /// lesion, both centered on the middle slice. A zero diameter omits the lesion.
    pub fn new(
        seed: u32,
        cb_diameter_mm: f64,
        ob_diameter_mm: f64,
        noise_sigma: f64,
    ) -> Result<Self> {
        let arc = ArcGeometry::default();
        let z = N_SLICES as f64 * SLICE_MM / 2.0;
        let mut spec = PhantomSpec {
            patient_id: "demo".into(),
            seed: u64::from(seed),
            n_slices: N_SLICES,
            noise_sigma,
            ..PhantomSpec::default()
        }
        .with_grid(SIZE, SIZE, PIXEL_MM);
        spec.spacing.slice_thickness_mm = SLICE_MM;
        for (kind, angle, d) in [
            (LesionKind::CloseBorder, CB_ANGLE, cb_diameter_mm),
            (LesionKind::OpenBorder, OB_ANGLE, ob_diameter_mm),
        ] {
            if d > 0.0 {
                let [x, y] = arc.point_mm(angle, arc.mid_radius_mm());
                spec.lesions.push(LesionSpec {
                    kind,
                    centroid_mm: [x, y, z],
                    diameter_mm: d,
                });
            }
        }
        spec.validate()?;
        let slice_index = N_SLICES / 2;
        let slice = render_slice(&spec, slice_index);
        let normalized = normalize_slice(&slice);
        Ok(Self {
            spec,
            slice_index,
            slice,
            normalized,
        })
    }

    pub fn n_slices(&self) -> usize {
        self.spec.n_slices
    }

    pub fn slice_index(&self) -> usize {
        self.slice_index
    }

    pub fn set_slice(&mut self, k: usize) -> Result<()> {
        if k >= self.spec.n_slices {
            return Err(Error::Parameter(format!(
                "slice {k} outside 0..{}",
                self.spec.n_slices
            )));
        }
        self.slice_index = k;
        self.slice = render_slice(&self.spec, k);
        self.normalized = normalize_slice(&self.slice);
        Ok(())
    }

    /// The normalized slice as RGBA.
    pub fn image(&self) -> Vec<u8> {
        gray_rgba(&self.normalized)
    }

    /// The slice with every close-border candidate tinted, and the candidate count.
    pub fn cb_candidates(&self, fill_mm: f64) -> Result<(Vec<u8>, usize)> {
        let params = CandidateParams {
            fill_mm,
            ..CandidateParams::default()
        };
        let prep = prepare_slice(&self.slice, self.spec.spacing, params.fill_mm)?;
        let candidates = candidates_from_prepared(&prep, self.spec.spacing, &params)?;
        let mut rgba = gray_rgba(&self.normalized);
        for c in &candidates {
            tint_blob(&mut rgba, &c.blob, CANDIDATE_TINT);
        }
        Ok((rgba, candidates.len()))
    }

    /// One stage of the open-border pipeline as RGBA, and the number of detections.
    pub fn ob_stage(&self, stage: ObStage, large_fill_mm: f64) -> Result<(Vec<u8>, usize)> {
        let params = OpenBorderParams {
            large_fill_mm,
            ..OpenBorderParams::default()
        };
        let prep = prepare_slice(&self.slice, self.spec.spacing, params.small_fill_mm)?;
        let stages = stages_from_closed(prep.binary, &prep.closed, self.spec.spacing, &params)?;
        let rgba = match stage {
            ObStage::Binary => mask_rgba(&stages.binary),
            ObStage::SmallClosed => mask_rgba(&stages.small_closed),
            ObStage::LargeClosed => mask_rgba(&stages.large_closed),
            ObStage::Difference => {
                let mut rgba = gray_rgba(&self.normalized);
                for (i, &on) in stages.difference.mask().iter().enumerate() {
                    if on {
                        blend(&mut rgba[4 * i..4 * i + 3], DIFFERENCE_TINT);
                    }
                }
                rgba
            }
            ObStage::Detections => {
                let mut rgba = gray_rgba(&self.normalized);
                for b in &stages.blobs {
                    tint_blob(&mut rgba, b, OB_TINT);
                }
                rgba
            }
        };
        Ok((rgba, stages.blobs.len()))
    }
}

fn gray_rgba(image: &NormalizedSlice) -> Vec<u8> {
    image
        .pixels()
        .iter()
        .flat_map(|&g| [g, g, g, 255])
        .collect()
}

fn mask_rgba(mask: &BinaryImage) -> Vec<u8> {
    mask.mask()
        .iter()
        .flat_map(|&on| {
            if on {
                [255, 255, 255, 255]
            } else {
                [0, 0, 0, 255]
            }
        })
        .collect()
}

fn blend(px: &mut [u8], tint: [u8; 3]) {
    for (c, t) in px.iter_mut().zip(tint) {
        *c = ((u16::from(*c) + 3 * u16::from(t)) / 4) as u8;
    }
}

fn tint_blob(rgba: &mut [u8], blob: &Blob, tint: [u8; 3]) {
    for &(x, y) in &blob.pixels {
        let i = 4 * (y as usize * SIZE + x as usize);
        blend(&mut rgba[i..i + 3], tint);
    }
}

fn js_error(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    state: DemoState,
    last_count: usize,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(
        seed: u32,
        cb_diameter_mm: f64,
        ob_diameter_mm: f64,
        noise_sigma: f64,
    ) -> std::result::Result<Demo, JsError> {
        let state =
            DemoState::new(seed, cb_diameter_mm, ob_diameter_mm, noise_sigma).map_err(js_error)?;
        Ok(Self {
            state,
            last_count: 0,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        SIZE
    }

    #[wasm_bindgen(getter)]
    pub fn n_slices(&self) -> usize {
        self.state.n_slices()
    }

    /// Objects found by the last `cb_candidates` or `ob_stage` call.
    #[wasm_bindgen(getter)]
    pub fn last_count(&self) -> usize {
        self.last_count
    }

    pub fn set_slice(&mut self, k: usize) -> std::result::Result<(), JsError> {
        self.state.set_slice(k).map_err(js_error)
    }

    pub fn image(&self) -> Vec<u8> {
        self.state.image()
    }

    pub fn cb_candidates(&mut self, fill_mm: f64) -> std::result::Result<Vec<u8>, JsError> {
        let (rgba, n) = self.state.cb_candidates(fill_mm).map_err(js_error)?;
        self.last_count = n;
        Ok(rgba)
    }

    /// `stage` is one of binary, small-closed, large-closed, difference, detections.
    pub fn ob_stage(
        &mut self,
        stage: &str,
        large_fill_mm: f64,
    ) -> std::result::Result<Vec<u8>, JsError> {
        let stage = ObStage::parse(stage).map_err(js_error)?;
        let (rgba, n) = self
            .state
            .ob_stage(stage, large_fill_mm)
            .map_err(js_error)?;
        self.last_count = n;
        Ok(rgba)
    }
}
