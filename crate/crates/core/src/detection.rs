use serde::{Deserialize, Serialize};

/// Lesion class: enclosed by bone (close-border) or a gap in the cortex (open-border).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LesionKind {
    #[serde(rename = "CB")]
    CloseBorder,
    #[serde(rename = "OB")]
    OpenBorder,
}

impl LesionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LesionKind::CloseBorder => "CB",
            LesionKind::OpenBorder => "OB",
        }
    }
}

impl std::fmt::Display for LesionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One lesion marked on one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection2D {
    pub slice_index: usize,
    pub centroid_px: (f64, f64),
    pub equiv_diameter_mm: f64,
    /// Classifier lesion score for CB; always 1.0 for OB.
    pub score: f64,
    pub kind: LesionKind,
    /// Inclusive `(x_min, y_min, x_max, y_max)` in slice pixels.
    pub roi_bbox: (usize, usize, usize, usize),
}
