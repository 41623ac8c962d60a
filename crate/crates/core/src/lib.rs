//! Computer-aided detection of mandibular lesions in CT volumes.
//!
//! Two detectors run per axial slice:
//!
//! * [`cb`] finds *close-border* lesions: dark regions fully enclosed by bone.
//!   Candidates come from maximum-entropy binarization, a 5 mm closing and
//!   hole extraction; a 15-10-2 perceptron ([`mlp`]) classifies the
//!   15-dimensional [`features`] vector of each candidate ROI.
//! * [`ob`] finds *open-border* lesions: gaps in the cortical boundary, found
//!   as the difference between a 30 mm and a 5 mm closing of the bone mask.
//!
//! [`eval`] links 2D detections into 3D clusters and scores them against
//! ground truth (sensitivity, false positives per patient, FROC curves).
//! [`phantom`] renders synthetic volumes with known lesions.

pub mod cb;
pub mod config;
pub mod detection;
pub mod error;
pub mod eval;
pub mod features;
pub mod imaging;
pub mod mlp;
pub mod ob;
pub mod overlay;
pub mod phantom;
pub mod scan;
pub mod volume;

pub use detection::{Detection2D, LesionKind};
pub use error::{Error, Result};
pub use volume::{CtVolume, GrayscaleSlice, VoxelSpacing};
