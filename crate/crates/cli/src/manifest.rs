//! `manifest.toml`: geometry and file locations of one stored volume.

use std::path::{Path, PathBuf};

use mandible_cad::eval::{read_ground_truth, GroundTruthLesion};
use mandible_cad::phantom::PhantomSpec;
use mandible_cad::volume::decode_raw_volume;
use mandible_cad::{CtVolume, Error, Result, VoxelSpacing};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub patient_id: String,
    /// RAW file, relative to the manifest's directory.
    pub volume: PathBuf,
    /// Ground-truth CSV, relative to the manifest's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    pub n_slices: usize,
    pub spacing: VoxelSpacing,
    /// The generating spec, for phantoms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSpec>,
}

/// A manifest together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct LocatedManifest {
    pub manifest: Manifest,
    pub dir: PathBuf,
}

impl LocatedManifest {
    /// Reads `path`, or `path/manifest.toml` when `path` is a directory.
    pub fn read(path: &Path) -> Result<Self> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::Io {
            path: file.clone(),
            source: e,
        })?;
        let manifest: Manifest =
            toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", file.display())))?;
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { manifest, dir })
    }

    pub fn load_volume(&self) -> Result<CtVolume> {
        let m = &self.manifest;
        let path = self.dir.join(&m.volume);
        let bytes = std::fs::read(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        decode_raw_volume(
            &bytes,
            m.width,
            m.height,
            m.n_slices,
            m.spacing,
            m.patient_id.clone(),
        )
    }

    pub fn load_truths(&self) -> Result<Vec<GroundTruthLesion>> {
        match &self.manifest.ground_truth {
            Some(p) => Ok(read_ground_truth(&self.dir.join(p))?
                .into_iter()
                .filter(|t| t.patient_id == self.manifest.patient_id)
                .collect()),
            None => Err(Error::Contract(format!(
                "manifest for {} names no ground-truth file",
                self.manifest.patient_id
            ))),
        }
    }
}
