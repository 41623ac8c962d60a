//! Tunable parameters, loadable from a TOML file.
//!
//! Every size threshold is expressed in millimetres and converted through the
//! voxel spacing at the point of use. Unspecified keys keep their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DEFAULT_GLCM_LEVELS, DEFAULT_ROI_MARGIN_PX};
use crate::mlp::TrainingConfig;
use crate::volume::VoxelSpacing;

/// Close-border candidate stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateParams {
    /// Closing fills holes up to this diameter.
    pub fill_mm: f64,
    /// Holes must be strictly larger than this (equivalent diameter).
    pub min_hole_mm: f64,
    pub roi_margin_px: usize,
    pub glcm_levels: usize,
}

impl Default for CandidateParams {
    fn default() -> Self {
        Self {
            fill_mm: 5.0,
            min_hole_mm: 5.0,
            roi_margin_px: DEFAULT_ROI_MARGIN_PX,
            glcm_levels: DEFAULT_GLCM_LEVELS,
        }
    }
}

/// Open-border morphological pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpenBorderParams {
    pub small_fill_mm: f64,
    pub large_fill_mm: f64,
    /// Difference blobs must lie strictly between these diameters.
    pub min_diameter_mm: f64,
    pub max_diameter_mm: f64,
}

impl Default for OpenBorderParams {
    fn default() -> Self {
        Self {
            small_fill_mm: 5.0,
            large_fill_mm: 30.0,
            min_diameter_mm: 5.0,
            max_diameter_mm: 30.0,
        }
    }
}

/// 3D linking of per-slice detections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    pub link_radius_mm: f64,
    pub min_persistence: usize,
    /// Clusters match a truth within `max(min_match_radius_mm, diameter / 2)`.
    pub min_match_radius_mm: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            link_radius_mm: 5.0,
            min_persistence: 5,
            min_match_radius_mm: 5.0,
        }
    }
}

/// Operating points for FROC sweeps and the default detection threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub cb_threshold: f64,
    pub cb_thresholds: Vec<f64>,
    pub ob_persistence: Vec<usize>,
}

impl Default for SweepParams {
    fn default() -> Self {
        let mut cb_thresholds: Vec<f64> = (0..20).map(|i| f64::from(20 - i) / 20.0).collect();
        cb_thresholds.extend([0.02, 0.01, 0.0]);
        Self {
            cb_threshold: 0.5,
            cb_thresholds,
            ob_persistence: vec![
                1_000_000, 200, 100, 75, 50, 40, 30, 20, 15, 10, 7, 5, 3, 2, 1,
            ],
        }
    }
}

/// Lesion sizes each detector is designed for; phantom cohorts draw from these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignRange {
    pub cb_min_mm: f64,
    pub cb_max_mm: f64,
    pub ob_min_mm: f64,
    pub ob_max_mm: f64,
}

impl Default for DesignRange {
    fn default() -> Self {
        Self {
            cb_min_mm: 7.5,
            cb_max_mm: 20.0,
            ob_min_mm: 10.0,
            ob_max_mm: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CadConfig {
    pub spacing: VoxelSpacing,
    pub candidates: CandidateParams,
    pub open_border: OpenBorderParams,
    pub cluster: ClusterParams,
    pub training: TrainingConfig,
    pub sweep: SweepParams,
    pub design_range: DesignRange,
}

impl CadConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn validate(&self) -> Result<()> {
        self.spacing.validate()?;
        self.training.validate()?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("candidates.fill_mm", self.candidates.fill_mm)?;
        positive("open_border.small_fill_mm", self.open_border.small_fill_mm)?;
        positive("open_border.large_fill_mm", self.open_border.large_fill_mm)?;
        positive("cluster.link_radius_mm", self.cluster.link_radius_mm)?;
        if self.candidates.glcm_levels < 2 {
            return Err(Error::Parameter(
                "candidates.glcm_levels must be at least 2".into(),
            ));
        }
        if self.cluster.min_persistence == 0 {
            return Err(Error::Parameter(
                "cluster.min_persistence must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.sweep.cb_threshold)
            || self
                .sweep
                .cb_thresholds
                .iter()
                .any(|t| !(0.0..=1.0).contains(t))
        {
            return Err(Error::Parameter("CB thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = CadConfig::default();
        let back = CadConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = CadConfig::from_toml_str(
            "[spacing]\nin_plane_mm = 0.4\n[cluster]\nmin_persistence = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.spacing.in_plane_mm, 0.4);
        assert_eq!(cfg.spacing.slice_thickness_mm, 0.2);
        assert_eq!(cfg.cluster.min_persistence, 3);
        assert_eq!(cfg.open_border.large_fill_mm, 30.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(CadConfig::from_toml_str("[spacing]\nfoo = 1\n").is_err());
        assert!(CadConfig::from_toml_str("[training]\nlearning_rate = 2.0\n").is_err());
        assert!(CadConfig::from_toml_str("[cluster]\nmin_persistence = 0\n").is_err());
    }
}
