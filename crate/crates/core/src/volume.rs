//! Raw 16-bit CT volumes and their physical calibration.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest slice edge accepted by [`GrayscaleSlice::new`].
pub const MIN_SLICE_EDGE: usize = 16;

/// Physical voxel size. In-plane spacing is isotropic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoxelSpacing {
    pub in_plane_mm: f64,
    pub slice_thickness_mm: f64,
}

impl Default for VoxelSpacing {
    fn default() -> Self {
        Self {
            in_plane_mm: 0.2,
            slice_thickness_mm: 0.2,
        }
    }
}

impl VoxelSpacing {
    pub fn new(in_plane_mm: f64, slice_thickness_mm: f64) -> Result<Self> {
        let spacing = Self {
            in_plane_mm,
            slice_thickness_mm,
        };
        spacing.validate()?;
        Ok(spacing)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.in_plane_mm) || !ok(self.slice_thickness_mm) {
            return Err(Error::Parameter(format!(
                "voxel spacing must be strictly positive, got {} x {} mm",
                self.in_plane_mm, self.slice_thickness_mm
            )));
        }
        Ok(())
    }

    pub fn px_area_mm2(&self) -> f64 {
        self.in_plane_mm * self.in_plane_mm
    }
}

/// Converts a physical length to in-plane pixels.
pub fn mm_to_px(length_mm: f64, spacing: VoxelSpacing) -> f64 {
    debug_assert!(length_mm >= 0.0, "negative length {length_mm}");
    length_mm / spacing.in_plane_mm
}

/// One axial slice of 16-bit intensities, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayscaleSlice {
    width: usize,
    height: usize,
    pixels: Vec<u16>,
}

impl GrayscaleSlice {
    pub fn new(width: usize, height: usize, pixels: Vec<u16>) -> Result<Self> {
        if width < MIN_SLICE_EDGE || height < MIN_SLICE_EDGE {
            return Err(Error::Contract(format!(
                "slice {width}x{height} is smaller than {MIN_SLICE_EDGE}x{MIN_SLICE_EDGE}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Contract(format!(
                "slice {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }
}

/// An ordered stack of equally sized slices.
#[derive(Debug, Clone, PartialEq)]
pub struct CtVolume {
    slices: Vec<GrayscaleSlice>,
    spacing: VoxelSpacing,
    patient_id: String,
}

impl CtVolume {
    pub fn new(
        slices: Vec<GrayscaleSlice>,
        spacing: VoxelSpacing,
        patient_id: impl Into<String>,
    ) -> Result<Self> {
        spacing.validate()?;
        let first = slices
            .first()
            .ok_or_else(|| Error::Contract("a volume needs at least one slice".into()))?;
        let (w, h) = (first.width, first.height);
        if let Some(k) = slices.iter().position(|s| s.width != w || s.height != h) {
            return Err(Error::Contract(format!(
                "slice {k} is {}x{}, expected {w}x{h}",
                slices[k].width, slices[k].height
            )));
        }
        Ok(Self {
            slices,
            spacing,
            patient_id: patient_id.into(),
        })
    }

    pub fn slices(&self) -> &[GrayscaleSlice] {
        &self.slices
    }

    pub fn slice(&self, index: usize) -> &GrayscaleSlice {
        &self.slices[index]
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn width(&self) -> usize {
        self.slices[0].width
    }

    pub fn height(&self) -> usize {
        self.slices[0].height
    }

    pub fn spacing(&self) -> VoxelSpacing {
        self.spacing
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    /// Little-endian, slice-major, row-major bytes as stored in RAW files.
    pub fn to_raw_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * self.width() * self.height() * 2);
        for slice in &self.slices {
            for &p in &slice.pixels {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }
}

/// Decodes a RAW volume already held in memory.
pub fn decode_raw_volume(
    bytes: &[u8],
    width: usize,
    height: usize,
    n_slices: usize,
    spacing: VoxelSpacing,
    patient_id: impl Into<String>,
) -> Result<CtVolume> {
    let slice_bytes = width * height * 2;
    let expected = slice_bytes * n_slices;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "RAW volume {width}x{height}x{n_slices} needs {expected} bytes, file holds {}",
            bytes.len()
        )));
    }
    let slices = bytes
        .chunks_exact(slice_bytes.max(1))
        .map(|chunk| {
            let pixels = chunk
                .chunks_exact(2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]))
                .collect();
            GrayscaleSlice::new(width, height, pixels)
        })
        .collect::<Result<Vec<_>>>()?;
    CtVolume::new(slices, spacing, patient_id)
}

/// Reads a headerless 16-bit little-endian RAW volume.
///
/// The patient id defaults to the file stem.
pub fn load_raw_volume(
    path: &Path,
    width: usize,
    height: usize,
    n_slices: usize,
    spacing: VoxelSpacing,
) -> Result<CtVolume> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_raw_volume(&bytes, width, height, n_slices, spacing, id)
}

pub fn write_raw_volume(volume: &CtVolume, path: &Path) -> Result<()> {
    write_atomic(path, &volume.to_raw_bytes())
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Contract(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spacing() -> VoxelSpacing {
        VoxelSpacing::default()
    }

    #[test]
    fn decodes_little_endian_pixels() {
        // 2x2 is below the processing minimum, so decode the pixel words directly.
        let bytes = [0x01u8, 0x00, 0x00, 0x01, 0xFF, 0xFF, 0x00, 0x00];
        let words: Vec<u16> = bytes
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect();
        assert_eq!(words, vec![1, 256, 65535, 0]);

        let mut raw = vec![0u8; 16 * 16 * 2];
        raw[..8].copy_from_slice(&bytes);
        let vol = decode_raw_volume(&raw, 16, 16, 1, spacing(), "p").unwrap();
        assert_eq!(&vol.slice(0).pixels()[..4], &[1, 256, 65535, 0]);
    }

    #[test]
    fn full_size_geometry_byte_count() {
        assert_eq!(512 * 512 * 495 * 2, 259_522_560);
    }

    #[test]
    fn short_file_is_a_format_error() {
        let raw = vec![0u8; 16 * 16 * 2 * 9];
        let err = decode_raw_volume(&raw, 16, 16, 10, spacing(), "p").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Format(_)));
        assert!(msg.contains("5120") && msg.contains("4608"), "{msg}");
    }

    #[test]
    fn slices_start_at_their_byte_offsets() {
        let (w, h, n) = (16usize, 16usize, 3usize);
        let raw: Vec<u8> = (0..w * h * n)
            .flat_map(|i| (i as u16).to_le_bytes())
            .collect();
        let vol = decode_raw_volume(&raw, w, h, n, spacing(), "p").unwrap();
        for k in 0..n {
            assert_eq!(vol.slice(k).pixels()[0] as usize, k * w * h);
        }
        assert_eq!(vol.to_raw_bytes(), raw);
    }

    #[test]
    fn file_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.raw");
        let pixels: Vec<u16> = (0..32 * 20).map(|i| (i * 97 % 65536) as u16).collect();
        let slices = vec![
            GrayscaleSlice::new(32, 20, pixels.clone()).unwrap(),
            GrayscaleSlice::new(32, 20, pixels.iter().rev().copied().collect()).unwrap(),
        ];
        let vol = CtVolume::new(slices, spacing(), "vol").unwrap();
        write_raw_volume(&vol, &path).unwrap();
        let back = load_raw_volume(&path, 32, 20, 2, spacing()).unwrap();
        assert_eq!(back, vol);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err =
            load_raw_volume(Path::new("/nonexistent/x.raw"), 16, 16, 1, spacing()).unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn mm_to_px_examples() {
        assert_eq!(mm_to_px(5.0, spacing()), 25.0);
        assert_eq!(mm_to_px(0.0, spacing()), 0.0);
        assert_eq!(mm_to_px(30.0, spacing()), 150.0);
    }

    #[test]
    fn rejects_bad_spacing_and_ragged_volumes() {
        assert!(VoxelSpacing::new(0.0, 0.2).is_err());
        assert!(VoxelSpacing::new(0.2, -1.0).is_err());
        let a = GrayscaleSlice::new(16, 16, vec![0; 256]).unwrap();
        let b = GrayscaleSlice::new(16, 17, vec![0; 272]).unwrap();
        assert!(CtVolume::new(vec![a, b], spacing(), "p").is_err());
        assert!(CtVolume::new(vec![], spacing(), "p").is_err());
    }
}
