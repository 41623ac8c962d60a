//! Synthetic mandible-like volumes with implanted lesions and exact ground truth.
//!
//! Each axial slice shows a horseshoe band of bone opening toward the bottom
//! of the image: a cortical shell around a trabecular interior, over a dark
//! background. Close-border lesions are dark spheres with a cortical rim
//! inside the band; open-border lesions erase an angular sector of the whole
//! band over the lesion's axial extent. Marrow spaces are rimless dark
//! ellipsoids — normal anatomy that still produces close-border candidates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detection::LesionKind;
use crate::error::{Error, Result};
use crate::eval::GroundTruthLesion;
use crate::volume::{CtVolume, GrayscaleSlice, VoxelSpacing};

/// Horseshoe geometry in millimetres; angles in degrees with y pointing down,
/// so the arc from 170° to 370° passes through the top of the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArcGeometry {
    pub center_mm: [f64; 2],
    pub inner_radius_mm: f64,
    pub outer_radius_mm: f64,
    pub start_deg: f64,
    pub end_deg: f64,
    pub cortical_mm: f64,
}

impl Default for ArcGeometry {
    fn default() -> Self {
        Self {
            center_mm: [51.2, 63.5],
            inner_radius_mm: 22.0,
            outer_radius_mm: 46.0,
            start_deg: 170.0,
            end_deg: 370.0,
            cortical_mm: 2.0,
        }
    }
}

impl ArcGeometry {
    pub fn mid_radius_mm(&self) -> f64 {
        (self.inner_radius_mm + self.outer_radius_mm) / 2.0
    }

    /// In-plane point at polar coordinates around the arc center.
    pub fn point_mm(&self, angle_deg: f64, radius_mm: f64) -> [f64; 2] {
        let a = angle_deg.to_radians();
        [
            self.center_mm[0] + radius_mm * a.cos(),
            self.center_mm[1] + radius_mm * a.sin(),
        ]
    }

    /// `(radius, angle)` of a point, the angle unwrapped into `[start, start + 360)`.
    pub fn polar(&self, x_mm: f64, y_mm: f64) -> (f64, f64) {
        let dx = x_mm - self.center_mm[0];
        let dy = y_mm - self.center_mm[1];
        let a = dy.atan2(dx).to_degrees();
        (
            (dx * dx + dy * dy).sqrt(),
            (a - self.start_deg).rem_euclid(360.0) + self.start_deg,
        )
    }

    pub fn in_band(&self, x_mm: f64, y_mm: f64) -> bool {
        let (r, a) = self.polar(x_mm, y_mm);
        r >= self.inner_radius_mm && r <= self.outer_radius_mm && a <= self.end_deg
    }

    fn validate(&self) -> Result<()> {
        let ok = self.inner_radius_mm > 0.0
            && self.outer_radius_mm > self.inner_radius_mm
            && self.cortical_mm > 0.0
            && 2.0 * self.cortical_mm < self.outer_radius_mm - self.inner_radius_mm
            && self.end_deg > self.start_deg
            && self.end_deg - self.start_deg <= 360.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Spec(format!("inconsistent arc geometry {self:?}")))
        }
    }
}

/// Gray levels as fractions of the 16-bit range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntensityLevels {
    pub background: f64,
    pub trabecular: f64,
    pub cortical: f64,
}

impl Default for IntensityLevels {
    fn default() -> Self {
        Self {
            background: 0.05,
            trabecular: 0.35,
            cortical: 0.80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LesionSpec {
    pub kind: LesionKind,
    pub centroid_mm: [f64; 3],
    pub diameter_mm: f64,
}

/// Rimless dark ellipsoid. Semi-axes are tangential, radial (relative to the
/// arc center) and axial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarrowSpace {
    pub centroid_mm: [f64; 3],
    pub semi_axes_mm: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub patient_id: String,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub n_slices: usize,
    pub spacing: VoxelSpacing,
    /// Standard deviation of the additive Gaussian noise, as a fraction of
    /// the 16-bit range.
    pub noise_sigma: f64,
    /// Thickness of the bright rim around close-border lesions.
    pub lesion_rim_mm: f64,
    pub arc: ArcGeometry,
    pub levels: IntensityLevels,
    pub lesions: Vec<LesionSpec>,
    pub marrow_spaces: Vec<MarrowSpace>,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            patient_id: "phantom".into(),
            seed: 0,
            width: 512,
            height: 512,
            n_slices: 100,
            spacing: VoxelSpacing::default(),
            noise_sigma: 0.02,
            lesion_rim_mm: 1.0,
            arc: ArcGeometry::default(),
            levels: IntensityLevels::default(),
            lesions: Vec::new(),
            marrow_spaces: Vec::new(),
        }
    }
}

impl PhantomSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("phantom specs always serialize")
    }

    /// Same anatomy and lesions on a grid with a different pixel size.
    pub fn with_grid(mut self, width: usize, height: usize, in_plane_mm: f64) -> Self {
        self.width = width;
        self.height = height;
        self.spacing.in_plane_mm = in_plane_mm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spacing
            .validate()
            .map_err(|e| Error::Spec(e.to_string()))?;
        if self.width < 16 || self.height < 16 || self.n_slices == 0 {
            return Err(Error::Spec(format!(
                "volume {}x{}x{} is too small",
                self.width, self.height, self.n_slices
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0)
            || self.lesion_rim_mm.is_nan()
            || self.lesion_rim_mm < 0.0
        {
            return Err(Error::Spec(
                "noise and rim thickness must be non-negative".into(),
            ));
        }
        let l = self.levels;
        if ![l.background, l.trabecular, l.cortical]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
        {
            return Err(Error::Spec("intensity levels must lie in [0, 1]".into()));
        }
        self.arc.validate()?;
        let fov_w = self.width as f64 * self.spacing.in_plane_mm;
        let fov_h = self.height as f64 * self.spacing.in_plane_mm;
        let [cx, cy] = self.arc.center_mm;
        let r = self.arc.outer_radius_mm;
        if cx - r < 0.0 || cx + r > fov_w || cy - r < 0.0 {
            return Err(Error::Spec(format!(
                "arc of radius {r} mm around ({cx}, {cy}) does not fit a {fov_w}x{fov_h} mm field of view"
            )));
        }

        let upper_limit_mm = (2 * self.height / 3) as f64 * self.spacing.in_plane_mm;
        for (i, lesion) in self.lesions.iter().enumerate() {
            let [x, y, _] = lesion.centroid_mm;
            if lesion.diameter_mm.is_nan() || lesion.diameter_mm <= 0.0 {
                return Err(Error::Spec(format!("lesion {i} has non-positive diameter")));
            }
            if !self.arc.in_band(x, y) {
                return Err(Error::Spec(format!(
                    "lesion {i} centroid ({x}, {y}) mm lies outside the bone band"
                )));
            }
            if y > upper_limit_mm {
                return Err(Error::Spec(format!(
                    "lesion {i} centroid lies in the bottom third of the slice"
                )));
            }
        }
        let spheres = self
            .lesions
            .iter()
            .map(|l| (l.centroid_mm, l.diameter_mm / 2.0 + self.lesion_rim_mm))
            .chain(self.marrow_spaces.iter().map(|m| {
                let r = m.semi_axes_mm.iter().cloned().fold(0.0, f64::max);
                (m.centroid_mm, r)
            }));
        let spheres: Vec<([f64; 3], f64)> = spheres.collect();
        for i in 0..spheres.len() {
            for j in i + 1..spheres.len() {
                let d: f64 = (0..3)
                    .map(|k| (spheres[i].0[k] - spheres[j].0[k]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d < spheres[i].1 + spheres[j].1 {
                    return Err(Error::Spec(format!(
                        "lesions or marrow spaces {i} and {j} overlap"
                    )));
                }
            }
        }
        for (i, m) in self.marrow_spaces.iter().enumerate() {
            if m.semi_axes_mm.iter().any(|a| a.is_nan() || *a <= 0.0) {
                return Err(Error::Spec(format!(
                    "marrow space {i} has a non-positive semi-axis"
                )));
            }
            if !self.arc.in_band(m.centroid_mm[0], m.centroid_mm[1]) {
                return Err(Error::Spec(format!(
                    "marrow space {i} lies outside the bone band"
                )));
            }
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> Vec<GroundTruthLesion> {
        self.lesions
            .iter()
            .map(|l| GroundTruthLesion {
                patient_id: self.patient_id.clone(),
                kind: l.kind,
                x_mm: l.centroid_mm[0],
                y_mm: l.centroid_mm[1],
                z_mm: l.centroid_mm[2],
                diameter_mm: l.diameter_mm,
            })
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Tissue {
    Background,
    Trabecular,
    Cortical,
}

/// Objects intersecting one slice, reduced to in-plane tests.
struct SliceScene {
    /// `(center, hole radius, rim outer radius)`.
    discs: Vec<([f64; 2], f64, f64)>,
    /// `(center angle, half-angle)` in degrees of erased band sectors.
    sectors: Vec<(f64, f64)>,
    /// `(center, tangential unit vector, in-plane semi-axes)`.
    ellipses: Vec<([f64; 2], [f64; 2], f64, f64)>,
}

impl SliceScene {
    fn new(spec: &PhantomSpec, z_mm: f64) -> Self {
        let mut scene = SliceScene {
            discs: Vec::new(),
            sectors: Vec::new(),
            ellipses: Vec::new(),
        };
        for l in &spec.lesions {
            let [x, y, zc] = l.centroid_mm;
            let half = l.diameter_mm / 2.0;
            let dz = z_mm - zc;
            match l.kind {
                LesionKind::CloseBorder => {
                    let outer = half + spec.lesion_rim_mm;
                    if dz.abs() <= outer {
                        let hole = (half * half - dz * dz).max(0.0).sqrt();
                        scene
                            .discs
                            .push(([x, y], hole, (outer * outer - dz * dz).sqrt()));
                    }
                }
                LesionKind::OpenBorder => {
                    if dz.abs() <= half {
                        let (r, angle) = spec.arc.polar(x, y);
                        scene.sectors.push((angle, (half / r).to_degrees()));
                    }
                }
            }
        }
        for m in &spec.marrow_spaces {
            let [x, y, zc] = m.centroid_mm;
            let [a, b, c] = m.semi_axes_mm;
            let t = 1.0 - ((z_mm - zc) / c).powi(2);
            if t > 0.0 {
                let (_, angle) = spec.arc.polar(x, y);
                let phi = angle.to_radians();
                let s = t.sqrt();
                scene
                    .ellipses
                    .push(([x, y], [-phi.sin(), phi.cos()], a * s, b * s));
            }
        }
        scene
    }

    fn tissue(&self, spec: &PhantomSpec, x: f64, y: f64) -> Tissue {
        let arc = &spec.arc;
        let (r, angle) = arc.polar(x, y);
        if r < arc.inner_radius_mm || r > arc.outer_radius_mm || angle > arc.end_deg {
            return Tissue::Background;
        }
        if self.sectors.iter().any(|&(c, h)| (angle - c).abs() <= h) {
            return Tissue::Background;
        }
        for &([cx, cy], hole, outer) in &self.discs {
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            if d2 <= hole * hole {
                return Tissue::Background;
            }
            if d2 <= outer * outer {
                return Tissue::Cortical;
            }
        }
        for &([cx, cy], [tx, ty], a, b) in &self.ellipses {
            let (dx, dy) = (x - cx, y - cy);
            let u = dx * tx + dy * ty;
            let v = -dx * ty + dy * tx;
            if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                return Tissue::Background;
            }
        }
        let c = arc.cortical_mm;
        let to_end = ((angle - arc.start_deg).min(arc.end_deg - angle)).to_radians() * r;
        if r - arc.inner_radius_mm < c || arc.outer_radius_mm - r < c || to_end < c {
            Tissue::Cortical
        } else {
            Tissue::Trabecular
        }
    }
}

/// Renders slice `k` of a validated spec.
pub fn render_slice(spec: &PhantomSpec, k: usize) -> GrayscaleSlice {
    let px = spec.spacing.in_plane_mm;
    let scene = SliceScene::new(spec, k as f64 * spec.spacing.slice_thickness_mm);
    let full = u16::MAX as f64;
    let level = |t: Tissue| match t {
        Tissue::Background => spec.levels.background,
        Tissue::Trabecular => spec.levels.trabecular,
        Tissue::Cortical => spec.levels.cortical,
    } * full;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(k as u64);
    let noise = Normal::new(0.0, spec.noise_sigma * full).expect("validated sigma");
    let mut pixels = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let v =
                level(scene.tissue(spec, x as f64 * px, y as f64 * px)) + noise.sample(&mut rng);
            pixels.push(v.round().clamp(0.0, full) as u16);
        }
    }
    GrayscaleSlice::new(spec.width, spec.height, pixels).expect("validated dimensions")
}

/// Renders the volume and returns it with the spec's lesions as ground truth.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(CtVolume, Vec<GroundTruthLesion>)> {
    use rayon::prelude::*;
    spec.validate()?;
    let slices: Vec<GrayscaleSlice> = (0..spec.n_slices)
        .into_par_iter()
        .map(|k| render_slice(spec, k))
        .collect();
    let volume = CtVolume::new(slices, spec.spacing, spec.patient_id.clone())?;
    Ok((volume, spec.ground_truth()))
}

/// Parameters of a batch of phantoms for a benchmark split.
#[derive(Debug, Clone)]
pub struct CohortSpec {
    pub kind: LesionKind,
    pub n_abnormal: usize,
    pub n_normal: usize,
    pub diameter_range_mm: (f64, f64),
    pub marrow_spaces_per_patient: usize,
    pub seed: u64,
    pub id_prefix: String,
    /// Grid, depth, noise, arc and levels shared by every phantom.
    pub base: PhantomSpec,
}

impl CohortSpec {
    pub fn new(kind: LesionKind, n_abnormal: usize, n_normal: usize, seed: u64) -> Self {
        let diameter_range_mm = match kind {
            LesionKind::CloseBorder => (7.5, 20.0),
            LesionKind::OpenBorder => (10.0, 25.0),
        };
        Self {
            kind,
            n_abnormal,
            n_normal,
            diameter_range_mm,
            marrow_spaces_per_patient: 2,
            seed,
            id_prefix: kind.as_str().to_lowercase(),
            base: PhantomSpec::default(),
        }
    }

    /// Abnormal phantoms first, then normal ones; each has its own seed.
    pub fn specs(&self) -> Result<Vec<PhantomSpec>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let depth = self.base.n_slices as f64 * self.base.spacing.slice_thickness_mm;
        let arc = self.base.arc;
        let r_mid = arc.mid_radius_mm();
        let mut specs = Vec::with_capacity(self.n_abnormal + self.n_normal);
        for i in 0..self.n_abnormal + self.n_normal {
            let abnormal = i < self.n_abnormal;
            let mut spec = self.base.clone();
            spec.seed = rng.random();
            spec.patient_id = format!(
                "{}-{}{:02}",
                self.id_prefix,
                if abnormal { "a" } else { "n" },
                if abnormal { i } else { i - self.n_abnormal }
            );
            spec.lesions.clear();
            spec.marrow_spaces.clear();
            // (angle, angular half-width) of everything placed so far.
            let mut occupied: Vec<(f64, f64)> = Vec::new();
            if abnormal {
                let (lo, hi) = self.diameter_range_mm;
                let d = if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                };
                let angle = rng.random_range(200.0..=340.0);
                let [x, y] = arc.point_mm(angle, r_mid);
                let z = rng.random_range(0.3..=0.7) * depth;
                spec.lesions.push(LesionSpec {
                    kind: self.kind,
                    centroid_mm: [x, y, z],
                    diameter_mm: d,
                });
                let extent = d / 2.0 + spec.lesion_rim_mm + 3.0;
                occupied.push((angle, (extent / r_mid).to_degrees()));
            }
            for _ in 0..self.marrow_spaces_per_patient {
                let semi = [
                    rng.random_range(4.5..=6.0),
                    rng.random_range(3.2..=3.8),
                    rng.random_range(3.0..=6.0),
                ];
                let half = ((semi[0] + 3.0) / r_mid).to_degrees();
                let placed = (0..200).find_map(|_| {
                    let angle: f64 = rng.random_range(195.0..=345.0);
                    let free = occupied.iter().all(|&(a, h)| (angle - a).abs() > h + half);
                    free.then_some(angle)
                });
                let Some(angle) = placed else { continue };
                occupied.push((angle, half));
                let [x, y] = arc.point_mm(angle, r_mid);
                let z = rng.random_range(0.2..=0.8) * depth;
                spec.marrow_spaces.push(MarrowSpace {
                    centroid_mm: [x, y, z],
                    semi_axes_mm: semi,
                });
            }
            spec.validate()?;
            specs.push(spec);
        }
        Ok(specs)
    }
}
