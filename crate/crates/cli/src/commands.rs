use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mandible_cad::cb::{build_training_pool, AnnotatedVolume};
use mandible_cad::config::CadConfig;
use mandible_cad::eval::{
    best_sensitivity_at, collapse_duplicates, froc_to_csv, read_detections, read_ground_truth,
    sweep_cb, sweep_ob, write_clusters, write_detections, write_ground_truth, FrocPoint,
    GroundTruthLesion, PatientDetections,
};
use mandible_cad::mlp::{load_model, save_model, train as fit, Label};
use mandible_cad::overlay::cluster_overlay;
use mandible_cad::phantom::{generate_phantom, CohortSpec, PhantomSpec};
use mandible_cad::scan::{apply_cb_threshold, cluster_all, scan_volume};
use mandible_cad::volume::{decode_raw_volume, write_atomic, write_raw_volume};
use mandible_cad::{CtVolume, Error, LesionKind, VoxelSpacing};
use serde::{Deserialize, Serialize};

use crate::manifest::{LocatedManifest, Manifest, MANIFEST_FILE};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_io() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
    .into()
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn create_dir(path: &Path) -> CliResult {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn load_config(path: Option<&Path>) -> CliResult<CadConfig> {
    Ok(match path {
        Some(p) => CadConfig::load(p)?,
        None => CadConfig::default(),
    })
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = toml::to_string(value).map_err(|e| CliError::usage(e.to_string()))?;
    Ok(write_atomic(path, text.as_bytes())?)
}

fn write_phantom_dir(
    spec: &PhantomSpec,
    dir: &Path,
) -> CliResult<(CtVolume, Vec<GroundTruthLesion>)> {
    let (volume, truths) = generate_phantom(spec)?;
    create_dir(dir)?;
    write_raw_volume(&volume, &dir.join("volume.raw"))?;
    write_ground_truth(&dir.join("ground_truth.csv"), &truths)?;
    let manifest = Manifest {
        patient_id: spec.patient_id.clone(),
        volume: "volume.raw".into(),
        ground_truth: Some("ground_truth.csv".into()),
        width: spec.width,
        height: spec.height,
        n_slices: spec.n_slices,
        spacing: spec.spacing,
        phantom: Some(spec.clone()),
    };
    write_toml(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok((volume, truths))
}

pub fn phantom(spec_path: &Path, out: &Path) -> CliResult {
    let spec = PhantomSpec::from_toml_str(&read_text(spec_path)?)?;
    let (volume, truths) = write_phantom_dir(&spec, out)?;
    println!(
        "{}: {}x{}x{} volume with {} lesion(s) written to {}",
        spec.patient_id,
        volume.width(),
        volume.height(),
        volume.len(),
        truths.len(),
        out.display()
    );
    Ok(())
}

pub fn cohort(
    kind: LesionKind,
    abnormal: usize,
    normal: usize,
    seed: u64,
    slices: usize,
    base: Option<&Path>,
    out: &Path,
) -> CliResult {
    let mut cohort = CohortSpec::new(kind, abnormal, normal, seed);
    if let Some(path) = base {
        cohort.base = PhantomSpec::from_toml_str(&read_text(path)?)?;
    }
    cohort.base.n_slices = slices;
    let mut all_truths = Vec::new();
    for spec in cohort.specs()? {
        let (_, truths) = write_phantom_dir(&spec, &out.join(&spec.patient_id))?;
        all_truths.extend(truths);
    }
    write_ground_truth(&out.join("ground_truth.csv"), &all_truths)?;
    println!(
        "{} {} phantoms ({abnormal} abnormal, {normal} normal) written to {}",
        abnormal + normal,
        kind,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainingReport {
    volumes: usize,
    lesion_samples: usize,
    normal_samples: usize,
    training_accuracy: f64,
    learning_rate: f64,
    epochs: usize,
    seed: u64,
}

pub fn train(
    manifests: &[PathBuf],
    config: Option<&Path>,
    model_path: &Path,
    report: Option<&Path>,
) -> CliResult {
    let cfg = load_config(config)?;
    let mut pool = Vec::new();
    // One volume in memory at a time.
    for path in manifests {
        let located = LocatedManifest::read(path)?;
        let av = AnnotatedVolume {
            volume: located.load_volume()?,
            truths: located.load_truths()?,
        };
        match build_training_pool(std::slice::from_ref(&av), &cfg) {
            Ok(samples) => pool.extend(samples),
            Err(Error::EmptyPool(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool(format!(
            "no close-border candidates in {} volume(s)",
            manifests.len()
        ))
        .into());
    }
    let lesion_samples = pool.iter().filter(|s| s.label == Label::Lesion).count();
    let model = fit(&pool, cfg.training)?;
    save_model(&model, model_path)?;

    let report_data = TrainingReport {
        volumes: manifests.len(),
        lesion_samples,
        normal_samples: pool.len() - lesion_samples,
        training_accuracy: model.accuracy(&pool, cfg.sweep.cb_threshold)?,
        learning_rate: cfg.training.learning_rate,
        epochs: cfg.training.epochs,
        seed: cfg.training.seed,
    };
    let report_path = match report {
        Some(p) => p.to_path_buf(),
        None => {
            let mut name = model_path.as_os_str().to_owned();
            name.push(".report.toml");
            PathBuf::from(name)
        }
    };
    write_toml(&report_path, &report_data)?;
    println!(
        "trained on {} lesion / {} normal samples, training accuracy {:.4}; model {}",
        report_data.lesion_samples,
        report_data.normal_samples,
        report_data.training_accuracy,
        model_path.display()
    );
    Ok(())
}

pub enum VolumeSource {
    Manifest(PathBuf),
    Raw {
        path: PathBuf,
        width: usize,
        height: usize,
        n_slices: usize,
    },
}

/// Contents of `run.toml` in a detection output directory.
#[derive(Debug, Serialize, Deserialize)]
struct RunInfo {
    patient_id: String,
    threshold: f64,
    width: usize,
    height: usize,
    n_slices: usize,
    spacing: VoxelSpacing,
    clusters: usize,
}

pub fn detect(
    source: &VolumeSource,
    config: Option<&Path>,
    model_path: &Path,
    threshold: Option<f64>,
    out: &Path,
) -> CliResult {
    let mut cfg = load_config(config)?;
    let model =
        load_model(model_path).map_err(|e| CliError::usage(format!("cannot use model: {e}")))?;
    let volume = match source {
        VolumeSource::Manifest(path) => LocatedManifest::read(path)?.load_volume()?,
        VolumeSource::Raw {
            path,
            width,
            height,
            n_slices,
        } => {
            let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            decode_raw_volume(&bytes, *width, *height, *n_slices, cfg.spacing, id)?
        }
    };
    cfg.spacing = volume.spacing();
    let threshold = threshold.unwrap_or(cfg.sweep.cb_threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::usage(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }

    let start = Instant::now();
    let all = scan_volume(&volume, &cfg, Some(&model))?;
    let kept = apply_cb_threshold(&all, threshold);
    let clusters = cluster_all(&kept, &volume, &cfg.cluster);
    let elapsed = start.elapsed();

    create_dir(out)?;
    let id = volume.patient_id().to_string();
    write_detections(&out.join("detections2d.csv"), &id, &all)?;
    write_clusters(&out.join("clusters.csv"), &id, &clusters)?;
    for (i, c) in clusters.iter().enumerate() {
        let k = c.mid_slice(volume.spacing());
        let name = format!("overlay_{i:02}_{}.pgm", c.kind);
        write_atomic(
            &out.join(name),
            &cluster_overlay(volume.slice(k), c, volume.spacing()),
        )?;
    }
    write_toml(
        &out.join("run.toml"),
        &RunInfo {
            patient_id: id.clone(),
            threshold,
            width: volume.width(),
            height: volume.height(),
            n_slices: volume.len(),
            spacing: volume.spacing(),
            clusters: clusters.len(),
        },
    )?;
    let count = |k| clusters.iter().filter(|c| c.kind == k).count();
    println!(
        "{id}: {} slices, {} CB and {} OB cluster(s) in {:.2} s",
        volume.len(),
        count(LesionKind::CloseBorder),
        count(LesionKind::OpenBorder),
        elapsed.as_secs_f64()
    );
    Ok(())
}

const SUMMARY_FP_LEVELS: [f64; 6] = [0.0, 0.1, 0.2, 0.5, 1.0, 2.0];

fn summarize(out: &mut String, curve: &[FrocPoint]) {
    let _ = writeln!(out, "  {} operating point(s)", curve.len());
    for level in SUMMARY_FP_LEVELS {
        match best_sensitivity_at(curve, level) {
            Some(s) => {
                let _ = writeln!(out, "  mean FP <= {level:<4} -> sensitivity {s:.3}");
            }
            None => {
                let _ = writeln!(out, "  mean FP <= {level:<4} -> no operating point");
            }
        }
    }
}

pub fn evaluate(
    runs: &[PathBuf],
    truth_files: &[PathBuf],
    config: Option<&Path>,
    out: &Path,
) -> CliResult {
    let cfg = load_config(config)?;

    let mut patients: BTreeMap<String, PatientDetections> = BTreeMap::new();
    for dir in runs {
        let info: RunInfo = toml::from_str(&read_text(&dir.join("run.toml"))?)
            .map_err(|e| CliError::usage(format!("{}: {e}", dir.join("run.toml").display())))?;
        let records = read_detections(&dir.join("detections2d.csv"))?;
        if let Some(r) = records.iter().find(|r| r.patient_id != info.patient_id) {
            return Err(CliError::usage(format!(
                "{}: detection for patient {} in the run of {}",
                dir.display(),
                r.patient_id,
                info.patient_id
            )));
        }
        let entry = PatientDetections {
            patient_id: info.patient_id.clone(),
            spacing: info.spacing,
            detections: records.iter().map(|r| r.to_detection()).collect(),
            truths: Vec::new(),
        };
        if patients.insert(info.patient_id.clone(), entry).is_some() {
            return Err(CliError::usage(format!(
                "patient {} has more than one run",
                info.patient_id
            )));
        }
    }

    let mut orphans = BTreeSet::new();
    for path in truth_files {
        for t in read_ground_truth(path)? {
            match patients.get_mut(&t.patient_id) {
                Some(p) => p.truths.push(t),
                None => {
                    orphans.insert(t.patient_id);
                }
            }
        }
    }
    if !orphans.is_empty() {
        return Err(CliError::usage(format!(
            "ground truth for patients without a detection run: {}",
            orphans.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    let patients: Vec<PatientDetections> = patients.into_values().collect();
    create_dir(out)?;
    let mut summary = format!("{} patient(s)\n", patients.len());
    for kind in [LesionKind::CloseBorder, LesionKind::OpenBorder] {
        let n_truths = patients
            .iter()
            .flat_map(|p| &p.truths)
            .filter(|t| t.kind == kind)
            .count();
        if n_truths == 0 {
            let _ = writeln!(
                summary,
                "{kind}: no ground-truth lesions, sensitivity undefined"
            );
            continue;
        }
        let curve = match kind {
            LesionKind::CloseBorder => sweep_cb(&patients, &cfg.sweep.cb_thresholds, &cfg.cluster)?,
            LesionKind::OpenBorder => sweep_ob(&patients, &cfg.sweep.ob_persistence, &cfg.cluster)?,
        };
        let curve = collapse_duplicates(&curve);
        let name = format!("froc_{}.csv", kind.as_str().to_lowercase());
        write_atomic(&out.join(name), &froc_to_csv(&curve)?)?;
        let _ = writeln!(summary, "{kind}: {n_truths} ground-truth lesion(s)");
        summarize(&mut summary, &curve);
    }
    write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}
