//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mandible_cad::cb::AnnotatedVolume;
use mandible_cad::config::CadConfig;
use mandible_cad::eval::{
    best_sensitivity_at, is_monotone, sweep_cb, sweep_ob, FrocPoint, PatientDetections,
};
use mandible_cad::features::{first_order_stats, glcm, haralick_features, hu_moments, Roi};
use mandible_cad::imaging::{
    kapur_threshold_from_histogram, morph_close, BinaryImage, StructuringElement,
};
use mandible_cad::mlp::{
    init_network, model_to_string, train, Label, LabeledSample, MlpModel, TrainingConfig,
};
use mandible_cad::phantom::{generate_phantom, ArcGeometry, LesionSpec, PhantomSpec};
use mandible_cad::scan::{detect_volume, scan_volume};
use mandible_cad::{features::FeatureVector, LesionKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// --- 1 ---------------------------------------------------------------------

fn random_histogram(rng: &mut ChaCha8Rng) -> [u64; 256] {
    let mut h = [0u64; 256];
    let density: f64 = rng.random_range(0.01..1.0);
    let scale: u64 = [10, 1_000, 100_000][rng.random_range(0..3)];
    for c in h.iter_mut() {
        if rng.random_bool(density) {
            *c = rng.random_range(0..=scale);
        }
    }
    h
}

fn random_roi(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Roi {
    // Mix smooth and noisy content so every GLCM bin pattern shows up.
    let base: i32 = rng.random_range(0..256);
    let spread: i32 = rng.random_range(0..256);
    let pixels = (0..w * h)
        .map(|_| (base + rng.random_range(-spread..=spread)).clamp(0, 255) as u8)
        .collect();
    Roi::new(w, h, pixels, (0, 0)).unwrap()
}

fn criterion_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let mut kapur_mismatch = 0;
    for _ in 0..1000 {
        let h = random_histogram(&mut rng);
        if kapur_threshold_from_histogram(&h).ok() != kapur_oracle(&h) {
            kapur_mismatch += 1;
        }
    }

    let mut tex_err: f64 = 0.0;
    for _ in 0..100 {
        let roi = random_roi(&mut rng, 8, 8);
        let g = glcm(&roi, 32).map_err(|e| e.to_string())?;
        let p = glcm_oracle(roi.pixels(), 8, 32);
        for (a, b) in g.probabilities().iter().zip(&p) {
            tex_err = tex_err.max((a - b).abs());
        }
        let t = haralick_features(&g);
        let o = haralick_oracle(&p, 32);
        for (a, b) in [t.contrast, t.homogeneity, t.energy, t.entropy]
            .iter()
            .zip(o)
        {
            tex_err = tex_err.max((a - b).abs());
        }
    }

    let mut fo_rel: f64 = 0.0;
    for _ in 0..100 {
        let (w, h) = (rng.random_range(2..40), rng.random_range(2..40));
        let roi = random_roi(&mut rng, w, h);
        let s = first_order_stats(&roi);
        let o = first_order_oracle(roi.pixels());
        for (a, b) in [s.mean, s.stddev, s.skewness, s.kurtosis].iter().zip(o) {
            fo_rel = fo_rel.max((a - b).abs() / b.abs().max(1e-300));
        }
    }

    let elapsed = start.elapsed();
    check(
        kapur_mismatch == 0
            && tex_err <= 1e-12
            && fo_rel <= 1e-9
            && elapsed < Duration::from_secs(10),
        format!(
            "kapur mismatches {kapur_mismatch}/1000, GLCM+Haralick max abs err {tex_err:.1e}, \
             first-order max rel err {fo_rel:.1e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

// --- 2 ---------------------------------------------------------------------

fn criterion_morphology() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for _ in 0..200 {
        let density: f64 = rng.random_range(0.05..0.7);
        let mask: Vec<bool> = (0..64 * 64).map(|_| rng.random_bool(density)).collect();
        let a = BinaryImage::new(64, 64, mask).unwrap();
        let extra: Vec<bool> = a
            .mask()
            .iter()
            .map(|&v| v || rng.random_bool(0.1))
            .collect();
        let b = BinaryImage::new(64, 64, extra).unwrap();
        let se = StructuringElement::disk(rng.random_range(1..=6)).unwrap();

        let ca = morph_close(&a, &se);
        violations += usize::from(morph_close(&ca, &se) != ca);
        violations += usize::from(!a.is_subset_of(&ca));
        violations += usize::from(!ca.is_subset_of(&morph_close(&b, &se)));
    }
    check(
        violations == 0,
        format!("{violations} violations over 200 masks"),
    )
}

// --- 3 ---------------------------------------------------------------------

/// Intensity of shape `k` at a point relative to its own origin; zero outside.
fn shape(k: usize, x: f64, y: f64) -> u8 {
    let (cx, cy) = (x - 24.0, y - 24.0);
    let rot = |deg: f64| {
        let a = f64::to_radians(deg);
        (cx * a.cos() + cy * a.sin(), -cx * a.sin() + cy * a.cos())
    };
    let inside = match k {
        0..=5 => {
            let (u, v) = rot(17.0 * k as f64);
            let (a, b) = (8.0 + 2.0 * k as f64, 5.0 + k as f64);
            (u / a).powi(2) + (v / b).powi(2) <= 1.0
        }
        6..=9 => {
            let (u, v) = rot(11.0 + 23.0 * k as f64);
            u.abs() <= 6.0 + k as f64 && v.abs() <= 4.0 + 0.5 * k as f64
        }
        10..=13 => {
            // Scalene triangle.
            let (u, v) = rot(31.0 * k as f64);
            v >= -8.0 && u >= -10.0 && 0.9 * u + v <= 6.0 + (k - 10) as f64
        }
        14..=16 => {
            // L shape.
            let (u, v) = rot(40.0 * (k - 14) as f64);
            (u.abs() <= 3.0 + (k - 14) as f64 && v.abs() <= 12.0)
                || ((0.0..=13.0).contains(&u) && (v - 9.0).abs() <= 3.0)
        }
        _ => {
            let (u, v) = rot(25.0 * k as f64);
            (u / 14.0).powi(2) + (v / 9.0).powi(2) <= 1.0
        }
    };
    if !inside {
        return 0;
    }
    if k >= 17 {
        // Intensity ramps make the weighting matter.
        (60.0 + 8.0 * (x - 10.0).max(0.0)).min(255.0) as u8
    } else {
        200
    }
}

fn render(k: usize, size: usize, dx: usize, dy: usize) -> Roi {
    let mut pixels = vec![0u8; size * size];
    for y in 0..48 {
        for x in 0..48 {
            pixels[(y + dy) * size + x + dx] = shape(k, x as f64, y as f64);
        }
    }
    Roi::new(size, size, pixels, (0, 0)).unwrap()
}

fn rotate90(r: &Roi) -> Roi {
    let (w, h) = (r.width(), r.height());
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            // (x, y) -> (h-1-y, x)
            out[x * h + (h - 1 - y)] = r.get(x, y);
        }
    }
    Roi::new(h, w, out, (0, 0)).unwrap()
}

fn upscale2(r: &Roi) -> Roi {
    let (w, h) = (r.width(), r.height());
    let mut out = vec![0u8; 4 * w * h];
    for y in 0..2 * h {
        for x in 0..2 * w {
            out[y * 2 * w + x] = r.get(x / 2, y / 2);
        }
    }
    Roi::new(2 * w, 2 * h, out, (0, 0)).unwrap()
}

fn criterion_hu() -> Outcome {
    let (mut trans, mut rot, mut scale): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..20 {
        let base = hu_moments(&render(k, 64, 0, 0)).map_err(|e| e.to_string())?;
        let moved = hu_moments(&render(k, 64, 13, 9)).map_err(|e| e.to_string())?;
        let turned = hu_moments(&rotate90(&render(k, 64, 5, 3))).map_err(|e| e.to_string())?;
        let big = hu_moments(&upscale2(&render(k, 64, 0, 0))).map_err(|e| e.to_string())?;
        for i in 0..7 {
            trans = trans.max((base[i] - moved[i]).abs());
            rot = rot.max((base[i] - turned[i]).abs());
            // Invariants that vanish by symmetry are compared against a 1e-8 floor.
            let denom = base[i].abs().max(big[i].abs()).max(1e-8);
            scale = scale.max((base[i] - big[i]).abs() / denom);
        }
    }

    let mut disk_phi1: f64 = 0.0;
    let mut disk_rest: f64 = 0.0;
    for r in [20usize, 25, 32] {
        let size = 2 * r + 5;
        let c = (size / 2) as f64;
        let pixels = (0..size * size)
            .map(|i| {
                let (x, y) = ((i % size) as f64 - c, (i / size) as f64 - c);
                if x * x + y * y <= (r * r) as f64 {
                    255
                } else {
                    0
                }
            })
            .collect();
        let hu = hu_moments(&Roi::new(size, size, pixels, (0, 0)).unwrap())
            .map_err(|e| e.to_string())?;
        let target = 1.0 / (2.0 * std::f64::consts::PI);
        disk_phi1 = disk_phi1.max((hu[0] - target).abs() / target);
        disk_rest = disk_rest.max(hu[1..].iter().fold(0.0, |m, v| m.max(v.abs())));
    }

    check(
        trans <= 1e-12 && rot <= 1e-10 && scale <= 2e-2 && disk_phi1 <= 0.01 && disk_rest < 1e-3,
        format!(
            "translation {trans:.1e}, rotation {rot:.1e}, 2x scale rel drift {scale:.1e}, \
             disk phi1 rel err {disk_phi1:.1e}, disk max |phi2..7| {disk_rest:.1e}"
        ),
    )
}

// --- 4 ---------------------------------------------------------------------

fn max_gradient_error(model: &MlpModel, x: &[f64], t: &[f64]) -> f64 {
    let g = model.gradients(x, t);
    let eps = 1e-3;
    let mut worst: f64 = 0.0;
    let mut probe = |analytic: f64, set: &dyn Fn(&mut MlpModel, f64)| {
        // Five-point central difference, error O(eps^4).
        let at = |h: f64| {
            let mut m = model.clone();
            set(&mut m, h);
            m.loss(x, t)
        };
        let numeric =
            (-at(2.0 * eps) + 8.0 * at(eps) - 8.0 * at(-eps) + at(-2.0 * eps)) / (12.0 * eps);
        let scale = analytic.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic - numeric).abs() / scale);
    };
    for i in 0..model.w1.len() {
        probe(g.w1[i], &|m, e| m.w1[i] += e);
    }
    for i in 0..model.b1.len() {
        probe(g.b1[i], &|m, e| m.b1[i] += e);
    }
    for i in 0..model.w2.len() {
        probe(g.w2[i], &|m, e| m.w2[i] += e);
    }
    for i in 0..model.b2.len() {
        probe(g.b2[i], &|m, e| m.b2[i] += e);
    }
    worst
}

fn separable_set(rng: &mut ChaCha8Rng, n: usize) -> Vec<LabeledSample> {
    let w: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: [f64; 15] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let s: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        if s.abs() < 0.3 {
            continue; // keep a margin between the classes
        }
        out.push(LabeledSample {
            features: FeatureVector(v),
            label: if s > 0.0 {
                Label::Lesion
            } else {
                Label::Normal
            },
        });
    }
    out
}

fn criterion_mlp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut grad_err: f64 = 0.0;
    for c in 0..100 {
        let mut m = init_network(c);
        let scale = rng.random_range(0.5..3.0);
        for w in
            m.w1.iter_mut()
                .chain(m.w2.iter_mut())
                .chain(m.b1.iter_mut())
                .chain(m.b2.iter_mut())
        {
            *w = rng.random_range(-scale..scale);
        }
        let x: Vec<f64> = (0..15).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = if rng.random_bool(0.5) {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        grad_err = grad_err.max(max_gradient_error(&m, &x, &t));
    }

    let train_set = separable_set(&mut rng, 400);
    let cfg = TrainingConfig {
        epochs: 200,
        seed: 9,
        ..TrainingConfig::default()
    };
    let model = train(&train_set, cfg).map_err(|e| e.to_string())?;
    let acc = model.accuracy(&train_set, 0.5).map_err(|e| e.to_string())?;
    let again = train(&train_set, cfg).map_err(|e| e.to_string())?;
    let reproducible = model_to_string(&model) == model_to_string(&again);

    check(
        grad_err <= 1e-4 && acc >= 0.95 && reproducible,
        format!(
            "max gradient rel err {grad_err:.1e} over 100 configs, separable accuracy {:.1}%, \
             seeded retrain identical: {reproducible}",
            acc * 100.0
        ),
    )
}

// --- 5, 6 ------------------------------------------------------------------

const DEPTH: usize = 100;

fn scan_cohort(
    specs: &[PhantomSpec],
    cfg: &CadConfig,
    model: Option<&MlpModel>,
) -> Vec<PatientDetections> {
    specs
        .iter()
        .map(|spec| {
            let AnnotatedVolume { volume, truths } = annotate(std::slice::from_ref(spec)).remove(0);
            PatientDetections {
                patient_id: spec.patient_id.clone(),
                spacing: volume.spacing(),
                detections: scan_volume(&volume, cfg, model).expect("scan succeeds"),
                truths,
            }
        })
        .collect()
}

fn describe(curve: &[FrocPoint], max_fp: f64) -> String {
    match best_sensitivity_at(curve, max_fp) {
        Some(s) => format!("best sensitivity {s:.3} at mean FP <= {max_fp}"),
        None => format!("no operating point at mean FP <= {max_fp}"),
    }
}

fn criterion_cb(
    cfg: &CadConfig,
    curves: &mut Vec<(&'static str, Vec<FrocPoint>)>,
) -> (Outcome, MlpModel) {
    let start = Instant::now();
    let model = train_on_cohort(&cohort(LesionKind::CloseBorder, 7, 15, 501, DEPTH), cfg);
    let test = scan_cohort(
        &cohort(LesionKind::CloseBorder, 7, 15, 502, DEPTH),
        cfg,
        Some(&model),
    );
    let curve = sweep_cb(&test, &cfg.sweep.cb_thresholds, &cfg.cluster).expect("curve");
    let elapsed = start.elapsed();
    let sens = best_sensitivity_at(&curve, 0.5).unwrap_or(0.0);
    let outcome = check(
        sens >= 0.90 && elapsed < Duration::from_secs(600),
        format!(
            "{} (7+15 train, 7+15 test, {DEPTH} slices), {:.0} s",
            describe(&curve, 0.5),
            elapsed.as_secs_f64()
        ),
    );
    curves.push(("CB", curve));
    (outcome, model)
}

fn single_gap(d: f64, n_slices: usize) -> PhantomSpec {
    let mut spec = PhantomSpec {
        patient_id: format!("gap-{d}"),
        n_slices,
        ..PhantomSpec::default()
    };
    let [x, y] = spec.arc.point_mm(270.0, spec.arc.mid_radius_mm());
    spec.lesions.push(LesionSpec {
        kind: LesionKind::OpenBorder,
        centroid_mm: [
            x,
            y,
            n_slices as f64 * spec.spacing.slice_thickness_mm / 2.0,
        ],
        diameter_mm: d,
    });
    spec
}

fn criterion_ob(cfg: &CadConfig, curves: &mut Vec<(&'static str, Vec<FrocPoint>)>) -> Outcome {
    let patients = scan_cohort(
        &cohort(LesionKind::OpenBorder, 12, 30, 601, DEPTH),
        cfg,
        None,
    );
    let curve = sweep_ob(&patients, &cfg.sweep.ob_persistence, &cfg.cluster).expect("curve");
    let sens = best_sensitivity_at(&curve, 0.2).unwrap_or(0.0);

    let mut window_ok = true;
    let mut window = Vec::new();
    for d in [3.0, 40.0] {
        let (volume, _) = generate_phantom(&single_gap(d, 40)).expect("valid spec");
        let n = scan_volume(&volume, cfg, None).expect("scan").len();
        window_ok &= n == 0;
        window.push(format!("{d} mm gap: {n} detections"));
    }
    let outcome = check(
        sens == 1.0 && window_ok,
        format!(
            "{} (12+30, {DEPTH} slices); {}",
            describe(&curve, 0.2),
            window.join(", ")
        ),
    );
    curves.push(("OB", curve));
    outcome
}

// --- 7 ---------------------------------------------------------------------

fn criterion_froc(curves: &[(&'static str, Vec<FrocPoint>)]) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = curves.len() == 2;
    for (name, curve) in curves {
        let monotone = is_monotone(curve);
        let strictest = curve
            .iter()
            .max_by(|a, b| a.threshold.total_cmp(&b.threshold));
        let origin = strictest.is_some_and(|p| p.sensitivity == 0.0 && p.fp_per_patient == 0.0);
        ok &= monotone && origin;
        notes.push(format!(
            "{name}: {} points, monotone {monotone}, (0,0) at strictest {origin}",
            curve.len()
        ));
    }
    check(ok, notes.join("; "))
}

// --- 8 ---------------------------------------------------------------------

fn criterion_throughput(cfg: &CadConfig, model: &MlpModel) -> Outcome {
    let arc = ArcGeometry::default();
    let mut spec = PhantomSpec {
        patient_id: "throughput".into(),
        n_slices: 495,
        ..PhantomSpec::default()
    };
    for (kind, angle, z, d) in [
        (LesionKind::CloseBorder, 240.0, 40.0, 12.0),
        (LesionKind::OpenBorder, 310.0, 60.0, 15.0),
    ] {
        let [x, y] = arc.point_mm(angle, arc.mid_radius_mm());
        spec.lesions.push(LesionSpec {
            kind,
            centroid_mm: [x, y, z],
            diameter_mm: d,
        });
    }
    let (volume, _) = generate_phantom(&spec).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let found =
        detect_volume(&volume, cfg, model, cfg.sweep.cb_threshold).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(30),
        format!(
            "495x512x512 through both pipelines + clustering in {:.1} s on {} thread(s), {} clusters",
            elapsed.as_secs_f64(),
            rayon::current_num_threads(),
            found.clusters.len()
        ),
    )
}

fn main() -> ExitCode {
    let cfg = CadConfig::default();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, outcome: Outcome| {
        match &outcome {
            Ok(d) => println!("criterion {n} PASS  {name}: {d}"),
            Err(d) => println!("criterion {n} FAIL  {name}: {d}"),
        }
        results.push((n, name, outcome));
    };

    report(1, "oracle equivalence", criterion_oracles());
    report(2, "morphology laws", criterion_morphology());
    report(3, "Hu invariance", criterion_hu());
    report(4, "MLP gradients, fit, reproducibility", criterion_mlp());
    let mut curves = Vec::new();
    let (cb, model) = criterion_cb(&cfg, &mut curves);
    report(5, "phantom CB benchmark", cb);
    report(6, "phantom OB benchmark", criterion_ob(&cfg, &mut curves));
    report(7, "FROC monotonicity", criterion_froc(&curves));
    report(8, "throughput", criterion_throughput(&cfg, &model));

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
