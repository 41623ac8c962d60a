//! Brute-force oracles and phantom helpers shared by the integration tests.
#![allow(dead_code)]

use mandible_cad::cb::{build_training_pool, AnnotatedVolume};
use mandible_cad::config::CadConfig;
use mandible_cad::mlp::{train, MlpModel};
use mandible_cad::phantom::{generate_phantom, CohortSpec, PhantomSpec};
use mandible_cad::{Error, LesionKind};

/// Maximum-entropy threshold by direct evaluation at every split; ties keep
/// the smallest threshold. `None` when no split leaves both classes nonempty.
pub fn kapur_oracle(hist: &[u64; 256]) -> Option<u8> {
    let total: u64 = hist.iter().sum();
    let p: Vec<f64> = hist.iter().map(|&c| c as f64 / total as f64).collect();
    let entropy = |bins: &[f64]| {
        let mass: f64 = bins.iter().sum();
        -bins
            .iter()
            .filter(|&&q| q > 0.0)
            .map(|&q| (q / mass) * (q / mass).ln())
            .sum::<f64>()
    };
    let mut best: Option<(u8, f64)> = None;
    for t in 0..255usize {
        if hist[..=t].iter().all(|&c| c == 0) || hist[t + 1..].iter().all(|&c| c == 0) {
            continue;
        }
        let (lo, hi) = p.split_at(t + 1);
        let h = entropy(lo) + entropy(hi);
        if best.is_none_or(|(_, b)| h > b) {
            best = Some((t as u8, h));
        }
    }
    best.map(|(t, _)| t)
}

/// Co-occurrence probabilities by enumerating every horizontal pixel pair.
pub fn glcm_oracle(pixels: &[u8], width: usize, levels: usize) -> Vec<f64> {
    let height = pixels.len() / width;
    let mut counts = vec![0.0; levels * levels];
    let mut pairs = 0.0;
    for y in 0..height {
        for x in 0..width - 1 {
            let a = pixels[y * width + x] as usize * levels / 256;
            let b = pixels[y * width + x + 1] as usize * levels / 256;
            counts[a * levels + b] += 1.0;
            counts[b * levels + a] += 1.0;
            pairs += 2.0;
        }
    }
    counts.iter().map(|c| c / pairs).collect()
}

/// `[contrast, homogeneity, energy, entropy]` straight from the definitions.
pub fn haralick_oracle(p: &[f64], levels: usize) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..levels {
        for j in 0..levels {
            let v = p[i * levels + j];
            let d = (i as f64 - j as f64).abs();
            out[0] += (i as f64 - j as f64).powi(2) * v;
            out[1] += v / (1.0 + d);
            out[2] += v * v;
            if v > 0.0 {
                out[3] += -v * v.ln();
            }
        }
    }
    out
}

/// `[mean, stddev, skewness, kurtosis]`: mean first, then central moments.
pub fn first_order_oracle(pixels: &[u8]) -> [f64; 4] {
    let n = pixels.len() as f64;
    let mean = pixels.iter().map(|&v| v as f64).sum::<f64>() / n;
    let central = |k: i32| {
        pixels
            .iter()
            .map(|&v| (v as f64 - mean).powi(k))
            .sum::<f64>()
            / n
    };
    let var = central(2);
    if var == 0.0 {
        return [mean, 0.0, 0.0, 0.0];
    }
    [
        mean,
        var.sqrt(),
        central(3) / var.powf(1.5),
        central(4) / (var * var),
    ]
}

pub fn annotate(specs: &[PhantomSpec]) -> Vec<AnnotatedVolume> {
    specs
        .iter()
        .map(|s| {
            let (volume, truths) = generate_phantom(s).expect("valid cohort spec");
            AnnotatedVolume { volume, truths }
        })
        .collect()
}

pub fn cohort(
    kind: LesionKind,
    abnormal: usize,
    normal: usize,
    seed: u64,
    n_slices: usize,
) -> Vec<PhantomSpec> {
    let mut c = CohortSpec::new(kind, abnormal, normal, seed);
    c.base.n_slices = n_slices;
    c.specs().expect("valid cohort")
}

/// Trains the CB classifier on a cohort, rendering one phantom at a time.
pub fn train_on_cohort(specs: &[PhantomSpec], cfg: &CadConfig) -> MlpModel {
    let mut pool = Vec::new();
    for spec in specs {
        match build_training_pool(&annotate(std::slice::from_ref(spec)), cfg) {
            Ok(samples) => pool.extend(samples),
            Err(Error::EmptyPool(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
    train(&pool, cfg.training).expect("both classes present")
}
