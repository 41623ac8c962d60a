//! The 15-10-2 perceptron: sigmoid hidden and output layers, squared-error
//! loss, per-sample backpropagation and z-score input normalization.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::volume::write_atomic;

pub const HIDDEN_UNITS: usize = 10;
pub const OUTPUT_UNITS: usize = 2;
const FORMAT_TAG: &str = "mlp-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Lesion,
    Normal,
}

impl Label {
    /// One-hot target: output 0 is lesion, output 1 is normal.
    fn target(self) -> [f64; OUTPUT_UNITS] {
        match self {
            Label::Lesion => [1.0, 0.0],
            Label::Normal => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Parameter(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be positive".into()));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Network weights plus the input normalization learned from training data.
///
/// `w1` is `hidden x inputs` and `w2` is `outputs x hidden`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub feat_mean: Vec<f64>,
    pub feat_std: Vec<f64>,
    pub config: TrainingConfig,
}

/// Gradients of the per-sample loss, laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: Label,
    pub score_lesion: f64,
}

/// Fresh 15-10-2 network.
pub fn init_network(seed: u64) -> MlpModel {
    MlpModel::with_dims(FEATURE_COUNT, HIDDEN_UNITS, OUTPUT_UNITS, seed)
}

impl MlpModel {
    /// Weights uniform in `±1/sqrt(fan_in)`, zero biases, identity normalization.
    pub fn with_dims(n_inputs: usize, n_hidden: usize, n_outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |fan_in: usize, n: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        let w1 = uniform(n_inputs, n_hidden * n_inputs);
        let w2 = uniform(n_hidden, n_outputs * n_hidden);
        Self {
            n_inputs,
            n_hidden,
            n_outputs,
            w1,
            b1: vec![0.0; n_hidden],
            w2,
            b2: vec![0.0; n_outputs],
            feat_mean: vec![0.0; n_inputs],
            feat_std: vec![1.0; n_inputs],
            config: TrainingConfig {
                seed,
                ..TrainingConfig::default()
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.feat_mean,
            &self.feat_std,
        ]
        .iter()
        .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.n_inputs {
            return Err(Error::Input(format!(
                "expected {} features, got {}",
                self.n_inputs,
                raw.len()
            )));
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "feature {i} is not finite ({})",
                raw[i]
            )));
        }
        Ok(raw
            .iter()
            .zip(self.feat_mean.iter().zip(&self.feat_std))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect())
    }

    /// Hidden and output activations for an already normalized input.
    fn activations(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hidden: Vec<f64> = (0..self.n_hidden)
            .map(|j| {
                let row = &self.w1[j * self.n_inputs..(j + 1) * self.n_inputs];
                sigmoid(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j])
            })
            .collect();
        let output = (0..self.n_outputs)
            .map(|k| {
                let row = &self.w2[k * self.n_hidden..(k + 1) * self.n_hidden];
                sigmoid(row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + self.b2[k])
            })
            .collect();
        (hidden, output)
    }

    /// Output activations for raw (unnormalized) features.
    pub fn forward_raw(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let x = self.normalize(raw)?;
        Ok(self.activations(&x).1)
    }

    /// `(score_lesion, score_normal)`.
    pub fn forward(&self, features: &FeatureVector) -> Result<(f64, f64)> {
        let out = self.forward_raw(features.values())?;
        Ok((out[0], out[1]))
    }

    /// Lesion iff `score_lesion >= threshold`.
    pub fn classify(&self, features: &FeatureVector, threshold: f64) -> Result<Classification> {
        let (score_lesion, _) = self.forward(features)?;
        Ok(Classification {
            label: if score_lesion >= threshold {
                Label::Lesion
            } else {
                Label::Normal
            },
            score_lesion,
        })
    }

    /// `0.5 · Σ (output - target)²` for a normalized input.
    pub fn loss(&self, x: &[f64], target: &[f64]) -> f64 {
        let (_, out) = self.activations(x);
        0.5 * out
            .iter()
            .zip(target)
            .map(|(o, t)| (o - t).powi(2))
            .sum::<f64>()
    }

    /// Backpropagated gradient of [`MlpModel::loss`].
    pub fn gradients(&self, x: &[f64], target: &[f64]) -> Gradients {
        let (hidden, out) = self.activations(x);
        let delta_out: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(&o, &t)| (o - t) * o * (1.0 - o))
            .collect();
        let mut g = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.n_hidden],
            w2: vec![0.0; self.w2.len()],
            b2: delta_out.clone(),
        };
        for (k, &d) in delta_out.iter().enumerate() {
            for (j, &h) in hidden.iter().enumerate() {
                g.w2[k * self.n_hidden + j] = d * h;
            }
        }
        for (j, &h) in hidden.iter().enumerate() {
            let back: f64 = delta_out
                .iter()
                .enumerate()
                .map(|(k, d)| d * self.w2[k * self.n_hidden + j])
                .sum();
            let dh = back * h * (1.0 - h);
            g.b1[j] = dh;
            for (i, &v) in x.iter().enumerate() {
                g.w1[j * self.n_inputs + i] = dh * v;
            }
        }
        g
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        let apply = |p: &mut [f64], d: &[f64]| p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
        apply(&mut self.w1, &g.w1);
        apply(&mut self.b1, &g.b1);
        apply(&mut self.w2, &g.w2);
        apply(&mut self.b2, &g.b2);
    }

    /// Fraction of samples whose thresholded lesion score matches the label.
    pub fn accuracy(&self, samples: &[LabeledSample], threshold: f64) -> Result<f64> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for s in samples {
            if self.classify(&s.features, threshold)?.label == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / samples.len() as f64)
    }
}

/// Per-feature mean and population standard deviation; zero spread maps to 1.
fn normalization_stats(rows: &[&[f64]], dims: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..dims)
        .map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n)
        .collect();
    let std = (0..dims)
        .map(|i| {
            let var = rows.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Stochastic gradient descent over `epochs` passes, one update per sample.
pub fn train(samples: &[LabeledSample], config: TrainingConfig) -> Result<MlpModel> {
    config.validate()?;
    let lesions = samples.iter().filter(|s| s.label == Label::Lesion).count();
    if lesions == 0 || lesions == samples.len() {
        return Err(Error::Training(format!(
            "need samples of both classes, got {lesions} lesion and {} normal",
            samples.len() - lesions
        )));
    }
    if let Some(i) = samples.iter().position(|s| !s.features.is_finite()) {
        return Err(Error::Training(format!(
            "sample {i} has non-finite features"
        )));
    }

    let mut model = init_network(config.seed);
    model.config = config;
    let rows: Vec<&[f64]> = samples.iter().map(|s| &s.features.values()[..]).collect();
    let (mean, std) = normalization_stats(&rows, FEATURE_COUNT);
    model.feat_mean = mean;
    model.feat_std = std;

    let inputs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| model.normalize(r))
        .collect::<Result<_>>()?;
    let targets: Vec<[f64; OUTPUT_UNITS]> = samples.iter().map(|s| s.label.target()).collect();

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffler = ChaCha8Rng::seed_from_u64(config.seed);
    shuffler.set_stream(1);
    for _ in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut shuffler);
        }
        for &i in &order {
            let g = model.gradients(&inputs[i], &targets[i]);
            model.step(&g, config.learning_rate);
        }
    }
    if !model.is_finite() {
        return Err(Error::Training(
            "training diverged to non-finite weights".into(),
        ));
    }
    Ok(model)
}

fn push_values(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v:e}");
    }
    out.push('\n');
}

/// Serializes the model to the line-oriented text format documented in the README.
pub fn model_to_string(model: &MlpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# mandible-cad perceptron");
    let _ = writeln!(out, "format {FORMAT_TAG}");
    let _ = writeln!(
        out,
        "layers {} {} {}",
        model.n_inputs, model.n_hidden, model.n_outputs
    );
    let c = &model.config;
    let _ = writeln!(out, "learning_rate {:e}", c.learning_rate);
    let _ = writeln!(out, "epochs {}", c.epochs);
    let _ = writeln!(out, "seed {}", c.seed);
    let _ = writeln!(out, "shuffle {}", c.shuffle);
    push_values(&mut out, "feat_mean", &model.feat_mean);
    push_values(&mut out, "feat_std", &model.feat_std);
    push_values(&mut out, "w1", &model.w1);
    push_values(&mut out, "b1", &model.b1);
    push_values(&mut out, "w2", &model.w2);
    push_values(&mut out, "b2", &model.b2);
    out.push_str("end\n");
    out
}

pub fn model_from_str(text: &str) -> Result<MlpModel> {
    let bad = |msg: String| Error::Format(format!("model file: {msg}"));
    let mut fields = std::collections::HashMap::new();
    let mut ended = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "end" {
            ended = true;
            break;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        fields.insert(key.to_string(), rest.trim().to_string());
    }
    if !ended {
        return Err(bad("missing end marker (truncated?)".into()));
    }
    let field = |k: &str| fields.get(k).ok_or_else(|| bad(format!("missing `{k}`")));
    if field("format")? != FORMAT_TAG {
        return Err(bad(format!("unsupported format `{}`", field("format")?)));
    }
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("`{s}`: {e}")));
    let layers: Vec<usize> = field("layers")?
        .split_whitespace()
        .map(parse_usize)
        .collect::<Result<_>>()?;
    let [n_in, n_hid, n_out] = layers[..] else {
        return Err(bad("`layers` needs three sizes".into()));
    };
    let floats = |k: &str, len: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = field(k)?
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| bad(format!("{k}: `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if v.len() != len {
            return Err(bad(format!("{k} has {} values, expected {len}", v.len())));
        }
        Ok(v)
    };
    let learning_rate = floats("learning_rate", 1)?[0];
    let config = TrainingConfig {
        learning_rate,
        epochs: parse_usize(field("epochs")?)?,
        seed: field("seed")?
            .parse()
            .map_err(|e| bad(format!("seed: {e}")))?,
        shuffle: field("shuffle")?
            .parse()
            .map_err(|e| bad(format!("shuffle: {e}")))?,
    };
    let model = MlpModel {
        n_inputs: n_in,
        n_hidden: n_hid,
        n_outputs: n_out,
        feat_mean: floats("feat_mean", n_in)?,
        feat_std: floats("feat_std", n_in)?,
        w1: floats("w1", n_hid * n_in)?,
        b1: floats("b1", n_hid)?,
        w2: floats("w2", n_out * n_hid)?,
        b2: floats("b2", n_out)?,
        config,
    };
    if !model.is_finite() || model.feat_std.iter().any(|&s| s <= 0.0) {
        return Err(bad(
            "non-finite parameters or non-positive feature scale".into()
        ));
    }
    Ok(model)
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    write_atomic(path, model_to_string(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}
