//! Datasets and model files.
//!
//! - Class CSV: numeric feature columns followed by a class name, one
//!   pattern per line. Features are min-max scaled to `[-1, 1]` on load
//!   unless the file starts with a `# scaled` line.
//! - MNIST IDX: big-endian, images magic `0x00000803`, labels `0x00000801`,
//!   optionally gzip-compressed. Pixels map to `2 p / 255 - 1`; digit 0 is
//!   class 10.
//! - Model files: JSON, see [`save_model`].

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Activation, Layer, MlpModel};
use crate::sivia::fmt_real;

/// Affine map of a raw feature range `[min, max]` onto `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureScaling {
    pub min: f64,
    pub max: f64,
}

impl FeatureScaling {
    pub const IDENTITY: FeatureScaling = FeatureScaling { min: -1.0, max: 1.0 };

    pub fn scale(&self, v: f64) -> f64 {
        if self.max == self.min {
            0.0
        } else {
            2.0 * (v - self.min) / (self.max - self.min) - 1.0
        }
    }

    pub fn unscale(&self, s: f64) -> f64 {
        self.min + (s + 1.0) * 0.5 * (self.max - self.min)
    }
}

/// Scaled patterns with zero-based class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub patterns: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub scaling: Vec<FeatureScaling>,
    /// Description of the generator behind synthetic columns, if any.
    pub generator: Option<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// Rows labelled `class`, in dataset order.
    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Rows `start..start + len` (clamped to the dataset).
    pub fn slice(&self, start: usize, len: usize) -> Dataset {
        let end = start.saturating_add(len).min(self.len());
        let start = start.min(end);
        Dataset {
            patterns: self.patterns[start..end].to_vec(),
            labels: self.labels[start..end].to_vec(),
            ..self.clone_metadata()
        }
    }

    fn clone_metadata(&self) -> Dataset {
        Dataset {
            patterns: Vec::new(),
            labels: Vec::new(),
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            scaling: self.scaling.clone(),
            generator: self.generator.clone(),
        }
    }

    /// Scaled class CSV (see [`load_csv`]); rereading it gives the same
    /// patterns bit for bit.
    pub fn to_scaled_csv(&self) -> String {
        let mut out = String::from("# scaled\n");
        for (x, &l) in self.patterns.iter().zip(&self.labels) {
            for v in x {
                let _ = write!(out, "{},", fmt_real(*v));
            }
            out.push_str(&self.class_names[l]);
            out.push('\n');
        }
        out
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Load a class CSV. When `expected_features` is given, every row must have
/// exactly that many feature columns.
pub fn load_csv(path: &Path, expected_features: Option<usize>) -> Result<Dataset> {
    let text = String::from_utf8(read_bytes(path)?)
        .map_err(|_| parse_err(path, 0, "file is not UTF-8"))?;
    let mut prescaled = false;
    let mut raw: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut width: Option<usize> = expected_features.map(|n| n + 1);
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if comment.trim() == "scaled" {
                prescaled = true;
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected || fields.len() < 2 {
            return Err(Error::WrongColumnCount {
                path: path.to_path_buf(),
                line: lineno,
                expected,
                found: fields.len(),
            });
        }
        let (class, values) = fields.split_last().expect("at least two fields");
        let row = values
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, lineno, format!("column {}: {f:?} is not a number", c + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = match class_names.iter().position(|c| c == class) {
            Some(l) => l,
            None => {
                class_names.push(class.to_string());
                class_names.len() - 1
            }
        };
        raw.push(row);
        labels.push(label);
    }
    if raw.is_empty() {
        return Err(parse_err(path, 0, "no patterns"));
    }
    let n = raw[0].len();
    let scaling: Vec<FeatureScaling> = if prescaled {
        vec![FeatureScaling::IDENTITY; n]
    } else {
        (0..n)
            .map(|c| FeatureScaling {
                min: raw.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min),
                max: raw.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max),
            })
            .collect()
    };
    let patterns: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| r.iter().zip(&scaling).map(|(v, s)| s.scale(*v)).collect())
        .collect();
    if prescaled {
        if let Some(i) = patterns.iter().position(|r| r.iter().any(|v| v.abs() > 1.0)) {
            return Err(parse_err(path, i + 1, "scaled file has values outside [-1, 1]"));
        }
    }
    Ok(Dataset {
        patterns,
        labels,
        class_names,
        feature_names: (1..=n).map(|c| format!("x{c}")).collect(),
        scaling,
        generator: None,
    })
}

pub const IRIS_FEATURES: [&str; 4] = ["sepal length", "sepal width", "petal length", "petal width"];

/// Fisher's Iris data: four measurements and a species name per line.
pub fn load_iris(path: &Path) -> Result<Dataset> {
    let mut ds = load_csv(path, Some(4))?;
    ds.feature_names = IRIS_FEATURES.iter().map(|s| s.to_string()).collect();
    Ok(ds)
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| parse_err(path, 0, "truncated IDX header"))
}

/// Raw IDX image file: `(rows, cols, pixels)` with one `rows * cols` byte
/// slice per image.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let bytes = read_bytes(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let size = rows * cols;
    let body = &bytes[16..];
    if body.len() < count * size {
        return Err(parse_err(
            path,
            0,
            format!("expected {count} images of {size} bytes, found {} bytes", body.len()),
        ));
    }
    let images = body[..count * size].chunks(size).map(<[u8]>::to_vec).collect();
    Ok((rows, cols, images))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_bytes(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(parse_err(path, 0, format!("expected {count} labels, found {}", body.len())));
    }
    Ok(body[..count].to_vec())
}

/// Zero-based class index of an MNIST digit: digits 1..9 are classes 1..9
/// and digit 0 is class 10.
pub fn mnist_class_of_digit(digit: u8) -> usize {
    if digit == 0 {
        9
    } else {
        digit as usize - 1
    }
}

pub fn mnist_class_names() -> Vec<String> {
    (1..=9).map(|d| d.to_string()).chain(["0".to_string()]).collect()
}

pub fn scale_pixel(p: u8) -> f64 {
    2.0 * (p as f64 / 255.0) - 1.0
}

pub fn load_mnist(images: &Path, labels: &Path) -> Result<Dataset> {
    let (rows, cols, pixels) = read_idx_images(images)?;
    let digits = read_idx_labels(labels)?;
    if pixels.len() != digits.len() {
        return Err(Error::CountMismatch {
            images: pixels.len(),
            labels: digits.len(),
        });
    }
    if let Some(d) = digits.iter().find(|&&d| d > 9) {
        return Err(parse_err(labels, 0, format!("label {d} is not a digit")));
    }
    let n = rows * cols;
    Ok(Dataset {
        patterns: pixels
            .iter()
            .map(|img| img.iter().map(|&p| scale_pixel(p)).collect())
            .collect(),
        labels: digits.iter().map(|&d| mnist_class_of_digit(d)).collect(),
        class_names: mnist_class_names(),
        feature_names: (0..n).map(|i| format!("px{}_{}", i / cols, i % cols)).collect(),
        scaling: vec![FeatureScaling { min: 0.0, max: 255.0 }; n],
        generator: None,
    })
}

/// Append `count` features drawn uniformly from `[-1, 1]` by a
/// xoshiro256++ generator seeded with `seed`, pattern by pattern.
pub fn augment_random_features(ds: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidConfig("at least one random feature is required".into()));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let patterns = ds
        .patterns
        .iter()
        .map(|x| {
            let mut row = x.clone();
            row.extend((0..count).map(|_| rng.random_range(-1.0..=1.0)));
            row
        })
        .collect();
    let first = ds.feature_count() + 1;
    let mut feature_names = ds.feature_names.clone();
    feature_names.extend((0..count).map(|i| format!("random{}", first + i)));
    let mut scaling = ds.scaling.clone();
    scaling.extend(std::iter::repeat_n(FeatureScaling::IDENTITY, count));
    Ok(Dataset {
        patterns,
        labels: ds.labels.clone(),
        class_names: ds.class_names.clone(),
        feature_names,
        scaling,
        generator: Some(format!("xoshiro256++ seed={seed} count={count}")),
    })
}

const MODEL_FORMAT: &str = "sivia-relevance-mlp";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    input_dim: usize,
    class_coding: Vec<String>,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    rows: usize,
    cols: usize,
    activation: String,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// Serialize a model as JSON:
///
/// ```json
/// {"format": "sivia-relevance-mlp", "version": 1, "input_dim": 4,
///  "class_coding": ["Iris-setosa", ...],
///  "layers": [{"rows": 2, "cols": 4, "activation": "tanh",
///              "weights": [...row-major...], "biases": [...]}, ...]}
/// ```
///
/// Reals are written in their shortest round-trip decimal form.
pub fn model_to_json(model: &MlpModel) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        input_dim: model.input_dim(),
        class_coding: model.class_labels().to_vec(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerFile {
                rows: l.rows(),
                cols: l.cols(),
                activation: l.activation().name().into(),
                weights: l.weights().to_vec(),
                biases: l.biases().to_vec(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str, path: &Path) -> Result<MlpModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        parse_err(path, e.line(), format!("column {}: {e}", e.column()))
    })?;
    let schema = |msg: String| Error::SchemaMismatch(format!("{}: {msg}", path.display()));
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(schema(format!(
            "found format {:?} version {}, expected {MODEL_FORMAT:?} version {MODEL_VERSION}",
            file.format, file.version
        )));
    }
    let layers = file
        .layers
        .into_iter()
        .map(|l| {
            let activation: Activation = l.activation.parse()?;
            Layer::new(l.rows, l.cols, l.weights, l.biases, activation)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| schema(e.to_string()))?;
    let model = MlpModel::new(layers, file.class_coding).map_err(|e| schema(e.to_string()))?;
    if model.input_dim() != file.input_dim {
        return Err(schema(format!(
            "input_dim is {} but the first layer takes {}",
            file.input_dim,
            model.input_dim()
        )));
    }
    Ok(model)
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, path)
}
