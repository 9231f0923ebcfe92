//! Network and dataset types, their on-disk format, and the seeded fixture.
//!
//! A model directory holds `model.json` plus one raw int8 file per weight
//! tensor; a dataset directory holds `dataset.json` plus `images.bin`. All
//! JSON is written with a fixed field order (alphabetical) so that saving a
//! loaded model reproduces the original bytes.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::{sha256_hex, QuantTensor};

pub const MODEL_MANIFEST: &str = "model.json";
pub const DATASET_MANIFEST: &str = "dataset.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// Weights are laid out `[kernel_h, kernel_w, in_channels, out_channels]`;
    /// stride 1, no padding.
    Conv2d {
        kernel_h: usize,
        kernel_w: usize,
        in_channels: usize,
        out_channels: usize,
    },
    /// Square window with stride equal to its size.
    MaxPool { size: usize },
    /// Weights are laid out `[out_features, in_features]`.
    FullyConnected {
        in_features: usize,
        out_features: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub weights: Option<QuantTensor>,
    pub requant_shift: u32,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn has_weights(&self) -> bool {
        self.weights.is_some()
    }

    fn expected_weight_shape(&self) -> Option<Vec<usize>> {
        match self.kind {
            LayerKind::Conv2d {
                kernel_h,
                kernel_w,
                in_channels,
                out_channels,
            } => Some(vec![kernel_h, kernel_w, in_channels, out_channels]),
            LayerKind::MaxPool { .. } => None,
            LayerKind::FullyConnected {
                in_features,
                out_features,
            } => Some(vec![out_features, in_features]),
        }
    }

    /// Output shape for an input of shape `input` (`[H, W, C]` or `[N]`).
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let err = |msg: String| Err(Error::Shape(format!("layer {}: {msg}", self.name)));
        match self.kind {
            LayerKind::Conv2d {
                kernel_h,
                kernel_w,
                in_channels,
                out_channels,
            } => {
                let [h, w, c] = input else {
                    return err(format!("conv input must be [H, W, C], got {input:?}"));
                };
                if *c != in_channels {
                    return err(format!("expects {in_channels} channels, input has {c}"));
                }
                if *h < kernel_h || *w < kernel_w {
                    return err(format!("input {h}x{w} smaller than kernel {kernel_h}x{kernel_w}"));
                }
                Ok(vec![h - kernel_h + 1, w - kernel_w + 1, out_channels])
            }
            LayerKind::MaxPool { size } => {
                let [h, w, c] = input else {
                    return err(format!("pool input must be [H, W, C], got {input:?}"));
                };
                if size == 0 || h % size != 0 || w % size != 0 {
                    return err(format!("{h}x{w} not divisible by pool size {size}"));
                }
                Ok(vec![h / size, w / size, *c])
            }
            LayerKind::FullyConnected {
                in_features,
                out_features,
            } => {
                let n: usize = input.iter().product();
                if n != in_features {
                    return err(format!("expects {in_features} inputs, got {n}"));
                }
                Ok(vec![out_features])
            }
        }
    }
}

/// Ordered layers with validated geometry. The last layer is fully connected
/// and produces the class logits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkModel {
    input_shape: Vec<usize>,
    input_scale_shift: u32,
    layers: Vec<LayerSpec>,
    output_shapes: Vec<Vec<usize>>,
}

impl NetworkModel {
    pub fn new(input_shape: Vec<usize>, input_scale_shift: u32, layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("model has no layers".into()));
        }
        let mut output_shapes = Vec::with_capacity(layers.len());
        let mut shape = input_shape.clone();
        for (i, layer) in layers.iter().enumerate() {
            if layers[..i].iter().any(|l| l.name == layer.name) {
                return Err(Error::Config(format!("duplicate layer name {}", layer.name)));
            }
            if layer.requant_shift > 31 {
                return Err(Error::Config(format!(
                    "layer {}: requant_shift {} > 31",
                    layer.name, layer.requant_shift
                )));
            }
            match (layer.expected_weight_shape(), &layer.weights) {
                (Some(expected), Some(w)) if w.shape() != expected.as_slice() => {
                    return Err(Error::Shape(format!(
                        "layer {}: weights {:?}, geometry needs {expected:?}",
                        layer.name,
                        w.shape()
                    )))
                }
                (Some(_), None) => {
                    return Err(Error::Config(format!("layer {} is missing weights", layer.name)))
                }
                (None, Some(_)) => {
                    return Err(Error::Config(format!("layer {} takes no weights", layer.name)))
                }
                _ => {}
            }
            shape = layer.output_shape(&shape)?;
            output_shapes.push(shape.clone());
        }
        if !matches!(layers.last().unwrap().kind, LayerKind::FullyConnected { .. }) {
            return Err(Error::Config("last layer must be fully connected".into()));
        }
        Ok(NetworkModel {
            input_shape,
            input_scale_shift,
            layers,
            output_shapes,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &LayerSpec {
        &self.layers[index]
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self, layer: usize) -> &[usize] {
        &self.output_shapes[layer]
    }

    pub fn num_classes(&self) -> usize {
        self.output_shapes.last().unwrap()[0]
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::Config(format!("no layer named {name}")))
    }

    pub fn layer_names(&self) -> Vec<&str> {
        self.layers.iter().map(|l| l.name.as_str()).collect()
    }

    /// Copy of the model with one layer's weights replaced.
    pub fn with_weights(&self, layer: usize, weights: QuantTensor) -> Result<Self> {
        let mut layers = self.layers.clone();
        layers[layer].weights = Some(weights);
        Self::new(self.input_shape.clone(), self.input_scale_shift, layers)
    }

    /// Per-layer weight checksums, in layer order (`None` for pools).
    pub fn weight_checksums(&self) -> Vec<Option<String>> {
        self.layers
            .iter()
            .map(|l| l.weights.as_ref().map(QuantTensor::checksum))
            .collect()
    }

    /// SHA-256 of the serialized manifest, which pins every tensor checksum.
    pub fn checksum(&self) -> String {
        sha256_hex(&manifest_bytes(&self.manifest()))
    }

    fn manifest(&self) -> ModelManifest {
        ModelManifest {
            format: "resil-model".into(),
            input: InputEntry {
                scale_shift: self.input_scale_shift,
                shape: self.input_shape.clone(),
            },
            layers: self
                .layers
                .iter()
                .map(|l| LayerEntry {
                    activation: l.activation,
                    bias: None,
                    geometry: match l.kind {
                        LayerKind::Conv2d {
                            kernel_h,
                            kernel_w,
                            in_channels,
                            out_channels,
                        } => Geometry::Conv2d {
                            in_channels,
                            kernel: [kernel_h, kernel_w],
                            out_channels,
                            stride: 1,
                        },
                        LayerKind::MaxPool { size } => Geometry::MaxPool { size, stride: size },
                        LayerKind::FullyConnected {
                            in_features,
                            out_features,
                        } => Geometry::FullyConnected {
                            in_features,
                            out_features,
                        },
                    },
                    name: l.name.clone(),
                    requant_shift: l.requant_shift,
                    weights: l.weights.as_ref().map(|w| TensorEntry {
                        checksum: w.checksum(),
                        file: weight_file_name(&l.name),
                        scale_shift: w.scale_shift(),
                        shape: w.shape().to_vec(),
                    }),
                })
                .collect(),
            version: FORMAT_VERSION,
        }
    }
}

fn weight_file_name(layer: &str) -> String {
    format!("{}.weights.bin", layer.to_lowercase())
}

// On-disk manifest. Field order is alphabetical and fixed.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelManifest {
    format: String,
    input: InputEntry,
    layers: Vec<LayerEntry>,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputEntry {
    scale_shift: u32,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    activation: Activation,
    /// Reserved; biases are not supported yet and must be null.
    bias: Option<TensorEntry>,
    geometry: Geometry,
    name: String,
    requant_shift: u32,
    weights: Option<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Geometry {
    Conv2d {
        in_channels: usize,
        kernel: [usize; 2],
        out_channels: usize,
        stride: usize,
    },
    MaxPool {
        size: usize,
        stride: usize,
    },
    FullyConnected {
        in_features: usize,
        out_features: usize,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    checksum: String,
    file: String,
    scale_shift: u32,
    shape: Vec<usize>,
}

fn manifest_bytes<T: Serialize>(m: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(m).expect("manifest serializes");
    bytes.push(b'\n');
    bytes
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn read_tensor(dir: &Path, label: &str, entry: &TensorEntry) -> Result<QuantTensor> {
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path).map_err(|e| Error::load(label, format!("{}: {e}", path.display())))?;
    let expected: usize = entry.shape.iter().product();
    if bytes.len() != expected {
        return Err(Error::load(
            label,
            format!(
                "shape {:?} needs {expected} bytes, {} has {}",
                entry.shape,
                entry.file,
                bytes.len()
            ),
        ));
    }
    let t = QuantTensor::from_bytes(entry.shape.clone(), &bytes, entry.scale_shift)
        .map_err(|e| Error::load(label, e.to_string()))?;
    let sum = t.checksum();
    if sum != entry.checksum {
        return Err(Error::load(
            label,
            format!("checksum mismatch: manifest {} vs data {sum}", entry.checksum),
        ));
    }
    Ok(t)
}

/// Resolves a model argument that may name the directory or its manifest.
fn manifest_path(path: &Path, file: &str) -> PathBuf {
    if path.is_dir() {
        path.join(file)
    } else {
        path.to_path_buf()
    }
}

pub fn load_model(path: &Path) -> Result<NetworkModel> {
    let manifest_file = manifest_path(path, MODEL_MANIFEST);
    let dir = manifest_file.parent().unwrap_or(Path::new(".")).to_path_buf();
    let m: ModelManifest = read_json(&manifest_file)?;
    if m.version != FORMAT_VERSION {
        return Err(Error::load("model", format!("unsupported version {}", m.version)));
    }
    let mut layers = Vec::with_capacity(m.layers.len());
    for entry in m.layers {
        if entry.bias.is_some() {
            return Err(Error::load(&entry.name, "biases are not supported"));
        }
        let label = format!("{}.weights", entry.name);
        let weights = entry
            .weights
            .as_ref()
            .map(|w| read_tensor(&dir, &label, w))
            .transpose()?;
        let kind = match entry.geometry {
            Geometry::Conv2d {
                in_channels,
                kernel,
                out_channels,
                stride,
            } => {
                if stride != 1 {
                    return Err(Error::load(&entry.name, "only stride-1 convolutions are supported"));
                }
                LayerKind::Conv2d {
                    kernel_h: kernel[0],
                    kernel_w: kernel[1],
                    in_channels,
                    out_channels,
                }
            }
            Geometry::MaxPool { size, stride } => {
                if stride != size {
                    return Err(Error::load(&entry.name, "pool stride must equal its size"));
                }
                LayerKind::MaxPool { size }
            }
            Geometry::FullyConnected {
                in_features,
                out_features,
            } => LayerKind::FullyConnected {
                in_features,
                out_features,
            },
        };
        layers.push(LayerSpec {
            name: entry.name,
            kind,
            weights,
            requant_shift: entry.requant_shift,
            activation: entry.activation,
        });
    }
    NetworkModel::new(m.input.shape, m.input.scale_shift, layers).map_err(|e| match e {
        Error::Shape(msg) | Error::Config(msg) => Error::load("model", msg),
        other => other,
    })
}

/// Writes `model.json` and the weight binaries into `dir`.
pub fn save_model(model: &NetworkModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for layer in &model.layers {
        if let Some(w) = &layer.weights {
            let path = dir.join(weight_file_name(&layer.name));
            fs::write(&path, w.to_bytes()).map_err(|e| Error::io(&path, e))?;
        }
    }
    let path = dir.join(MODEL_MANIFEST);
    fs::write(&path, manifest_bytes(&model.manifest())).map_err(|e| Error::io(&path, e))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub images: Vec<QuantTensor>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub positive_class: usize,
}

impl Dataset {
    pub fn new(
        images: Vec<QuantTensor>,
        labels: Vec<usize>,
        num_classes: usize,
        positive_class: usize,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Config(format!("label {l} >= class count {num_classes}")));
        }
        if positive_class >= num_classes {
            return Err(Error::Config(format!(
                "positive class {positive_class} >= class count {num_classes}"
            )));
        }
        if let Some(first) = images.first() {
            if images.iter().any(|im| im.shape() != first.shape()) {
                return Err(Error::Shape("dataset images differ in shape".into()));
            }
        }
        Ok(Dataset {
            images,
            labels,
            num_classes,
            positive_class,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    fn images_bytes(&self) -> Vec<u8> {
        self.images.iter().flat_map(|im| im.to_bytes()).collect()
    }

    fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            count: self.images.len(),
            format: "resil-dataset".into(),
            image_scale_shift: self.images.first().map_or(0, |i| i.scale_shift()),
            image_shape: self.images.first().map_or_else(Vec::new, |i| i.shape().to_vec()),
            images: DataFileEntry {
                checksum: sha256_hex(&self.images_bytes()),
                file: "images.bin".into(),
            },
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            positive_class: self.positive_class,
            version: FORMAT_VERSION,
        }
    }

    pub fn checksum(&self) -> String {
        sha256_hex(&manifest_bytes(&self.manifest()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetManifest {
    count: usize,
    format: String,
    image_scale_shift: u32,
    image_shape: Vec<usize>,
    images: DataFileEntry,
    labels: Vec<usize>,
    num_classes: usize,
    positive_class: usize,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataFileEntry {
    checksum: String,
    file: String,
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest_file = manifest_path(path, DATASET_MANIFEST);
    let dir = manifest_file.parent().unwrap_or(Path::new(".")).to_path_buf();
    let m: DatasetManifest = read_json(&manifest_file)?;
    if m.version != FORMAT_VERSION {
        return Err(Error::load("dataset", format!("unsupported version {}", m.version)));
    }
    let file = dir.join(&m.images.file);
    let bytes = fs::read(&file).map_err(|e| Error::load("dataset.images", format!("{}: {e}", file.display())))?;
    let per: usize = m.image_shape.iter().product();
    if per == 0 || bytes.len() != per * m.count || m.labels.len() != m.count {
        return Err(Error::load(
            "dataset.images",
            format!(
                "{} images of shape {:?} need {} bytes, file has {}; {} labels",
                m.count,
                m.image_shape,
                per * m.count,
                bytes.len(),
                m.labels.len()
            ),
        ));
    }
    let sum = sha256_hex(&bytes);
    if sum != m.images.checksum {
        return Err(Error::load("dataset.images", "checksum mismatch"));
    }
    let images = bytes
        .chunks_exact(per)
        .map(|c| QuantTensor::from_bytes(m.image_shape.clone(), c, m.image_scale_shift))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(images, m.labels, m.num_classes, m.positive_class)
        .map_err(|e| Error::load("dataset", e.to_string()))
}

pub fn save_dataset(data: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let m = data.manifest();
    let images = dir.join(&m.images.file);
    fs::write(&images, data.images_bytes()).map_err(|e| Error::io(&images, e))?;
    let path = dir.join(DATASET_MANIFEST);
    fs::write(&path, manifest_bytes(&m)).map_err(|e| Error::io(&path, e))
}

pub const FIXTURE_SIDE: usize = 18;
pub const FIXTURE_IMAGES: usize = 64;

/// Deterministic two-class fixture: an 18×18 single-channel image with a
/// bright square in the upper-left (class 0) or lower-right (class 1) over
/// seeded noise, and a hand-assigned
/// Conv1 → Pool1 → Conv2 → Pool2 → FC network that separates them.
///
/// Class 1 is the positive class for recall.
pub fn generate_fixture(seed: u64) -> (NetworkModel, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Conv1 [3,3,1,4]: channel 0 is a box filter, the rest are seeded noise.
    let mut conv1 = vec![0i8; 36];
    for k in 0..9 {
        for co in 0..4 {
            conv1[k * 4 + co] = if co == 0 { 16 } else { rng.random_range(-24..=24) };
        }
    }

    // Conv2 [3,3,4,8]: output 0 boxes input channel 0.
    let mut conv2 = vec![0i8; 3 * 3 * 4 * 8];
    for k in 0..9 {
        for ci in 0..4 {
            for co in 0..8 {
                conv2[(k * 4 + ci) * 8 + co] = match (ci, co) {
                    (0, 0) => 24,
                    (_, 0) => rng.random_range(-12..=12),
                    _ => rng.random_range(-48..=48),
                };
            }
        }
    }

    // FC [2, 72] over the 3×3×8 map (HWC flattening): channel 0 in the
    // upper-left cells votes for class 0, lower-right for class 1.
    let mut fc = vec![0i8; 2 * 72];
    let upper_left = [(0, 0), (0, 1), (1, 0)];
    let lower_right = [(2, 2), (2, 1), (1, 2)];
    for class in 0..2 {
        for y in 0..3 {
            for x in 0..3 {
                for c in 0..8 {
                    let w = if c == 0 {
                        let ul = upper_left.contains(&(y, x));
                        let lr = lower_right.contains(&(y, x));
                        match (class, ul, lr) {
                            (0, true, _) | (1, _, true) => 48,
                            (0, _, true) | (1, true, _) => -48,
                            _ => 0,
                        }
                    } else {
                        rng.random_range(-6..=6)
                    };
                    fc[class * 72 + (y * 3 + x) * 8 + c] = w;
                }
            }
        }
    }

    let t = |shape: Vec<usize>, data: Vec<i8>| QuantTensor::new(shape, data, 7).expect("fixture shape");
    let layers = vec![
        LayerSpec {
            name: "Conv1".into(),
            kind: LayerKind::Conv2d {
                kernel_h: 3,
                kernel_w: 3,
                in_channels: 1,
                out_channels: 4,
            },
            weights: Some(t(vec![3, 3, 1, 4], conv1)),
            requant_shift: 6,
            activation: Activation::Relu,
        },
        LayerSpec {
            name: "Pool1".into(),
            kind: LayerKind::MaxPool { size: 2 },
            weights: None,
            requant_shift: 0,
            activation: Activation::None,
        },
        LayerSpec {
            name: "Conv2".into(),
            kind: LayerKind::Conv2d {
                kernel_h: 3,
                kernel_w: 3,
                in_channels: 4,
                out_channels: 8,
            },
            weights: Some(t(vec![3, 3, 4, 8], conv2)),
            requant_shift: 8,
            activation: Activation::Relu,
        },
        LayerSpec {
            name: "Pool2".into(),
            kind: LayerKind::MaxPool { size: 2 },
            weights: None,
            requant_shift: 0,
            activation: Activation::None,
        },
        LayerSpec {
            name: "FC".into(),
            kind: LayerKind::FullyConnected {
                in_features: 72,
                out_features: 2,
            },
            weights: Some(t(vec![2, 72], fc)),
            requant_shift: 8,
            activation: Activation::None,
        },
    ];
    let model = NetworkModel::new(vec![FIXTURE_SIDE, FIXTURE_SIDE, 1], 0, layers).expect("fixture geometry");

    let mut images = Vec::with_capacity(FIXTURE_IMAGES);
    let mut labels = Vec::with_capacity(FIXTURE_IMAGES);
    for i in 0..FIXTURE_IMAGES {
        let label = i % 2;
        images.push(fixture_image(&mut rng, label));
        labels.push(label);
    }
    let data = Dataset::new(images, labels, 2, 1).expect("fixture dataset");
    (model, data)
}

fn fixture_image(rng: &mut ChaCha8Rng, label: usize) -> QuantTensor {
    const BLOB: usize = 6;
    let side = FIXTURE_SIDE;
    let mut px: Vec<i32> = (0..side * side).map(|_| rng.random_range(0..=32)).collect();
    let (lo, hi) = if label == 0 { (1, 4) } else { (8, 11) };
    let top = rng.random_range(lo..=hi);
    let left = rng.random_range(lo..=hi);
    let intensity = rng.random_range(8..=100);
    for y in top..top + BLOB {
        for x in left..left + BLOB {
            px[y * side + x] += intensity;
        }
    }
    // a dimmer distractor blob anywhere in the frame
    let dy = rng.random_range(0..=side - 3);
    let dx = rng.random_range(0..=side - 3);
    let dim = rng.random_range(0..=60);
    for y in dy..dy + 3 {
        for x in dx..dx + 3 {
            px[y * side + x] += dim;
        }
    }
    let data = px.into_iter().map(|v| v.clamp(-128, 127) as i8).collect();
    QuantTensor::new(vec![side, side, 1], data, 0).expect("fixture image")
}
