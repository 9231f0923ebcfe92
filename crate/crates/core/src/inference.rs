//! Bit-exact int8 forward pass with a pluggable multiplier per layer.
//!
//! Activations are `[H, W, C]` row-major. Each MAC accumulates in `i32`
//! over products taken in a fixed order (kernel row, kernel column, input
//! channel), so every run is bit-reproducible. When a layer is bound to an
//! approximate multiplier with fraction `f`, the first `ceil(f·K)` products
//! of each K-term MAC go through it and the rest are exact.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::exec;
use crate::fault::FaultSpec;
use crate::model::{Activation, Dataset, LayerKind, LayerSpec, NetworkModel};
use crate::mult::MultiplierModel;
use crate::quant::{truncate_requantize, QuantTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Substitution {
    pub multiplier: MultiplierModel,
    pub fraction: f64,
}

/// Which multiplier each layer's MACs use. Unlisted layers are exact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultiplierBinding {
    layers: BTreeMap<String, Substitution>,
}

impl MultiplierBinding {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn with_layer(mut self, layer: impl Into<String>, multiplier: MultiplierModel, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!("substitution fraction {fraction} outside [0, 1]")));
        }
        self.layers.insert(layer.into(), Substitution { multiplier, fraction });
        Ok(self)
    }

    pub fn get(&self, layer: &str) -> Option<&Substitution> {
        self.layers.get(layer)
    }

    pub fn is_all_exact(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> impl Iterator<Item = (&str, &Substitution)> {
        self.layers.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        for name in self.layers.keys() {
            let i = model.layer_index(name)?;
            if !model.layer(i).has_weights() {
                return Err(Error::Config(format!("layer {name} has no multipliers")));
            }
        }
        Ok(())
    }
}

/// Every layer's output for one image, in model order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LayerTrace {
    pub outputs: Vec<QuantTensor>,
    pub predicted: usize,
}

impl LayerTrace {
    pub fn logits(&self) -> &[i8] {
        self.outputs.last().map_or(&[], |t| t.data())
    }
}

/// Number of leading products routed to the approximate unit.
pub fn approx_terms(fraction: f64, terms: usize) -> usize {
    ((fraction * terms as f64).ceil() as usize).min(terms)
}

// Scale bookkeeping only; the requantization shift removes fractional bits.
fn out_scale(input: &QuantTensor, weights: &QuantTensor, layer: &LayerSpec) -> u32 {
    (input.scale_shift() + weights.scale_shift()).saturating_sub(layer.requant_shift)
}

#[inline]
fn activate(v: i8, act: Activation) -> i8 {
    match act {
        Activation::Relu => v.max(0),
        Activation::None => v,
    }
}

#[inline]
fn mac(weights: &[i8], inputs: &[i8], mult: &MultiplierModel, n_approx: usize) -> i32 {
    let split = if mult.is_exact() { 0 } else { n_approx };
    let (wa, we) = weights.split_at(split);
    let (xa, xe) = inputs.split_at(split);
    let approx: i32 = wa.iter().zip(xa).map(|(&w, &x)| mult.mul(w, x) as i32).sum();
    let exact: i32 = we.iter().zip(xe).map(|(&w, &x)| w as i32 * x as i32).sum();
    approx + exact
}

pub fn conv2d_forward(
    input: &QuantTensor,
    layer: &LayerSpec,
    mult: &MultiplierModel,
    fraction: f64,
) -> Result<QuantTensor> {
    let weights = layer
        .weights
        .as_ref()
        .ok_or_else(|| Error::Config(format!("layer {} has no weights", layer.name)))?;
    conv2d_with(input, layer, weights, mult, fraction)
}

fn conv2d_with(
    input: &QuantTensor,
    layer: &LayerSpec,
    weights: &QuantTensor,
    mult: &MultiplierModel,
    fraction: f64,
) -> Result<QuantTensor> {
    let LayerKind::Conv2d {
        kernel_h: kh,
        kernel_w: kw,
        in_channels: ci,
        out_channels: co,
    } = layer.kind
    else {
        return Err(Error::Config(format!("layer {} is not a convolution", layer.name)));
    };
    let out_shape = layer.output_shape(input.shape())?;
    if weights.shape() != [kh, kw, ci, co] {
        return Err(Error::Shape(format!("layer {}: weight shape {:?}", layer.name, weights.shape())));
    }
    let w = input.shape()[1];
    let (oh, ow) = (out_shape[0], out_shape[1]);
    let terms = kh * kw * ci;
    let n_approx = approx_terms(fraction, terms);
    let x = input.data();
    let wd = weights.data();

    // One contiguous K-vector per output channel, in product order.
    let filters: Vec<Vec<i8>> = (0..co)
        .map(|o| (0..terms).map(|k| wd[k * co + o]).collect())
        .collect();

    let mut out = Vec::with_capacity(oh * ow * co);
    let mut patch = Vec::with_capacity(terms);
    for oy in 0..oh {
        for ox in 0..ow {
            patch.clear();
            for ky in 0..kh {
                let row = ((oy + ky) * w + ox) * ci;
                patch.extend_from_slice(&x[row..row + kw * ci]);
            }
            for filter in &filters {
                let acc = mac(filter, &patch, mult, n_approx);
                out.push(activate(truncate_requantize(acc, layer.requant_shift), layer.activation));
            }
        }
    }
    QuantTensor::new(out_shape, out, out_scale(input, weights, layer))
}

pub fn maxpool_forward(input: &QuantTensor, layer: &LayerSpec) -> Result<QuantTensor> {
    let LayerKind::MaxPool { size } = layer.kind else {
        return Err(Error::Config(format!("layer {} is not a pool", layer.name)));
    };
    let out_shape = layer.output_shape(input.shape())?;
    let (w, c) = (input.shape()[1], input.shape()[2]);
    let (oh, ow) = (out_shape[0], out_shape[1]);
    let x = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut m = i8::MIN;
                for dy in 0..size {
                    for dx in 0..size {
                        m = m.max(x[((oy * size + dy) * w + ox * size + dx) * c + ch]);
                    }
                }
                out.push(m);
            }
        }
    }
    QuantTensor::new(out_shape, out, input.scale_shift())
}

pub fn fc_forward(
    input: &QuantTensor,
    layer: &LayerSpec,
    mult: &MultiplierModel,
    fraction: f64,
) -> Result<QuantTensor> {
    let weights = layer
        .weights
        .as_ref()
        .ok_or_else(|| Error::Config(format!("layer {} has no weights", layer.name)))?;
    fc_with(input, layer, weights, mult, fraction)
}

fn fc_with(
    input: &QuantTensor,
    layer: &LayerSpec,
    weights: &QuantTensor,
    mult: &MultiplierModel,
    fraction: f64,
) -> Result<QuantTensor> {
    let LayerKind::FullyConnected {
        in_features,
        out_features,
    } = layer.kind
    else {
        return Err(Error::Config(format!("layer {} is not fully connected", layer.name)));
    };
    let out_shape = layer.output_shape(input.shape())?;
    if weights.shape() != [out_features, in_features] {
        return Err(Error::Shape(format!("layer {}: weight shape {:?}", layer.name, weights.shape())));
    }
    let n_approx = approx_terms(fraction, in_features);
    let x = input.data();
    let out = weights
        .data()
        .chunks_exact(in_features)
        .map(|row| {
            let acc = mac(row, x, mult, n_approx);
            activate(truncate_requantize(acc, layer.requant_shift), layer.activation)
        })
        .collect();
    QuantTensor::new(out_shape, out, out_scale(input, weights, layer))
}

/// Index of the largest logit; the lowest index wins ties.
pub fn argmax(logits: &[i8]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Runs one image through the network.
///
/// A fault flips its weight bits in a private copy of the affected tensor for
/// the whole pass; the model itself is never modified.
pub fn run_inference(
    model: &NetworkModel,
    image: &QuantTensor,
    binding: &MultiplierBinding,
    fault: Option<&FaultSpec>,
) -> Result<LayerTrace> {
    if image.shape() != model.input_shape() {
        return Err(Error::Shape(format!(
            "image shape {:?}, model expects {:?}",
            image.shape(),
            model.input_shape()
        )));
    }
    let faulty = match fault {
        Some(f) => {
            let idx = model.layer_index(&f.layer)?;
            let mut w = model
                .layer(idx)
                .weights
                .clone()
                .ok_or_else(|| Error::Config(format!("layer {} has no weights to fault", f.layer)))?;
            for &addr in &f.bits {
                w.flip_bit_in_place(addr)?;
            }
            Some((idx, w))
        }
        None => None,
    };

    let exact = MultiplierModel::exact();
    let mut outputs: Vec<QuantTensor> = Vec::with_capacity(model.layers().len());
    for (i, layer) in model.layers().iter().enumerate() {
        let input = outputs.last().unwrap_or(image);
        let (mult, fraction) = match binding.get(&layer.name) {
            Some(s) => (&s.multiplier, s.fraction),
            None => (&exact, 1.0),
        };
        let weights = match &faulty {
            Some((fi, w)) if *fi == i => Some(w),
            _ => layer.weights.as_ref(),
        };
        let out = match layer.kind {
            LayerKind::Conv2d { .. } => conv2d_with(input, layer, weights.unwrap(), mult, fraction)?,
            LayerKind::MaxPool { .. } => maxpool_forward(input, layer)?,
            LayerKind::FullyConnected { .. } => fc_with(input, layer, weights.unwrap(), mult, fraction)?,
        };
        outputs.push(out);
    }
    let predicted = argmax(outputs.last().unwrap().data());
    Ok(LayerTrace { outputs, predicted })
}

/// Exact, fault-free traces for every image.
pub fn golden_run(model: &NetworkModel, data: &Dataset) -> Result<Vec<LayerTrace>> {
    let binding = MultiplierBinding::exact();
    exec::try_map_indexed(data.len(), |i| run_inference(model, &data.images[i], &binding, None))
}

/// Memoizes golden runs by (model checksum, dataset checksum).
#[derive(Default)]
pub struct GoldenCache {
    entries: Mutex<HashMap<(String, String), Arc<Vec<LayerTrace>>>>,
}

impl GoldenCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(&self, model: &NetworkModel, data: &Dataset) -> Result<Arc<Vec<LayerTrace>>> {
        let key = (model.checksum(), data.checksum());
        if let Some(hit) = self.entries.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let traces = Arc::new(golden_run(model, data)?);
        self.entries
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&traces));
        Ok(traces)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_fixture;
    use crate::quant::BitAddress;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conv_layer(kh: usize, kw: usize, ci: usize, co: usize, w: Vec<i8>, shift: u32) -> LayerSpec {
        LayerSpec {
            name: "c".into(),
            kind: LayerKind::Conv2d {
                kernel_h: kh,
                kernel_w: kw,
                in_channels: ci,
                out_channels: co,
            },
            weights: Some(QuantTensor::new(vec![kh, kw, ci, co], w, 0).unwrap()),
            requant_shift: shift,
            activation: Activation::Relu,
        }
    }

    fn pool_layer(size: usize) -> LayerSpec {
        LayerSpec {
            name: "p".into(),
            kind: LayerKind::MaxPool { size },
            weights: None,
            requant_shift: 0,
            activation: Activation::None,
        }
    }

    #[test]
    fn identity_kernel_is_relu() {
        let layer = conv_layer(1, 1, 1, 1, vec![1], 0);
        for v in [-5i8, 0, 7, 127, -128] {
            let x = QuantTensor::new(vec![1, 1, 1], vec![v], 0).unwrap();
            let y = conv2d_forward(&x, &layer, &MultiplierModel::exact(), 1.0).unwrap();
            assert_eq!(y.data(), [v.max(0)]);
        }
    }

    #[test]
    fn zero_weights_zero_output() {
        let layer = conv_layer(3, 3, 2, 3, vec![0; 54], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = QuantTensor::new(vec![5, 5, 2], (0..50).map(|_| rng.random()).collect(), 0).unwrap();
        let y = conv2d_forward(&x, &layer, &MultiplierModel::exact(), 1.0).unwrap();
        assert!(y.data().iter().all(|&v| v == 0));
        assert_eq!(y.shape(), [3, 3, 3]);
    }

    #[test]
    fn conv_geometry_mismatch() {
        let layer = conv_layer(3, 3, 2, 1, vec![0; 18], 0);
        let x = QuantTensor::zeros(vec![5, 5, 1]).unwrap();
        assert!(matches!(
            conv2d_forward(&x, &layer, &MultiplierModel::exact(), 1.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn pool_examples() {
        let x = QuantTensor::new(vec![2, 2, 1], vec![1, 2, 3, 4], 0).unwrap();
        assert_eq!(maxpool_forward(&x, &pool_layer(2)).unwrap().data(), [4]);
        let c = QuantTensor::new(vec![4, 4, 2], vec![-9; 32], 0).unwrap();
        assert!(maxpool_forward(&c, &pool_layer(2)).unwrap().data().iter().all(|&v| v == -9));
        let odd = QuantTensor::zeros(vec![5, 4, 1]).unwrap();
        assert!(matches!(maxpool_forward(&odd, &pool_layer(2)), Err(Error::Shape(_))));
    }

    #[test]
    fn fc_examples() {
        let layer = LayerSpec {
            name: "fc".into(),
            kind: LayerKind::FullyConnected {
                in_features: 4,
                out_features: 2,
            },
            weights: Some(QuantTensor::new(vec![2, 4], vec![0, 0, 1, 0, 1, 0, 0, 0], 0).unwrap()),
            requant_shift: 0,
            activation: Activation::None,
        };
        let x = QuantTensor::new(vec![2, 2, 1], vec![-3, 9, -7, 4], 0).unwrap();
        assert_eq!(fc_forward(&x, &layer, &MultiplierModel::exact(), 1.0).unwrap().data(), [-7, -3]);
        let z = QuantTensor::zeros(vec![4]).unwrap();
        assert_eq!(fc_forward(&z, &layer, &MultiplierModel::exact(), 1.0).unwrap().data(), [0, 0]);
        let bad = QuantTensor::zeros(vec![5]).unwrap();
        assert!(matches!(
            fc_forward(&bad, &layer, &MultiplierModel::exact(), 1.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn approx_terms_rule() {
        assert_eq!(approx_terms(0.0, 36), 0);
        assert_eq!(approx_terms(1.0, 36), 36);
        assert_eq!(approx_terms(0.5, 9), 5);
        assert_eq!(approx_terms(0.01, 9), 1);
    }

    #[test]
    fn partial_substitution_uses_leading_products() {
        // trunc8 zeroes every product it touches, so a half-approximated
        // all-ones kernel sums only the trailing exact products.
        let layer = LayerSpec {
            activation: Activation::None,
            ..conv_layer(1, 4, 1, 1, vec![1; 4], 0)
        };
        let x = QuantTensor::new(vec![1, 4, 1], vec![1, 2, 3, 4], 0).unwrap();
        let t8 = MultiplierModel::truncated(8).unwrap();
        assert_eq!(conv2d_forward(&x, &layer, &t8, 0.5).unwrap().data(), [7]);
        assert_eq!(conv2d_forward(&x, &layer, &t8, 0.0).unwrap().data(), [10]);
        assert_eq!(conv2d_forward(&x, &layer, &t8, 1.0).unwrap().data(), [0]);
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[3, 3]), 0);
        assert_eq!(argmax(&[-1, 5, 5]), 1);
    }

    #[test]
    fn inference_is_deterministic() {
        let (m, d) = generate_fixture(42);
        let b = MultiplierBinding::exact();
        let a = run_inference(&m, &d.images[0], &b, None).unwrap();
        assert_eq!(a, run_inference(&m, &d.images[0], &b, None).unwrap());
        assert_eq!(a.outputs.len(), 5);
    }

    #[test]
    fn fault_equals_premutated_weights() {
        let (m, d) = generate_fixture(42);
        let b = MultiplierBinding::exact();
        let addr = BitAddress::new(3, 6);
        let fault = FaultSpec {
            layer: "Conv1".into(),
            bits: vec![addr],
        };
        let faulted = run_inference(&m, &d.images[5], &b, Some(&fault)).unwrap();

        let w = m.layer(0).weights.as_ref().unwrap().flip_bit(addr).unwrap();
        let dir = tempfile::tempdir().unwrap();
        crate::model::save_model(&m.with_weights(0, w).unwrap(), dir.path()).unwrap();
        let mutated = crate::model::load_model(dir.path()).unwrap();
        assert_eq!(faulted, run_inference(&mutated, &d.images[5], &b, None).unwrap());
    }

    #[test]
    fn binding_validation() {
        let (m, _) = generate_fixture(42);
        let b = MultiplierBinding::exact()
            .with_layer("Pool1", MultiplierModel::exact(), 1.0)
            .unwrap();
        assert!(b.validate(&m).is_err());
        let b = MultiplierBinding::exact()
            .with_layer("Nope", MultiplierModel::exact(), 1.0)
            .unwrap();
        assert!(b.validate(&m).is_err());
        assert!(MultiplierBinding::exact()
            .with_layer("Conv1", MultiplierModel::exact(), 1.5)
            .is_err());
    }

    #[test]
    fn golden_cache_hit_is_identical() {
        let (m, d) = generate_fixture(42);
        let cache = GoldenCache::new();
        let a = cache.get_or_compute(&m, &d).unwrap();
        let b = cache.get_or_compute(&m, &d).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(*a, golden_run(&m, &d).unwrap());
        assert_eq!(cache.len(), 1);
    }
}
