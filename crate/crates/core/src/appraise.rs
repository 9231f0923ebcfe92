//! Single-pass resilience assessment through approximate multipliers.
//!
//! Instead of injecting faults repeatedly, the compromised layer's MACs are
//! routed through an approximate multiplier for one pass over the dataset;
//! all later layers stay exact, so the approximation error propagates the way
//! a weight fault would. The mode switch is a pure transform on a
//! [`MultiplierBinding`].

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::analysis::{ClassTally, ClassificationSummary, LayerAccumulator, LayerMetrics};
use crate::error::{Error, Result};
use crate::exec;
use crate::inference::{golden_run, run_inference, LayerTrace, MultiplierBinding};
use crate::model::{Dataset, NetworkModel};
use crate::mult::{MultiplierKind, MultiplierModel};
use crate::quant::sha256_hex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every MAC exact: normal inference.
    Functional,
    /// The configured layer runs on the approximate unit.
    Assessment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AppraiserConfig {
    pub layer: String,
    pub multiplier: MultiplierModel,
    pub substitution_fraction: f64,
}

impl AppraiserConfig {
    pub fn new(layer: impl Into<String>, multiplier: MultiplierModel) -> Self {
        AppraiserConfig {
            layer: layer.into(),
            multiplier,
            substitution_fraction: 1.0,
        }
    }

    pub fn with_fraction(mut self, fraction: f64) -> Self {
        self.substitution_fraction = fraction;
        self
    }
}

/// Binding for `mode`. The input binding is ignored; only one layer is ever
/// approximated at a time.
pub fn set_mode(_binding: &MultiplierBinding, mode: Mode, config: &AppraiserConfig) -> Result<MultiplierBinding> {
    match mode {
        Mode::Functional => Ok(MultiplierBinding::exact()),
        Mode::Assessment => MultiplierBinding::exact().with_layer(
            config.layer.clone(),
            config.multiplier.clone(),
            config.substitution_fraction,
        ),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppraiserResult {
    pub layer: String,
    pub multiplier: String,
    /// SHA-256 of the multiplier's full product table.
    pub multiplier_checksum: String,
    pub substitution_fraction: f64,
    pub image_count: usize,
    pub inference_count: u64,
    pub golden: ClassificationSummary,
    pub summary: ClassificationSummary,
    /// The affected layer and every later layer.
    pub layers: Vec<LayerMetrics>,
    #[serde(skip)]
    pub duration: Duration,
}

impl AppraiserResult {
    pub fn accuracy_drop_pp(&self) -> f64 {
        100.0 * (self.golden.accuracy - self.summary.accuracy)
    }

    pub fn recall_drop_pp(&self) -> Option<f64> {
        Some(100.0 * (self.golden.recall? - self.summary.recall?))
    }
}

fn multiplier_checksum(m: &MultiplierModel) -> String {
    match m.kind() {
        MultiplierKind::Lut(t) => crate::mult::lut_checksum(t),
        _ => sha256_hex(&m.to_table().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>()),
    }
}

pub fn run_appraiser(model: &NetworkModel, data: &Dataset, config: &AppraiserConfig) -> Result<AppraiserResult> {
    let golden = golden_run(model, data)?;
    run_appraiser_with_golden(model, data, &golden, config)
}

pub fn run_appraiser_with_golden(
    model: &NetworkModel,
    data: &Dataset,
    golden: &[LayerTrace],
    config: &AppraiserConfig,
) -> Result<AppraiserResult> {
    let first = model.layer_index(&config.layer)?;
    if !model.layer(first).has_weights() {
        return Err(Error::Config(format!("layer {} has no multipliers to approximate", config.layer)));
    }
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    if golden.len() != data.len() {
        return Err(Error::Comparison(format!("{} golden traces for {} images", golden.len(), data.len())));
    }
    let binding = set_mode(&MultiplierBinding::exact(), Mode::Assessment, config)?;
    binding.validate(model)?;

    let start = Instant::now();
    let traces = exec::try_map_indexed(data.len(), |i| run_inference(model, &data.images[i], &binding, None))?;
    let duration = start.elapsed();

    let classes = model.num_classes().max(data.num_classes);
    let mut tally = ClassTally::new(classes);
    let mut golden_tally = ClassTally::new(classes);
    let mut layers: Vec<LayerAccumulator> = (first..model.layers().len())
        .map(|i| LayerAccumulator::new(model.output_shape(i).iter().product()))
        .collect();
    for ((t, g), &label) in traces.iter().zip(golden).zip(&data.labels) {
        tally.push(t.predicted, label);
        golden_tally.push(g.predicted, label);
        for (acc, li) in layers.iter_mut().zip(first..) {
            acc.push(g.outputs[li].data(), t.outputs[li].data())?;
        }
    }
    Ok(AppraiserResult {
        layer: config.layer.clone(),
        multiplier: config.multiplier.name().to_string(),
        multiplier_checksum: multiplier_checksum(&config.multiplier),
        substitution_fraction: config.substitution_fraction,
        image_count: data.len(),
        inference_count: traces.len() as u64,
        golden: golden_tally.summary(data.positive_class),
        summary: tally.summary(data.positive_class),
        layers: layers
            .iter()
            .zip(first..)
            .map(|(acc, li)| acc.finish(&model.layer(li).name))
            .collect(),
        duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_fixture;

    fn cfg(k: u8) -> AppraiserConfig {
        AppraiserConfig::new("Conv1", MultiplierModel::truncated(k).unwrap())
    }

    #[test]
    fn mode_switching() {
        let c = cfg(4);
        let assess = set_mode(&MultiplierBinding::exact(), Mode::Assessment, &c).unwrap();
        assert!(assess.get("Conv1").is_some());
        let func = set_mode(&assess, Mode::Functional, &c).unwrap();
        assert!(func.is_all_exact());
        assert_eq!(set_mode(&assess, Mode::Assessment, &c).unwrap(), assess);
        assert_eq!(set_mode(&func, Mode::Functional, &c).unwrap(), func);
    }

    #[test]
    fn exact_multiplier_changes_nothing() {
        let (m, d) = generate_fixture(42);
        let r = run_appraiser(&m, &d, &AppraiserConfig::new("Conv1", MultiplierModel::exact())).unwrap();
        assert_eq!(r.accuracy_drop_pp(), 0.0);
        assert!(r.layers.iter().all(|l| l.mismatched_bits == 0 && l.normalized_error.divisor == 0));
        assert_eq!(r.inference_count, d.len() as u64);
    }

    #[test]
    fn zero_fraction_is_golden() {
        let (m, d) = generate_fixture(42);
        let r = run_appraiser(&m, &d, &cfg(8).with_fraction(0.0)).unwrap();
        assert!(r.layers.iter().all(|l| l.mismatched_bits == 0));
        assert_eq!(r.summary, r.golden);
    }

    #[test]
    fn pool_target_rejected() {
        let (m, d) = generate_fixture(42);
        let c = AppraiserConfig::new("Pool2", MultiplierModel::truncated(4).unwrap());
        assert!(matches!(run_appraiser(&m, &d, &c), Err(Error::Config(_))));
    }

    #[test]
    fn approximation_registers_bitflips() {
        let (m, d) = generate_fixture(42);
        let r = run_appraiser(&m, &d, &cfg(4)).unwrap();
        assert_eq!(r.layers.len(), 5);
        assert!(r.layers[0].bitflip_pct > 0.0);
    }
}
