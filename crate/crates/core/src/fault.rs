//! Statistical bitflip fault injection into stored weights.
//!
//! A campaign is an R × images grid of independent inferences. The fault
//! for cell (r, i) is drawn from a ChaCha8 stream keyed by
//! `(seed, r · images + i)`, so any scheduling of the grid yields the same
//! faults, and all aggregates are integer sums.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{ClassTally, ClassificationSummary, LayerAccumulator, LayerMetrics};
use crate::error::{Error, Result};
use crate::exec;
use crate::inference::{golden_run, run_inference, LayerTrace, MultiplierBinding};
use crate::model::{Dataset, NetworkModel};
use crate::quant::BitAddress;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultModel {
    Single,
    Double,
}

impl FaultModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FaultModel::Single => "single",
            FaultModel::Double => "double",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single" => Some(FaultModel::Single),
            "double" => Some(FaultModel::Double),
            _ => None,
        }
    }

    pub fn bits(&self) -> usize {
        match self {
            FaultModel::Single => 1,
            FaultModel::Double => 2,
        }
    }
}

/// Weight bits of one layer to invert for a forward pass.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultSpec {
    pub layer: String,
    pub bits: Vec<BitAddress>,
}

impl FaultSpec {
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        let idx = model.layer_index(&self.layer)?;
        let w = model
            .layer(idx)
            .weights
            .as_ref()
            .ok_or_else(|| Error::Config(format!("layer {} has no weights", self.layer)))?;
        if self.bits.is_empty() || self.bits.len() > 2 {
            return Err(Error::Config(format!("fault must flip 1 or 2 bits, got {}", self.bits.len())));
        }
        for &b in &self.bits {
            w.check_address(b)?;
        }
        if self.bits.len() == 2 && self.bits[0] == self.bits[1] {
            return Err(Error::Config("double fault addresses must differ".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub layer: String,
    pub fault_model: FaultModel,
    pub repetitions: usize,
    pub seed: u64,
    /// Fresh fault for every (repetition, image); otherwise one fault per
    /// repetition shared by the whole dataset.
    pub per_image_independent: bool,
}

impl CampaignConfig {
    pub fn new(layer: impl Into<String>, fault_model: FaultModel, repetitions: usize, seed: u64) -> Self {
        CampaignConfig {
            layer: layer.into(),
            fault_model,
            repetitions,
            seed,
            per_image_independent: true,
        }
    }
}

/// Statistical-FI sample size for a population of `population` faults at
/// error margin `margin`, confidence coefficient `t` and estimated
/// proportion `p`.
pub fn required_sample_size(population: u64, margin: f64, t: f64, p: f64) -> Result<u64> {
    if population == 0 || !(margin > 0.0 && margin < 1.0) || !(t > 0.0) || !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!(
            "invalid sample-size inputs N={population} e={margin} t={t} p={p}"
        )));
    }
    let n = population as f64;
    let size = n / (1.0 + margin * margin * (n - 1.0) / (t * t * p * (1.0 - p)));
    Ok((size.ceil() as u64).clamp(1, population))
}

/// Sample size for an unbounded fault population, `t²·p(1−p)/e²`.
pub fn infinite_population_sample_size(margin: f64, t: f64, p: f64) -> f64 {
    t * t * p * (1.0 - p) / (margin * margin)
}

/// Deterministic RNG stream for grid cell `stream`.
pub fn fault_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a fault uniformly over all weight bits of the configured layer;
/// double faults draw two distinct bit positions.
pub fn sample_fault<R: Rng + ?Sized>(config: &CampaignConfig, model: &NetworkModel, rng: &mut R) -> Result<FaultSpec> {
    let idx = model.layer_index(&config.layer)?;
    let bits_total = model
        .layer(idx)
        .weights
        .as_ref()
        .ok_or_else(|| Error::Config(format!("layer {} has no weights to fault", config.layer)))?
        .bit_count();
    let bits = match config.fault_model {
        FaultModel::Single => vec![BitAddress::from_linear(rng.random_range(0..bits_total))],
        FaultModel::Double => {
            if bits_total < 2 {
                return Err(Error::Config(format!("layer {} has fewer than 2 weight bits", config.layer)));
            }
            let a = rng.random_range(0..bits_total);
            let mut b = rng.random_range(0..bits_total - 1);
            if b >= a {
                b += 1;
            }
            vec![BitAddress::from_linear(a), BitAddress::from_linear(b)]
        }
    };
    Ok(FaultSpec {
        layer: config.layer.clone(),
        bits,
    })
}

/// The fault used for repetition `rep`, image `image`.
pub fn campaign_fault(
    config: &CampaignConfig,
    model: &NetworkModel,
    images: usize,
    rep: usize,
    image: usize,
) -> Result<FaultSpec> {
    let stream = if config.per_image_independent {
        rep as u64 * images as u64 + image as u64
    } else {
        rep as u64
    };
    sample_fault(config, model, &mut fault_stream(config.seed, stream))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiCampaignResult {
    pub layer: String,
    pub fault_model: FaultModel,
    pub repetitions: usize,
    pub seed: u64,
    pub per_image_independent: bool,
    pub image_count: usize,
    pub inference_count: u64,
    pub golden: ClassificationSummary,
    /// Means over all repetitions.
    pub mean: ClassificationSummary,
    /// The affected layer and every later layer.
    pub layers: Vec<LayerMetrics>,
    #[serde(skip)]
    pub duration: Duration,
}

impl FiCampaignResult {
    pub fn accuracy_drop_pp(&self) -> f64 {
        100.0 * (self.golden.accuracy - self.mean.accuracy)
    }

    pub fn recall_drop_pp(&self) -> Option<f64> {
        Some(100.0 * (self.golden.recall? - self.mean.recall?))
    }
}

#[derive(Clone)]
struct GridPartial {
    tally: ClassTally,
    layers: Vec<LayerAccumulator>,
    inferences: u64,
}

impl GridPartial {
    fn new(model: &NetworkModel, first: usize, classes: usize) -> Self {
        GridPartial {
            tally: ClassTally::new(classes),
            layers: (first..model.layers().len())
                .map(|i| LayerAccumulator::new(model.output_shape(i).iter().product()))
                .collect(),
            inferences: 0,
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        self.tally = self.tally.merge(&other.tally);
        self.layers = self
            .layers
            .into_iter()
            .zip(&other.layers)
            .map(|(a, b)| a.merge(b))
            .collect();
        self.inferences += other.inferences;
        self
    }
}

/// Aggregated outcome of an explicit fault grid.
pub struct GridOutcome {
    pub tally: ClassTally,
    pub layers: Vec<LayerMetrics>,
    pub inferences: u64,
}

/// Runs `repetitions × images` faulty inferences with the fault chosen by
/// `fault_for(rep, image)` and aggregates metrics for the affected layer and
/// all later layers.
pub fn run_fault_grid<F>(
    model: &NetworkModel,
    data: &Dataset,
    golden: &[LayerTrace],
    layer: &str,
    repetitions: usize,
    fault_for: F,
) -> Result<GridOutcome>
where
    F: Fn(usize, usize) -> Result<FaultSpec> + Sync + Send,
{
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    if golden.len() != data.len() {
        return Err(Error::Comparison(format!("{} golden traces for {} images", golden.len(), data.len())));
    }
    let first = model.layer_index(layer)?;
    if !model.layer(first).has_weights() {
        return Err(Error::Config(format!("layer {layer} has no weights to fault")));
    }
    let classes = model.num_classes().max(data.num_classes);
    let binding = MultiplierBinding::exact();
    let n = data.len();

    // One task per repetition; partials merge with integer sums, so the
    // reduction order cannot matter.
    let outcome = exec::map_reduce(
        repetitions,
        || Ok(GridPartial::new(model, first, classes)),
        |rep| -> Result<GridPartial> {
            let mut p = GridPartial::new(model, first, classes);
            for image in 0..n {
                let fault = fault_for(rep, image)?;
                if fault.layer != layer {
                    return Err(Error::Config(format!("fault targets {}, campaign targets {layer}", fault.layer)));
                }
                fault.validate(model)?;
                let trace = run_inference(model, &data.images[image], &binding, Some(&fault))?;
                p.tally.push(trace.predicted, data.labels[image]);
                for (acc, li) in p.layers.iter_mut().zip(first..) {
                    acc.push(golden[image].outputs[li].data(), trace.outputs[li].data())?;
                }
                p.inferences += 1;
            }
            Ok(p)
        },
        |a, b| match (a, b) {
            (Ok(a), Ok(b)) => Ok(a.merge(&b)),
            (Err(e), _) | (_, Err(e)) => Err(e),
        },
    )?;
    Ok(GridOutcome {
        tally: outcome.tally,
        layers: outcome
            .layers
            .iter()
            .zip(first..)
            .map(|(acc, li)| acc.finish(&model.layer(li).name))
            .collect(),
        inferences: outcome.inferences,
    })
}

pub fn run_fi_campaign(model: &NetworkModel, data: &Dataset, config: &CampaignConfig) -> Result<FiCampaignResult> {
    let golden = golden_run(model, data)?;
    run_fi_campaign_with_golden(model, data, &golden, config)
}

pub fn run_fi_campaign_with_golden(
    model: &NetworkModel,
    data: &Dataset,
    golden: &[LayerTrace],
    config: &CampaignConfig,
) -> Result<FiCampaignResult> {
    if config.repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let idx = model.layer_index(&config.layer)?;
    if !model.layer(idx).has_weights() {
        return Err(Error::Config(format!("layer {} has no weights to fault", config.layer)));
    }
    let start = Instant::now();
    let n = data.len();
    let outcome = run_fault_grid(model, data, golden, &config.layer, config.repetitions, |rep, image| {
        campaign_fault(config, model, n, rep, image)
    })?;
    let duration = start.elapsed();

    let classes = model.num_classes().max(data.num_classes);
    let mut golden_tally = ClassTally::new(classes);
    for (t, &l) in golden.iter().zip(&data.labels) {
        golden_tally.push(t.predicted, l);
    }
    Ok(FiCampaignResult {
        layer: config.layer.clone(),
        fault_model: config.fault_model,
        repetitions: config.repetitions,
        seed: config.seed,
        per_image_independent: config.per_image_independent,
        image_count: n,
        inference_count: outcome.inferences,
        golden: golden_tally.summary(data.positive_class),
        mean: outcome.tally.summary(data.positive_class),
        layers: outcome.layers,
        duration,
    })
}
