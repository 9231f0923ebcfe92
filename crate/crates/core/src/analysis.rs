//! Resilience metrics, method comparison, and the analysis cost model.
//!
//! Three metrics are computed per measured layer against golden traces:
//! normalized output error, the percentage of flipped output bits, and the
//! accuracy/recall drop of the final classification. Campaign-scale runs
//! stream traces into integer accumulators, so aggregation is exact and
//! independent of evaluation order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::appraise::AppraiserResult;
use crate::error::{Error, Result};
use crate::fault::{FaultModel, FiCampaignResult};
use crate::inference::LayerTrace;
use crate::quant::mismatched_bits;

pub const DEFAULT_BINS: usize = 101;
/// Raw int8 output errors lie in [-255, 255].
const RAW_SPAN: usize = 511;
const RAW_OFFSET: i32 = 255;

/// Histogram over [-1, 1] with equal-width bins; value 1.0 falls in the
/// last bin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self) -> Vec<f64> {
        let n = self.bins();
        (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bin of `error / divisor` in a `bins`-bin histogram over [-1, 1],
/// computed in integers.
pub fn normalized_bin(error: i32, divisor: u32, bins: usize) -> usize {
    if divisor == 0 {
        return bins / 2;
    }
    let d = divisor as i64;
    let idx = (error as i64 + d) * bins as i64 / (2 * d);
    (idx.max(0) as usize).min(bins - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedErrorStats {
    /// Largest |golden − observed| seen anywhere in the layer.
    pub divisor: u32,
    /// Number of traces aggregated.
    pub samples: u64,
    /// Per-neuron mean error divided by `divisor`.
    pub neuron_means: Vec<f64>,
    /// All per-sample per-neuron normalized errors.
    pub histogram: Histogram,
}

/// Streaming accumulator for one measured layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerAccumulator {
    neuron_sums: Vec<i64>,
    raw_counts: Vec<u64>,
    samples: u64,
    mismatched_bits: u64,
    total_bits: u64,
}

impl LayerAccumulator {
    pub fn new(neurons: usize) -> Self {
        LayerAccumulator {
            neuron_sums: vec![0; neurons],
            raw_counts: vec![0; RAW_SPAN],
            samples: 0,
            mismatched_bits: 0,
            total_bits: 0,
        }
    }

    pub fn push(&mut self, golden: &[i8], observed: &[i8]) -> Result<()> {
        if golden.len() != self.neuron_sums.len() || observed.len() != golden.len() {
            return Err(Error::Comparison(format!(
                "layer has {} neurons, got golden {} / observed {}",
                self.neuron_sums.len(),
                golden.len(),
                observed.len()
            )));
        }
        for ((sum, &g), &o) in self.neuron_sums.iter_mut().zip(golden).zip(observed) {
            let e = g as i32 - o as i32;
            *sum += e as i64;
            self.raw_counts[(e + RAW_OFFSET) as usize] += 1;
        }
        self.samples += 1;
        self.mismatched_bits += mismatched_bits(golden, observed);
        self.total_bits += 8 * golden.len() as u64;
        Ok(())
    }

    pub fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.neuron_sums.iter_mut().zip(&other.neuron_sums) {
            *a += b;
        }
        for (a, b) in self.raw_counts.iter_mut().zip(&other.raw_counts) {
            *a += b;
        }
        self.samples += other.samples;
        self.mismatched_bits += other.mismatched_bits;
        self.total_bits += other.total_bits;
        self
    }

    pub fn bitflip_percentage(&self) -> f64 {
        if self.total_bits == 0 {
            0.0
        } else {
            100.0 * self.mismatched_bits as f64 / self.total_bits as f64
        }
    }

    pub fn divisor(&self) -> u32 {
        self.raw_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| (i as i32 - RAW_OFFSET).unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn normalized(&self, bins: usize) -> NormalizedErrorStats {
        let divisor = self.divisor();
        let mut counts = vec![0u64; bins];
        for (i, &c) in self.raw_counts.iter().enumerate() {
            if c > 0 {
                counts[normalized_bin(i as i32 - RAW_OFFSET, divisor, bins)] += c;
            }
        }
        let scale = self.samples as f64 * divisor as f64;
        let neuron_means = self
            .neuron_sums
            .iter()
            .map(|&s| if divisor == 0 || self.samples == 0 { 0.0 } else { s as f64 / scale })
            .collect();
        NormalizedErrorStats {
            divisor,
            samples: self.samples,
            neuron_means,
            histogram: Histogram { counts },
        }
    }

    pub fn finish(&self, layer: &str) -> LayerMetrics {
        LayerMetrics {
            layer: layer.to_string(),
            bitflip_pct: self.bitflip_percentage(),
            mismatched_bits: self.mismatched_bits,
            total_bits: self.total_bits,
            normalized_error: self.normalized(DEFAULT_BINS),
        }
    }
}

/// Metrics for one measured layer of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMetrics {
    pub layer: String,
    pub bitflip_pct: f64,
    pub mismatched_bits: u64,
    pub total_bits: u64,
    pub normalized_error: NormalizedErrorStats,
}

fn check_aligned(layer: usize, traces: &[LayerTrace], golden: &[LayerTrace]) -> Result<()> {
    if traces.len() != golden.len() {
        return Err(Error::Comparison(format!(
            "{} traces vs {} golden traces",
            traces.len(),
            golden.len()
        )));
    }
    for (t, g) in traces.iter().zip(golden) {
        if layer >= t.outputs.len() || layer >= g.outputs.len() {
            return Err(Error::Comparison(format!("no output for layer index {layer}")));
        }
        if t.outputs[layer].shape() != g.outputs[layer].shape() {
            return Err(Error::Comparison("trace shapes differ from golden".into()));
        }
    }
    Ok(())
}

fn accumulate(layer: usize, traces: &[LayerTrace], golden: &[LayerTrace]) -> Result<LayerAccumulator> {
    check_aligned(layer, traces, golden)?;
    let n = golden.first().map_or(0, |g| g.outputs[layer].len());
    let mut acc = LayerAccumulator::new(n);
    for (t, g) in traces.iter().zip(golden) {
        acc.push(g.outputs[layer].data(), t.outputs[layer].data())?;
    }
    Ok(acc)
}

/// Normalized error of layer `layer` (index into each trace) over aligned
/// trace/golden pairs.
pub fn normalized_error(layer: usize, traces: &[LayerTrace], golden: &[LayerTrace]) -> Result<NormalizedErrorStats> {
    Ok(accumulate(layer, traces, golden)?.normalized(DEFAULT_BINS))
}

/// Percentage of output bits of `layer` that differ from golden.
pub fn bitflip_percentage(layer: usize, traces: &[LayerTrace], golden: &[LayerTrace]) -> Result<f64> {
    Ok(accumulate(layer, traces, golden)?.bitflip_percentage())
}

/// Integer classification tallies; mergeable in any order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassTally {
    pub total: u64,
    pub correct: u64,
    pub actual: Vec<u64>,
    pub true_pos: Vec<u64>,
}

impl ClassTally {
    pub fn new(classes: usize) -> Self {
        ClassTally {
            total: 0,
            correct: 0,
            actual: vec![0; classes],
            true_pos: vec![0; classes],
        }
    }

    pub fn push(&mut self, predicted: usize, label: usize) {
        self.total += 1;
        self.actual[label] += 1;
        if predicted == label {
            self.correct += 1;
            self.true_pos[label] += 1;
        }
    }

    pub fn merge(mut self, other: &Self) -> Self {
        self.total += other.total;
        self.correct += other.correct;
        for (a, b) in self.actual.iter_mut().zip(&other.actual) {
            *a += b;
        }
        for (a, b) in self.true_pos.iter_mut().zip(&other.true_pos) {
            *a += b;
        }
        self
    }

    pub fn summary(&self, positive_class: usize) -> ClassificationSummary {
        let per_class_recall: Vec<Option<f64>> = self
            .actual
            .iter()
            .zip(&self.true_pos)
            .map(|(&a, &tp)| (a > 0).then(|| tp as f64 / a as f64))
            .collect();
        let defined: Vec<f64> = per_class_recall.iter().flatten().copied().collect();
        ClassificationSummary {
            accuracy: if self.total == 0 { 0.0 } else { self.correct as f64 / self.total as f64 },
            recall: per_class_recall.get(positive_class).copied().flatten(),
            macro_recall: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            per_class_recall,
        }
    }
}

/// Accuracy and recall as fractions. `None` marks a recall with no actual
/// positives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub accuracy: f64,
    pub recall: Option<f64>,
    pub macro_recall: Option<f64>,
    pub per_class_recall: Vec<Option<f64>>,
}

pub fn accuracy_recall(traces: &[LayerTrace], labels: &[usize], positive_class: usize) -> Result<ClassificationSummary> {
    if traces.len() != labels.len() {
        return Err(Error::Comparison(format!(
            "{} traces vs {} labels",
            traces.len(),
            labels.len()
        )));
    }
    let classes = traces
        .first()
        .map_or(0, |t| t.logits().len())
        .max(labels.iter().max().map_or(0, |&l| l + 1))
        .max(positive_class + 1);
    let mut tally = ClassTally::new(classes);
    for (t, &l) in traces.iter().zip(labels) {
        tally.push(t.predicted, l);
    }
    Ok(tally.summary(positive_class))
}

/// Spearman rank correlation with average ranks for ties. Identical inputs
/// give 1.0; otherwise `None` when either side has no variance.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    if a == b {
        return Some(1.0);
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fi,
    Approx,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Fi => "fi",
            Method::Approx => "approx",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "fi" => Some(Method::Fi),
            "approx" => Some(Method::Approx),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitflipRow {
    pub affected_layer: String,
    pub measured_layer: String,
    pub method: Method,
    pub fault_model: Option<FaultModel>,
    pub multiplier: Option<String>,
    pub bitflip_pct: f64,
}

/// Drops are percentage points below golden.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropRow {
    pub affected_layer: String,
    pub method: Method,
    pub fault_model: Option<FaultModel>,
    pub multiplier: Option<String>,
    pub accuracy_drop_pp: f64,
    pub recall_drop_pp: Option<f64>,
    pub macro_recall_drop_pp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub affected_layer: String,
    pub measured_layer: String,
    pub method: Method,
    pub fault_model: Option<FaultModel>,
    pub multiplier: Option<String>,
    pub divisor: u32,
    pub counts: Vec<u64>,
}

/// Spearman agreement between one FI campaign and one approximate run over
/// their per-layer bitflip percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankAgreement {
    pub fault_model: FaultModel,
    pub multiplier: String,
    pub spearman: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub bitflips: Vec<BitflipRow>,
    pub drops: Vec<DropRow>,
    pub histograms: Vec<HistogramRow>,
    pub rank_agreement: Vec<RankAgreement>,
}

fn pp_drop(golden: f64, observed: f64) -> f64 {
    100.0 * (golden - observed)
}

fn opt_drop(golden: Option<f64>, observed: Option<f64>) -> Option<f64> {
    Some(pp_drop(golden?, observed?))
}

/// Lays FI campaigns and approximate runs on the same compromised layer side
/// by side (bitflips per measured layer, accuracy/recall drops, normalized
/// error histograms) and scores how well their per-layer bitflip rankings
/// agree.
pub fn compare(
    fi: &[FiCampaignResult],
    apx: &[AppraiserResult],
    golden: &ClassificationSummary,
) -> Result<ComparisonReport> {
    let affected = fi
        .iter()
        .map(|r| (&r.layer, r.image_count, layer_names(&r.layers)))
        .chain(apx.iter().map(|r| (&r.layer, r.image_count, layer_names(&r.layers))))
        .collect::<Vec<_>>();
    if let Some(first) = affected.first() {
        if let Some(bad) = affected.iter().find(|a| a.0 != first.0 || a.1 != first.1 || a.2 != first.2) {
            return Err(Error::Config(format!(
                "results disagree on target: layer {} / {} images vs layer {} / {} images",
                first.0, first.1, bad.0, bad.1
            )));
        }
    }

    let mut report = ComparisonReport::default();
    let mut push = |layer: &str,
                    layers: &[LayerMetrics],
                    summary: &ClassificationSummary,
                    method: Method,
                    fault_model: Option<FaultModel>,
                    multiplier: Option<String>| {
        for m in layers {
            report.bitflips.push(BitflipRow {
                affected_layer: layer.to_string(),
                measured_layer: m.layer.clone(),
                method,
                fault_model,
                multiplier: multiplier.clone(),
                bitflip_pct: m.bitflip_pct,
            });
            report.histograms.push(HistogramRow {
                affected_layer: layer.to_string(),
                measured_layer: m.layer.clone(),
                method,
                fault_model,
                multiplier: multiplier.clone(),
                divisor: m.normalized_error.divisor,
                counts: m.normalized_error.histogram.counts.clone(),
            });
        }
        report.drops.push(DropRow {
            affected_layer: layer.to_string(),
            method,
            fault_model,
            multiplier,
            accuracy_drop_pp: pp_drop(golden.accuracy, summary.accuracy),
            recall_drop_pp: opt_drop(golden.recall, summary.recall),
            macro_recall_drop_pp: opt_drop(golden.macro_recall, summary.macro_recall),
        });
    };
    for r in fi {
        push(&r.layer, &r.layers, &r.mean, Method::Fi, Some(r.fault_model), None);
    }
    for r in apx {
        push(&r.layer, &r.layers, &r.summary, Method::Approx, None, Some(r.multiplier.clone()));
    }
    for f in fi {
        let fv: Vec<f64> = f.layers.iter().map(|m| m.bitflip_pct).collect();
        for a in apx {
            let av: Vec<f64> = a.layers.iter().map(|m| m.bitflip_pct).collect();
            report.rank_agreement.push(RankAgreement {
                fault_model: f.fault_model,
                multiplier: a.multiplier.clone(),
                spearman: spearman(&fv, &av),
            });
        }
    }
    Ok(report)
}

fn layer_names(layers: &[LayerMetrics]) -> Vec<&str> {
    layers.iter().map(|m| m.layer.as_str()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub images: u64,
    pub repetitions: u64,
    pub t_fi_ms: f64,
    pub t_apx_ms: f64,
    pub fi_total_ms: f64,
    pub apx_total_ms: f64,
    pub speedup: f64,
}

/// FI needs `images × repetitions` instrumented inferences; the approximate
/// method needs one pass over the images.
pub fn estimate_cost(images: u64, repetitions: u64, t_fi_ms: f64, t_apx_ms: f64) -> Result<CostModel> {
    if images == 0 || repetitions == 0 || !(t_fi_ms > 0.0) || !(t_apx_ms > 0.0) || !t_fi_ms.is_finite() || !t_apx_ms.is_finite() {
        return Err(Error::Config(format!(
            "cost inputs must be positive: images={images} reps={repetitions} t_fi={t_fi_ms} t_apx={t_apx_ms}"
        )));
    }
    let fi_total_ms = images as f64 * repetitions as f64 * t_fi_ms;
    let apx_total_ms = images as f64 * t_apx_ms;
    Ok(CostModel {
        images,
        repetitions,
        t_fi_ms,
        t_apx_ms,
        fi_total_ms,
        apx_total_ms,
        speedup: fi_total_ms / apx_total_ms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
}

/// Column order of the CSV export. Every record is one line; fields that do
/// not apply to a record are left empty.
pub const CSV_HEADER: &str = "record,affected_layer,measured_layer,method,fault_model,multiplier,bin,value";

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fm_str(f: Option<FaultModel>) -> &'static str {
    f.map_or("", |f| f.as_str())
}

impl ComparisonReport {
    /// Long-format CSV (see [`CSV_HEADER`]). Histograms are emitted as one
    /// `histogram` record per bin plus a `divisor` record.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        let mut line = |rec: &str, aff: &str, meas: &str, method: &str, fm: &str, mult: &str, bin: String, value: String| {
            writeln!(out, "{rec},{aff},{meas},{method},{fm},{mult},{bin},{value}").unwrap();
        };
        for r in &self.bitflips {
            line(
                "bitflip_pct",
                &r.affected_layer,
                &r.measured_layer,
                r.method.as_str(),
                fm_str(r.fault_model),
                r.multiplier.as_deref().unwrap_or(""),
                String::new(),
                r.bitflip_pct.to_string(),
            );
        }
        for r in &self.drops {
            let mult = r.multiplier.as_deref().unwrap_or("");
            let fm = fm_str(r.fault_model);
            let m = r.method.as_str();
            line("accuracy_drop_pp", &r.affected_layer, "", m, fm, mult, String::new(), r.accuracy_drop_pp.to_string());
            line("recall_drop_pp", &r.affected_layer, "", m, fm, mult, String::new(), fmt_opt(r.recall_drop_pp));
            line("macro_recall_drop_pp", &r.affected_layer, "", m, fm, mult, String::new(), fmt_opt(r.macro_recall_drop_pp));
        }
        for h in &self.histograms {
            let mult = h.multiplier.as_deref().unwrap_or("");
            let fm = fm_str(h.fault_model);
            let m = h.method.as_str();
            line("divisor", &h.affected_layer, &h.measured_layer, m, fm, mult, String::new(), h.divisor.to_string());
            for (i, c) in h.counts.iter().enumerate() {
                line("histogram", &h.affected_layer, &h.measured_layer, m, fm, mult, i.to_string(), c.to_string());
            }
        }
        for r in &self.rank_agreement {
            line("rank_agreement", "", "", "", r.fault_model.as_str(), &r.multiplier, String::new(), fmt_opt(r.spearman));
        }
        out
    }

    /// Parses the output of [`ComparisonReport::to_csv`].
    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err("missing or unexpected CSV header".into());
        }
        let mut report = ComparisonReport::default();
        for (n, l) in lines.enumerate() {
            let f: Vec<&str> = l.split(',').collect();
            let err = |m: &str| format!("line {}: {m}", n + 2);
            if f.len() != 8 {
                return Err(err("expected 8 fields"));
            }
            let opt_str = |s: &str| (!s.is_empty()).then(|| s.to_string());
            let fm = if f[4].is_empty() {
                None
            } else {
                Some(FaultModel::parse(f[4]).ok_or_else(|| err("bad fault model"))?)
            };
            let method = || Method::parse(f[3]).ok_or_else(|| err("bad method"));
            let num = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
            let opt_num = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            match f[0] {
                "bitflip_pct" => report.bitflips.push(BitflipRow {
                    affected_layer: f[1].into(),
                    measured_layer: f[2].into(),
                    method: method()?,
                    fault_model: fm,
                    multiplier: opt_str(f[5]),
                    bitflip_pct: num(f[7])?,
                }),
                "accuracy_drop_pp" => report.drops.push(DropRow {
                    affected_layer: f[1].into(),
                    method: method()?,
                    fault_model: fm,
                    multiplier: opt_str(f[5]),
                    accuracy_drop_pp: num(f[7])?,
                    recall_drop_pp: None,
                    macro_recall_drop_pp: None,
                }),
                "recall_drop_pp" => {
                    report.drops.last_mut().ok_or_else(|| err("orphan recall"))?.recall_drop_pp = opt_num(f[7])?
                }
                "macro_recall_drop_pp" => {
                    report.drops.last_mut().ok_or_else(|| err("orphan recall"))?.macro_recall_drop_pp = opt_num(f[7])?
                }
                "divisor" => report.histograms.push(HistogramRow {
                    affected_layer: f[1].into(),
                    measured_layer: f[2].into(),
                    method: method()?,
                    fault_model: fm,
                    multiplier: opt_str(f[5]),
                    divisor: f[7].parse().map_err(|_| err("bad divisor"))?,
                    counts: Vec::new(),
                }),
                "histogram" => report
                    .histograms
                    .last_mut()
                    .ok_or_else(|| err("orphan histogram bin"))?
                    .counts
                    .push(f[7].parse().map_err(|_| err("bad count"))?),
                "rank_agreement" => report.rank_agreement.push(RankAgreement {
                    fault_model: fm.ok_or_else(|| err("rank agreement needs a fault model"))?,
                    multiplier: f[5].into(),
                    spearman: opt_num(f[7])?,
                }),
                other => return Err(err(&format!("unknown record {other}"))),
            }
        }
        Ok(report)
    }
}

pub fn export_report(report: &ComparisonReport, format: ExportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ExportFormat::Json => to_json(report),
        ExportFormat::Csv => report.to_csv(),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
