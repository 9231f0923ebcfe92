//! `resil` command-line driver.
//!
//! Every subcommand that writes a report to `--out <file>` also writes
//! `<stem>.run.json` (resolved settings and input checksums, enough to re-run
//! with `--config <stem>.run.json`) and `<stem>.timing.json` (wall-clock
//! figures, which are kept out of the report so reports stay reproducible).

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use resil_core::analysis::{compare, estimate_cost, to_json, ClassificationSummary, ComparisonReport, ExportFormat};
use resil_core::appraise::{run_appraiser_with_golden, AppraiserConfig, AppraiserResult};
use resil_core::fault::{run_fi_campaign_with_golden, CampaignConfig, FaultModel, FiCampaignResult};
use resil_core::inference::golden_run;
use resil_core::model::{generate_fixture, load_dataset, load_model, save_dataset, save_model, Dataset, NetworkModel};
use resil_core::mult::{load_lut, rank_candidates, MultiplierModel, RankedCandidate};
use resil_core::quant::sha256_hex;
use resil_core::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use config::{required, FileConfig};

pub const DEFAULT_REPS: usize = 1000;
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "resil", version, about = "Fault-resilience analysis of int8 CNNs: bitflip injection vs approximate multipliers")]
pub struct Cli {
    /// Settings file (TOML, JSON, or a previous run manifest); flags win on conflict.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: $RESIL_THREADS, else all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank candidate multipliers by weighted Var-ED and RMS-ED.
    Rank(RankArgs),
    /// Fault-free exact run over a dataset.
    Golden(GoldenArgs),
    /// Statistical bitflip fault-injection campaign on one layer's weights.
    Fi(FiArgs),
    /// One pass with one layer's multiplications on an approximate multiplier.
    Appraise(AppraiseArgs),
    /// Side-by-side comparison of FI and approximate-multiplier reports.
    Compare(CompareArgs),
    /// Runtime cost model for FI vs the single approximate pass.
    Cost(CostArgs),
    /// Write the seeded test model and dataset.
    Fixture(FixtureArgs),
    /// Convert a comparison report between JSON and CSV.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Directory of LUT files (*.bin or *.csv); the file stem names the candidate.
    #[arg(long)]
    pub luts: Option<PathBuf>,
    /// Include the built-in exact and trunc0..trunc8 models.
    #[arg(long)]
    pub builtin: bool,
    /// Weight of Var-ED in the score [default: 1].
    #[arg(long)]
    pub wvar: Option<f64>,
    /// Weight of RMS-ED in the score [default: 1].
    #[arg(long)]
    pub wrms: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GoldenArgs {
    /// Model directory or its model.json.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset directory or its dataset.json.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Write every layer output of every image as raw int8 files here.
    #[arg(long)]
    pub dump_traces: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FiArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Layer whose weights receive faults.
    #[arg(long)]
    pub layer: Option<String>,
    /// single | double
    #[arg(long)]
    pub faults: Option<String>,
    /// Repetitions per image [default: 1000].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Campaign seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use one fault per repetition for all images instead of one per image.
    #[arg(long)]
    pub shared_fault: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AppraiseArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Layer whose multiplications are approximated.
    #[arg(long)]
    pub layer: Option<String>,
    /// exact, truncK (K = 0..8), or a LUT file path.
    #[arg(long)]
    pub mult: Option<String>,
    /// Share of each output's products routed to the approximate unit [default: 1.0].
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// FI report (repeatable).
    #[arg(long)]
    pub fi: Vec<PathBuf>,
    /// Appraise report (repeatable).
    #[arg(long)]
    pub apx: Vec<PathBuf>,
    /// json | csv [default: from --out extension, else json]
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long)]
    pub images: Option<u64>,
    #[arg(long)]
    pub reps: Option<u64>,
    /// Milliseconds per FI inference.
    #[arg(long)]
    pub tfi: Option<f64>,
    /// Milliseconds per approximate inference.
    #[arg(long)]
    pub tapx: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; receives model/, data/ and run.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Comparison report, JSON or CSV (chosen by extension).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// json | csv
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code: 0 on success, 2 on invalid usage, 1 on
/// any other failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let name = command_name(&cli.command);
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}] {name}: {e}", e.category());
            1
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Rank(_) => "rank",
        Command::Golden(_) => "golden",
        Command::Fi(_) => "fi",
        Command::Appraise(_) => "appraise",
        Command::Compare(_) => "compare",
        Command::Cost(_) => "cost",
        Command::Fixture(_) => "fixture",
        Command::Export(_) => "export",
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => config::load(p)?,
        None => FileConfig::default(),
    };
    let threads = config::resolve_threads(cli.threads, &file)?;
    let name = command_name(&cli.command);
    let cmd = cli.command;
    let go = move || dispatch(cmd, &file, threads);
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("{name}: cannot start {n} threads: {e}")))?;
        return pool.install(go);
    }
    let _ = name;
    go()
}

/// Result of one subcommand, before it is written out.
struct Outcome {
    report: String,
    config: FileConfig,
    inputs: Value,
    timing: Value,
}

fn dispatch(cmd: Command, file: &FileConfig, threads: Option<usize>) -> Result<()> {
    let name = command_name(&cmd);
    let start = Instant::now();
    let (out, outcome) = match cmd {
        Command::Rank(a) => (a.out.clone().or(file.out.clone()), cmd_rank(a, file)?),
        Command::Golden(a) => (a.out.clone().or(file.out.clone()), cmd_golden(a, file)?),
        Command::Fi(a) => (a.out.clone().or(file.out.clone()), cmd_fi(a, file)?),
        Command::Appraise(a) => (a.out.clone().or(file.out.clone()), cmd_appraise(a, file)?),
        Command::Compare(a) => (a.out.clone().or(file.out.clone()), cmd_compare(a, file)?),
        Command::Cost(a) => (a.out.clone().or(file.out.clone()), cmd_cost(a, file)?),
        Command::Export(a) => (a.out.clone().or(file.out.clone()), cmd_export(a, file)?),
        Command::Fixture(a) => return cmd_fixture(a, file),
    };
    let Some(out) = out else {
        print!("{}", outcome.report);
        return Ok(());
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(&out, &outcome.report).map_err(|e| Error::io(&out, e))?;

    let mut config = outcome.config;
    config.out = Some(out.clone());
    let manifest = json!({
        "command": name,
        "config": strip_nulls(serde_json::to_value(&config).expect("settings serialize")),
        "format": "resil-run",
        "inputs": outcome.inputs,
        "report": { "checksum": sha256_hex(outcome.report.as_bytes()), "file": out },
        "tool_version": env!("CARGO_PKG_VERSION"),
        "version": MANIFEST_VERSION,
    });
    write_json(&sidecar(&out, "run.json"), &manifest)?;

    let mut timing = outcome.timing;
    if let Value::Object(m) = &mut timing {
        m.insert("command".into(), json!(name));
        m.insert("total_ms".into(), json!(start.elapsed().as_secs_f64() * 1e3));
        m.insert("threads".into(), json!(threads.unwrap_or_else(default_threads)));
    }
    write_json(&sidecar(&out, "timing.json"), &timing)
}

fn default_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    1
}

/// `dir/report.json` -> `dir/report.<suffix>`
pub fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        other => other,
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    fs::write(path, to_json(value)).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn load_inputs(model: &Path, data: &Path) -> Result<(NetworkModel, Dataset)> {
    let m = load_model(model)?;
    let d = load_dataset(data)?;
    if d.images.first().is_some_and(|img| img.shape() != m.input_shape()) {
        return Err(Error::Shape(format!(
            "dataset images are {:?}, model expects {:?}",
            d.images[0].shape(),
            m.input_shape()
        )));
    }
    Ok((m, d))
}

fn model_inputs(m: &NetworkModel, d: &Dataset) -> Value {
    json!({ "data_checksum": d.checksum(), "model_checksum": m.checksum() })
}

fn ms_per(d: std::time::Duration, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        d.as_secs_f64() * 1e3 / n as f64
    }
}

/// `exact`, `truncK`, or a LUT file (named after its stem).
pub fn resolve_multiplier(spec: &str) -> Result<MultiplierModel> {
    if spec == "exact" {
        return Ok(MultiplierModel::exact());
    }
    if let Some(k) = spec.strip_prefix("trunc") {
        if let Ok(k) = k.parse::<u8>() {
            return MultiplierModel::truncated(k);
        }
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::Config(format!(
            "multiplier `{spec}` is neither exact, truncK nor an existing LUT file"
        )));
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| spec.to_string());
    load_lut(path, &name)
}

fn parse_format(s: &str) -> Result<ExportFormat> {
    match s.to_ascii_lowercase().as_str() {
        "json" => Ok(ExportFormat::Json),
        "csv" => Ok(ExportFormat::Csv),
        other => Err(Error::Config(format!("unknown format `{other}` (json or csv)"))),
    }
}

fn format_name(f: ExportFormat) -> &'static str {
    match f {
        ExportFormat::Json => "json",
        ExportFormat::Csv => "csv",
    }
}

fn format_for(flag: Option<String>, out: Option<&Path>) -> Result<ExportFormat> {
    match flag {
        Some(f) => parse_format(&f),
        None => Ok(match out.and_then(|p| p.extension()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ExportFormat::Csv,
            _ => ExportFormat::Json,
        }),
    }
}

fn render(report: &ComparisonReport, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => to_json(report),
        ExportFormat::Csv => report.to_csv(),
    }
}

#[derive(Serialize)]
struct RankReport {
    weight_var: f64,
    weight_rms: f64,
    candidates: Vec<RankedCandidate>,
}

fn cmd_rank(a: RankArgs, file: &FileConfig) -> Result<Outcome> {
    let luts = a.luts.or(file.luts.clone());
    let builtin = a.builtin || file.builtin.unwrap_or(false);
    let wvar = a.wvar.or(file.wvar).unwrap_or(1.0);
    let wrms = a.wrms.or(file.wrms).unwrap_or(1.0);
    let mut models = Vec::new();
    let mut lut_sums = serde_json::Map::new();
    if builtin {
        models.push(MultiplierModel::exact());
        for k in 0..=8 {
            models.push(MultiplierModel::truncated(k)?);
        }
    }
    if let Some(dir) = &luts {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .is_some_and(|e| e.eq_ignore_ascii_case("bin") || e.eq_ignore_ascii_case("csv"))
            })
            .collect();
        files.sort();
        for p in files {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let m = load_lut(&p, &name)?;
            lut_sums.insert(name, json!(resil_core::mult::lut_checksum(&m.to_table())));
            models.push(m);
        }
    }
    if models.is_empty() {
        return Err(Error::Config("no candidates: pass --luts <dir> and/or --builtin".into()));
    }
    let t = Instant::now();
    let candidates = rank_candidates(&models, wvar, wrms)?;
    let elapsed = t.elapsed();
    for (i, c) in candidates.iter().enumerate() {
        eprintln!(
            "{:>3}  {:<16} score {:>14.4}  var_ed {:>14.4}  rms_ed {:>10.4}  mae {:>10.4}  error_rate {:.4}",
            i + 1,
            c.name,
            c.score,
            c.profile.var_ed,
            c.profile.rms_ed,
            c.profile.mae,
            c.profile.error_rate
        );
    }
    let report = to_json(&RankReport {
        weight_var: wvar,
        weight_rms: wrms,
        candidates,
    });
    Ok(Outcome {
        report,
        config: FileConfig {
            luts,
            builtin: Some(builtin),
            wvar: Some(wvar),
            wrms: Some(wrms),
            ..Default::default()
        },
        inputs: json!({ "luts": lut_sums }),
        timing: json!({ "profile_ms": elapsed.as_secs_f64() * 1e3 }),
    })
}

#[derive(Serialize)]
struct GoldenReport {
    model_checksum: String,
    data_checksum: String,
    image_count: usize,
    summary: ClassificationSummary,
    predictions: Vec<usize>,
}

fn cmd_golden(a: GoldenArgs, file: &FileConfig) -> Result<Outcome> {
    let model_p = required(a.model.or(file.model.clone()), "model")?;
    let data_p = required(a.data.or(file.data.clone()), "data")?;
    let dump = a.dump_traces.or(file.dump_traces.clone());
    let (m, d) = load_inputs(&model_p, &data_p)?;
    let t = Instant::now();
    let traces = golden_run(&m, &d)?;
    let elapsed = t.elapsed();
    let summary = resil_core::analysis::accuracy_recall(&traces, &d.labels, d.positive_class)?;
    if let Some(dir) = &dump {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, tr) in traces.iter().enumerate() {
            for (layer, out) in m.layers().iter().zip(&tr.outputs) {
                let p = dir.join(format!("img{i:05}_{}.bin", layer.name.to_lowercase()));
                fs::write(&p, out.to_bytes()).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    let report = to_json(&GoldenReport {
        model_checksum: m.checksum(),
        data_checksum: d.checksum(),
        image_count: d.len(),
        summary,
        predictions: traces.iter().map(|t| t.predicted).collect(),
    });
    Ok(Outcome {
        report,
        inputs: model_inputs(&m, &d),
        timing: json!({ "inference_ms": elapsed.as_secs_f64() * 1e3, "ms_per_inference": ms_per(elapsed, d.len() as u64) }),
        config: FileConfig {
            model: Some(model_p),
            data: Some(data_p),
            dump_traces: dump,
            ..Default::default()
        },
    })
}

fn cmd_fi(a: FiArgs, file: &FileConfig) -> Result<Outcome> {
    let model_p = required(a.model.or(file.model.clone()), "model")?;
    let data_p = required(a.data.or(file.data.clone()), "data")?;
    let layer = required(a.layer.or(file.layer.clone()), "layer")?;
    let faults = required(a.faults.or(file.faults.clone()), "faults")?;
    let fault_model = FaultModel::parse(&faults)
        .ok_or_else(|| Error::Config(format!("unknown fault model `{faults}` (single or double)")))?;
    let reps = a.reps.or(file.reps).unwrap_or(DEFAULT_REPS);
    if reps == 0 {
        return Err(Error::Config("--reps must be at least 1".into()));
    }
    let seed = required(a.seed.or(file.seed), "seed")?;
    let shared = a.shared_fault || file.shared_fault.unwrap_or(false);

    let (m, d) = load_inputs(&model_p, &data_p)?;
    let golden = golden_run(&m, &d)?;
    let mut cfg = CampaignConfig::new(layer.clone(), fault_model, reps, seed);
    cfg.per_image_independent = !shared;
    let r: FiCampaignResult = run_fi_campaign_with_golden(&m, &d, &golden, &cfg)?;
    Ok(Outcome {
        report: to_json(&r),
        inputs: model_inputs(&m, &d),
        timing: json!({
            "campaign_ms": r.duration.as_secs_f64() * 1e3,
            "inferences": r.inference_count,
            "ms_per_inference": ms_per(r.duration, r.inference_count),
        }),
        config: FileConfig {
            model: Some(model_p),
            data: Some(data_p),
            layer: Some(layer),
            faults: Some(fault_model.as_str().into()),
            reps: Some(reps),
            seed: Some(seed),
            shared_fault: Some(shared),
            ..Default::default()
        },
    })
}

fn cmd_appraise(a: AppraiseArgs, file: &FileConfig) -> Result<Outcome> {
    let model_p = required(a.model.or(file.model.clone()), "model")?;
    let data_p = required(a.data.or(file.data.clone()), "data")?;
    let layer = required(a.layer.or(file.layer.clone()), "layer")?;
    let mult_spec = required(a.mult.or(file.mult.clone()), "mult")?;
    let fraction = a.fraction.or(file.fraction).unwrap_or(1.0);
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("--fraction {fraction} outside [0, 1]")));
    }
    let mult = resolve_multiplier(&mult_spec)?;
    let (m, d) = load_inputs(&model_p, &data_p)?;
    let golden = golden_run(&m, &d)?;
    let cfg = AppraiserConfig::new(layer.clone(), mult).with_fraction(fraction);
    let r: AppraiserResult = run_appraiser_with_golden(&m, &d, &golden, &cfg)?;
    let mut inputs = model_inputs(&m, &d);
    inputs["multiplier_checksum"] = json!(r.multiplier_checksum);
    Ok(Outcome {
        report: to_json(&r),
        inputs,
        timing: json!({
            "appraise_ms": r.duration.as_secs_f64() * 1e3,
            "inferences": r.inference_count,
            "ms_per_inference": ms_per(r.duration, r.inference_count),
        }),
        config: FileConfig {
            model: Some(model_p),
            data: Some(data_p),
            layer: Some(layer),
            mult: Some(mult_spec),
            fraction: Some(fraction),
            ..Default::default()
        },
    })
}

fn cmd_compare(a: CompareArgs, file: &FileConfig) -> Result<Outcome> {
    let fi_paths = if a.fi.is_empty() { file.fi.clone().unwrap_or_default() } else { a.fi };
    let apx_paths = if a.apx.is_empty() { file.apx.clone().unwrap_or_default() } else { a.apx };
    if fi_paths.is_empty() && apx_paths.is_empty() {
        return Err(Error::Config("nothing to compare: pass --fi and/or --apx reports".into()));
    }
    let out = a.out.or(file.out.clone());
    let format = format_for(a.format.or(file.format.clone()), out.as_deref())?;
    let fi: Vec<FiCampaignResult> = fi_paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let apx: Vec<AppraiserResult> = apx_paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let goldens: Vec<&ClassificationSummary> =
        fi.iter().map(|r| &r.golden).chain(apx.iter().map(|r| &r.golden)).collect();
    if goldens.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Comparison("reports were produced against different golden runs".into()));
    }
    let report = compare(&fi, &apx, goldens[0])?;
    let sums = |ps: &[PathBuf]| -> Result<Vec<String>> {
        ps.iter()
            .map(|p| fs::read(p).map(|b| sha256_hex(&b)).map_err(|e| Error::io(p, e)))
            .collect()
    };
    Ok(Outcome {
        report: render(&report, format),
        inputs: json!({ "apx_checksums": sums(&apx_paths)?, "fi_checksums": sums(&fi_paths)? }),
        timing: json!({}),
        config: FileConfig {
            fi: Some(fi_paths),
            apx: Some(apx_paths),
            format: Some(format_name(format).into()),
            ..Default::default()
        },
    })
}

fn cmd_cost(a: CostArgs, file: &FileConfig) -> Result<Outcome> {
    let images = required(a.images.or(file.images), "images")?;
    let reps = a.reps.or(file.reps.map(|r| r as u64)).unwrap_or(DEFAULT_REPS as u64);
    let tfi = required(a.tfi.or(file.tfi), "tfi")?;
    let tapx = required(a.tapx.or(file.tapx), "tapx")?;
    let c = estimate_cost(images, reps, tfi, tapx)?;
    eprintln!(
        "FI {:.1} ms, approximate {:.1} ms, speedup {:.1}x",
        c.fi_total_ms, c.apx_total_ms, c.speedup
    );
    Ok(Outcome {
        report: to_json(&c),
        inputs: json!({}),
        timing: json!({}),
        config: FileConfig {
            images: Some(images),
            reps: Some(reps as usize),
            tfi: Some(tfi),
            tapx: Some(tapx),
            ..Default::default()
        },
    })
}

fn cmd_export(a: ExportArgs, file: &FileConfig) -> Result<Outcome> {
    let src = required(a.report.or(file.report.clone()), "report")?;
    let out = a.out.or(file.out.clone());
    let format = format_for(a.format.or(file.format.clone()), out.as_deref())?;
    let text = fs::read_to_string(&src).map_err(|e| Error::io(&src, e))?;
    let is_csv = src.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let report: ComparisonReport = if is_csv {
        ComparisonReport::from_csv(&text).map_err(|reason| Error::Parse {
            path: src.clone(),
            reason,
        })?
    } else {
        read_json(&src)?
    };
    Ok(Outcome {
        report: render(&report, format),
        inputs: json!({ "report_checksum": sha256_hex(text.as_bytes()) }),
        timing: json!({}),
        config: FileConfig {
            report: Some(src),
            format: Some(format_name(format).into()),
            ..Default::default()
        },
    })
}

fn cmd_fixture(a: FixtureArgs, file: &FileConfig) -> Result<()> {
    let seed = required(a.seed.or(file.seed), "seed")?;
    let out = required(a.out.or(file.out.clone()), "out")?;
    let (m, d) = generate_fixture(seed);
    save_model(&m, &out.join("model"))?;
    save_dataset(&d, &out.join("data"))?;
    let manifest = json!({
        "command": "fixture",
        "config": { "out": out, "seed": seed },
        "format": "resil-run",
        "inputs": model_inputs(&m, &d),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "version": MANIFEST_VERSION,
    });
    write_json(&out.join("run.json"), &manifest)
}
