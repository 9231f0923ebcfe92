//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resil_core::analysis::bitflip_percentage;
use resil_core::appraise::{run_appraiser, AppraiserConfig};
use resil_core::fault::{fault_stream, required_sample_size, run_fi_campaign, sample_fault, CampaignConfig, FaultModel};
use resil_core::inference::{conv2d_forward, fc_forward, golden_run, maxpool_forward, run_inference, MultiplierBinding};
use resil_core::model::{generate_fixture, load_model, Activation, LayerKind, LayerSpec};
use resil_core::mult::{save_lut_bin, MultiplierModel};
use resil_core::quant::{count_bit_mismatches, sha256_hex};
use resil_core::QuantTensor;
use serde_json::Value;

type Check = std::result::Result<String, String>;

/// Frozen regression baseline: Spearman agreement between per-layer bitflip
/// percentages of the Conv1 single-fault FI campaign (R = 1000, seed 42) and
/// the Conv1 trunc4 approximate run, over Conv1, Pool1, Conv2, Pool2, FC.
const SPEARMAN_BASELINE: f64 = -0.2;

const TARGET_FI_MS: f64 = 632_000.0;
const TARGET_APX_MS: f64 = 131.0;
const TARGET_SPEEDUP: f64 = 4_824.0;
const COST_TOLERANCE: f64 = 0.01;

struct Ctx {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    model: PathBuf,
    data: PathBuf,
}

impl Ctx {
    fn new() -> Self {
        let tmp = tempfile::tempdir().expect("tempdir");
        let root = tmp.path().to_path_buf();
        let fx = root.join("fixture");
        assert_eq!(cli(&["fixture", "--seed", "42", "--out", s(&fx)]), 0, "fixture generation");
        Ctx {
            _tmp: tmp,
            model: fx.join("model"),
            data: fx.join("data"),
            root,
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn cli(args: &[&str]) -> i32 {
    resil_cli::run(std::iter::once("resil").chain(args.iter().copied()))
}

fn cli_ok(args: &[&str]) -> std::result::Result<(), String> {
    match cli(args) {
        0 => Ok(()),
        code => Err(format!("`resil {}` exited {code}", args.join(" "))),
    }
}

fn read_json(p: &Path) -> std::result::Result<Value, String> {
    let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

// 1 -------------------------------------------------------------------------

fn cost_model(ctx: &Ctx) -> Check {
    let out = ctx.path("cost.json");
    cli_ok(&["cost", "--images", "450", "--reps", "1000", "--tfi", "1.40", "--tapx", "0.29", "--out", s(&out)])?;
    let r = read_json(&out)?;
    let rel = |got: f64, want: f64| (got - want).abs() / want;
    let (fi, apx, sp) = (f(&r["fi_total_ms"]), f(&r["apx_total_ms"]), f(&r["speedup"]));
    let detail = format!(
        "FI {fi} ms ({:.3}%), approx {apx} ms ({:.3}%), speedup {sp:.1} ({:.3}%)",
        100.0 * rel(fi, TARGET_FI_MS),
        100.0 * rel(apx, TARGET_APX_MS),
        100.0 * rel(sp, TARGET_SPEEDUP)
    );
    if rel(fi, TARGET_FI_MS) <= COST_TOLERANCE && rel(apx, TARGET_APX_MS) <= COST_TOLERANCE && rel(sp, TARGET_SPEEDUP) <= COST_TOLERANCE {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 2 -------------------------------------------------------------------------

fn exact_mode(ctx: &Ctx) -> Check {
    let lut = ctx.path("luts/exact_lut.bin");
    fs::create_dir_all(lut.parent().unwrap()).map_err(|e| e.to_string())?;
    let table: Vec<i16> = (0..65536usize)
        .map(|i| ((i / 256) as i16 - 128) * ((i % 256) as i16 - 128))
        .collect();
    save_lut_bin(&MultiplierModel::from_table("exact_lut", table).map_err(|e| e.to_string())?, &lut)
        .map_err(|e| e.to_string())?;
    let mut checked = 0;
    for layer in ["Conv1", "Conv2", "FC"] {
        let out = ctx.path(&format!("exact_{layer}.json"));
        cli_ok(&["appraise", "--model", s(&ctx.model), "--data", s(&ctx.data), "--layer", layer, "--mult", s(&lut), "--out", s(&out)])?;
        let r = read_json(&out)?;
        let drop = 100.0 * (f(&r["golden"]["accuracy"]) - f(&r["summary"]["accuracy"]));
        let rdrop = 100.0 * (f(&r["golden"]["recall"]) - f(&r["summary"]["recall"]));
        if drop != 0.0 || rdrop != 0.0 {
            return Err(format!("{layer}: drop {drop}/{rdrop} pp"));
        }
        for m in r["layers"].as_array().unwrap() {
            let ne = &m["normalized_error"];
            let zero_means = ne["neuron_means"].as_array().unwrap().iter().all(|v| f(v) == 0.0);
            if m["mismatched_bits"] != 0 || ne["divisor"] != 0 || !zero_means {
                return Err(format!("{layer}: measured layer {} not bit-exact", m["layer"]));
            }
            checked += 1;
        }
    }
    Ok(format!("exact LUT on Conv1/Conv2/FC: 0 mismatched bits in {checked} measured layers, 0.00/0.00 pp drop"))
}

// 3 -------------------------------------------------------------------------

fn naive_bits(a: &[i8], b: &[i8]) -> u64 {
    let mut n = 0;
    for (x, y) in a.iter().zip(b) {
        for bit in 0..8 {
            n += (((*x as u8) >> bit) & 1 != ((*y as u8) >> bit) & 1) as u64;
        }
    }
    n
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> QuantTensor {
    let n = shape.iter().product();
    QuantTensor::new(shape, (0..n).map(|_| rng.random()).collect(), 0).unwrap()
}

fn clamp_shift(acc: i64, shift: u32) -> i8 {
    acc.div_euclid(1i64 << shift).clamp(-128, 127) as i8
}

fn oracles_bitflip() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3001);
    for i in 0..1000 {
        let n = rng.random_range(1..=256);
        let a = random_tensor(&mut rng, vec![n]);
        let b = if i % 10 == 0 { a.clone() } else { random_tensor(&mut rng, vec![n]) };
        let got = count_bit_mismatches(&a, &b).map_err(|e| e.to_string())?;
        if got != (naive_bits(a.data(), b.data()), 8 * n as u64) {
            return Err(format!("pair {i}: {got:?}"));
        }
    }
    Ok(())
}

fn oracles_layers() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3002);
    let exact = MultiplierModel::exact();
    for case in 0..100 {
        // conv
        let (kh, kw, ci, co) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=8));
        let (h, w) = (rng.random_range(kh..=10), rng.random_range(kw..=10));
        let shift = rng.random_range(0..=9);
        let x = random_tensor(&mut rng, vec![h, w, ci]);
        let wt = random_tensor(&mut rng, vec![kh, kw, ci, co]);
        let layer = LayerSpec {
            name: "c".into(),
            kind: LayerKind::Conv2d { kernel_h: kh, kernel_w: kw, in_channels: ci, out_channels: co },
            weights: Some(wt.clone()),
            requant_shift: shift,
            activation: Activation::Relu,
        };
        let got = conv2d_forward(&x, &layer, &exact, 1.0).map_err(|e| e.to_string())?;
        let mut want = Vec::new();
        for oy in 0..=h - kh {
            for ox in 0..=w - kw {
                for o in 0..co {
                    let mut acc = 0i64;
                    for a in 0..kh {
                        for b in 0..kw {
                            for c in 0..ci {
                                acc += x.data()[((oy + a) * w + ox + b) * ci + c] as i64
                                    * wt.data()[((a * kw + b) * ci + c) * co + o] as i64;
                            }
                        }
                    }
                    want.push(clamp_shift(acc, shift).max(0));
                }
            }
        }
        if got.data() != want.as_slice() {
            return Err(format!("conv case {case}"));
        }

        // pool
        let size = 2;
        let (ph, pw, pc) = (2 * rng.random_range(1..=5), 2 * rng.random_range(1..=5), rng.random_range(1..=6));
        let px = random_tensor(&mut rng, vec![ph, pw, pc]);
        let pool = LayerSpec {
            name: "p".into(),
            kind: LayerKind::MaxPool { size },
            weights: None,
            requant_shift: 0,
            activation: Activation::None,
        };
        let got = maxpool_forward(&px, &pool).map_err(|e| e.to_string())?;
        let mut want = Vec::new();
        for oy in 0..ph / 2 {
            for ox in 0..pw / 2 {
                for c in 0..pc {
                    let v = |y: usize, x: usize| px.data()[(y * pw + x) * pc + c];
                    want.push(v(2 * oy, 2 * ox).max(v(2 * oy, 2 * ox + 1)).max(v(2 * oy + 1, 2 * ox)).max(v(2 * oy + 1, 2 * ox + 1)));
                }
            }
        }
        if got.data() != want.as_slice() {
            return Err(format!("pool case {case}"));
        }

        // fc
        let (ni, no) = (rng.random_range(1..=100), rng.random_range(1..=10));
        let fshift = rng.random_range(0..=12);
        let fx = random_tensor(&mut rng, vec![ni]);
        let fw = random_tensor(&mut rng, vec![no, ni]);
        let fc = LayerSpec {
            name: "f".into(),
            kind: LayerKind::FullyConnected { in_features: ni, out_features: no },
            weights: Some(fw.clone()),
            requant_shift: fshift,
            activation: Activation::None,
        };
        let got = fc_forward(&fx, &fc, &exact, 1.0).map_err(|e| e.to_string())?;
        let want: Vec<i8> = (0..no)
            .map(|o| clamp_shift((0..ni).map(|i| fw.data()[o * ni + i] as i64 * fx.data()[i] as i64).sum(), fshift))
            .collect();
        if got.data() != want.as_slice() {
            return Err(format!("fc case {case}"));
        }
    }
    Ok(())
}

/// Exact error statistics of Truncated(k) by enumerating all operand pairs.
fn profile_oracle(k: u32) -> (f64, f64, f64, f64, f64, u32) {
    let trunc = |x: i64| if k >= 8 { 0 } else { (x >> k) << k };
    let (mut sum, mut sum_abs, mut sum_sq, mut nonzero, mut worst) =
        (BigInt::zero(), BigInt::zero(), BigInt::zero(), 0u64, 0i64);
    for a in -128i64..=127 {
        for b in -128i64..=127 {
            let e = a * b - trunc(a) * trunc(b);
            sum += e;
            sum_abs += e.abs();
            sum_sq += e * e;
            nonzero += (e != 0) as u64;
            worst = worst.max(e.abs());
        }
    }
    let n = BigInt::from(65536);
    let q = |num: BigInt, den: BigInt| BigRational::new(num, den);
    let mean = q(sum.clone(), n.clone());
    let mean_sq = q(sum_sq.clone(), n.clone());
    let var = q(&n * &sum_sq - &sum * &sum, &n * &n);
    (
        mean.to_f64().unwrap(),
        q(sum_abs, n.clone()).to_f64().unwrap(),
        nonzero as f64 / 65536.0,
        var.to_f64().unwrap(),
        mean_sq.to_f64().unwrap().sqrt(),
        worst as u32,
    )
}

fn oracles_profiles() -> std::result::Result<(), String> {
    for k in 0..=8u8 {
        let p = MultiplierModel::truncated(k).map_err(|e| e.to_string())?.profile();
        let got = (p.mean_ed, p.mae, p.error_rate, p.var_ed, p.rms_ed, p.worst_ed);
        let want = profile_oracle(k as u32);
        if got != want {
            return Err(format!("trunc{k}: {got:?} vs oracle {want:?}"));
        }
    }
    Ok(())
}

fn oracle_equivalence(_: &Ctx) -> Check {
    oracles_bitflip().map_err(|e| format!("(a) {e}"))?;
    oracles_layers().map_err(|e| format!("(b) {e}"))?;
    oracles_profiles().map_err(|e| format!("(c) {e}"))?;
    Ok("(a) 1000 tensor pairs, (b) 100 conv/pool/fc cases, (c) trunc0..trunc8 profiles: all exact".into())
}

// 4 -------------------------------------------------------------------------

fn causality(_: &Ctx) -> Check {
    let (m, d) = generate_fixture(42);
    let golden = golden_run(&m, &d).map_err(|e| e.to_string())?;
    let cfg = CampaignConfig::new("Conv2", FaultModel::Single, 1, 4004);
    let binding = MultiplierBinding::exact();
    let mut downstream_changed = 0;
    for i in 0..500u64 {
        let fault = sample_fault(&cfg, &m, &mut fault_stream(cfg.seed, i)).map_err(|e| e.to_string())?;
        let traces = d
            .images
            .iter()
            .map(|img| run_inference(&m, img, &binding, Some(&fault)))
            .collect::<resil_core::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        for layer in 0..2 {
            let pct = bitflip_percentage(layer, &traces, &golden).map_err(|e| e.to_string())?;
            if pct != 0.0 {
                return Err(format!("fault {i} ({:?}) flipped {pct}% of layer {layer}", fault.bits));
            }
        }
        downstream_changed += (bitflip_percentage(2, &traces, &golden).unwrap() > 0.0) as u32;
    }
    Ok(format!(
        "500 Conv2 faults x 64 images: Conv1/Pool1 0.00% flipped ({downstream_changed} faults visible in Conv2)"
    ))
}

// 5 -------------------------------------------------------------------------

fn dec(s: &str) -> BigRational {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let den = BigInt::from(10).pow(frac.len() as u32);
    BigRational::new(format!("{int}{frac}").parse::<BigInt>().unwrap(), den)
}

/// ceil(N / (1 + e²(N−1) / (t²p(1−p)))) in exact rational arithmetic.
fn sample_size_oracle(n: u64, e: &str, t: &str, p: &str) -> u64 {
    let big_n = BigRational::from_integer(BigInt::from(n));
    let (e, t, p) = (dec(e), dec(t), dec(p));
    let one = BigRational::one();
    let size = &big_n / (&one + &e * &e * (&big_n - &one) / (&t * &t * &p * (&one - &p)));
    size.ceil().to_integer().to_u64().unwrap().clamp(1, n)
}

fn sample_size(_: &Ctx) -> Check {
    let cases = [
        (100u64, "0.000000001", "1.96", "0.5"),
        (1_000_000_000, "0.031", "1.96", "0.5"),
        (1_000_000, "0.031", "1.96", "0.5"),
        (10_000, "0.05", "1.96", "0.5"),
        (576, "0.05", "2.576", "0.5"),
        (2304, "0.01", "1.645", "0.3"),
    ];
    let mut shown = Vec::new();
    for (n, e, t, p) in cases {
        let got = required_sample_size(n, e.parse().unwrap(), t.parse().unwrap(), p.parse().unwrap())
            .map_err(|err| err.to_string())?;
        let want = sample_size_oracle(n, e, t, p);
        if got != want {
            return Err(format!("N={n} e={e} t={t} p={p}: {got} vs exact {want}"));
        }
        shown.push(format!("N={n}:{got}"));
    }
    let census = required_sample_size(100, 1e-9, 1.96, 0.5).unwrap();
    let large = required_sample_size(1_000_000_000, 0.031, 1.96, 0.5).unwrap();
    if census != 100 || !(999..=1000).contains(&large) {
        return Err(format!("census {census}, large-N {large}"));
    }
    Ok(format!("matches exact rational evaluation ({})", shown.join(", ")))
}

// 6 -------------------------------------------------------------------------

fn trends(ctx: &Ctx) -> Check {
    let mut drops = Vec::new();
    for layer in ["Conv1", "Conv2"] {
        let mut pair = Vec::new();
        for fm in ["single", "double"] {
            let out = ctx.path(&format!("t6/fi_{layer}_{fm}.json"));
            cli_ok(&[
                "fi", "--model", s(&ctx.model), "--data", s(&ctx.data), "--layer", layer, "--faults", fm,
                "--reps", "1000", "--seed", "42", "--out", s(&out),
            ])?;
            let r = read_json(&out)?;
            pair.push(100.0 * (f(&r["golden"]["accuracy"]) - f(&r["mean"]["accuracy"])));
        }
        drops.push((layer, pair[0], pair[1]));
    }
    let apx = ctx.path("t6/apx_Conv1_trunc4.json");
    cli_ok(&["appraise", "--model", s(&ctx.model), "--data", s(&ctx.data), "--layer", "Conv1", "--mult", "trunc4", "--out", s(&apx)])?;
    let cmp = ctx.path("t6/compare.json");
    let fi_single = ctx.path("t6/fi_Conv1_single.json");
    cli_ok(&["compare", "--fi", s(&fi_single), "--apx", s(&apx), "--out", s(&cmp)])?;
    let rho = read_json(&cmp)?["rank_agreement"][0]["spearman"].as_f64();

    let trend = drops
        .iter()
        .map(|(l, a, b)| format!("{l} single {a:.3} pp <= double {b:.3} pp"))
        .collect::<Vec<_>>()
        .join("; ");
    let detail = format!("(a) {trend}; (b) spearman {rho:?} vs baseline {SPEARMAN_BASELINE}");
    let trend_ok = drops.iter().all(|(_, a, b)| b >= a);
    if trend_ok && rho == Some(SPEARMAN_BASELINE) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 7 -------------------------------------------------------------------------

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(ctx: &Ctx) -> Check {
    let dir = ctx.path("t7");
    let p = |n: &str| dir.join(n);
    let (m, d) = (s(&ctx.model).to_string(), s(&ctx.data).to_string());
    let fi1 = p("fi1.json");
    let fi2 = p("fi2.json");
    let apx = p("apx.json");
    let cmp = p("cmp.json");
    let runs: Vec<(&str, Vec<String>, PathBuf)> = vec![
        ("rank", vec!["rank".into(), "--builtin".into(), "--wvar".into(), "1".into(), "--wrms".into(), "1".into()], p("rank.json")),
        ("golden", vec!["golden".into(), "--model".into(), m.clone(), "--data".into(), d.clone()], p("golden.json")),
        ("fi single", vec!["fi".into(), "--model".into(), m.clone(), "--data".into(), d.clone(), "--layer".into(), "Conv1".into(), "--faults".into(), "single".into(), "--reps".into(), "200".into(), "--seed".into(), "7".into()], fi1.clone()),
        ("fi double shared", vec!["fi".into(), "--model".into(), m.clone(), "--data".into(), d.clone(), "--layer".into(), "Conv1".into(), "--faults".into(), "double".into(), "--reps".into(), "200".into(), "--seed".into(), "7".into(), "--shared-fault".into()], fi2.clone()),
        ("appraise", vec!["appraise".into(), "--model".into(), m.clone(), "--data".into(), d.clone(), "--layer".into(), "Conv1".into(), "--mult".into(), "trunc3".into(), "--fraction".into(), "0.5".into()], apx.clone()),
        ("compare", vec!["compare".into(), "--fi".into(), s(&fi1).into(), "--fi".into(), s(&fi2).into(), "--apx".into(), s(&apx).into()], cmp.clone()),
        ("export", vec!["export".into(), "--report".into(), s(&cmp).into(), "--format".into(), "csv".into()], p("cmp.csv")),
        ("cost", vec!["cost".into(), "--images".into(), "450".into(), "--reps".into(), "1000".into(), "--tfi".into(), "1.40".into(), "--tapx".into(), "0.29".into()], p("cost.json")),
    ];
    let mut names = Vec::new();
    for (name, args, out) in &runs {
        let mut outputs = Vec::new();
        for threads in ["1", "8", "1"] {
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            a.extend(["--threads", threads, "--out", s(out)]);
            cli_ok(&a)?;
            let manifest = fs::read(resil_cli::sidecar(out, "run.json")).map_err(|e| e.to_string())?;
            outputs.push((fs::read(out).map_err(|e| e.to_string())?, manifest));
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{name}: report differs between thread counts"));
        }
        names.push(*name);
    }
    let mut trees = Vec::new();
    let out = p("fixture");
    for threads in ["1", "8"] {
        cli_ok(&["fixture", "--seed", "42", "--out", s(&out), "--threads", threads])?;
        trees.push(tree(&out));
    }
    if trees[0] != trees[1] {
        return Err("fixture trees differ between thread counts".into());
    }
    let no_manifest = |t: Vec<(PathBuf, Vec<u8>)>| t.into_iter().filter(|(f, _)| f != Path::new("run.json")).collect::<Vec<_>>();
    if no_manifest(trees.pop().unwrap()) != no_manifest(tree(ctx.model.parent().unwrap())) {
        return Err("fixture differs from the one generated earlier".into());
    }
    names.push("fixture");
    Ok(format!("byte-identical reports and manifests at 1 and 8 threads: {}", names.join(", ")))
}

// 8 -------------------------------------------------------------------------

fn weight_files(model_dir: &Path) -> Vec<(PathBuf, String)> {
    tree(model_dir)
        .into_iter()
        .filter(|(f, _)| f.to_string_lossy().ends_with(".weights.bin"))
        .map(|(f, b)| (f, sha256_hex(&b)))
        .collect()
}

fn weight_integrity(ctx: &Ctx) -> Check {
    let on_disk = weight_files(&ctx.model);
    let loaded = load_model(&ctx.model).map_err(|e| e.to_string())?;
    let before = loaded.weight_checksums();

    for layer in ["Conv1", "Conv2", "FC"] {
        for fm in [FaultModel::Single, FaultModel::Double] {
            run_fi_campaign(&loaded, &generate_fixture(42).1, &CampaignConfig::new(layer, fm, 20, 8)).map_err(|e| e.to_string())?;
            if loaded.weight_checksums() != before {
                return Err(format!("FI {layer} {} changed in-memory weights", fm.as_str()));
            }
        }
        run_appraiser(&loaded, &generate_fixture(42).1, &AppraiserConfig::new(layer, MultiplierModel::truncated(5).unwrap()))
            .map_err(|e| e.to_string())?;
        if loaded.weight_checksums() != before {
            return Err(format!("appraise {layer} changed in-memory weights"));
        }
        let out = ctx.path(&format!("t8/fi_{layer}.json"));
        cli_ok(&["fi", "--model", s(&ctx.model), "--data", s(&ctx.data), "--layer", layer, "--faults", "double", "--reps", "20", "--seed", "1", "--out", s(&out)])?;
        let out = ctx.path(&format!("t8/apx_{layer}.json"));
        cli_ok(&["appraise", "--model", s(&ctx.model), "--data", s(&ctx.data), "--layer", layer, "--mult", "trunc6", "--out", s(&out)])?;
    }
    if weight_files(&ctx.model) != on_disk {
        return Err("weight files changed on disk".into());
    }
    let reloaded = load_model(&ctx.model).map_err(|e| e.to_string())?;
    if reloaded.weight_checksums() != before {
        return Err("reloaded weights differ".into());
    }
    Ok(format!(
        "{} weight tensors unchanged after FI and approximate runs on Conv1/Conv2/FC",
        before.iter().flatten().count()
    ))
}

fn main() {
    let ctx = Ctx::new();
    let criteria: [(&str, &str, Option<Duration>, fn(&Ctx) -> Check); 8] = [
        ("1", "cost model reproduction", None, cost_model),
        ("2", "exact-mode equivalence", Some(Duration::from_secs(5)), exact_mode),
        ("3", "oracle equivalence", Some(Duration::from_secs(30)), oracle_equivalence),
        ("4", "feedforward causality", Some(Duration::from_secs(10)), causality),
        ("5", "statistical-FI sample size", None, sample_size),
        ("6", "fault-model trend and rank agreement", Some(Duration::from_secs(300)), trends),
        ("7", "determinism across thread counts", None, determinism),
        ("8", "weight integrity", None, weight_integrity),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let result = check(&ctx);
        let elapsed = start.elapsed();
        let over = limit.filter(|l| elapsed > *l);
        let (ok, detail) = match (&result, over) {
            (Ok(d), None) => (true, d.clone()),
            (Ok(d), Some(l)) => (false, format!("{d}; took {elapsed:.1?}, limit {l:?}")),
            (Err(d), _) => (false, d.clone()),
        };
        failed += !ok as u32;
        println!(
            "{} criterion {id} ({name}) [{:.2?}]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
