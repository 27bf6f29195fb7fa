//! Stage drivers behind the command-line tool. Stages talk through files in
//! a run directory; every file carries the digest of the configuration that
//! produced it.

use std::fs;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::config::RunConfig;
use crate::entropy::{certify, corrected_bits, hmin_asymptotic, hmin_for, EntropyCertificate, EntropyInputs};
use crate::error::{Error, Result};
use crate::extractor::{plan_extraction, stream_extract, ExtractionPlan, PlanShape};
use crate::io::{
    self, file_digest, fringe_slices, read_fringe, read_json, read_seed, read_symbols, read_tags,
    write_bits, write_fringe, write_json, write_symbols, write_tags, write_text, FringeRow, Header, Manifest,
    FRINGE_KIND, SYMBOLS_KIND, TAGS_KIND,
};
use crate::protocol::{frame_symbols, raw_autocorrelation, split_rounds, Verdict};
use crate::rng::{derive_seed, stream_rng};
use crate::sim::franson::{estimate_visibility, even_phases, scan_fringe};
use crate::sim::{simulate_arms, SourceModel};
use crate::stattests::{run_battery_with_rerun, BatteryOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_ABORT: i32 = 2;
pub const EXIT_FINITE_SIZE: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const CERTIFICATE_SCHEMA: u32 = 1;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::AbortedCertificate => EXIT_ABORT,
        Error::FiniteSizeBoundInvalid { .. } => EXIT_FINITE_SIZE,
        Error::Io { .. } | Error::Format { .. } | Error::Json(_) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

/// File names inside a run directory.
#[derive(Clone, Debug)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn signal_tags(&self, cfg: &RunConfig) -> PathBuf {
        self.root.join(format!("signal.{}", cfg.tag_format.extension()))
    }

    pub fn idler_tags(&self, cfg: &RunConfig) -> PathBuf {
        self.root.join(format!("idler.{}", cfg.tag_format.extension()))
    }

    pub fn fringe(&self) -> PathBuf {
        self.root.join("fringe.csv")
    }

    pub fn symbols(&self) -> PathBuf {
        self.root.join("symbols.sym")
    }

    pub fn certificate(&self) -> PathBuf {
        self.root.join("certificate.json")
    }

    pub fn seed(&self) -> PathBuf {
        self.root.join("seed.bin")
    }

    pub fn random(&self) -> PathBuf {
        self.root.join("random.bin")
    }

    pub fn random_meta(&self) -> PathBuf {
        self.root.join("random.meta.json")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn report_txt(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn sweep(&self) -> PathBuf {
        self.root.join("sweep.csv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
}

fn header(kind: &str, cfg: &RunConfig) -> Header {
    Header::new(kind)
        .with("digest", cfg.digest())
        .with("seed", cfg.master_seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceVisibility {
    pub slice: u32,
    pub visibility: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub config_digest: String,
    pub duration_s: f64,
    pub signal_tags: u64,
    pub idler_tags: u64,
    pub signal_rate: f64,
    pub channel_rates: Vec<f64>,
    pub saturated: bool,
    pub fringe: Vec<SliceVisibility>,
}

/// Fringe scans, one per monitoring slice.
pub fn simulate_fringe(cfg: &RunConfig) -> Result<Vec<FringeRow>> {
    let source = SourceModel {
        pair_rate: cfg.franson.pair_rate,
        ..cfg.source
    };
    let phases = even_phases(cfg.franson.points);
    let mut rows = Vec::new();
    for slice in 0..cfg.franson.slices {
        let points = scan_fringe(
            &source,
            &cfg.franson.model(),
            (&cfg.detector.model, &cfg.idler_detector),
            &phases,
            cfg.franson.duration_per_point,
            derive_seed(cfg.master_seed, &format!("fringe-slice-{slice}")),
        )?;
        rows.extend(points.into_iter().map(|point| FringeRow { slice, point }));
    }
    Ok(rows)
}

fn slice_visibilities(rows: &[FringeRow]) -> Result<Vec<SliceVisibility>> {
    fringe_slices(rows)
        .into_iter()
        .map(|(slice, pts)| {
            let est = estimate_visibility(&pts)?;
            Ok(SliceVisibility {
                slice,
                visibility: est.visibility,
                stderr: est.stderr,
            })
        })
        .collect()
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateSummary> {
    cfg.validate()?;
    let paths = RunPaths::new(out);
    let p = &cfg.protocol.protocol;
    let arms = simulate_arms(
        &cfg.source,
        &cfg.signal_detectors(),
        Some(&cfg.idler_detector),
        p.duration,
        derive_seed(cfg.master_seed, "arms"),
    )?;
    let hdr = header(TAGS_KIND, cfg).with("duration_ps", arms.duration_ps);
    let k = cfg.detector.count;
    write_tags(&paths.signal_tags(cfg), &hdr.clone().with("channels", k), &arms.signal, cfg.tag_format)?;
    write_tags(&paths.idler_tags(cfg), &hdr.with("channels", 1), &arms.idler, cfg.tag_format)?;

    let rows = simulate_fringe(cfg)?;
    write_fringe(&paths.fringe(), &header(FRINGE_KIND, cfg), &rows)?;

    let channel_rates: Vec<f64> = (0..k).map(|c| arms.channel_rate(c)).collect();
    let saturated = channel_rates.iter().any(|&r| cfg.detector.model.is_saturated(r));
    let secs = arms.duration_ps as f64 / crate::sim::PS_PER_S;
    Ok(SimulateSummary {
        config_digest: cfg.digest(),
        duration_s: secs,
        signal_tags: arms.signal.len() as u64,
        idler_tags: arms.idler.len() as u64,
        signal_rate: arms.signal.len() as f64 / secs,
        channel_rates,
        saturated,
        fringe: slice_visibilities(&rows)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolSummary {
    pub file: Option<String>,
    pub sha256: Option<String>,
    pub n_t: u64,
    pub n_d: u32,
    pub delta_ps: u64,
    pub p_alpha_est: f64,
    pub frames_total: u64,
    pub frames_empty: u64,
    pub frames_multi: u64,
    pub lag1_autocorrelation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub schema_version: u32,
    pub verdict: Verdict,
    pub certificate: EntropyCertificate,
    pub inputs: EntropyInputs,
    pub visibility_slices: Vec<SliceVisibility>,
    pub symbols: SymbolSummary,
    pub tags_sha256: String,
    pub fringe_sha256: String,
    pub config_digest: String,
    pub master_seed: u64,
}

/// Estimates V per slice, frames the generation rounds and certifies.
///
/// The run is judged on its worst slice. Symbols are written only for a
/// succeeding run.
pub fn cmd_certify(cfg: &RunConfig, signal_tags: &Path, fringe: &Path, out: &Path) -> Result<CertificateDocument> {
    cfg.validate()?;
    let paths = RunPaths::new(out);
    let (_, tags) = read_tags(signal_tags)?;
    let (_, rows) = read_fringe(fringe)?;
    let slices = slice_visibilities(&rows)?;
    let v_obs = slices
        .iter()
        .map(|s| s.visibility)
        .fold(f64::INFINITY, f64::min)
        .clamp(0.0, 1.0);

    let p = &cfg.protocol.protocol;
    let (generation, _test) = split_rounds(&tags, p.q, derive_seed(cfg.master_seed, "basis"))?;
    drop(tags);
    let stream = frame_symbols(&generation, p)?;
    drop(generation);

    let inputs = cfg.entropy_inputs(stream.n_t);
    let certificate = certify(&inputs, v_obs, cfg.accidentals.ratio()?)?;

    let mut symbols = SymbolSummary {
        file: None,
        sha256: None,
        n_t: stream.n_t,
        n_d: stream.n_d,
        delta_ps: stream.delta_ps,
        p_alpha_est: stream.p_alpha_est,
        frames_total: stream.frames_total,
        frames_empty: stream.frames_empty,
        frames_multi: stream.frames_multi,
        lag1_autocorrelation: raw_autocorrelation(&stream.symbols, 1).ok(),
    };
    if certificate.verdict == Verdict::Succeed {
        let path = paths.symbols();
        write_symbols(&path, &header(SYMBOLS_KIND, cfg), &stream)?;
        symbols.file = Some("symbols.sym".into());
        symbols.sha256 = Some(file_digest(&path)?);
    }
    let doc = CertificateDocument {
        schema_version: CERTIFICATE_SCHEMA,
        verdict: certificate.verdict,
        certificate,
        inputs,
        visibility_slices: slices,
        symbols,
        tags_sha256: file_digest(signal_tags)?,
        fringe_sha256: file_digest(fringe)?,
        config_digest: cfg.digest(),
        master_seed: cfg.master_seed,
    };
    write_json(&paths.certificate(), &doc)?;
    Ok(doc)
}

/// Seed bits for the largest plan a block length `n` admits.
pub fn seed_bits_for(n: usize) -> usize {
    2 * n - 1
}

pub fn write_seed(path: &Path, bits: usize, rng: &mut impl RngCore) -> Result<()> {
    let mut bytes = vec![0u8; bits.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    write_bits(path, &BitString::from_bytes_le(&bytes, bits))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomMeta {
    pub bits: u64,
    pub plan: PlanShape,
    pub bits_per_sample: f64,
    pub sample_bits: u32,
    pub seed_sha256: String,
    pub certificate_sha256: String,
    pub symbols_sha256: String,
    pub config_digest: String,
    pub master_seed: u64,
}

pub fn cmd_extract(
    cfg: &RunConfig,
    symbols_path: &Path,
    certificate_path: &Path,
    seed_path: &Path,
    out: &Path,
) -> Result<RandomMeta> {
    let doc: CertificateDocument = read_json(certificate_path)?;
    if doc.verdict != Verdict::Succeed || doc.certificate.verdict != Verdict::Succeed {
        return Err(Error::AbortedCertificate);
    }
    let symbols_sha256 = file_digest(symbols_path)?;
    if doc.symbols.sha256.as_deref() != Some(symbols_sha256.as_str()) {
        return Err(Error::InconsistentMeasurement(
            "symbol file does not match the one named in the certificate".into(),
        ));
    }
    let (_, stream) = read_symbols(symbols_path)?;
    let sample_bits = stream.n_d.trailing_zeros();
    let n = cfg.extraction.n;
    let m = plan_extraction(n, doc.certificate.bits_per_sample_corrected, sample_bits)?;
    let seed = read_seed(seed_path, ExtractionPlan::seed_len(n, m))?;
    let seed_sha256 = io::sha256_hex(&seed.to_bytes_le());
    let plan = ExtractionPlan::new(n, m, seed)?;
    let output = stream_extract(&plan, &stream.symbols, sample_bits)?;

    let paths = RunPaths::new(out);
    write_bits(&paths.random(), &output)?;
    let meta = RandomMeta {
        bits: output.len() as u64,
        plan: plan.shape(),
        bits_per_sample: doc.certificate.bits_per_sample_corrected,
        sample_bits,
        seed_sha256,
        certificate_sha256: file_digest(certificate_path)?,
        symbols_sha256,
        config_digest: cfg.digest(),
        master_seed: cfg.master_seed,
    };
    write_json(&paths.random_meta(), &meta)?;
    Ok(meta)
}

fn write_reports(outcome: &BatteryOutcome, out: &Path) -> Result<()> {
    let paths = RunPaths::new(out);
    write_json(&paths.report_json(), outcome)?;
    let mut text = outcome.first.table();
    if let Some(r) = &outcome.rerun {
        text.push_str("\nre-run on fresh data:\n");
        text.push_str(&r.table());
    }
    write_text(&paths.report_txt(), &text)
}

/// Runs the battery over a bit file; `fresh` supplies re-run data.
pub fn cmd_test(cfg: &RunConfig, bits: &Path, fresh: Option<&Path>, out: &Path) -> Result<BatteryOutcome> {
    let data = io::read_bits(bits, None)?;
    let outcome = run_battery_with_rerun(&data, &cfg.tests, || fresh.map(|p| io::read_bits(p, None)).transpose())?;
    write_reports(&outcome, out)?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub exit_code: i32,
    pub simulate: SimulateSummary,
    pub certificate: CertificateDocument,
    pub extracted: Option<RandomMeta>,
    pub battery: Option<BatteryOutcome>,
}

/// Simulate, certify, and on success extract with a seed derived from the
/// master seed. Returns the certificate and the extraction metadata.
fn generate(cfg: &RunConfig, out: &Path) -> Result<(SimulateSummary, CertificateDocument, Option<RandomMeta>)> {
    let paths = RunPaths::new(out);
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(&paths.config(), &cfg.to_toml_string())?;
    let sim = cmd_simulate(cfg, out)?;
    let doc = cmd_certify(cfg, &paths.signal_tags(cfg), &paths.fringe(), out)?;
    if doc.verdict != Verdict::Succeed {
        return Ok((sim, doc, None));
    }
    let mut rng = stream_rng(cfg.master_seed, "extractor-seed", 0);
    write_seed(&paths.seed(), seed_bits_for(cfg.extraction.n), &mut rng)?;
    let meta = cmd_extract(cfg, &paths.symbols(), &paths.certificate(), &paths.seed(), out)?;
    Ok((sim, doc, Some(meta)))
}

fn collect_files(dir: &Path, acc: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, acc)?;
        } else {
            acc.push(p);
        }
    }
    Ok(())
}

pub fn write_manifest(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let paths = RunPaths::new(out);
    let mut files = Vec::new();
    collect_files(out, &mut files)?;
    let mut manifest = Manifest::new(&cfg.digest(), cfg.master_seed);
    for f in files.iter().filter(|f| **f != paths.manifest()) {
        manifest.add(out, f)?;
    }
    write_json(&paths.manifest(), &manifest)?;
    Ok(manifest)
}

/// All stages end to end into `cfg.output_dir`.
///
/// After a single marginal battery failure the whole chain runs once more
/// under a derived master seed into `rerun/`.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.output_dir);
    let (simulate, certificate, extracted) = generate(cfg, &out)?;
    let Some(meta) = extracted else {
        write_manifest(cfg, &out)?;
        return Ok(PipelineOutcome {
            exit_code: EXIT_ABORT,
            simulate,
            certificate,
            extracted: None,
            battery: None,
        });
    };
    let bits = io::read_bits(&RunPaths::new(&out).random(), Some(meta.bits as usize))?;
    let battery = run_battery_with_rerun(&bits, &cfg.tests, || {
        let rerun_dir = out.join("rerun");
        let rerun_cfg = RunConfig {
            master_seed: derive_seed(cfg.master_seed, "rerun"),
            output_dir: rerun_dir.to_string_lossy().into_owned(),
            ..cfg.clone()
        };
        let (_, _, meta) = generate(&rerun_cfg, &rerun_dir)?;
        meta.map(|m| io::read_bits(&RunPaths::new(&rerun_dir).random(), Some(m.bits as usize)))
            .transpose()
    })?;
    write_reports(&battery, &out)?;
    write_manifest(cfg, &out)?;
    Ok(PipelineOutcome {
        exit_code: if battery.success { EXIT_OK } else { EXIT_FAILURE },
        simulate,
        certificate,
        extracted: Some(meta),
        battery: Some(battery),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub v0: f64,
    pub duration_s: f64,
    pub n_t: u64,
    pub bits_per_sample: f64,
    pub throughput_bps: f64,
    /// Throughput in the infinite-data limit at this `v0`.
    pub asymptote_bps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub symbol_rate: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("v0,duration_s,n_t,bits_per_sample,throughput_bps,asymptote_bps\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{:.6},{:.1},{:.1}\n",
                r.v0, r.duration_s, r.n_t, r.bits_per_sample, r.throughput_bps, r.asymptote_bps
            ));
        }
        s
    }

    pub fn curve(&self, v0: f64) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.v0 == v0).collect()
    }
}

/// Framed generation symbols per second at the configured rates.
pub fn calibrate_symbol_rate(cfg: &RunConfig) -> Result<f64> {
    let arms = simulate_arms(
        &cfg.source,
        &cfg.signal_detectors(),
        None,
        cfg.sweep.calibration_s,
        derive_seed(cfg.master_seed, "sweep-calibration"),
    )?;
    let p = &cfg.protocol.protocol;
    let (generation, _) = split_rounds(&arms.signal, p.q, derive_seed(cfg.master_seed, "basis"))?;
    let stream = frame_symbols(&generation, p)?;
    Ok(stream.n_t as f64 / (arms.duration_ps as f64 / crate::sim::PS_PER_S))
}

/// Bits per sample after the finite-size and accidentals corrections, with
/// no abort check. Zero where the finite-size term is undefined.
pub fn sweep_bits(inputs: &EntropyInputs, ratio: f64) -> Result<f64> {
    match hmin_for(inputs) {
        Ok(h) => Ok(corrected_bits(h, ratio)),
        Err(Error::FiniteSizeBoundInvalid { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Throughput against collection time for each `v0`.
///
/// The framed symbol rate is measured once from a short simulation and the
/// detection count at each duration is scaled from it.
pub fn cmd_sweep(cfg: &RunConfig, durations: &[f64], v0s: &[f64]) -> Result<SweepTable> {
    cfg.validate()?;
    let ratio = cfg.accidentals.ratio()?;
    let rate = match cfg.sweep.symbol_rate {
        Some(r) => r,
        None if durations.is_empty() || v0s.is_empty() => 0.0,
        None => calibrate_symbol_rate(cfg)?,
    };
    let mut rows = Vec::with_capacity(durations.len() * v0s.len());
    for &v0 in v0s {
        let base = EntropyInputs {
            v0,
            ..cfg.entropy_inputs(1)
        };
        base.validate()?;
        let asymptote = corrected_bits(hmin_asymptotic(&base), ratio) * rate;
        for &d in durations {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::invalid(format!("duration {d} must be finite and >= 0")));
            }
            let n_t = (rate * d).round() as u64;
            let bits = if n_t == 0 {
                0.0
            } else {
                sweep_bits(&EntropyInputs { n_t, ..base }, ratio)?
            };
            rows.push(SweepRow {
                v0,
                duration_s: d,
                n_t,
                bits_per_sample: bits,
                throughput_bps: bits * rate,
                asymptote_bps: asymptote,
            });
        }
    }
    Ok(SweepTable { symbol_rate: rate, rows })
}

pub fn write_sweep(table: &SweepTable, out: &Path) -> Result<PathBuf> {
    let path = RunPaths::new(out).sweep();
    write_text(&path, &table.to_csv())?;
    Ok(path)
}
