//! Run configuration: one TOML file with a section per stage.
//!
//! Any key can be overridden with `section.key=value` strings, the value
//! being parsed as a TOML literal and falling back to a plain string.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entropy::{accidental_ratio, EntropyInputs};
use crate::error::{require_positive, Error, Result};
use crate::io::sha256_hex;
use crate::protocol::ProtocolConfig;
use crate::sim::franson::FransonModel;
use crate::sim::{DetectorModel, SourceModel};
use crate::stattests::BatteryConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalDetectors {
    /// Detectors behind the passive splitter, interleaved into one stream.
    pub count: u8,
    #[serde(flatten)]
    pub model: DetectorModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FransonConfig {
    pub delta_t_ps: f64,
    pub v_true: f64,
    /// Pairs per second reaching the interferometers during a scan.
    pub pair_rate: f64,
    pub points: usize,
    /// Integration time per phase setting, seconds.
    pub duration_per_point: f64,
    /// Number of monitoring scans. Two means before and after the run.
    pub slices: u32,
}

impl FransonConfig {
    pub fn model(&self) -> FransonModel {
        FransonModel {
            delta_t_ps: self.delta_t_ps,
            phase: 0.0,
            v_true: self.v_true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSection {
    #[serde(flatten)]
    pub protocol: ProtocolConfig,
    /// Multi-photon probability entering the finite-size term.
    #[serde(default)]
    pub p_alpha: f64,
}

/// Singles, coincidences and efficiencies from a source characterisation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccidentalsConfig {
    pub coincidence_rate: f64,
    pub signal_singles: f64,
    pub eta_s: f64,
    pub eta_i: f64,
}

impl AccidentalsConfig {
    pub fn ratio(&self) -> Result<f64> {
        accidental_ratio(self.coincidence_rate, self.signal_singles, self.eta_s, self.eta_i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Input block length of the Toeplitz hash.
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub durations: Vec<f64>,
    pub v0: Vec<f64>,
    /// Simulated seconds used to measure the framed symbol rate.
    pub calibration_s: f64,
    /// Fixed symbol rate; skips calibration when set.
    #[serde(default)]
    pub symbol_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: String,
    pub tag_format: crate::io::TagFormat,
    pub source: SourceModel,
    pub detector: SignalDetectors,
    pub idler_detector: DetectorModel,
    pub franson: FransonConfig,
    pub protocol: ProtocolSection,
    pub accidentals: AccidentalsConfig,
    pub extraction: ExtractionConfig,
    #[serde(default)]
    pub tests: BatteryConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    /// Laboratory parameters at desk-scale run length.
    fn default() -> Self {
        Self {
            master_seed: 1,
            output_dir: "run".into(),
            tag_format: crate::io::TagFormat::Binary,
            source: SourceModel {
                sigma_coh: 2.2e-6,
                sigma_cor: 2e-12,
                pair_rate: 8.5e6,
                fluorescence_ratio: 0.018,
                squeezing_beta: 0.0,
            },
            detector: SignalDetectors {
                count: 2,
                model: DetectorModel {
                    efficiency: 0.494,
                    jitter_sigma_ps: 106.0,
                    dark_rate: 400.0,
                    dead_time_ps: 20_000,
                    max_rate: 2.5e6,
                },
            },
            idler_detector: DetectorModel {
                efficiency: 0.503,
                jitter_sigma_ps: 106.0,
                dark_rate: 400.0,
                dead_time_ps: 20_000,
                max_rate: 5e6,
            },
            franson: FransonConfig {
                delta_t_ps: 3200.0,
                v_true: 0.988,
                pair_rate: 2e5,
                points: 12,
                duration_per_point: 9.0,
                slices: 2,
            },
            protocol: ProtocolSection {
                protocol: ProtocolConfig {
                    q: 0.9,
                    delta_ps: 250,
                    n_d: 2048,
                    v0: 0.985,
                    epsilon1: 1e-10,
                    duration: 2.0,
                },
                p_alpha: 0.0,
            },
            accidentals: AccidentalsConfig {
                coincidence_rate: 420e3,
                signal_singles: 850e3,
                eta_s: 0.494,
                eta_i: 0.503,
            },
            extraction: ExtractionConfig { n: 4096 },
            tests: BatteryConfig::default(),
            sweep: SweepConfig {
                durations: (1..=60).map(f64::from).collect(),
                v0: vec![0.980, 0.985, 0.990],
                calibration_s: 0.2,
                symbol_rate: None,
            },
        }
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Finds a key in `given` that deserialisation dropped. Flattened sections
/// swallow unknown keys, so they are caught by comparing against the
/// re-serialised config.
fn unknown_key(given: &toml::Table, kept: &toml::Table, prefix: &str) -> Option<String> {
    given.iter().find_map(|(k, v)| {
        let path = format!("{prefix}{k}");
        match (v, kept.get(k)) {
            (_, None) => Some(path),
            (toml::Value::Table(g), Some(toml::Value::Table(c))) => unknown_key(g, c, &format!("{path}.")),
            _ => None,
        }
    })
}

fn from_table(table: toml::Table) -> std::result::Result<RunConfig, String> {
    let cfg: RunConfig = toml::Value::Table(table.clone())
        .try_into()
        .map_err(|e: toml::de::Error| e.to_string())?;
    let kept = toml::Table::try_from(&cfg).map_err(|e| e.to_string())?;
    match unknown_key(&table, &kept, "") {
        Some(key) => Err(format!("unknown config key '{key}'")),
        None => Ok(cfg),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::format("<config>", e.to_string()))?;
        from_table(table).map_err(|e| Error::format("<config>", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: toml::Table = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        from_table(table).map_err(|e| Error::format(path, e))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is representable in TOML")
    }

    /// Applies `section.key=value` overrides in order.
    pub fn with_overrides<S: AsRef<str>>(self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut root = toml::Table::try_from(&self).map_err(|e| Error::invalid(e.to_string()))?;
        for ov in overrides {
            let ov = ov.as_ref();
            let (path, raw) = ov
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override '{ov}' is not key=value")))?;
            let keys: Vec<&str> = path.trim().split('.').collect();
            let (last, parents) = keys.split_last().expect("split yields one item");
            let mut table = &mut root;
            for k in parents {
                table = table
                    .get_mut(*k)
                    .and_then(toml::Value::as_table_mut)
                    .ok_or_else(|| Error::invalid(format!("unknown config section '{k}' in '{ov}'")))?;
            }
            table.insert(last.to_string(), parse_literal(raw.trim()));
        }
        from_table(root).map_err(|e| Error::invalid(format!("override rejected: {e}")))
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_dir` so that
    /// replays into different directories share a digest.
    pub fn digest(&self) -> String {
        let placed = Self {
            output_dir: String::new(),
            ..self.clone()
        };
        sha256_hex(&serde_json::to_vec(&placed).expect("config serialises"))
    }

    pub fn signal_detectors(&self) -> Vec<DetectorModel> {
        vec![self.detector.model; self.detector.count as usize]
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if self.detector.count == 0 {
            return Err(Error::invalid("detector.count must be >= 1"));
        }
        self.detector.model.validate()?;
        self.idler_detector.validate()?;
        self.franson.model().validate()?;
        require_positive("franson.pair_rate", self.franson.pair_rate)?;
        require_positive("franson.duration_per_point", self.franson.duration_per_point)?;
        if self.franson.points < 4 {
            return Err(Error::invalid("franson.points must be >= 4"));
        }
        if self.franson.slices == 0 {
            return Err(Error::invalid("franson.slices must be >= 1"));
        }
        self.protocol.protocol.validate_against(&self.source)?;
        crate::error::require_probability("protocol.p_alpha", self.protocol.p_alpha)?;
        self.accidentals.ratio()?;
        if self.extraction.n < self.protocol.protocol.sample_bits() as usize {
            return Err(Error::invalid("extraction.n must hold at least one sample"));
        }
        require_positive("sweep.calibration_s", self.sweep.calibration_s)?;
        if let Some(r) = self.sweep.symbol_rate {
            require_positive("sweep.symbol_rate", r)?;
        }
        Ok(())
    }

    /// Entropy inputs for `n_t` framed detections.
    pub fn entropy_inputs(&self, n_t: u64) -> EntropyInputs {
        let p = &self.protocol.protocol;
        EntropyInputs {
            sigma_coh: self.source.sigma_coh,
            sigma_cor: self.source.sigma_cor,
            delta_ps: p.delta_ps as f64,
            delta_t_ps: self.franson.delta_t_ps,
            v0: p.v0,
            n_d: p.n_d,
            q: p.q,
            n_t,
            p_alpha: self.protocol.p_alpha,
            epsilon1: p.epsilon1,
        }
    }
}
