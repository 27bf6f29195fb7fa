//! Round structure of the generation protocol.
//!
//! Detections are assigned to generation or test rounds by a passive
//! `q : 1 - q` splitter. Generation detections are framed into `N_d`-ary
//! symbols on a grid of `N_d` bins of width `delta` anchored at the run
//! origin. The protocol succeeds only if the observed visibility exceeds
//! the preset threshold.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::rng::stream_rng;
use crate::sim::{SourceModel, TimeTag};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Probability that a detection belongs to a generation round.
    pub q: f64,
    /// Time-bin width, ps.
    pub delta_ps: u64,
    /// Symbol alphabet size (bins per frame).
    pub n_d: u32,
    /// Visibility threshold.
    pub v0: f64,
    /// Failure probability of the finite-size analysis.
    pub epsilon1: f64,
    /// Data-collection time, seconds.
    pub duration: f64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::invalid(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if self.delta_ps == 0 {
            return Err(Error::invalid("delta_ps must be > 0"));
        }
        if self.n_d < 2 || !self.n_d.is_power_of_two() {
            return Err(Error::invalid(format!(
                "n_d must be a power of two >= 2, got {}",
                self.n_d
            )));
        }
        if !(self.v0 > 0.5 && self.v0 <= 1.0) {
            return Err(Error::invalid(format!("v0 must lie in (0.5, 1], got {}", self.v0)));
        }
        if !(self.epsilon1 > 0.0 && self.epsilon1 < 1.0) {
            return Err(Error::invalid(format!(
                "epsilon1 must lie in (0, 1), got {}",
                self.epsilon1
            )));
        }
        require_positive("duration", self.duration)
    }

    /// Checks the frame duration against the pump coherence time.
    pub fn validate_against(&self, source: &SourceModel) -> Result<()> {
        self.validate()?;
        let frame = self.frame_ps() as f64;
        if frame >= source.sigma_coh_ps() {
            return Err(Error::invalid(format!(
                "frame duration n_d * delta = {frame} ps must be below the pump coherence time {} ps",
                source.sigma_coh_ps()
            )));
        }
        Ok(())
    }

    pub fn frame_ps(&self) -> u64 {
        self.delta_ps * self.n_d as u64
    }

    pub fn sample_bits(&self) -> u32 {
        self.n_d.trailing_zeros()
    }
}

/// Symbols framed from generation-round detections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymbolStream {
    pub symbols: Vec<u32>,
    pub n_d: u32,
    pub delta_ps: u64,
    /// Number of framed detections, equal to `symbols.len()`.
    pub n_t: u64,
    /// Multi-detection frames over occupied frames.
    pub p_alpha_est: f64,
    pub frames_total: u64,
    pub frames_empty: u64,
    pub frames_multi: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Succeed,
    Abort,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Succeed => "succeed",
            Verdict::Abort => "abort",
        })
    }
}

/// Passive basis choice per detection. Returns `(generation, test)`.
pub fn split_rounds(tags: &[TimeTag], q: f64, seed: u64) -> Result<(Vec<TimeTag>, Vec<TimeTag>)> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("q must lie in (0, 1), got {q}")));
    }
    let mut rng = stream_rng(seed, "basis", 0);
    let mut generation = Vec::with_capacity((tags.len() as f64 * q) as usize + 1);
    let mut test = Vec::with_capacity((tags.len() as f64 * (1.0 - q)) as usize + 1);
    for t in tags {
        if rng.gen::<f64>() < q {
            generation.push(*t);
        } else {
            test.push(*t);
        }
    }
    Ok((generation, test))
}

/// Frames time-sorted generation detections into symbols.
///
/// Each detector channel is framed separately on the common grid. A
/// (channel, frame) cell with exactly one detection yields its bin index.
/// Empty cells yield nothing. Cells with several detections are discarded
/// whole. Symbols come out ordered by frame, then channel.
pub fn frame_symbols(tags: &[TimeTag], config: &ProtocolConfig) -> Result<SymbolStream> {
    if config.delta_ps == 0 {
        return Err(Error::invalid("delta_ps must be > 0"));
    }
    if config.n_d < 2 || !config.n_d.is_power_of_two() {
        return Err(Error::invalid(format!(
            "n_d must be a power of two >= 2, got {}",
            config.n_d
        )));
    }
    if let Some(i) = tags.windows(2).position(|w| w[1].time_ps < w[0].time_ps) {
        return Err(Error::UnsortedInput { index: i + 1 });
    }
    let frame_ps = config.frame_ps();
    let mut out = SymbolStream {
        n_d: config.n_d,
        delta_ps: config.delta_ps,
        ..Default::default()
    };
    let Some(last) = tags.last() else {
        return Ok(out);
    };
    let frames_per_channel = last.time_ps / frame_ps + 1;

    let mut channels: Vec<u8> = tags.iter().map(|t| t.channel).collect();
    channels.sort_unstable();
    channels.dedup();

    // (frame, channel, symbol)
    let mut keyed: Vec<(u64, u8, u32)> = Vec::with_capacity(tags.len());
    let mut occupied = 0u64;
    for &ch in &channels {
        let mut current: Option<(u64, u32, u32)> = None; // (frame, count, symbol)
        let mut flush = |cell: Option<(u64, u32, u32)>, keyed: &mut Vec<(u64, u8, u32)>| {
            if let Some((frame, count, symbol)) = cell {
                occupied += 1;
                if count == 1 {
                    keyed.push((frame, ch, symbol));
                } else {
                    out.frames_multi += 1;
                }
            }
        };
        for t in tags.iter().filter(|t| t.channel == ch) {
            let frame = t.time_ps / frame_ps;
            let symbol = ((t.time_ps % frame_ps) / config.delta_ps) as u32;
            match current {
                Some((f, ref mut count, _)) if f == frame => *count += 1,
                _ => {
                    flush(current, &mut keyed);
                    current = Some((frame, 1, symbol));
                }
            }
        }
        flush(current, &mut keyed);
    }
    keyed.sort_unstable_by_key(|&(frame, ch, _)| (frame, ch));

    out.frames_total = frames_per_channel * channels.len() as u64;
    out.frames_empty = out.frames_total - occupied;
    out.symbols = keyed.into_iter().map(|(_, _, s)| s).collect();
    out.n_t = out.symbols.len() as u64;
    out.p_alpha_est = if occupied > 0 {
        out.frames_multi as f64 / occupied as f64
    } else {
        0.0
    };
    Ok(out)
}

/// Succeeds iff `v_obs > v0`.
pub fn check_abort(v_obs: f64, v0: f64) -> Verdict {
    if v_obs > v0 {
        Verdict::Succeed
    } else {
        Verdict::Abort
    }
}

/// Pearson correlation between `symbols[i]` and `symbols[i + lag]`.
pub fn raw_autocorrelation(symbols: &[u32], lag: usize) -> Result<f64> {
    if symbols.len() < lag + 2 {
        return Err(Error::invalid(format!(
            "autocorrelation at lag {lag} needs at least {} symbols, got {}",
            lag + 2,
            symbols.len()
        )));
    }
    let n = symbols.len() - lag;
    let x = &symbols[..n];
    let y = &symbols[lag..];
    let mean = |s: &[u32]| s.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a as f64 - mx, b as f64 - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "symbol sequence is constant over the compared range".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Provenance;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn tag(channel: u8, time_ps: u64) -> TimeTag {
        TimeTag {
            channel,
            time_ps,
            provenance: Provenance::Pair,
        }
    }

    fn paper_config() -> ProtocolConfig {
        ProtocolConfig {
            q: 0.9,
            delta_ps: 250,
            n_d: 2048,
            v0: 0.985,
            epsilon1: 1e-10,
            duration: 60.0,
        }
    }

    #[test]
    fn config_validation() {
        assert!(paper_config().validate().is_ok());
        for bad in [
            ProtocolConfig { q: 1.0, ..paper_config() },
            ProtocolConfig { delta_ps: 0, ..paper_config() },
            ProtocolConfig { n_d: 1000, ..paper_config() },
            ProtocolConfig { v0: 0.5, ..paper_config() },
            ProtocolConfig { epsilon1: 0.0, ..paper_config() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        let src = SourceModel {
            sigma_coh: 2.2e-6,
            sigma_cor: 2e-12,
            pair_rate: 1.0,
            fluorescence_ratio: 0.0,
            squeezing_beta: 0.0,
        };
        assert!(paper_config().validate_against(&src).is_ok());
        let too_long = ProtocolConfig { n_d: 16384, ..paper_config() };
        assert!(too_long.validate_against(&src).is_err());
    }

    #[test]
    fn near_certain_generation() {
        let tags: Vec<TimeTag> = (0..10_000).map(|i| tag(0, i)).collect();
        let (g, t) = split_rounds(&tags, 1.0 - 1e-9, 5).unwrap();
        assert_eq!(g.len(), 10_000);
        assert!(t.is_empty());
    }

    #[test]
    fn ninety_ten_split() {
        let tags: Vec<TimeTag> = (0..1_000_000).map(|i| tag(0, i)).collect();
        let (g, t) = split_rounds(&tags, 0.9, 6).unwrap();
        assert_eq!(g.len() + t.len(), tags.len());
        let sigma = (1e6f64 * 0.9 * 0.1).sqrt();
        assert!((g.len() as f64 - 9e5).abs() < 5.0 * sigma);
    }

    #[test]
    fn split_replays_exactly() {
        let tags: Vec<TimeTag> = (0..10).map(|i| tag(0, i * 100)).collect();
        let (g1, t1) = split_rounds(&tags, 0.5, 42).unwrap();
        let (g2, t2) = split_rounds(&tags, 0.5, 42).unwrap();
        assert_eq!((g1.clone(), t1.clone()), (g2, t2));
        // Replay oracle: the same stream draws decide each tag in order.
        let mut rng = stream_rng(42, "basis", 0);
        let expect: Vec<bool> = (0..10).map(|_| rng.gen::<f64>() < 0.5).collect();
        let got: Vec<bool> = tags.iter().map(|t| g1.contains(t)).collect();
        assert_eq!(got, expect);
        assert!(split_rounds(&tags, 0.0, 1).is_err());
    }

    #[test]
    fn frame_boundaries() {
        let cfg = paper_config();
        let s = frame_symbols(&[tag(0, 0)], &cfg).unwrap();
        assert_eq!(s.symbols, vec![0]);
        let s = frame_symbols(&[tag(0, 511_999)], &cfg).unwrap();
        assert_eq!(s.symbols, vec![2047]);
        let s = frame_symbols(&[tag(0, 512_000)], &cfg).unwrap();
        assert_eq!(s.symbols, vec![0]);
        assert_eq!(s.frames_total, 2);
        assert_eq!(s.frames_empty, 1);
    }

    #[test]
    fn multi_tag_frames_are_discarded() {
        let cfg = paper_config();
        let tags = [tag(0, 100), tag(0, 300), tag(0, 600_000), tag(1, 600_250)];
        let s = frame_symbols(&tags, &cfg).unwrap();
        // Frame 0 on channel 0 has two tags; frame 1 has one tag per channel.
        assert_eq!(s.frames_multi, 1);
        assert_eq!(s.symbols, vec![(600_000 - 512_000) / 250, (600_250 - 512_000) / 250]);
        assert_eq!(s.n_t, 2);
        assert!((s.p_alpha_est - 1.0 / 3.0).abs() < 1e-12);
        assert!(frame_symbols(&tags, &ProtocolConfig { delta_ps: 0, ..cfg }).is_err());
        assert!(frame_symbols(&[tag(0, 5), tag(0, 1)], &cfg).is_err());
    }

    #[test]
    fn abort_rule() {
        assert_eq!(check_abort(0.988, 0.985), Verdict::Succeed);
        assert_eq!(check_abort(0.985, 0.985), Verdict::Abort);
        assert_eq!(check_abort(0.40, 0.985), Verdict::Abort);
    }

    #[test]
    fn autocorrelation_cases() {
        let alt: Vec<u32> = (0..1000).map(|i| i % 2).collect();
        assert!((raw_autocorrelation(&alt, 1).unwrap() + 1.0).abs() < 1e-12);
        assert!(raw_autocorrelation(&[3; 50], 1).is_err());
        assert!(raw_autocorrelation(&[1, 2], 1).is_err());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let iid: Vec<u32> = (0..1_000_000).map(|_| rng.gen_range(0..2048)).collect();
        assert!(raw_autocorrelation(&iid, 1).unwrap().abs() < 0.005);
    }

    proptest! {
        #[test]
        fn framing_accounts_for_every_frame(
            mut times in proptest::collection::vec((0u8..3, 0u64..5_000_000), 0..400),
            delta in 1u64..400,
            log_nd in 1u32..12,
        ) {
            times.sort_by_key(|&(_, t)| t);
            let tags: Vec<TimeTag> = times.iter().map(|&(c, t)| tag(c, t)).collect();
            let cfg = ProtocolConfig { delta_ps: delta, n_d: 1 << log_nd, ..paper_config() };
            let s = frame_symbols(&tags, &cfg).unwrap();
            prop_assert_eq!(s.symbols.len() as u64 + s.frames_empty + s.frames_multi, s.frames_total);
            prop_assert_eq!(s.n_t, s.symbols.len() as u64);
            prop_assert!(s.symbols.iter().all(|&x| x < cfg.n_d));
        }

        #[test]
        fn split_is_a_partition(n in 0usize..2000, q in 0.01f64..0.99, seed: u64) {
            let tags: Vec<TimeTag> = (0..n as u64).map(|i| tag(0, i)).collect();
            let (g, t) = split_rounds(&tags, q, seed).unwrap();
            prop_assert_eq!(g.len() + t.len(), n);
        }

        #[test]
        fn abort_is_monotone(v in 0.0f64..1.0, v0 in 0.5f64..1.0, lower in 0.0f64..0.5) {
            if check_abort(v, v0) == Verdict::Succeed {
                prop_assert_eq!(check_abort(v, v0 - lower), Verdict::Succeed);
            }
        }
    }
}
