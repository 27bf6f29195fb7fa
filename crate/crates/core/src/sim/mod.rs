//! Statistical simulator for a cw-pumped time-energy entangled source.
//!
//! Pair emission is a homogeneous Poisson process. Each idler trails its
//! signal by a Gaussian offset with standard deviation `sigma_cor`. Unpaired
//! fluorescence photons add a second Poisson process on the signal side.
//! Detectors thin, jitter and dead-time filter the photon streams and inject
//! dark counts. Nonlocal interference is not simulated photon-by-photon; see
//! [`franson`] for how fringe statistics are produced.
//!
//! Long runs are cut into fixed windows of [`WINDOW_PS`], each drawing from its
//! own derived random stream, so output is identical for any thread count.

pub mod franson;

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, require_probability, Error, Result};
use crate::rng::stream_rng;

pub use franson::{
    estimate_visibility, scan_fringe, simulate_franson, CoincidenceHistogram, FransonModel,
    FransonOutcome, FringePoint, VisibilityEstimate,
};

pub const PS_PER_S: f64 = 1e12;

/// Simulation window length: 10 ms.
pub const WINDOW_PS: u64 = 10_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    /// Pump coherence time, seconds.
    pub sigma_coh: f64,
    /// Biphoton correlation time, seconds.
    pub sigma_cor: f64,
    /// Pair emission rate, pairs per second.
    pub pair_rate: f64,
    /// Unpaired-to-paired photon ratio on the signal arm.
    pub fluorescence_ratio: f64,
    /// Squeezing parameter of the Gaussian biphoton model.
    #[serde(default)]
    pub squeezing_beta: f64,
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        require_positive("sigma_coh", self.sigma_coh)?;
        require_positive("sigma_cor", self.sigma_cor)?;
        require_positive("pair_rate", self.pair_rate)?;
        if self.sigma_cor >= self.sigma_coh {
            return Err(Error::invalid(format!(
                "sigma_cor ({}) must be smaller than sigma_coh ({})",
                self.sigma_cor, self.sigma_coh
            )));
        }
        if !(self.fluorescence_ratio.is_finite() && self.fluorescence_ratio >= 0.0) {
            return Err(Error::invalid(format!(
                "fluorescence_ratio must be finite and >= 0, got {}",
                self.fluorescence_ratio
            )));
        }
        if !self.squeezing_beta.is_finite() {
            return Err(Error::invalid("squeezing_beta must be finite"));
        }
        Ok(())
    }

    pub fn sigma_cor_ps(&self) -> f64 {
        self.sigma_cor * PS_PER_S
    }

    pub fn sigma_coh_ps(&self) -> f64 {
        self.sigma_coh * PS_PER_S
    }

    /// `w0 = 1 / sqrt(2 sigma_coh sigma_cor)`, rad/s.
    pub fn w0(&self) -> f64 {
        crate::entropy::pump_bandwidth_w0(self.sigma_coh, self.sigma_cor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Gaussian timing jitter, standard deviation in ps.
    pub jitter_sigma_ps: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Non-paralyzable dead time in ps.
    pub dead_time_ps: u64,
    /// Count rate above which the detector is considered saturated.
    pub max_rate: f64,
}

impl DetectorModel {
    /// Lossless, noiseless, instantaneous detector.
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            jitter_sigma_ps: 0.0,
            dark_rate: 0.0,
            dead_time_ps: 0,
            max_rate: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_probability("efficiency", self.efficiency)?;
        if !(self.jitter_sigma_ps.is_finite() && self.jitter_sigma_ps >= 0.0) {
            return Err(Error::invalid(format!(
                "jitter_sigma_ps must be finite and >= 0, got {}",
                self.jitter_sigma_ps
            )));
        }
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0) {
            return Err(Error::invalid(format!(
                "dark_rate must be finite and >= 0, got {}",
                self.dark_rate
            )));
        }
        if self.max_rate.is_nan() || self.max_rate <= 0.0 {
            return Err(Error::invalid("max_rate must be > 0"));
        }
        Ok(())
    }

    pub fn is_saturated(&self, observed_rate: f64) -> bool {
        observed_rate > self.max_rate
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Pair,
    Fluorescence,
    Dark,
    /// Read back from a tag file.
    Unknown,
}

/// One detection as recorded by the time-to-digital converter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeTag {
    pub channel: u8,
    pub time_ps: u64,
    /// Simulator-only; not persisted in tag files.
    pub provenance: Provenance,
}

/// A photon arriving at a detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub time_ps: u64,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub signal_ps: u64,
    pub idler_ps: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairStream {
    /// Sorted by signal time.
    pub pairs: Vec<Pair>,
    /// Unpaired signal-arm photons, sorted.
    pub fluorescence: Vec<u64>,
    pub duration_ps: u64,
}

impl PairStream {
    /// Paired and unpaired signal photons merged in time order.
    pub fn signal_events(&self) -> Vec<Event> {
        merge_signal(&self.pairs, &self.fluorescence)
    }

    /// Idler photons in time order.
    pub fn idler_events(&self) -> Vec<Event> {
        let mut out: Vec<Event> = self
            .pairs
            .iter()
            .map(|p| Event {
                time_ps: p.idler_ps,
                provenance: Provenance::Pair,
            })
            .collect();
        out.sort_by_key(|e| e.time_ps);
        out
    }
}

fn merge_signal(pairs: &[Pair], fluorescence: &[u64]) -> Vec<Event> {
    let mut out = Vec::with_capacity(pairs.len() + fluorescence.len());
    let (mut i, mut j) = (0, 0);
    while i < pairs.len() || j < fluorescence.len() {
        let take_pair = j >= fluorescence.len()
            || (i < pairs.len() && pairs[i].signal_ps <= fluorescence[j]);
        if take_pair {
            out.push(Event {
                time_ps: pairs[i].signal_ps,
                provenance: Provenance::Pair,
            });
            i += 1;
        } else {
            out.push(Event {
                time_ps: fluorescence[j],
                provenance: Provenance::Fluorescence,
            });
            j += 1;
        }
    }
    out
}

pub(crate) fn duration_to_ps(duration_s: f64) -> Result<u64> {
    require_positive("duration", duration_s)?;
    let ps = duration_s * PS_PER_S;
    if ps >= u64::MAX as f64 / 2.0 {
        return Err(Error::invalid(format!("duration {duration_s} s is too long")));
    }
    Ok(ps.round().max(1.0) as u64)
}

/// Arrival times of a homogeneous Poisson process on `[start, end)`.
pub(crate) fn poisson_times<R: Rng>(rng: &mut R, rate_per_s: f64, span: Range<u64>) -> Vec<u64> {
    if rate_per_s <= 0.0 || span.is_empty() {
        return Vec::new();
    }
    let rate_per_ps = rate_per_s / PS_PER_S;
    let gap = Exp::new(rate_per_ps).expect("positive rate");
    let expected = rate_per_ps * (span.end - span.start) as f64;
    let mut out = Vec::with_capacity((expected * 1.05 + 16.0) as usize);
    let end = span.end as f64;
    let mut t = span.start as f64;
    loop {
        t += gap.sample(rng);
        if t >= end {
            break;
        }
        out.push(t as u64);
    }
    out
}

pub(crate) fn windows(duration_ps: u64) -> Vec<Range<u64>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < duration_ps {
        let end = (start + WINDOW_PS).min(duration_ps);
        out.push(start..end);
        start = end;
    }
    out
}

/// Runs `f` over every window, in parallel when the `parallel` feature is on.
pub(crate) fn map_windows<T, F>(spans: &[Range<u64>], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, Range<u64>) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        spans
            .par_iter()
            .enumerate()
            .map(|(i, s)| f(i as u64, s.clone()))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        spans
            .iter()
            .enumerate()
            .map(|(i, s)| f(i as u64, s.clone()))
            .collect()
    }
}

fn pairs_in_window(source: &SourceModel, seed: u64, index: u64, span: Range<u64>) -> PairStream {
    let mut rng = stream_rng(seed, "pairs", index);
    let signals = poisson_times(&mut rng, source.pair_rate, span.clone());
    let offset = Normal::new(0.0, source.sigma_cor_ps()).expect("finite sigma_cor");
    let pairs = signals
        .into_iter()
        .map(|s| {
            let idler = (s as f64 + offset.sample(&mut rng)).round().max(0.0) as u64;
            Pair {
                signal_ps: s,
                idler_ps: idler,
            }
        })
        .collect();
    let mut rng = stream_rng(seed, "fluorescence", index);
    let fluorescence = poisson_times(&mut rng, source.pair_rate * source.fluorescence_ratio, span);
    PairStream {
        pairs,
        fluorescence,
        duration_ps: 0,
    }
}

/// Simulates pair emission over `duration_s` seconds.
pub fn simulate_pairs(source: &SourceModel, duration_s: f64, seed: u64) -> Result<PairStream> {
    source.validate()?;
    let duration_ps = duration_to_ps(duration_s)?;
    let spans = windows(duration_ps);
    let parts = map_windows(&spans, |i, span| pairs_in_window(source, seed, i, span));
    let mut out = PairStream {
        pairs: Vec::with_capacity(parts.iter().map(|p| p.pairs.len()).sum()),
        fluorescence: Vec::with_capacity(parts.iter().map(|p| p.fluorescence.len()).sum()),
        duration_ps,
    };
    for p in parts {
        out.pairs.extend(p.pairs);
        out.fluorescence.extend(p.fluorescence);
    }
    Ok(out)
}

/// Sends each event to one of `outputs` ports with equal probability.
pub fn route_events(events: &[Event], outputs: usize, seed: u64) -> Vec<Vec<Event>> {
    assert!(outputs > 0, "at least one output port");
    let mut rng = stream_rng(seed, "route", 0);
    let mut out = vec![Vec::with_capacity(events.len() / outputs + 1); outputs];
    for e in events {
        let k = if outputs == 1 { 0 } else { rng.gen_range(0..outputs) };
        out[k].push(*e);
    }
    out
}

fn check_sorted_events(events: &[Event]) -> Result<()> {
    match events.windows(2).position(|w| w[1].time_ps < w[0].time_ps) {
        Some(i) => Err(Error::UnsortedInput { index: i + 1 }),
        None => Ok(()),
    }
}

/// Drops tags closer than `dead_time_ps` to the last accepted tag (and exact
/// repeats), leaving a strictly increasing stream.
pub fn enforce_dead_time(tags: &mut Vec<TimeTag>, dead_time_ps: u64) {
    let mut last: Option<u64> = None;
    tags.retain(|t| match last {
        Some(prev) if t.time_ps == prev || t.time_ps - prev < dead_time_ps => false,
        _ => {
            last = Some(t.time_ps);
            true
        }
    });
}

/// Passes photon arrivals through one detector.
///
/// Dark counts are drawn over `span`. The output is time-sorted and obeys
/// the dead-time rule.
pub fn apply_detector(
    model: &DetectorModel,
    events: &[Event],
    channel: u8,
    span: Range<u64>,
    seed: u64,
) -> Result<Vec<TimeTag>> {
    model.validate()?;
    check_sorted_events(events)?;
    let mut rng = stream_rng(seed, "detector", channel as u64);
    let jitter = (model.jitter_sigma_ps > 0.0)
        .then(|| Normal::new(0.0, model.jitter_sigma_ps).expect("finite jitter"));

    let mut tags = Vec::with_capacity((events.len() as f64 * model.efficiency * 1.01) as usize + 16);
    for e in events {
        if model.efficiency < 1.0 && rng.gen::<f64>() >= model.efficiency {
            continue;
        }
        let time_ps = match &jitter {
            Some(n) => (e.time_ps as f64 + n.sample(&mut rng)).round().max(0.0) as u64,
            None => e.time_ps,
        };
        tags.push(TimeTag {
            channel,
            time_ps,
            provenance: e.provenance,
        });
    }
    let mut dark_rng = stream_rng(seed, "dark", channel as u64);
    for t in poisson_times(&mut dark_rng, model.dark_rate, span) {
        tags.push(TimeTag {
            channel,
            time_ps: t,
            provenance: Provenance::Dark,
        });
    }
    tags.sort_by_key(|t| t.time_ps);
    enforce_dead_time(&mut tags, model.dead_time_ps);
    Ok(tags)
}

/// Merges per-channel streams into one time-sorted stream.
///
/// Equal timestamps are ordered by the position of their stream in `streams`.
pub fn interleave_channels(streams: &[Vec<TimeTag>]) -> Result<Vec<TimeTag>> {
    for s in streams {
        if let Some(i) = s.windows(2).position(|w| w[1].time_ps < w[0].time_ps) {
            return Err(Error::UnsortedInput { index: i + 1 });
        }
    }
    let total = streams.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = streams
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(k, s)| Reverse((s[0].time_ps, k, 0)))
        .collect();
    while let Some(Reverse((_, k, i))) = heap.pop() {
        out.push(streams[k][i]);
        if let Some(next) = streams[k].get(i + 1) {
            heap.push(Reverse((next.time_ps, k, i + 1)));
        }
    }
    Ok(out)
}

/// Tag streams produced by [`simulate_arms`].
#[derive(Clone, Debug, Default)]
pub struct ArmStreams {
    /// Interleaved signal-arm detections, channels `0..n_signal_detectors`.
    pub signal: Vec<TimeTag>,
    /// Idler-arm detections on channel `n_signal_detectors`.
    pub idler: Vec<TimeTag>,
    pub duration_ps: u64,
}

impl ArmStreams {
    pub fn channel_rate(&self, channel: u8) -> f64 {
        let n = self.signal.iter().filter(|t| t.channel == channel).count()
            + self.idler.iter().filter(|t| t.channel == channel).count();
        n as f64 / (self.duration_ps as f64 / PS_PER_S)
    }
}

/// Full detection chain: pairs and fluorescence, a passive splitter over the
/// signal detectors, one idler detector, then interleaving.
///
/// Dead time is enforced per physical detector before interleaving.
pub fn simulate_arms(
    source: &SourceModel,
    signal_detectors: &[DetectorModel],
    idler_detector: Option<&DetectorModel>,
    duration_s: f64,
    seed: u64,
) -> Result<ArmStreams> {
    source.validate()?;
    if signal_detectors.is_empty() || signal_detectors.len() > 250 {
        return Err(Error::invalid("need between 1 and 250 signal detectors"));
    }
    for d in signal_detectors.iter().chain(idler_detector) {
        d.validate()?;
    }
    let duration_ps = duration_to_ps(duration_s)?;
    let spans = windows(duration_ps);
    let k = signal_detectors.len();
    let idler_channel = k as u8;

    let parts = map_windows(&spans, |w, span| -> Result<(Vec<Vec<TimeTag>>, Vec<TimeTag>)> {
        let stream = pairs_in_window(source, seed, w, span.clone());
        let window_seed = crate::rng::derive_seed(seed, &format!("window-{w}"));
        let routed = route_events(&stream.signal_events(), k, window_seed);
        let mut per_channel = Vec::with_capacity(k);
        for (c, (det, events)) in signal_detectors.iter().zip(&routed).enumerate() {
            per_channel.push(apply_detector(det, events, c as u8, span.clone(), window_seed)?);
        }
        let idler = match idler_detector {
            Some(det) => {
                apply_detector(det, &stream.idler_events(), idler_channel, span.clone(), window_seed)?
            }
            None => Vec::new(),
        };
        Ok((per_channel, idler))
    });

    let mut channels: Vec<Vec<TimeTag>> = vec![Vec::new(); k];
    let mut idler = Vec::new();
    for part in parts {
        let (per_channel, idl) = part?;
        for (dst, src) in channels.iter_mut().zip(per_channel) {
            dst.extend(src);
        }
        idler.extend(idl);
    }
    // Jitter can carry a tag across a window edge, and dead time must hold
    // across edges too.
    for (c, tags) in channels.iter_mut().enumerate() {
        tags.sort_by_key(|t| t.time_ps);
        enforce_dead_time(tags, signal_detectors[c].dead_time_ps);
    }
    if let Some(det) = idler_detector {
        idler.sort_by_key(|t| t.time_ps);
        enforce_dead_time(&mut idler, det.dead_time_ps);
    }
    Ok(ArmStreams {
        signal: interleave_channels(&channels)?,
        idler,
        duration_ps,
    })
}

/// Counts pairs `(a, b)` with `|t_b - t_a - offset_ps| <= half_window_ps`.
pub fn count_coincidences(a: &[TimeTag], b: &[TimeTag], offset_ps: i64, half_window_ps: u64) -> u64 {
    let half = half_window_ps as i64;
    let mut count = 0u64;
    let mut lo = 0usize;
    for ta in a {
        let centre = ta.time_ps as i64 + offset_ps;
        while lo < b.len() && (b[lo].time_ps as i64) < centre - half {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && (b[j].time_ps as i64) <= centre + half {
            count += 1;
            j += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(rate: f64, ratio: f64) -> SourceModel {
        SourceModel {
            sigma_coh: 2.2e-6,
            sigma_cor: 2e-12,
            pair_rate: rate,
            fluorescence_ratio: ratio,
            squeezing_beta: 0.0,
        }
    }

    fn ev(times: &[u64]) -> Vec<Event> {
        times
            .iter()
            .map(|&t| Event {
                time_ps: t,
                provenance: Provenance::Pair,
            })
            .collect()
    }

    fn tag(channel: u8, time_ps: u64) -> TimeTag {
        TimeTag {
            channel,
            time_ps,
            provenance: Provenance::Pair,
        }
    }

    #[test]
    fn rejects_degenerate_source() {
        assert!(simulate_pairs(&source(0.0, 0.0), 1.0, 1).is_err());
        assert!(simulate_pairs(&source(f64::NAN, 0.0), 1.0, 1).is_err());
        assert!(simulate_pairs(&source(1e3, -0.1), 1.0, 1).is_err());
        assert!(simulate_pairs(&source(1e3, 0.0), 0.0, 1).is_err());
        let mut s = source(1e3, 0.0);
        s.sigma_cor = s.sigma_coh;
        assert!(simulate_pairs(&s, 1.0, 1).is_err());
    }

    #[test]
    fn pairs_are_deterministic_and_sorted() {
        let a = simulate_pairs(&source(2e5, 0.05), 0.05, 11).unwrap();
        let b = simulate_pairs(&source(2e5, 0.05), 0.05, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.pairs.windows(2).all(|w| w[0].signal_ps <= w[1].signal_ps));
        let signal = a.signal_events();
        assert_eq!(signal.len(), a.pairs.len() + a.fluorescence.len());
        assert!(signal.windows(2).all(|w| w[0].time_ps <= w[1].time_ps));
    }

    #[test]
    fn idler_offset_has_sigma_cor_spread() {
        let mut s = source(1e6, 0.0);
        s.sigma_cor = 50e-12;
        let stream = simulate_pairs(&s, 0.1, 5).unwrap();
        let d: Vec<f64> = stream
            .pairs
            .iter()
            .map(|p| p.idler_ps as f64 - p.signal_ps as f64)
            .collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1.0, "mean offset {mean}");
        assert!((sd - 50.0).abs() < 0.5, "sd {sd}");
    }

    #[test]
    fn ideal_detector_is_identity() {
        let events = ev(&[0, 5, 17, 1_000, 1_001]);
        let tags = apply_detector(&DetectorModel::ideal(), &events, 3, 0..2_000, 9).unwrap();
        let times: Vec<u64> = tags.iter().map(|t| t.time_ps).collect();
        assert_eq!(times, vec![0, 5, 17, 1_000, 1_001]);
        assert!(tags.iter().all(|t| t.channel == 3));
    }

    #[test]
    fn dead_time_drops_close_follower() {
        let det = DetectorModel {
            dead_time_ps: 100_000,
            ..DetectorModel::ideal()
        };
        let tags = apply_detector(&det, &ev(&[50_000, 60_000]), 0, 0..1_000_000, 1).unwrap();
        assert_eq!(tags.len(), 1);
        assert_eq!(tags[0].time_ps, 50_000);
    }

    #[test]
    fn dead_time_measured_from_accepted_tag() {
        let mut tags: Vec<TimeTag> = [0, 60, 120, 200].iter().map(|&t| tag(0, t)).collect();
        enforce_dead_time(&mut tags, 100);
        let times: Vec<u64> = tags.iter().map(|t| t.time_ps).collect();
        assert_eq!(times, vec![0, 120]);
    }

    #[test]
    fn unsorted_events_rejected() {
        let err = apply_detector(&DetectorModel::ideal(), &ev(&[5, 3]), 0, 0..10, 1).unwrap_err();
        assert!(matches!(err, Error::UnsortedInput { index: 1 }));
    }

    #[test]
    fn interleave_small_cases() {
        assert!(interleave_channels(&[vec![], vec![]]).unwrap().is_empty());
        let out = interleave_channels(&[vec![tag(0, 5)], vec![tag(1, 3)]]).unwrap();
        assert_eq!(out, vec![tag(1, 3), tag(0, 5)]);
        let out = interleave_channels(&[vec![tag(0, 4)], vec![tag(1, 4)]]).unwrap();
        assert_eq!(out, vec![tag(0, 4), tag(1, 4)]);
        assert!(interleave_channels(&[vec![tag(0, 4), tag(0, 1)]]).is_err());
    }

    #[test]
    fn coincidence_counting_window() {
        let a = vec![tag(0, 1_000), tag(0, 5_000)];
        let b = vec![tag(1, 1_010), tag(1, 1_400), tag(1, 4_990), tag(1, 9_000)];
        assert_eq!(count_coincidences(&a, &b, 0, 20), 2);
        assert_eq!(count_coincidences(&a, &b, 400, 20), 1);
        assert_eq!(count_coincidences(&a, &b, 0, 500), 3);
    }

    #[test]
    fn arms_respect_per_channel_dead_time() {
        let det = DetectorModel {
            efficiency: 0.8,
            jitter_sigma_ps: 100.0,
            dark_rate: 1e3,
            dead_time_ps: 30_000,
            max_rate: 2e6,
        };
        let arms = simulate_arms(&source(2e6, 0.02), &[det, det], Some(&det), 0.03, 4).unwrap();
        for c in 0..2u8 {
            let times: Vec<u64> = arms
                .signal
                .iter()
                .filter(|t| t.channel == c)
                .map(|t| t.time_ps)
                .collect();
            assert!(times.windows(2).all(|w| w[1] - w[0] >= 30_000));
        }
        assert!(arms.signal.windows(2).all(|w| w[0].time_ps <= w[1].time_ps));
        assert!(arms.idler.iter().all(|t| t.channel == 2));
        let again = simulate_arms(&source(2e6, 0.02), &[det, det], Some(&det), 0.03, 4).unwrap();
        assert_eq!(arms.signal, again.signal);
        assert_eq!(arms.idler, again.idler);
    }
}
