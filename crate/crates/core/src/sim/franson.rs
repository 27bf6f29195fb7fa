//! Franson interferometer statistics.
//!
//! Each photon of a pair independently takes the short or long arm of its
//! unbalanced interferometer. Short-long and long-short combinations land in
//! the side peaks at `-dT` and `+dT`. Short-short and long-long combinations
//! are indistinguishable and land in the central peak, where the fringe is
//! imposed at the outcome level: a central coincidence survives with
//! probability `(1 + V cos(phase)) / 2`, while side-peak coincidences
//! survive with probability 1/2. The peak weights are therefore 1:2:1 on
//! average, and only the central peak depends on the phase.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    apply_detector, count_coincidences, duration_to_ps, poisson_times, DetectorModel, Event,
    Provenance, SourceModel, TimeTag,
};
use crate::error::{require_probability, Error, Result};
use crate::rng::{derive_seed, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FransonModel {
    /// Long-short path mismatch, ps.
    pub delta_t_ps: f64,
    /// Relative phase between the two interferometers, radians.
    pub phase: f64,
    /// Underlying fringe visibility.
    pub v_true: f64,
}

impl FransonModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t_ps.is_finite() && self.delta_t_ps > 0.0) {
            return Err(Error::invalid(format!("delta_t_ps must be > 0, got {}", self.delta_t_ps)));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("phase must be finite"));
        }
        require_probability("v_true", self.v_true)
    }

    /// Central-peak rate relative to its phase average.
    pub fn central_factor(&self) -> f64 {
        1.0 + self.v_true * self.phase.cos()
    }

    fn gate_half_width_ps(&self) -> u64 {
        (self.delta_t_ps / 4.0).round() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub phase: f64,
    pub coincidences: u64,
    pub accidentals: u64,
}

/// Histogram of idler-minus-signal arrival differences.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceHistogram {
    /// Lower edge of bin 0, ps.
    pub min_ps: i64,
    pub bin_ps: u64,
    pub counts: Vec<u64>,
}

impl CoincidenceHistogram {
    pub fn bin_center(&self, i: usize) -> f64 {
        self.min_ps as f64 + (i as f64 + 0.5) * self.bin_ps as f64
    }

    /// Sum of bins whose centres fall in `[lo, hi]`.
    pub fn sum_between(&self, lo: f64, hi: f64) -> u64 {
        (0..self.counts.len())
            .filter(|&i| (lo..=hi).contains(&self.bin_center(i)))
            .map(|i| self.counts[i])
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct FransonOutcome {
    pub histogram: CoincidenceHistogram,
    /// Coincidences with `|dt| <= gate_half_width_ps`.
    pub central: u64,
    /// Coincidences in an equal gate centred on `2 dT`, away from all peaks.
    pub accidentals: u64,
    pub gate_half_width_ps: u64,
}

fn histogram(a: &[TimeTag], b: &[TimeTag], range_ps: i64, bin_ps: u64) -> CoincidenceHistogram {
    let nbins = (2 * range_ps as u64).div_ceil(bin_ps) as usize;
    let mut counts = vec![0u64; nbins];
    let mut lo = 0usize;
    for ta in a {
        let t = ta.time_ps as i64;
        while lo < b.len() && (b[lo].time_ps as i64) < t - range_ps {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && (b[j].time_ps as i64) < t + range_ps {
            let d = b[j].time_ps as i64 - t + range_ps;
            counts[(d as u64 / bin_ps) as usize] += 1;
            j += 1;
        }
    }
    CoincidenceHistogram {
        min_ps: -range_ps,
        bin_ps,
        counts,
    }
}

/// Simulates one Franson measurement at a fixed phase.
///
/// `detectors.0` watches the signal interferometer, `detectors.1` the idler
/// one. The source's `pair_rate` is the pair rate reaching the test
/// interferometers.
pub fn simulate_franson(
    source: &SourceModel,
    franson: &FransonModel,
    detectors: (&DetectorModel, &DetectorModel),
    duration_s: f64,
    seed: u64,
) -> Result<FransonOutcome> {
    source.validate()?;
    franson.validate()?;
    if franson.delta_t_ps <= 10.0 * source.sigma_cor_ps() {
        return Err(Error::ModelValidity(format!(
            "path mismatch {} ps must exceed 10 x correlation time ({} ps)",
            franson.delta_t_ps,
            source.sigma_cor_ps()
        )));
    }
    let duration_ps = duration_to_ps(duration_s)?;
    let delta = franson.delta_t_ps.round() as u64;
    let central_survival = 0.5 * franson.central_factor();

    let mut rng = stream_rng(seed, "franson-pairs", 0);
    let offset = Normal::new(0.0, source.sigma_cor_ps()).expect("finite sigma_cor");
    let emissions = poisson_times(&mut rng, source.pair_rate, 0..duration_ps);
    let mut sig = Vec::with_capacity(emissions.len() / 2);
    let mut idl = Vec::with_capacity(emissions.len() / 2);
    for t in emissions {
        let arms: u8 = rng.gen_range(0..4);
        let (sig_long, idl_long) = (arms & 1 == 1, arms & 2 == 2);
        let survive = if sig_long == idl_long {
            central_survival
        } else {
            0.5
        };
        let u: f64 = rng.gen();
        let d = offset.sample(&mut rng);
        if u >= survive {
            continue;
        }
        let ts = t + if sig_long { delta } else { 0 };
        let ti = (t as f64 + d).round().max(0.0) as u64 + if idl_long { delta } else { 0 };
        sig.push(Event {
            time_ps: ts,
            provenance: Provenance::Pair,
        });
        idl.push(Event {
            time_ps: ti,
            provenance: Provenance::Pair,
        });
    }
    // Unpaired photons exit the monitored port half the time.
    let mut frng = stream_rng(seed, "franson-fluorescence", 0);
    let fl_rate = 0.5 * source.pair_rate * source.fluorescence_ratio;
    for t in poisson_times(&mut frng, fl_rate, 0..duration_ps) {
        let long = frng.gen::<bool>();
        sig.push(Event {
            time_ps: t + if long { delta } else { 0 },
            provenance: Provenance::Fluorescence,
        });
    }
    sig.sort_by_key(|e| e.time_ps);
    idl.sort_by_key(|e| e.time_ps);

    let span = 0..duration_ps + delta;
    let a = apply_detector(detectors.0, &sig, 0, span.clone(), derive_seed(seed, "franson-a"))?;
    let b = apply_detector(detectors.1, &idl, 1, span, derive_seed(seed, "franson-b"))?;

    let gate = franson.gate_half_width_ps();
    let range = 3 * delta as i64;
    let bin = ((franson.delta_t_ps / 64.0).round() as u64).max(1);
    Ok(FransonOutcome {
        histogram: histogram(&a, &b, range, bin),
        central: count_coincidences(&a, &b, 0, gate),
        accidentals: count_coincidences(&a, &b, 2 * delta as i64, gate),
        gate_half_width_ps: gate,
    })
}

/// Steps the interferometer phase through `phases`, one simulated
/// measurement of `duration_per_point` seconds each.
pub fn scan_fringe(
    source: &SourceModel,
    franson: &FransonModel,
    detectors: (&DetectorModel, &DetectorModel),
    phases: &[f64],
    duration_per_point: f64,
    seed: u64,
) -> Result<Vec<FringePoint>> {
    let run = |i: usize, phase: f64| -> Result<FringePoint> {
        let model = FransonModel { phase, ..*franson };
        let out = simulate_franson(
            source,
            &model,
            detectors,
            duration_per_point,
            derive_seed(seed, &format!("fringe-{i}")),
        )?;
        Ok(FringePoint {
            phase,
            coincidences: out.central,
            accidentals: out.accidentals,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        phases.par_iter().enumerate().map(|(i, &p)| run(i, p)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        phases.iter().enumerate().map(|(i, &p)| run(i, p)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEstimate {
    pub visibility: f64,
    pub stderr: f64,
    /// Mean count level `A` of `A (1 + V cos(phase + phi0))`.
    pub amplitude: f64,
    pub phase_offset: f64,
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<([f64; 3], [[f64; 3]; 3])> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().fold(0.0f64, |a, &v| a.max(v.abs()));
    if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(3) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    let mut x = [0.0; 3];
    for i in 0..3 {
        x[i] = (0..3).map(|j| inv[i][j] * rhs[j]).sum();
    }
    Some((x, inv))
}

/// Weighted least-squares fit of `A (1 + V cos(phase + phi0))` to raw
/// coincidence counts.
///
/// The model is linear in `(A, A V cos phi0, -A V sin phi0)`. Weights are
/// Poisson (`1 / max(count, 1)`), and the standard error comes from the
/// resulting covariance through the delta method. Noiseless sinusoids are
/// reproduced exactly, giving `V = (max - min) / (max + min)`.
pub fn estimate_visibility(points: &[FringePoint]) -> Result<VisibilityEstimate> {
    if points.len() < 4 {
        return Err(Error::invalid(format!(
            "visibility fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.phase.is_finite()) {
        return Err(Error::invalid("fringe phases must be finite"));
    }
    let mut wrapped: Vec<f64> = points.iter().map(|p| p.phase.rem_euclid(2.0 * PI)).collect();
    wrapped.sort_by(f64::total_cmp);
    let max_gap = wrapped
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(std::iter::once(wrapped[0] + 2.0 * PI - wrapped[wrapped.len() - 1]))
        .fold(0.0f64, f64::max);
    if max_gap >= PI {
        return Err(Error::invalid(
            "fringe phases must cover a full period (no gap of pi or more)",
        ));
    }
    let first = points[0].coincidences;
    if points.iter().all(|p| p.coincidences == first) {
        return Err(Error::DegenerateFit(
            "all counts are equal; there is no fringe to fit".into(),
        ));
    }

    let mut normal = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for p in points {
        let row = [1.0, p.phase.cos(), p.phase.sin()];
        let y = p.coincidences as f64;
        let w = 1.0 / y.max(1.0);
        for i in 0..3 {
            rhs[i] += w * row[i] * y;
            for j in 0..3 {
                normal[i][j] += w * row[i] * row[j];
            }
        }
    }
    let ([a, b, c], cov) = solve3(normal, rhs)
        .ok_or_else(|| Error::DegenerateFit("singular normal equations".into()))?;
    if a <= 0.0 {
        return Err(Error::DegenerateFit(format!("non-positive mean level {a}")));
    }
    let r = b.hypot(c);
    let visibility = (r / a).clamp(0.0, 1.0);
    let grad = if r > 0.0 {
        [-r / (a * a), b / (a * r), c / (a * r)]
    } else {
        [0.0, 0.0, 0.0]
    };
    let var: f64 = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| grad[i] * cov[i][j] * grad[j])
        .sum();
    Ok(VisibilityEstimate {
        visibility,
        stderr: var.max(0.0).sqrt(),
        amplitude: a,
        phase_offset: (-c).atan2(b),
    })
}

/// `n` phases evenly spaced over one period.
pub fn even_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}
