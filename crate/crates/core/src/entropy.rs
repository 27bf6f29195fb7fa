//! Min-entropy certification from Franson visibility.
//!
//! The chain, all in bits:
//!
//! ```text
//! H_min(T|E) >= log2(N_d) - H_max(W|B)
//! H_max(W|B) <= log2 gamma(d_w + lambda)
//! d_w         = (sigma_coh sigma_cor) / (delta dT) * sqrt(16 (1 - V0) / pi)
//! lambda      = N_d sqrt( ln(1 / (eps1/4 - 2 f(p_alpha, n_T))) / (q (1 - q) n_T) )
//! ```
//!
//! followed by a multiplicative discount for unpaired (accidental) photons.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::protocol::{check_abort, Verdict};

const PS: f64 = 1e-12;

/// Everything the certificate depends on besides the observed visibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyInputs {
    /// Pump coherence time, seconds.
    pub sigma_coh: f64,
    /// Biphoton correlation time, seconds.
    pub sigma_cor: f64,
    /// Time-bin width, ps.
    pub delta_ps: f64,
    /// Franson path mismatch, ps.
    pub delta_t_ps: f64,
    pub v0: f64,
    pub n_d: u32,
    pub q: f64,
    /// Framed generation detections.
    pub n_t: u64,
    pub p_alpha: f64,
    pub epsilon1: f64,
}

impl EntropyInputs {
    pub fn validate(&self) -> Result<()> {
        require_positive("sigma_coh", self.sigma_coh)?;
        require_positive("sigma_cor", self.sigma_cor)?;
        require_positive("delta_ps", self.delta_ps)?;
        require_positive("delta_t_ps", self.delta_t_ps)?;
        if !(self.v0 > 0.5 && self.v0 <= 1.0) {
            return Err(Error::invalid(format!("v0 must lie in (0.5, 1], got {}", self.v0)));
        }
        if self.n_d < 2 {
            return Err(Error::invalid(format!("n_d must be >= 2, got {}", self.n_d)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::invalid(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if self.n_t == 0 {
            return Err(Error::invalid("n_t must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.p_alpha) {
            return Err(Error::invalid(format!("p_alpha must lie in [0, 1), got {}", self.p_alpha)));
        }
        if !(self.epsilon1 > 0.0 && self.epsilon1 < 1.0) {
            return Err(Error::invalid(format!(
                "epsilon1 must lie in (0, 1), got {}",
                self.epsilon1
            )));
        }
        Ok(())
    }

    /// Maximal overlap of the two mutually unbiased measurements, `1 / N_d`.
    pub fn overlap(&self) -> f64 {
        1.0 / self.n_d as f64
    }
}

/// `log2 gamma(x)` for `x >= 0`, evaluated as
/// `(asinh x + x ln((1 + sqrt(1 + x^2)) / x)) / ln 2`.
///
/// This form avoids the cancellation in `sqrt(1 + x^2) - 1` and goes to 0
/// as `x -> 0`.
pub fn log2_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::invalid(format!("gamma is defined for x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let root = x.hypot(1.0);
    // (1 + root) / x = 1 + t with t = (1 + root - x) / x and root - x = 1 / (root + x).
    let t = (1.0 + 1.0 / (root + x)) / x;
    Ok((x.asinh() + x * t.ln_1p()) / LN_2)
}

/// `gamma(x) = (x + sqrt(1 + x^2)) (x / (sqrt(1 + x^2) - 1))^x`, with `gamma(0) = 1`.
pub fn gamma(x: f64) -> Result<f64> {
    log2_gamma(x).map(f64::exp2)
}

/// `f(p_alpha, n_T) = sqrt(2 (1 - (1 - p_alpha)^n_T))`.
pub fn fluctuation_f(p_alpha: f64, n_t: u64) -> f64 {
    if p_alpha <= 0.0 {
        return 0.0;
    }
    let one_minus_pow = -(n_t as f64 * (-p_alpha).ln_1p()).exp_m1();
    (2.0 * one_minus_pow).sqrt()
}

/// Finite-size penalty.
pub fn lambda_bound(inputs: &EntropyInputs) -> Result<f64> {
    inputs.validate()?;
    let quarter_eps = inputs.epsilon1 / 4.0;
    let two_f = 2.0 * fluctuation_f(inputs.p_alpha, inputs.n_t);
    if quarter_eps <= two_f {
        return Err(Error::FiniteSizeBoundInvalid { quarter_eps, two_f });
    }
    let log_term = -(quarter_eps - two_f).ln();
    Ok(inputs.n_d as f64 * (log_term / (inputs.q * (1.0 - inputs.q) * inputs.n_t as f64)).sqrt())
}

/// Upper bound on the frequency-difference variance, `2 (1 - V0) / dT^2`
/// (rad^2/s^2 for `delta_t_s` in seconds).
pub fn dw_variance_bound(v0: f64, delta_t_s: f64) -> f64 {
    2.0 * (1.0 - v0) / (delta_t_s * delta_t_s)
}

/// Upper bound on the time-difference variance implied by the frequency
/// bound through `var_t var_w = e^{-4 beta}` and `var_w = e^{-2 beta} w0^2`.
pub fn time_variance_bound(v0: f64, delta_t_s: f64, w0: f64) -> f64 {
    dw_variance_bound(v0, delta_t_s) / w0.powi(4)
}

/// L1 distance bound for correlations in the frequency basis.
pub fn l1_distance_bound(inputs: &EntropyInputs) -> f64 {
    let delta = inputs.delta_ps * PS;
    let delta_t = inputs.delta_t_ps * PS;
    inputs.sigma_coh * inputs.sigma_cor / (delta * delta_t)
        * (16.0 * (1.0 - inputs.v0) / PI).sqrt()
}

/// `H_max(W|B) <= log2 gamma(d_w + lambda)`.
pub fn hmax_bound(d_w: f64, lambda: f64) -> f64 {
    log2_gamma(d_w + lambda).expect("d_w and lambda are non-negative")
}

/// `max(0, log2 N_d - H_max)`.
pub fn hmin_per_sample(n_d: u32, h_max: f64) -> f64 {
    ((n_d as f64).log2() - h_max).max(0.0)
}

/// Unpaired-to-paired ratio `N_F / N_SPDC = C_S eta_I / C_SI - 1` from
/// singles and coincidence rates and the two arm efficiencies.
pub fn accidental_ratio(c_si: f64, c_s: f64, eta_s: f64, eta_i: f64) -> Result<f64> {
    require_positive("c_si", c_si)?;
    require_positive("c_s", c_s)?;
    for (name, eta) in [("eta_s", eta_s), ("eta_i", eta_i)] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(format!("{name} must lie in (0, 1], got {eta}")));
        }
    }
    let n_spdc = c_si / (eta_s * eta_i);
    let n_s = c_s / eta_s;
    let ratio = n_s / n_spdc - 1.0;
    if ratio < 0.0 {
        return Err(Error::InconsistentMeasurement(format!(
            "more coincidences than singles allow: N_S = {n_s:.6e} < N_SPDC = {n_spdc:.6e}"
        )));
    }
    Ok(ratio)
}

/// Discounts the accidental fraction: `h_min (1 - ratio)`, floored at 0.
pub fn corrected_bits(h_min: f64, ratio: f64) -> f64 {
    (h_min * (1.0 - ratio)).max(0.0)
}

pub fn throughput(bits_per_sample: f64, detection_rate: f64) -> f64 {
    bits_per_sample * detection_rate
}

/// `w0 = 1 / sqrt(2 sigma_coh sigma_cor)`.
pub fn pump_bandwidth_w0(sigma_coh: f64, sigma_cor: f64) -> f64 {
    1.0 / (2.0 * sigma_coh * sigma_cor).sqrt()
}

/// `(var_t, var_w) = (e^{-2 beta} / w0^2, e^{-2 beta} w0^2)` for the Gaussian
/// biphoton model.
pub fn gaussian_consistency(beta: f64, w0: f64) -> Result<(f64, f64)> {
    require_positive("w0", w0)?;
    let s = (-2.0 * beta).exp();
    Ok((s / (w0 * w0), s * w0 * w0))
}

/// Min-entropy per symbol for the given inputs.
pub fn hmin_for(inputs: &EntropyInputs) -> Result<f64> {
    let lambda = lambda_bound(inputs)?;
    Ok(hmin_per_sample(inputs.n_d, hmax_bound(l1_distance_bound(inputs), lambda)))
}

/// Min-entropy per symbol in the infinite-data limit (`lambda = 0`).
pub fn hmin_asymptotic(inputs: &EntropyInputs) -> f64 {
    hmin_per_sample(inputs.n_d, hmax_bound(l1_distance_bound(inputs), 0.0))
}

/// Picks the candidate dimension maximising the min-entropy per symbol.
///
/// Candidates whose frame `N_d delta` is not shorter than the pump coherence
/// time are skipped. Ties go to the smaller `N_d`. `inputs.n_d` is ignored.
pub fn optimize_dimension(inputs: &EntropyInputs, candidates: &[u32]) -> Result<(u32, f64)> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(u32, f64)> = None;
    for n_d in sorted {
        if n_d as f64 * inputs.delta_ps * PS >= inputs.sigma_coh {
            continue;
        }
        let h = hmin_for(&EntropyInputs { n_d, ..*inputs })?;
        if best.is_none_or(|(_, b)| h > b) {
            best = Some((n_d, h));
        }
    }
    best.ok_or_else(|| {
        Error::invalid("no candidate dimension fits inside the pump coherence time")
    })
}

/// Result of certifying one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCertificate {
    pub v_obs: f64,
    pub v0: f64,
    pub d_w_l1: f64,
    pub lambda: f64,
    pub h_max: f64,
    pub h_min: f64,
    /// `2^-h_min`.
    pub p_guess: f64,
    pub accidentals_ratio: f64,
    pub bits_per_sample_corrected: f64,
    pub n_t: u64,
    pub verdict: Verdict,
}

/// Applies the abort rule and, on success, the full bound chain.
///
/// The bounds are reported for aborted runs too, but no bits are granted.
pub fn certify(inputs: &EntropyInputs, v_obs: f64, accidentals_ratio: f64) -> Result<EntropyCertificate> {
    inputs.validate()?;
    if !(0.0..=1.0).contains(&v_obs) {
        return Err(Error::invalid(format!("observed visibility must lie in [0, 1], got {v_obs}")));
    }
    if !(accidentals_ratio.is_finite() && accidentals_ratio >= 0.0) {
        return Err(Error::invalid("accidentals ratio must be finite and >= 0"));
    }
    let verdict = check_abort(v_obs, inputs.v0);
    let d_w = l1_distance_bound(inputs);
    let lambda = lambda_bound(inputs)?;
    let h_max = hmax_bound(d_w, lambda);
    let h_min = hmin_per_sample(inputs.n_d, h_max);
    let bits = match verdict {
        Verdict::Succeed => corrected_bits(h_min, accidentals_ratio),
        Verdict::Abort => 0.0,
    };
    Ok(EntropyCertificate {
        v_obs,
        v0: inputs.v0,
        d_w_l1: d_w,
        lambda,
        h_max,
        h_min,
        p_guess: (-h_min).exp2(),
        accidentals_ratio,
        bits_per_sample_corrected: bits,
        n_t: inputs.n_t,
        verdict,
    })
}
