use crate::error::{Error, Result};

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Theta-function form converges fast for small x.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut s = 0.0;
        for j in 1..=20 {
            let k = (2 * j - 1) as f64;
            s += (c * k * k).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * x * x).exp();
            s += if j % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// One-sample KS statistic `D` of `values` against Uniform[0, 1].
pub fn ks_statistic(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &p)| {
            let hi = (i + 1) as f64 / k - p;
            let lo = p - i as f64 / k;
            hi.max(lo)
        })
        .fold(0.0, f64::max)
}

/// Combines P-values into one by testing them for uniformity.
pub fn ks_combine(p_values: &[f64]) -> Result<f64> {
    if p_values.len() < 2 {
        return Err(Error::InsufficientData {
            test: "ks_combine",
            needed: 2,
            got: p_values.len(),
        });
    }
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("P-value {bad} outside [0, 1]")));
    }
    let d = ks_statistic(p_values);
    let rk = (p_values.len() as f64).sqrt();
    Ok(kolmogorov_sf((rk + 0.12 + 0.11 / rk) * d))
}
