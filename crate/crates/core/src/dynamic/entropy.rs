use crate::error::{Error, Result};

/// Bin probabilities over `n_bins` equal-width bins spanning `[min, max]`;
/// the maximum falls in the last bin. `None` when the series is empty or
/// constant.
fn histogram(series: &[f64], n_bins: usize) -> Option<Vec<f64>> {
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if series.is_empty() || hi <= lo {
        return None;
    }
    let mut counts = vec![0usize; n_bins];
    let w = (hi - lo) / n_bins as f64;
    for &v in series {
        let b = (((v - lo) / w) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let n = series.len() as f64;
    Some(counts.into_iter().map(|c| c as f64 / n).collect())
}

fn check_bins(n_bins: usize) -> Result<()> {
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {n_bins}")));
    }
    Ok(())
}

/// Natural-log Shannon entropy of the histogram; 0 for a constant series.
pub fn shannon_entropy(series: &[f64], n_bins: usize) -> Result<f64> {
    check_bins(n_bins)?;
    if series.is_empty() {
        return Err(Error::EmptyVector);
    }
    Ok(histogram(series, n_bins).map_or(0.0, |p| {
        -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>()
    }))
}

/// Rényi entropy of order `alpha` (positive, not 1); 0 for a constant series.
pub fn renyi_entropy(series: &[f64], alpha: f64, n_bins: usize) -> Result<f64> {
    check_bins(n_bins)?;
    if !(alpha > 0.0) || alpha == 1.0 {
        return Err(Error::InvalidParameter(format!("Rényi order must be positive and not 1, got {alpha}")));
    }
    if series.is_empty() {
        return Err(Error::EmptyVector);
    }
    Ok(histogram(series, n_bins).map_or(0.0, |p| {
        let s: f64 = p.iter().filter(|&&q| q > 0.0).map(|q| q.powf(alpha)).sum();
        // clamp tiny negative rounding when all mass sits in one bin
        (s.ln() / (1.0 - alpha)).max(0.0)
    }))
}

/// Cap applied to signal-to-noise ratios, in dB.
pub const SNR_CAP_DB: f64 = 120.0;
pub const SNR_MIN_SAMPLES: usize = 8;

/// Centered moving average; windows shrink at the ends.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = series.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in series {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

/// `10 log10(P_signal / P_noise)` where the signal is the moving average of
/// `window` samples and the noise is the residual, clamped to
/// `±SNR_CAP_DB`. Powers are mean squares.
pub fn snr(series: &[f64], window: usize) -> Result<f64> {
    if series.len() < SNR_MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            feature: "snr",
            needed: SNR_MIN_SAMPLES,
            got: series.len(),
        });
    }
    if window == 0 {
        return Err(Error::InvalidParameter("SNR window must be positive".into()));
    }
    let smooth = moving_average(series, window);
    let n = series.len() as f64;
    let ps = smooth.iter().map(|v| v * v).sum::<f64>() / n;
    let pn = series.iter().zip(&smooth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let db = if pn == 0.0 {
        SNR_CAP_DB
    } else if ps == 0.0 {
        -SNR_CAP_DB
    } else {
        10.0 * (ps / pn).log10()
    };
    Ok(db.clamp(-SNR_CAP_DB, SNR_CAP_DB))
}
