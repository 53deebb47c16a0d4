//! Empirical mode decomposition by envelope sifting.

use crate::error::{Error, Result};

pub const EMD_MIN_SAMPLES: usize = 16;
/// Guard against sifting loops that never meet the stopping criterion.
const MAX_SIFTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmdConfig {
    pub max_imfs: usize,
    /// Sifting stops once `sum (h_prev - h)^2 / sum h_prev^2` drops below this.
    pub sd_threshold: f64,
}

impl Default for EmdConfig {
    fn default() -> Self {
        EmdConfig {
            max_imfs: 6,
            sd_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl Decomposition {
    /// Sum of all IMFs and the residual.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

/// Interior local maxima and minima. A plateau counts once, at its first sample.
fn extrema(x: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let (mut maxima, mut minima) = (Vec::new(), Vec::new());
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        if x[i] > x[i - 1] && x[i] > x[j + 1] {
            maxima.push(i);
        } else if x[i] < x[i - 1] && x[i] < x[j + 1] {
            minima.push(i);
        }
        i = j + 1;
    }
    (maxima, minima)
}

/// Natural cubic spline through `(xs, ys)` evaluated at `0..n`.
/// Two knots give the straight line through them.
fn spline(xs: &[f64], ys: &[f64], n: usize) -> Vec<f64> {
    let k = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    // second derivatives m, natural ends m[0] = m[k-1] = 0, tridiagonal solve
    let mut m = vec![0.0; k];
    if k > 2 {
        let size = k - 2;
        let mut diag = vec![0.0; size];
        let mut rhs = vec![0.0; size];
        for i in 0..size {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
        }
        for i in 1..size {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        m[size] = rhs[size - 1] / diag[size - 1];
        for i in (0..size - 1).rev() {
            m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
        }
    }
    let mut seg = 0;
    (0..n)
        .map(|t| {
            let t = t as f64;
            while seg + 2 < k && t > xs[seg + 1] {
                seg += 1;
            }
            let (x0, x1, hh) = (xs[seg], xs[seg + 1], h[seg]);
            let (a, b) = ((x1 - t) / hh, (t - x0) / hh);
            a * ys[seg]
                + b * ys[seg + 1]
                + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * hh * hh / 6.0
        })
        .collect()
}

/// Envelope through the given extrema with both series ends added as knots.
fn envelope(x: &[f64], idx: &[usize]) -> Vec<f64> {
    let n = x.len();
    let mut knots = Vec::with_capacity(idx.len() + 2);
    knots.push(0);
    knots.extend(idx.iter().copied().filter(|&i| i > 0 && i < n - 1));
    knots.push(n - 1);
    let xs: Vec<f64> = knots.iter().map(|&i| i as f64).collect();
    let ys: Vec<f64> = knots.iter().map(|&i| x[i]).collect();
    spline(&xs, &ys, n)
}

/// True when the series has too few extrema to carry another IMF.
fn is_monotone(x: &[f64]) -> bool {
    let (mx, mn) = extrema(x);
    mx.len() + mn.len() < 2
}

/// Decompose `series` into at most `max_imfs` intrinsic mode functions and a
/// residual. A series without oscillation yields no IMFs and is returned as
/// the residual.
pub fn emd(series: &[f64], cfg: &EmdConfig) -> Result<Decomposition> {
    if series.len() < EMD_MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            feature: "emd",
            needed: EMD_MIN_SAMPLES,
            got: series.len(),
        });
    }
    let mut residual = series.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < cfg.max_imfs && !is_monotone(&residual) {
        let mut h = residual.clone();
        for _ in 0..MAX_SIFTS {
            let (mx, mn) = extrema(&h);
            if mx.is_empty() || mn.is_empty() {
                break;
            }
            let upper = envelope(&h, &mx);
            let lower = envelope(&h, &mn);
            let next: Vec<f64> = h
                .iter()
                .zip(upper.iter().zip(&lower))
                .map(|(v, (u, l))| v - (u + l) / 2.0)
                .collect();
            let num: f64 = h.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum();
            let den: f64 = h.iter().map(|a| a * a).sum();
            h = next;
            if den == 0.0 || num / den < cfg.sd_threshold {
                break;
            }
        }
        for (r, v) in residual.iter_mut().zip(&h) {
            *r -= v;
        }
        imfs.push(h);
    }
    Ok(Decomposition { imfs, residual })
}
