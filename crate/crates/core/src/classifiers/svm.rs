//! Soft-margin SVM trained by SMO with second-order working-set selection,
//! plus Platt scaling for probabilities.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Dual variables and offset: `f(x) = sum_i alpha_i y_i K(x_i, x) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub iterations: usize,
}

const TAU: f64 = 1e-12;

/// Solve the C-SVM dual for a precomputed `n x n` kernel matrix and labels
/// in `{-1, +1}`, stopping when the maximal KKT violating pair gap is below
/// `eps`.
pub fn smo(k: &[f64], y: &[f64], c: f64, eps: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let is_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let is_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    while iterations < max_iter {
        // i: maximal violation among I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if is_up(alpha[t], y[t]) && -y[t] * g[t] > gmax {
                gmax = -y[t] * g[t];
                i = t;
            }
        }
        // j: best second-order gain among I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !is_low(alpha[t], y[t]) {
                continue;
            }
            gmax2 = gmax2.max(y[t] * g[t]);
            if i == usize::MAX {
                continue;
            }
            let grad_diff = gmax + y[t] * g[t];
            if grad_diff > 0.0 {
                let quad = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                let obj = -grad_diff * grad_diff / if quad > 0.0 { quad } else { TAU };
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < eps {
            break;
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            g[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // offset from free vectors, else the middle of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    SmoSolution {
        alpha,
        b: -rho,
        iterations,
    }
}

/// Largest KKT violation of a solution, measured on the decision values
/// `f_i` it produces: `y f >= 1` where `alpha = 0`, `y f = 1` where
/// `0 < alpha < C`, `y f <= 1` where `alpha = C`.
pub fn kkt_residual(f: &[f64], y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let bound = 1e-12 * c;
    f.iter()
        .zip(y)
        .zip(alpha)
        .map(|((fi, yi), a)| {
            let m = yi * fi;
            if *a <= bound {
                (1.0 - m).max(0.0)
            } else if *a >= c - bound {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// `P(y = +1 | f) = 1 / (1 + exp(a f + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn prob(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        if z >= 0.0 {
            (-z).exp() / (1.0 + (-z).exp())
        } else {
            1.0 / (1.0 + z.exp())
        }
    }

    /// Regularized-target Newton fit with backtracking line search.
    pub fn fit(f: &[f64], y: &[f64]) -> Platt {
        let prior1 = y.iter().filter(|v| **v > 0.0).count() as f64;
        let prior0 = y.len() as f64 - prior1;
        let hi = (prior1 + 1.0) / (prior1 + 2.0);
        let lo = 1.0 / (prior0 + 2.0);
        let t: Vec<f64> = y.iter().map(|v| if *v > 0.0 { hi } else { lo }).collect();
        let (min_step, sigma, eps) = (1e-10, 1e-12, 1e-5);
        let mut a = 0.0;
        let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
        let objective = |a: f64, b: f64| -> f64 {
            f.iter()
                .zip(&t)
                .map(|(fi, ti)| {
                    let z = fi * a + b;
                    if z >= 0.0 {
                        ti * z + (1.0 + (-z).exp()).ln()
                    } else {
                        (ti - 1.0) * z + (1.0 + z.exp()).ln()
                    }
                })
                .sum()
        };
        let mut fval = objective(a, b);
        for _ in 0..100 {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
            for (fi, ti) in f.iter().zip(&t) {
                let z = fi * a + b;
                let (p, q) = if z >= 0.0 {
                    let e = (-z).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = z.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += fi * fi * d2;
                h22 += d2;
                h21 += fi * d2;
                let d1 = ti - p;
                g1 += fi * d1;
                g2 += d1;
            }
            if g1.abs() < eps && g2.abs() < eps {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            while step >= min_step {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    break;
                }
                step /= 2.0;
            }
            if step < min_step {
                break;
            }
        }
        Platt { a, b }
    }
}

/// Fitted kernel SVM. Linear models keep the collapsed weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    /// Support vectors (rows) and their `alpha_i y_i`.
    pub support: Matrix,
    pub coef: Vec<f64>,
    pub b: f64,
    pub weights: Option<Vec<f64>>,
    pub platt: Platt,
}

impl SvmModel {
    /// Fit on rows of `x` with labels in `{0, 1}` (1 is the positive class).
    pub fn fit(x: &Matrix, labels: &[u8], kernel: Kernel, c: f64) -> SvmModel {
        let n = x.rows();
        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(x.row(i), x.row(j));
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let sol = smo(&k, &y, c, 1e-3, 100_000 + 100 * n);
        let sv: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
        let coef: Vec<f64> = sv.iter().map(|&i| sol.alpha[i] * y[i]).collect();
        let support = x.select_rows(&sv);
        let weights = matches!(kernel, Kernel::Linear).then(|| {
            let mut w = vec![0.0; x.cols()];
            for (r, a) in coef.iter().enumerate() {
                for (wj, xj) in w.iter_mut().zip(support.row(r)) {
                    *wj += a * xj;
                }
            }
            w
        });
        let mut model = SvmModel {
            kernel,
            c,
            support,
            coef,
            b: sol.b,
            weights,
            platt: Platt { a: -1.0, b: 0.0 },
        };
        let f: Vec<f64> = (0..n).map(|i| model.decision(x.row(i))).collect();
        model.platt = Platt::fit(&f, &y);
        model
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        match &self.weights {
            Some(w) => w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + self.b,
            None => {
                (0..self.support.rows())
                    .map(|r| self.coef[r] * self.kernel.eval(self.support.row(r), row))
                    .sum::<f64>()
                    + self.b
            }
        }
    }
}

/// Exact solution of a one-feature linear SVM (`f(x) = w x + b`).
///
/// With both classes carrying dual mass `s` (in units of `C`), the
/// achievable values of `g = w / C` form an interval whose ends come from
/// filling each class greedily in opposite orders: `g_lo` fills positives
/// by ascending `x` and negatives by descending `x`, `g_hi` the reverse.
/// The best `g` for a given `s` is 0 clamped into `[g_lo, g_hi]`, and the
/// dual `2 C s - C^2 g^2 / 2` is maximized over each unit segment of `s`,
/// where both ends are linear.
///
/// `pos` and `neg` must be sorted ascending.
pub fn linear_svm_1d(pos: &[f64], neg: &[f64], c: f64) -> (f64, f64) {
    let (n_p, n_n) = (pos.len(), neg.len());
    if n_p == 0 || n_n == 0 {
        let b = if n_p == 0 { -1.0 } else { 1.0 };
        return (0.0, b);
    }
    let m = n_p.min(n_n);
    let clamp0 = |lo: f64, hi: f64| if lo > 0.0 { lo } else if hi < 0.0 { hi } else { 0.0 };
    let dual = |s: f64, g: f64| 2.0 * c * s - 0.5 * c * c * g * g;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0); // (dual, g, s)
    let (mut lo0, mut hi0) = (0.0, 0.0);
    for k in 0..m {
        let lo1 = pos[k] - neg[n_n - 1 - k];
        let hi1 = pos[n_p - 1 - k] - neg[k];
        let mut cands = vec![0.0, 1.0];
        for (g0, slope) in [(lo0, lo1), (hi0, hi1)] {
            if slope != 0.0 {
                cands.push(-g0 / slope);
                cands.push((2.0 / c - g0 * slope) / (slope * slope));
                cands.push((-2.0 / c - g0 * slope) / (slope * slope));
            }
        }
        for u in cands {
            if !(0.0..=1.0).contains(&u) {
                continue;
            }
            let g = clamp0(lo0 + lo1 * u, hi0 + hi1 * u);
            let d = dual(k as f64 + u, g);
            if d > best.0 + 1e-15 * d.abs().max(1.0) {
                best = (d, g, k as f64 + u);
            }
        }
        lo0 += lo1;
        hi0 += hi1;
    }
    let (_, g, s) = best;
    let w = c * g;
    if w == 0.0 {
        let b = match n_p.cmp(&n_n) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => -1.0,
            std::cmp::Ordering::Equal => 0.0,
        };
        return (0.0, b);
    }
    // offset: midpoint of the interval allowed by the KKT conditions under
    // the greedy fill of the winning orientation
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let up = w > 0.0;
    let filled = |rank: usize| -> f64 { (s - rank as f64).clamp(0.0, 1.0) };
    for k in 0..n_p {
        let x = if up { pos[k] } else { pos[n_p - 1 - k] };
        let a = filled(k);
        let edge = 1.0 - w * x;
        if a < 1.0 {
            lo = lo.max(edge);
        }
        if a > 0.0 {
            hi = hi.min(edge);
        }
    }
    for k in 0..n_n {
        let x = if up { neg[n_n - 1 - k] } else { neg[k] };
        let a = filled(k);
        let edge = -1.0 - w * x;
        if a < 1.0 {
            hi = hi.min(edge);
        }
        if a > 0.0 {
            lo = lo.max(edge);
        }
    }
    let b = if lo.is_finite() && hi.is_finite() {
        (lo + hi) / 2.0
    } else if lo.is_finite() {
        lo
    } else {
        hi
    };
    (w, b)
}
