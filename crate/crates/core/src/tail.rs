//! Power-tail estimation: Hill with plateau selection and log-log regression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{linear_fit, quantile_sorted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    Hill,
    LoglogRegression,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailFit {
    pub method: TailMethod,
    pub exponent: f64,
    /// Estimate of `lim y^α P(tail > y)`, normalised by `population`.
    pub constant: f64,
    pub exponent_ci: (f64, f64),
    pub constant_ci: (f64, f64),
    /// Number of order statistics used.
    pub k: usize,
    pub threshold: f64,
    /// Hill estimates drift strongly with k (no power tail).
    pub non_heavy: bool,
    pub inconclusive: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailOptions {
    pub method: TailMethod,
    /// Denominator for the tail constant; defaults to the sample size.
    pub population: Option<usize>,
    /// Hill k range as fractions: `k ∈ [n^k_min_pow, k_max_frac·n]`.
    pub k_min_pow: f64,
    pub k_max_frac: f64,
    /// Quantile window for the regression.
    pub window: (f64, f64),
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            method: TailMethod::Hill,
            population: None,
            k_min_pow: 0.5,
            k_max_frac: 0.1,
            window: (0.9, 0.9999),
            bootstrap: 200,
            seed: 0x7a11,
        }
    }
}

/// Hill exponent from the top `k` of descending-sorted values.
fn hill_at(desc: &[f64], k: usize) -> f64 {
    let lt = desc[k].ln();
    let s: f64 = desc[..k].iter().map(|x| x.ln() - lt).sum();
    k as f64 / s
}

/// Hill estimate from ascending-sorted `|X|` at `k = n/20`.
pub fn hill_symmetric(asc_abs: &[f64]) -> f64 {
    let n = asc_abs.len();
    let k = (n / 20).max(10).min(n.saturating_sub(2));
    let desc: Vec<f64> = asc_abs[n - k - 1..].iter().rev().copied().collect();
    if desc[k] <= 0.0 {
        return f64::NAN;
    }
    hill_at(&desc, k)
}

fn log_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut ks: Vec<usize> =
        (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as usize).collect();
    ks.dedup();
    ks
}

/// Plateau choice: the window of consecutive grid points whose Hill
/// estimates are flattest, scored by their spread in log scale (this
/// combines the slope and the scatter of the window).
fn hill_plateau(desc: &[f64], kmin: usize, kmax: usize) -> (usize, f64, bool) {
    let ks = log_grid(kmin, kmax, 40);
    let est: Vec<f64> = ks.iter().map(|&k| hill_at(desc, k)).collect();
    let w = (ks.len() / 4).max(3).min(ks.len());
    let mut best = (f64::INFINITY, 0usize);
    for start in 0..=ks.len() - w {
        let win = &est[start..start + w];
        let (lo, hi) = win.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
        let spread = (hi / lo).ln();
        if spread < best.0 {
            best = (spread, start);
        }
    }
    let mid = best.1 + w / 2;
    let (lo, hi) = est.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    // A power tail keeps the Hill plot flat; exponential-type tails drift
    // like ln(n/k) across the range.
    let non_heavy = hi / lo > 1.6;
    (ks[mid], est[mid], non_heavy)
}

fn percentile_ci(mut v: Vec<f64>) -> (f64, f64) {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (quantile_sorted(&v, 0.025), quantile_sorted(&v, 0.975))
}

pub fn tail_fit(values: &[f64], opts: &TailOptions) -> Result<TailFit> {
    let n = values.len();
    if n < 10_000 {
        return Err(Error::Inconclusive(format!("tail fit needs >= 10^4 values, got {n}")));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("tail fit needs positive values".into()));
    }
    let pop = opts.population.unwrap_or(n) as f64;
    let mut desc = values.to_vec();
    desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    match opts.method {
        TailMethod::Hill => {
            let kmin = ((n as f64).powf(opts.k_min_pow).ceil() as usize).max(10);
            let kmax = ((opts.k_max_frac * n as f64) as usize).min(n - 2);
            if kmax <= kmin + 5 {
                return Err(Error::Inconclusive("Hill k range is empty".into()));
            }
            let (k, alpha, non_heavy) = hill_plateau(&desc, kmin, kmax);
            let threshold = desc[k];
            let constant = (k as f64 / pop) * threshold.powf(alpha);
            // Bootstrap only the top 2k values: their count in a replicate
            // is Binomial(n, 2k/n), and they are drawn uniformly from the top.
            let top = (2 * k).min(n - 1);
            let p = top as f64 / n as f64;
            let mut ea = Vec::with_capacity(opts.bootstrap);
            let mut ec = Vec::with_capacity(opts.bootstrap);
            for _ in 0..opts.bootstrap {
                let cnt = binomial_normal(&mut rng, n, p).clamp(k + 1, n - 1);
                let mut rep: Vec<f64> = (0..cnt).map(|_| desc[rng.random_range(0..top)]).collect();
                rep.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if rep[k] <= 0.0 || rep[0] == rep[k] {
                    continue;
                }
                let a = hill_at(&rep, k);
                ea.push(a);
                ec.push(k as f64 / pop * rep[k].powf(a));
            }
            Ok(TailFit {
                method: TailMethod::Hill,
                exponent: alpha,
                constant,
                exponent_ci: percentile_ci(ea),
                constant_ci: percentile_ci(ec),
                k,
                threshold,
                non_heavy,
                inconclusive: !alpha.is_finite(),
            })
        }
        TailMethod::LoglogRegression => {
            let fit_of = |d: &[f64]| -> Option<(f64, f64, usize, f64)> {
                let m = d.len();
                let klo = ((1.0 - opts.window.1) * m as f64).ceil().max(1.0) as usize;
                let khi = ((1.0 - opts.window.0) * m as f64) as usize;
                if khi <= klo + 10 {
                    return None;
                }
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for k in log_grid(klo, khi, 60) {
                    xs.push(d[k - 1].ln());
                    ys.push((k as f64 / pop).ln());
                }
                let f = linear_fit(&xs, &ys)?;
                Some((-f.slope, f.intercept.exp(), khi, d[khi - 1]))
            };
            let (alpha, constant, k, threshold) =
                fit_of(&desc).ok_or_else(|| Error::Inconclusive("regression window too narrow".into()))?;
            let mut ea = Vec::new();
            let mut ec = Vec::new();
            let top = k.min(n);
            let p = top as f64 / n as f64;
            for _ in 0..opts.bootstrap {
                let cnt = binomial_normal(&mut rng, n, p).clamp(1, n);
                let mut rep: Vec<f64> = (0..cnt).map(|_| desc[rng.random_range(0..top)]).collect();
                rep.sort_by(|a, b| b.partial_cmp(a).unwrap());
                // pad with the remaining mass below the window
                rep.resize(n, 0.0);
                if let Some((a, c, _, _)) = fit_of(&rep) {
                    ea.push(a);
                    ec.push(c);
                }
            }
            Ok(TailFit {
                method: TailMethod::LoglogRegression,
                exponent: alpha,
                constant,
                exponent_ci: percentile_ci(ea),
                constant_ci: percentile_ci(ec),
                k,
                threshold,
                non_heavy: false,
                inconclusive: !alpha.is_finite() || alpha <= 0.0,
            })
        }
    }
}

/// Normal approximation to Binomial(n, p) for large `np`.
fn binomial_normal<R: Rng>(rng: &mut R, n: usize, p: f64) -> usize {
    let mean = n as f64 * p;
    let sd = (mean * (1.0 - p)).sqrt();
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    (mean + sd * z).round().max(0.0) as usize
}

/// `y^α · P̂(X > y)` on a grid of thresholds, normalised by `population`.
pub fn tail_curve(values: &[f64], alpha: f64, population: usize, points: usize) -> Vec<(f64, f64, usize)> {
    let mut desc = values.to_vec();
    desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = desc.len();
    if n < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for k in log_grid(1, n - 1, points) {
        let y = desc[k];
        // count strictly above y (ties matter for integer data)
        let cnt = desc.partition_point(|&v| v > y);
        if cnt == 0 {
            continue;
        }
        out.push((y, y.powf(alpha) * cnt as f64 / population as f64, cnt));
    }
    out.dedup_by(|a, b| a.0 == b.0);
    out
}
