//! Limit-law parameters and Monte-Carlo drivers: Birkhoff sums, return-time
//! tails, correlation decay and point-process counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::dynamics::{sample_mu_state, step, State};
use crate::error::{Error, Result};
use crate::geometry::TableSpec;
use crate::induced::{induced_step, mu_base, sample_mu_tilde_state, PhaseFunction, ReturnMoments};
use crate::numeric::{linear_fit, mean_and_se};
use crate::observable::Observable;
use crate::stable::{c_alpha, i_one, StableParams};
use crate::tail::{tail_curve, tail_fit, TailFit, TailOptions};

/// Generator for task `task` of a run seeded with `seed`; independent of
/// the worker count.
pub fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuspContribution {
    pub label: usize,
    pub i_f: f64,
    pub c_bar: f64,
    pub beta: f64,
    /// `σ_{f,i}^α = 2|I_{f,i}|^α / (β c̄_i^{α-1} |∂Q|)`.
    pub sigma_alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoreticalParams {
    pub alpha: f64,
    pub sigma_f: f64,
    pub xi_f: f64,
    /// Law of the limit of `S_n f / n^{1/α}` under `μ`.
    pub params: StableParams,
    pub per_cusp: Vec<CuspContribution>,
}

impl TheoreticalParams {
    /// Characteristic function of `Σ_i Z_{α, sign I_i, σ_i / C_α^{1/α}}`
    /// with independent summands.
    pub fn independent_sum_cf(&self, u: f64) -> Result<(f64, f64)> {
        let c = c_alpha(self.alpha)?;
        let mut re = 1.0;
        let mut im = 0.0;
        for k in &self.per_cusp {
            if k.i_f == 0.0 {
                continue;
            }
            let law = StableParams {
                alpha: self.alpha,
                xi: k.i_f.signum(),
                scale: (k.sigma_alpha / c).powf(1.0 / self.alpha),
            };
            let (a, b) = law.cf(u);
            (re, im) = (re * a - im * b, re * b + im * a);
        }
        Ok((re, im))
    }

    pub fn scaled(&self, lambda: f64) -> TheoreticalParams {
        let mut t = self.clone();
        t.sigma_f *= lambda.abs();
        t.params.scale *= lambda.abs();
        for k in &mut t.per_cusp {
            k.i_f *= lambda;
            k.sigma_alpha *= lambda.abs().powf(self.alpha);
        }
        if lambda < 0.0 {
            t.xi_f = -t.xi_f;
            t.params.xi = -t.params.xi;
        }
        t
    }
}

/// Limit parameters from the values of `f` at the maximally flat cusps.
pub fn theoretical_params(table: &TableSpec, f: &Observable) -> Result<TheoreticalParams> {
    let alpha = table.alpha();
    let mut per_cusp = Vec::new();
    for &label in &table.j_star {
        let c = table.cusp_by_label(label).ok_or_else(|| Error::Config(format!("unknown cusp {label}")))?;
        let i_f = f.i_f(table, label, alpha);
        let sigma_alpha = 2.0 * i_f.abs().powf(alpha) / (c.beta * c.c_bar().powf(alpha - 1.0) * table.perimeter);
        per_cusp.push(CuspContribution { label, i_f, c_bar: c.c_bar(), beta: c.beta, sigma_alpha });
    }
    let total: f64 = per_cusp.iter().map(|k| k.sigma_alpha).sum();
    if per_cusp.iter().all(|k| k.i_f.abs() < 1e-14) {
        return Err(Error::Hypothesis("I_{f,i} vanishes at every maximally flat cusp".into()));
    }
    let num: f64 = per_cusp.iter().map(|k| k.i_f.signum() * k.c_bar.powf(1.0 - alpha) * k.i_f.abs().powf(alpha)).sum();
    let den: f64 = per_cusp.iter().map(|k| k.c_bar.powf(1.0 - alpha) * k.i_f.abs().powf(alpha)).sum();
    let xi_f = num / den;
    let sigma_f = total.powf(1.0 / alpha);
    let scale = sigma_f / c_alpha(alpha)?.powf(1.0 / alpha);
    Ok(TheoreticalParams { alpha, sigma_f, xi_f, params: StableParams { alpha, xi: xi_f, scale }, per_cusp })
}

/// `lim y^{α_i} μ̃(M_i, R > y) = 2 I_1^{α_i} / (β_i c̄_i^{α_i-1} μ(M) |∂Q|)`.
pub fn return_tail_target(table: &TableSpec, label: usize) -> Result<f64> {
    let c = table.cusp_by_label(label).ok_or_else(|| Error::Config(format!("unknown cusp {label}")))?;
    let a = c.alpha();
    Ok(2.0 * i_one(a).powf(a) / (c.beta * c.c_bar().powf(a - 1.0) * mu_base(table) * table.perimeter))
}

/// `f(x), f(Tx), ..., f(T^{n-1}x)`.
pub fn orbit_values(table: &TableSpec, f: &dyn PhaseFunction, start: &State, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut st = *start;
    for k in 0..n {
        out.push(f.eval(table, &st));
        if k + 1 < n {
            st = step(table, &st)?.0;
        }
    }
    Ok(out)
}

/// Birkhoff sum of `n` terms from a `μ`-random start, resampling the start
/// after a singular event. Returns the sum and the number of discards.
pub fn birkhoff_sum(table: &TableSpec, f: &dyn PhaseFunction, n: usize, rng: &mut ChaCha8Rng) -> (f64, usize) {
    let mut discarded = 0;
    'outer: loop {
        let mut st = sample_mu_state(table, rng);
        let mut s = 0.0;
        for k in 0..n {
            s += f.eval(table, &st);
            if k + 1 < n {
                match step(table, &st) {
                    Ok((nx, _)) => st = nx,
                    Err(e) => {
                        log::debug!("discarding orbit: {e}");
                        discarded += 1;
                        continue 'outer;
                    }
                }
            }
        }
        return (s, discarded);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BirkhoffRun {
    /// `S_n f / n^{1/α}` per repetition, in repetition order.
    pub samples: Vec<f64>,
    pub discarded: usize,
}

pub fn birkhoff_samples(
    table: &TableSpec,
    f: &dyn PhaseFunction,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<BirkhoffRun> {
    if n < 1000 {
        return Err(Error::Domain(format!("birkhoff_samples needs n >= 1000, got {n}")));
    }
    let norm = (n as f64).powf(1.0 / table.alpha());
    let out: Vec<(f64, usize)> = (0..reps)
        .into_par_iter()
        .map(|j| {
            let mut rng = task_rng(seed, j as u64);
            let (s, d) = birkhoff_sum(table, f, n, &mut rng);
            (s / norm, d)
        })
        .collect();
    let discarded = out.iter().map(|x| x.1).sum();
    if discarded > 0 {
        log::info!("birkhoff_samples: {discarded} singular orbits discarded");
    }
    Ok(BirkhoffRun { samples: out.into_iter().map(|x| x.0).collect(), discarded })
}

/// Return times of a long stream of induced returns started from `μ̃`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReturnStream {
    pub moments: ReturnMoments,
    /// Moments of each independent chain, in task order.
    pub chunks: Vec<ReturnMoments>,
    /// Return times of the records in `M_i`, per label `i ≥ 1`.
    pub per_label: BTreeMap<usize, Vec<f64>>,
    pub label_counts: BTreeMap<usize, u64>,
    pub discarded: u64,
}

impl ReturnStream {
    pub fn total(&self) -> u64 {
        self.moments.count
    }

    fn merge(&mut self, o: ReturnStream) {
        self.moments.merge(&o.moments);
        self.chunks.push(o.moments);
        for (k, v) in o.per_label {
            self.per_label.entry(k).or_default().extend(v);
        }
        for (k, v) in o.label_counts {
            *self.label_counts.entry(k).or_default() += v;
        }
        self.discarded += o.discarded;
    }
}

/// Iterates the induced map along `chunks` orbits, each from a fresh
/// `μ̃` start, until `n_returns` returns are collected.
pub fn stream_returns(table: &TableSpec, n_returns: u64, chunks: usize, seed: u64) -> ReturnStream {
    let chunks = chunks.max(1);
    let parts: Vec<ReturnStream> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = task_rng(seed, c as u64);
            let quota = n_returns / chunks as u64 + u64::from((c as u64) < n_returns % chunks as u64);
            let mut out = ReturnStream::default();
            let mut st = sample_mu_tilde_state(table, &mut rng);
            let mut done = 0;
            while done < quota {
                match induced_step(table, &st, None) {
                    Ok(r) => {
                        out.moments.push(r.return_time);
                        *out.label_counts.entry(r.cusp_label).or_default() += 1;
                        if r.cusp_label != 0 {
                            out.per_label.entry(r.cusp_label).or_default().push(r.return_time as f64);
                        }
                        st = r.end;
                        done += 1;
                    }
                    Err(e) => {
                        log::debug!("discarding excursion: {e}");
                        out.discarded += 1;
                        st = sample_mu_tilde_state(table, &mut rng);
                    }
                }
            }
            out
        })
        .collect();
    let mut total = ReturnStream::default();
    for p in parts {
        total.merge(p);
    }
    total
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnTailReport {
    pub label: usize,
    pub alpha_i: f64,
    pub fit: TailFit,
    /// `(k/|records|) u^{α_i}` at the Hill threshold `u`, with the exponent
    /// held at its known value `α_i`.
    pub constant_at_alpha: f64,
    pub target_constant: f64,
    /// `(y, y^{α_i} μ̃(M_i, R > y), count)`.
    pub curve: Vec<(f64, f64, usize)>,
}

pub fn return_tail_options() -> TailOptions {
    TailOptions { bootstrap: 200, ..TailOptions::default() }
}

pub fn return_tail_check(
    table: &TableSpec,
    label: usize,
    stream: &ReturnStream,
    opts: &TailOptions,
) -> Result<ReturnTailReport> {
    let c = table.cusp_by_label(label).ok_or_else(|| Error::Config(format!("unknown cusp {label}")))?;
    let values = stream.per_label.get(&label).map(|v| v.as_slice()).unwrap_or(&[]);
    let opts = TailOptions { population: Some(stream.total() as usize), ..*opts };
    let fit = tail_fit(values, &opts)?;
    let above = values.iter().filter(|&&v| v > fit.threshold).count();
    let constant_at_alpha = above as f64 / stream.total() as f64 * fit.threshold.powf(c.alpha());
    Ok(ReturnTailReport {
        label,
        alpha_i: c.alpha(),
        fit,
        constant_at_alpha,
        target_constant: return_tail_target(table, label)?,
        curve: tail_curve(values, c.alpha(), stream.total() as usize, 60),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub lags: Vec<usize>,
    pub cov: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Lags whose covariance exceeds three standard errors.
    pub reliable: Vec<bool>,
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    /// Lag range actually used in the regression.
    pub fit_range: Option<(usize, usize)>,
}

/// `μ(f∘T^n · g)` for each lag, estimated along `orbits` independent orbits
/// of length `orbit_len`; the slope is fitted over reliable lags in `range`.
#[allow(clippy::too_many_arguments)]
pub fn correlation_decay(
    table: &TableSpec,
    f: &dyn PhaseFunction,
    g: &dyn PhaseFunction,
    lags: &[usize],
    orbits: usize,
    orbit_len: usize,
    range: (usize, usize),
    seed: u64,
) -> Result<CorrelationReport> {
    if lags.is_empty() || orbits < 2 {
        return Err(Error::Domain("correlation_decay needs lags and >= 2 orbits".into()));
    }
    let max_lag = *lags.iter().max().unwrap();
    let per_orbit: Vec<Vec<f64>> = (0..orbits)
        .into_par_iter()
        .map(|o| {
            let mut rng = task_rng(seed, o as u64);
            loop {
                let st = sample_mu_state(table, &mut rng);
                let mut fv = Vec::with_capacity(orbit_len + max_lag);
                let mut gv = Vec::with_capacity(orbit_len);
                let mut cur = st;
                let mut ok = true;
                for k in 0..orbit_len + max_lag {
                    fv.push(f.eval(table, &cur));
                    if k < orbit_len {
                        gv.push(g.eval(table, &cur));
                    }
                    match step(table, &cur) {
                        Ok((nx, _)) => cur = nx,
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                return lags
                    .iter()
                    .map(|&l| gv.iter().zip(&fv[l..]).map(|(a, b)| a * b).sum::<f64>() / orbit_len as f64)
                    .collect();
            }
        })
        .collect();
    let mut cov = Vec::new();
    let mut se = Vec::new();
    for j in 0..lags.len() {
        let xs: Vec<f64> = per_orbit.iter().map(|v| v[j]).collect();
        let (m, s) = mean_and_se(&xs);
        cov.push(m);
        se.push(s);
    }
    let reliable: Vec<bool> = cov.iter().zip(&se).map(|(c, s)| c.abs() > 3.0 * s).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut used = (usize::MAX, 0);
    for (j, &l) in lags.iter().enumerate() {
        if l >= range.0.max(1) && l <= range.1 && reliable[j] {
            xs.push((l as f64).ln());
            ys.push(cov[j].abs().ln());
            used = (used.0.min(l), used.1.max(l));
        }
    }
    if used.1 < range.1 {
        log::info!("correlation range truncated at lag {} by Monte-Carlo noise", used.1);
    }
    let fit = if xs.len() >= 3 { linear_fit(&xs, &ys) } else { None };
    Ok(CorrelationReport {
        lags: lags.to_vec(),
        cov,
        std_error: se,
        reliable,
        slope: fit.as_ref().map(|f| f.slope),
        slope_se: fit.as_ref().map(|f| f.slope_se),
        fit_range: fit.map(|_| used),
    })
}

/// A box `[t0, t1) × (y0, y1)` in the (time, size) plane; `y1` may be
/// infinite. The size interval must not contain 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpRegion {
    pub t: (f64, f64),
    pub y: (f64, f64),
}

impl PpRegion {
    fn check(&self) -> Result<()> {
        let (a, b) = self.y;
        if !(a < b) || (a <= 0.0 && b >= 0.0) || !(self.t.0 < self.t.1) {
            return Err(Error::Domain(format!("region {self:?} touches y = 0 or is empty")));
        }
        Ok(())
    }

    fn contains(&self, t: f64, y: f64) -> bool {
        t >= self.t.0 && t < self.t.1 && y > self.y.0 && y < self.y.1
    }
}

/// `∫_region ψ` for weights `A_i` attached to cusp labels.
pub fn pp_target(table: &TableSpec, weights: &BTreeMap<usize, f64>, region: &PpRegion) -> Result<f64> {
    region.check()?;
    let alpha = table.alpha();
    let i1 = i_one(alpha).powf(alpha);
    let mut total = 0.0;
    for &label in &table.j_star {
        let a = weights.get(&label).copied().unwrap_or(0.0);
        if a == 0.0 {
            continue;
        }
        let c = table.cusp_by_label(label).unwrap();
        let k =
            2.0 * i1 * a.abs().powf(alpha) / (c.beta * c.c_bar().powf(alpha - 1.0) * mu_base(table) * table.perimeter);
        // ∫ α|y|^{-α-1} over the part of the interval with yA > 0
        let (lo, hi) = region.y;
        let mass = if a > 0.0 && lo >= 0.0 {
            lo.powf(-alpha) - if hi.is_finite() { hi.powf(-alpha) } else { 0.0 }
        } else if a < 0.0 && hi <= 0.0 {
            (-hi).powf(-alpha) - if lo.is_finite() { (-lo).powf(-alpha) } else { 0.0 }
        } else {
            0.0
        };
        total += k * mass;
    }
    Ok(total * (region.t.1 - region.t.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpRegionReport {
    pub region: PpRegion,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub dispersion: f64,
    pub target: f64,
}

/// Counts of the points `(j/n, A_{label} R_j / n^{1/α})` of `n` induced
/// returns from a `μ̃` start, over `reps` repetitions.
pub fn point_process_counts(
    table: &TableSpec,
    weights: &BTreeMap<usize, f64>,
    n: usize,
    reps: usize,
    regions: &[PpRegion],
    seed: u64,
) -> Result<Vec<PpRegionReport>> {
    for r in regions {
        r.check()?;
    }
    let norm = (n as f64).powf(1.0 / table.alpha());
    let counts: Vec<Vec<u64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = task_rng(seed, rep as u64);
            'outer: loop {
                let mut st = sample_mu_tilde_state(table, &mut rng);
                let mut c = vec![0u64; regions.len()];
                for j in 1..=n {
                    let r = match induced_step(table, &st, None) {
                        Ok(r) => r,
                        Err(_) => continue 'outer,
                    };
                    let a = weights.get(&r.cusp_label).copied().unwrap_or(0.0);
                    if a != 0.0 {
                        let t = j as f64 / n as f64;
                        let y = a * r.return_time as f64 / norm;
                        for (k, reg) in regions.iter().enumerate() {
                            if reg.contains(t, y) {
                                c[k] += 1;
                            }
                        }
                    }
                    st = r.end;
                }
                return c;
            }
        })
        .collect();
    let mut out = Vec::new();
    for (k, reg) in regions.iter().enumerate() {
        let xs: Vec<f64> = counts.iter().map(|c| c[k] as f64).collect();
        let (mean, se) = mean_and_se(&xs);
        let variance = se * se * xs.len() as f64;
        out.push(PpRegionReport {
            region: *reg,
            mean,
            variance,
            std_error: se,
            dispersion: if mean > 0.0 { variance / mean } else { f64::NAN },
            target: pp_target(table, weights, reg)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_one_cusp_table, build_two_cusp_table, OneCuspParams, TwoCuspParams};
    use crate::observable::ObservableSpec;

    #[test]
    fn single_cusp_positive_is_totally_skewed() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let f = Observable::new(&t, ObservableSpec::single_cusp(1, 1.0, 0.3)).unwrap();
        let p = theoretical_params(&t, &f).unwrap();
        assert_eq!(p.xi_f, 1.0);
        assert!((p.alpha - 1.5).abs() < 1e-15);
    }

    #[test]
    fn antisymmetric_two_cusp_has_zero_skew() {
        let t = build_two_cusp_table(&TwoCuspParams::default()).unwrap();
        let f = Observable::new(&t, ObservableSpec::two_cusp(1.0, -1.0, 0.3)).unwrap();
        let p = theoretical_params(&t, &f).unwrap();
        assert!(p.xi_f.abs() < 1e-12, "{}", p.xi_f);
    }

    #[test]
    fn half_weight_skew_matches_arithmetic() {
        let t = build_two_cusp_table(&TwoCuspParams::default()).unwrap();
        let f = Observable::new(&t, ObservableSpec::two_cusp(1.0, -0.5, 0.3)).unwrap();
        let p = theoretical_params(&t, &f).unwrap();
        let ia = p.per_cusp[0].i_f;
        let ib = p.per_cusp[1].i_f;
        let want = (ia.abs().powf(1.5) - ib.abs().powf(1.5)) / (ia.abs().powf(1.5) + ib.abs().powf(1.5));
        assert!((p.xi_f - want).abs() < 1e-14);
        assert!(p.xi_f > 0.0 && p.xi_f < 1.0);
    }

    #[test]
    fn vanishing_integrals_rejected() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let z = Observable::new(&t, ObservableSpec::Constant { value: 0.0 }).unwrap();
        assert!(matches!(theoretical_params(&t, &z), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn two_presentations_agree() {
        let t = build_two_cusp_table(&TwoCuspParams::default()).unwrap();
        let f = Observable::new(&t, ObservableSpec::two_cusp(1.0, -0.5, 0.3)).unwrap();
        let p = theoretical_params(&t, &f).unwrap();
        for k in 0..=200 {
            let u = -10.0 + 0.1 * k as f64;
            let (a, b) = p.independent_sum_cf(u).unwrap();
            let (c, d) = p.params.cf(u);
            assert!((a - c).abs() < 1e-10 && (b - d).abs() < 1e-10, "u={u}");
        }
    }

    #[test]
    fn unit_cusp_observable_has_the_return_tail() {
        // an observable whose cusp limit is 1 plays the role of R on the
        // excursion, so its limit tail must carry the return-time constant
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let f = Observable::new(&t, ObservableSpec::single_cusp(1, 1.0, 0.3)).unwrap();
        let p = theoretical_params(&t, &f).unwrap();
        let a = t.alpha();
        let unit = p.scaled(i_one(a) / p.per_cusp[0].i_f);
        assert_eq!(unit.xi_f, 1.0);
        let c = c_alpha(a).unwrap();
        let tail = c * unit.params.scale.powf(a);
        let want = return_tail_target(&t, 1).unwrap() * mu_base(&t);
        assert!((tail / want - 1.0).abs() < 1e-12, "{tail} vs {want}");
    }

    #[test]
    fn homogeneity() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let f = Observable::new(&t, ObservableSpec::single_cusp(1, 1.0, 0.3)).unwrap();
        let g = Observable::new(&t, ObservableSpec::single_cusp(1, 2.5, 0.3)).unwrap();
        let p = theoretical_params(&t, &f).unwrap();
        let q = theoretical_params(&t, &g).unwrap();
        assert!((q.sigma_f / p.sigma_f - 2.5).abs() < 1e-10);
        assert_eq!(q.xi_f, p.xi_f);
    }

    #[test]
    fn zero_observable_gives_zero_sums() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let z = Observable::new(&t, ObservableSpec::Constant { value: 0.0 }).unwrap();
        let run = birkhoff_samples(&t, &z, 1000, 8, 1).unwrap();
        assert!(run.samples.iter().all(|&x| x == 0.0));
        assert!(birkhoff_samples(&t, &z, 10, 8, 1).is_err());
    }

    #[test]
    fn stream_is_deterministic_and_partitions() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let a = stream_returns(&t, 20_000, 4, 3);
        let b = stream_returns(&t, 20_000, 4, 3);
        assert_eq!(a.total(), 20_000);
        assert_eq!(a.per_label, b.per_label);
        let counted: u64 = a.label_counts.values().sum();
        assert_eq!(counted, a.total());
    }

    #[test]
    fn pp_target_sign_support() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let mut w = BTreeMap::new();
        w.insert(1, 1.0);
        let neg = PpRegion { t: (0.0, 1.0), y: (f64::NEG_INFINITY, -0.5) };
        assert_eq!(pp_target(&t, &w, &neg).unwrap(), 0.0);
        let pos = PpRegion { t: (0.0, 1.0), y: (0.5, f64::INFINITY) };
        let want = return_tail_target(&t, 1).unwrap() * 0.5f64.powf(-1.5);
        assert!((pp_target(&t, &w, &pos).unwrap() - want).abs() < 1e-12);
        assert!(pp_target(&t, &w, &PpRegion { t: (0.0, 1.0), y: (-0.1, 0.1) }).is_err());
    }
}
