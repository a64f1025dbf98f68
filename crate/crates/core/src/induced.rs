//! First-return map to the base set `M` (the boundary minus the cusp
//! neighbourhoods), return times, cusp labels and induced observables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    collision_of_state, sample_mu_state, state_from_collision, step, Collision, State, TrajectorySegment,
};
use crate::error::{Error, Result};
use crate::geometry::{neighbourhood_of, TableSpec};

/// Default cap on stored excursion length.
pub const DEFAULT_EXCURSION_CAP: usize = 1_000_000;

/// A real function on the collision space, evaluated on internal states.
pub trait PhaseFunction: Sync {
    fn eval(&self, table: &TableSpec, st: &State) -> f64;
}

impl<F: Fn(&TableSpec, &State) -> f64 + Sync> PhaseFunction for F {
    fn eval(&self, table: &TableSpec, st: &State) -> f64 {
        self(table, st)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnRecord {
    pub start: Collision,
    pub return_time: u64,
    /// 0 for `M_0`, otherwise the label of the visited cusp.
    pub cusp_label: usize,
    pub end: Collision,
    pub induced_value: Option<f64>,
    pub f_star: Option<f64>,
    pub excursion: Option<TrajectorySegment>,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{source} (after {} collisions)", partial.collisions.len())]
pub struct ExcursionError {
    pub source: Error,
    pub partial: TrajectorySegment,
}

#[derive(Debug, Clone, Copy)]
pub struct ReturnOptions {
    pub store_excursion: bool,
    pub cap: usize,
}

impl Default for ReturnOptions {
    fn default() -> Self {
        ReturnOptions { store_excursion: false, cap: DEFAULT_EXCURSION_CAP }
    }
}

#[inline]
pub fn in_base(table: &TableSpec, st: &State) -> bool {
    neighbourhood_of(table, st.piece, st.param).is_none()
}

pub fn collision_in_base(table: &TableSpec, x: Collision) -> bool {
    let r = table.wrap(x.r);
    let i = table.piece_index(r);
    neighbourhood_of(table, i, table.pieces[i].param_of_r(r)).is_none()
}

/// Streaming `min(max drawdown, max drawup)` of partial sums `S_0 = 0, S_1, ...`.
#[derive(Debug, Clone, Copy)]
pub struct DrawTracker {
    sum: f64,
    hi: f64,
    lo: f64,
    down: f64,
    up: f64,
}

impl Default for DrawTracker {
    fn default() -> Self {
        DrawTracker { sum: 0.0, hi: 0.0, lo: 0.0, down: 0.0, up: 0.0 }
    }
}

impl DrawTracker {
    #[inline]
    pub fn push(&mut self, v: f64) {
        self.sum += v;
        self.hi = self.hi.max(self.sum);
        self.lo = self.lo.min(self.sum);
        self.down = self.down.max(self.hi - self.sum);
        self.up = self.up.max(self.sum - self.lo);
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn f_star(&self) -> f64 {
        self.down.min(self.up)
    }
}

/// `f*` of a finished partial-sum sequence (must start with `S_0`).
pub fn f_star_of_sums(sums: &[f64]) -> f64 {
    let mut tr = DrawTracker::default();
    for w in sums.windows(2) {
        tr.push(w[1] - w[0]);
    }
    tr.f_star()
}

/// Outcome of one induced step on internal states.
#[derive(Debug, Clone, Copy)]
pub struct InducedStep {
    pub end: State,
    pub return_time: u64,
    pub cusp_label: usize,
    pub induced_value: f64,
    pub f_star: f64,
}

/// Applies `F` to a state in `M`, accumulating `f` along the excursion.
#[inline]
pub fn induced_step(table: &TableSpec, st: &State, f: Option<&dyn PhaseFunction>) -> Result<InducedStep> {
    let mut tr = DrawTracker::default();
    let mut cur = *st;
    let mut n = 0u64;
    let mut label = 0;
    loop {
        if let Some(f) = f {
            tr.push(f.eval(table, &cur));
        }
        let (next, _) = step(table, &cur)?;
        n += 1;
        cur = next;
        match neighbourhood_of(table, cur.piece, cur.param) {
            None => break,
            Some(l) => {
                if label == 0 {
                    label = l;
                } else if l != label {
                    return Err(Error::Numerical(format!("excursion moved from cusp {label} to cusp {l}")));
                }
            }
        }
    }
    Ok(InducedStep { end: cur, return_time: n, cusp_label: label, induced_value: tr.sum(), f_star: tr.f_star() })
}

pub fn return_map(
    table: &TableSpec,
    x: Collision,
    f: Option<&dyn PhaseFunction>,
    opts: ReturnOptions,
) -> std::result::Result<ReturnRecord, ExcursionError> {
    let mut partial = TrajectorySegment::default();
    let fail = |e: Error, partial: TrajectorySegment| ExcursionError { source: e, partial };
    let st = match state_from_collision(table, x) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, partial)),
    };
    if !in_base(table, &st) {
        return Err(fail(Error::Domain(format!("start r = {} lies in a cusp neighbourhood", x.r)), partial));
    }
    if opts.store_excursion {
        partial.collisions.push(x);
    }
    let mut tr = DrawTracker::default();
    let mut cur = st;
    let mut n = 0u64;
    let mut label = 0;
    loop {
        if let Some(f) = f {
            tr.push(f.eval(table, &cur));
        }
        let (next, tau) = match step(table, &cur) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, partial)),
        };
        n += 1;
        cur = next;
        if opts.store_excursion && partial.free_paths.len() < opts.cap {
            partial.collisions.push(collision_of_state(table, &cur));
            partial.free_paths.push(tau);
        }
        match neighbourhood_of(table, cur.piece, cur.param) {
            None => break,
            Some(l) if label == 0 => label = l,
            Some(l) if l != label => {
                return Err(fail(Error::Numerical(format!("excursion moved from cusp {label} to cusp {l}")), partial));
            }
            Some(_) => {}
        }
    }
    Ok(ReturnRecord {
        start: x,
        return_time: n,
        cusp_label: label,
        end: collision_of_state(table, &cur),
        induced_value: f.map(|_| tr.sum()),
        f_star: f.map(|_| tr.f_star()),
        excursion: opts.store_excursion.then_some(partial),
    })
}

pub fn classify(table: &TableSpec, x: Collision) -> Result<usize> {
    let st = state_from_collision(table, x)?;
    if !in_base(table, &st) {
        return Err(Error::Domain("start lies in a cusp neighbourhood".into()));
    }
    let (next, _) = step(table, &st)?;
    Ok(neighbourhood_of(table, next.piece, next.param).unwrap_or(0))
}

pub fn f_star(table: &TableSpec, x: Collision, f: &dyn PhaseFunction) -> std::result::Result<f64, ExcursionError> {
    return_map(table, x, Some(f), ReturnOptions::default()).map(|r| r.f_star.unwrap_or(0.0))
}

/// `μ(M)`.
pub fn mu_base(table: &TableSpec) -> f64 {
    let covered: f64 = table.neighbourhood_intervals().iter().map(|(a, b)| b - a).sum();
    1.0 - covered / table.perimeter
}

/// Draws a state from `μ̃ = μ(· | M)` by rejection.
pub fn sample_mu_tilde_state<R: Rng + ?Sized>(table: &TableSpec, rng: &mut R) -> State {
    loop {
        let st = sample_mu_state(table, rng);
        if in_base(table, &st) {
            return st;
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KacReport {
    pub mean_r: f64,
    pub predicted: f64,
    pub std_error: f64,
    pub z_score: f64,
}

/// Streaming moments of return times.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ReturnMoments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl ReturnMoments {
    pub fn push(&mut self, r: u64) {
        let x = r as f64;
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, o: &ReturnMoments) {
        self.count += o.count;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }
}

pub fn kac_from_moments(table: &TableSpec, m: &ReturnMoments) -> Result<KacReport> {
    if m.count == 0 {
        return Err(Error::Domain("no return samples".into()));
    }
    let n = m.count as f64;
    let mean = m.sum / n;
    let var = if m.count > 1 { ((m.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let se = (var / n).sqrt();
    let predicted = 1.0 / mu_base(table);
    let z = if se > 0.0 {
        (mean - predicted) / se
    } else if mean == predicted {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(KacReport { mean_r: mean, predicted, std_error: se, z_score: z })
}

/// Kac check with the standard error taken from the spread of the means of
/// independent chains, which stays honest under serial dependence and heavy
/// tails where the per-sample variance is useless.
pub fn kac_from_batches(table: &TableSpec, batches: &[ReturnMoments]) -> Result<KacReport> {
    let batches: Vec<&ReturnMoments> = batches.iter().filter(|b| b.count > 0).collect();
    if batches.len() < 2 {
        return Err(Error::Domain("need at least two nonempty chains".into()));
    }
    let total: u64 = batches.iter().map(|b| b.count).sum();
    let mean = batches.iter().map(|b| b.sum).sum::<f64>() / total as f64;
    let k = batches.len() as f64;
    let means: Vec<f64> = batches.iter().map(|b| b.sum / b.count as f64).collect();
    let mbar = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - mbar).powi(2)).sum::<f64>() / (k - 1.0);
    let se = (var / k).sqrt();
    let predicted = 1.0 / mu_base(table);
    let z = if se > 0.0 { (mean - predicted) / se } else { f64::INFINITY };
    Ok(KacReport { mean_r: mean, predicted, std_error: se, z_score: z })
}

pub fn kac_check(table: &TableSpec, samples: &[ReturnRecord]) -> Result<KacReport> {
    let mut m = ReturnMoments::default();
    for r in samples {
        m.push(r.return_time);
    }
    kac_from_moments(table, &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_one_cusp_table, OneCuspParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_f_star(sums: &[f64]) -> f64 {
        let mut down = 0.0f64;
        let mut up = 0.0f64;
        for l in 0..sums.len() {
            for lp in 0..=l {
                down = down.max(sums[lp] - sums[l]);
                up = up.max(sums[l] - sums[lp]);
            }
        }
        down.min(up)
    }

    #[test]
    fn f_star_examples() {
        assert_eq!(f_star_of_sums(&[0.0, 1.0, -1.0, 2.0]), 2.0);
        assert_eq!(brute_f_star(&[0.0, 1.0, -1.0, 2.0]), 2.0);
        assert_eq!(f_star_of_sums(&[0.0, 0.5, 1.0, 1.5]), 0.0);
    }

    #[test]
    fn constant_observables() {
        let table = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let one = |_: &TableSpec, _: &State| 1.0;
        let zero = |_: &TableSpec, _: &State| 0.0;
        for _ in 0..300 {
            let st = sample_mu_tilde_state(&table, &mut rng);
            let x = collision_of_state(&table, &st);
            if let Ok(rec) = return_map(&table, x, Some(&one), ReturnOptions { store_excursion: true, cap: 1000 }) {
                assert_eq!(rec.induced_value.unwrap(), rec.return_time as f64);
                assert_eq!(rec.excursion.as_ref().unwrap().free_paths.len() as u64, rec.return_time);
                assert_eq!(rec.cusp_label == 0, rec.return_time == 1);
            }
            if let Ok(rec) = return_map(&table, x, Some(&zero), ReturnOptions::default()) {
                assert_eq!(rec.induced_value.unwrap(), 0.0);
            }
        }
    }
}
