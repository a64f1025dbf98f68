//! Partial-sum paths on `[0, 1]` and Skorokhod distances between them.
//!
//! `d_M1` is the Fréchet distance between completed graphs (vertical segments
//! inserted at jumps) under the max-norm on `(t, x)`; it is computed by the
//! free-space decision procedure restricted to cells whose times are within
//! `ε`, then bisection on `ε`. `d_J1` between two step paths is exact, by a
//! jump-matching dynamic program searched over the finite set of critical
//! values. Piecewise-linear paths enter `d_J1` through a step approximation
//! whose sup-norm error is added back, so the result is an upper bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_mu_state, step};
use crate::error::{Error, Result};
use crate::geometry::TableSpec;
use crate::induced::{in_base, PhaseFunction};
use crate::numeric::quantile_sorted;
use crate::stable_stats::task_rng;

/// Default absolute accuracy of the distance computations.
pub const TOL_M1: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    PiecewiseConstant,
    PiecewiseLinear,
}

/// A path on `[0, 1]` with finitely many breakpoints. Piecewise-constant
/// paths take `values[k]` on `[times[k], times[k+1])` and are right
/// continuous; piecewise-linear paths interpolate the knots and must end at
/// `t = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: PathKind,
}

impl StepPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Domain("path needs matching, nonempty times and values".into()));
        }
        if times[0] != 0.0 || *times.last().unwrap() > 1.0 {
            return Err(Error::Domain("breakpoints must start at 0 and stay within [0, 1]".into()));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!("breakpoints not increasing at index {}", k + 1)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("path values must be finite".into()));
        }
        if kind == PathKind::PiecewiseLinear && (times.len() < 2 || *times.last().unwrap() != 1.0) {
            return Err(Error::Domain("a piecewise-linear path needs knots at 0 and 1".into()));
        }
        Ok(StepPath { times, values, kind })
    }

    pub fn constant(value: f64) -> Self {
        StepPath { times: vec![0.0], values: vec![value], kind: PathKind::PiecewiseConstant }
    }

    fn locate(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t).saturating_sub(1)
    }

    /// Value at `t` (the right limit for step paths).
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.locate(t);
        match self.kind {
            PathKind::PiecewiseConstant => self.values[k],
            PathKind::PiecewiseLinear => {
                if k + 1 >= self.times.len() {
                    return self.values[k];
                }
                let (t0, t1) = (self.times[k], self.times[k + 1]);
                self.values[k] + (t - t0) / (t1 - t0) * (self.values[k + 1] - self.values[k])
            }
        }
    }

    /// Left limit at `t > 0`.
    pub fn eval_left(&self, t: f64) -> f64 {
        match self.kind {
            PathKind::PiecewiseLinear => self.eval(t),
            PathKind::PiecewiseConstant => {
                let k = self.times.partition_point(|&x| x < t).saturating_sub(1);
                self.values[k]
            }
        }
    }

    /// Jumps `(time, value after)` with nonzero size, and the initial value.
    fn jumps(&self) -> (f64, Vec<(f64, f64)>) {
        let mut out = Vec::new();
        if self.kind == PathKind::PiecewiseConstant {
            for k in 1..self.values.len() {
                if self.values[k] != self.values[k - 1] {
                    out.push((self.times[k], self.values[k]));
                }
            }
        }
        (self.values[0], out)
    }

    pub fn max_jump(&self) -> f64 {
        match self.kind {
            PathKind::PiecewiseLinear => 0.0,
            PathKind::PiecewiseConstant => self.values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max),
        }
    }

    /// Vertices of the completed graph in the `(t, x)` plane.
    fn graph(&self) -> Vec<(f64, f64)> {
        match self.kind {
            PathKind::PiecewiseLinear => self.times.iter().copied().zip(self.values.iter().copied()).collect(),
            PathKind::PiecewiseConstant => {
                let mut g = vec![(0.0, self.values[0])];
                for k in 1..self.times.len() {
                    g.push((self.times[k], self.values[k - 1]));
                    g.push((self.times[k], self.values[k]));
                }
                if *self.times.last().unwrap() < 1.0 {
                    g.push((1.0, *self.values.last().unwrap()));
                }
                g
            }
        }
    }
}

/// `W_n(t) = Σ_{j < ⌊nt⌋} f_j / n^{1/α}` from the first `n` orbit values.
pub fn build_wn(values: &[f64], n: usize, alpha: f64) -> Result<StepPath> {
    if n == 0 || values.len() < n {
        return Err(Error::Domain(format!("need n >= 1 and at least n = {n} orbit values, got {}", values.len())));
    }
    let norm = (n as f64).powf(1.0 / alpha);
    let mut times = Vec::with_capacity(n + 1);
    let mut vals = Vec::with_capacity(n + 1);
    let mut s = 0.0;
    times.push(0.0);
    vals.push(0.0);
    for (j, f) in values[..n].iter().enumerate() {
        s += f;
        times.push((j + 1) as f64 / n as f64);
        vals.push(s / norm);
    }
    Ok(StepPath { times, values: vals, kind: PathKind::PiecewiseConstant })
}

/// Continuous interpolation of a `W_n` path through its values at `j/n`.
pub fn linearize(path: &StepPath) -> Result<StepPath> {
    if path.kind != PathKind::PiecewiseConstant || *path.times.last().unwrap() != 1.0 {
        return Err(Error::Domain("linearize expects a step path with a breakpoint at t = 1".into()));
    }
    Ok(StepPath { times: path.times.clone(), values: path.values.clone(), kind: PathKind::PiecewiseLinear })
}

/// `sup_t |p(t) - q(t)|`.
pub fn sup_distance(p: &StepPath, q: &StepPath) -> f64 {
    let mut grid: Vec<f64> = p.times.iter().chain(q.times.iter()).copied().chain([1.0]).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut d: f64 = 0.0;
    for (k, &t) in grid.iter().enumerate() {
        d = d.max((p.eval(t) - q.eval(t)).abs());
        if k > 0 {
            d = d.max((p.eval_left(t) - q.eval_left(t)).abs());
        }
    }
    d
}

fn dist_inf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

#[derive(Clone, Copy, Debug)]
struct Iv {
    lo: f64,
    hi: f64,
}

const EMPTY: Iv = Iv { lo: 1.0, hi: 0.0 };

impl Iv {
    fn is_empty(self) -> bool {
        self.lo > self.hi
    }
}

/// Parameters `s ∈ [0, 1]` with `|a + s (b - a) - q|_∞ ≤ ε`.
fn free(a: (f64, f64), b: (f64, f64), q: (f64, f64), eps: f64) -> Iv {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    for (c, d) in [(a.0 - q.0, b.0 - a.0), (a.1 - q.1, b.1 - a.1)] {
        if d == 0.0 {
            if c.abs() > eps {
                return EMPTY;
            }
        } else {
            let (x, y) = ((-eps - c) / d, (eps - c) / d);
            lo = lo.max(x.min(y));
            hi = hi.min(x.max(y));
        }
    }
    Iv { lo, hi }
}

/// Free-space reachability for the Fréchet decision problem.
fn frechet_decide(p: &[(f64, f64)], q: &[(f64, f64)], eps: f64) -> bool {
    let m = p.len() - 1;
    let n = q.len() - 1;
    if dist_inf(p[0], q[0]) > eps || dist_inf(p[m], q[n]) > eps {
        return false;
    }
    if m == 0 || n == 0 {
        // one curve is a point: every vertex of the other must be close
        return p.iter().all(|&a| q.iter().all(|&b| dist_inf(a, b) <= eps));
    }
    // cells (i, j) with time ranges more than ε apart hold no free space
    let band = |i: usize| {
        let (t0, t1) = (p[i].0 - eps, p[i + 1].0 + eps);
        let j0 = q.partition_point(|x| x.0 < t0).saturating_sub(1);
        let j1 = q.partition_point(|x| x.0 <= t1).min(n);
        (j0, j1.max(j0 + 1).min(n))
    };
    // lr[j - off]: reachable part of the left edge of cell (i, j)
    let mut off = 0usize;
    let mut lr: Vec<Iv> = Vec::new();
    {
        let (_, j1) = band(0);
        let mut reach = true;
        for j in 0..j1 {
            let l = free(q[j], q[j + 1], p[0], eps);
            if reach && !l.is_empty() && l.lo == 0.0 {
                lr.push(l);
                reach = l.hi == 1.0;
            } else {
                lr.push(EMPTY);
                reach = false;
            }
        }
    }
    let mut bottom_reach = true;
    for i in 0..m {
        let (j0, j1) = band(i);
        let get = |lr: &Vec<Iv>, off: usize, j: usize| if j >= off && j - off < lr.len() { lr[j - off] } else { EMPTY };
        let mut next = Vec::with_capacity(j1 - j0);
        // reachable part of the bottom edge of cell (i, j0)
        let mut br = if j0 == 0 {
            let b = free(p[i], p[i + 1], q[0], eps);
            if bottom_reach && !b.is_empty() && b.lo == 0.0 {
                bottom_reach = b.hi == 1.0;
                b
            } else {
                bottom_reach = false;
                EMPTY
            }
        } else {
            EMPTY
        };
        for j in j0..j1 {
            let l = get(&lr, off, j);
            let top = free(p[i], p[i + 1], q[j + 1], eps);
            let right = free(q[j], q[j + 1], p[i + 1], eps);
            let new_br = if !l.is_empty() {
                top
            } else if !br.is_empty() {
                Iv { lo: top.lo.max(br.lo), hi: top.hi }
            } else {
                EMPTY
            };
            let new_lr = if !br.is_empty() {
                right
            } else if !l.is_empty() {
                Iv { lo: right.lo.max(l.lo), hi: right.hi }
            } else {
                EMPTY
            };
            next.push(new_lr);
            br = new_br;
        }
        if i == m - 1 {
            let corner_from_right = j1 == n && next.last().is_some_and(|r| !r.is_empty() && r.hi == 1.0);
            let corner_from_top = j1 == n && !br.is_empty() && br.hi == 1.0;
            return corner_from_right || corner_from_top;
        }
        lr = next;
        off = j0;
    }
    unreachable!()
}

/// Upper bound on `d_M1(p, q)` within `tol` of the exact value.
pub fn m1_distance_tol(p: &StepPath, q: &StepPath, tol: f64) -> f64 {
    let gp = p.graph();
    let gq = q.graph();
    let mut lo = dist_inf(gp[0], gq[0]).max(dist_inf(*gp.last().unwrap(), *gq.last().unwrap()));
    if frechet_decide(&gp, &gq, lo) {
        return lo;
    }
    let slack = |e: f64| e * (1.0 + 1e-12) + 1e-15;
    let mut hi = slack(sup_distance(p, q).max(lo));
    while !frechet_decide(&gp, &gq, hi) {
        lo = hi;
        hi *= 2.0;
    }
    let tol = tol.max(1e-15);
    while hi - lo > tol.max(1e-12 * hi) {
        let mid = 0.5 * (lo + hi);
        if frechet_decide(&gp, &gq, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn m1_distance(p: &StepPath, q: &StepPath) -> f64 {
    m1_distance_tol(p, q, 1e-9)
}

/// Jump-matching feasibility of `d_J1 ≤ ε` for two step paths given by their
/// initial values and jumps `(time, value after)`.
fn j1_decide(p0: f64, a: &[(f64, f64)], q0: f64, b: &[(f64, f64)], eps: f64) -> bool {
    let m = a.len();
    let k = b.len();
    let pv = |i: usize| if i == 0 { p0 } else { a[i - 1].1 };
    let qv = |j: usize| if j == 0 { q0 } else { b[j - 1].1 };
    let close = |i: usize, j: usize| (pv(i) - qv(j)).abs() <= eps;
    if !close(0, 0) {
        return false;
    }
    // f[i][j]: earliest time of the last event after i jumps of p and j of q
    // have been placed; the next event must come strictly later
    let inf = f64::INFINITY;
    let range = |i: usize| {
        // state (i, j) needs b_j < t_{i+1} <= a_{i+1} + ε and t_i < b_{j+1}
        let lo = if i == 0 { 0 } else { b.partition_point(|x| x.0 < a[i - 1].0 - eps) };
        let hi = if i < m { b.partition_point(|x| x.0 <= a[i].0 + eps) } else { k };
        (lo.min(k), hi.max(lo.min(k)))
    };
    let (mut lo_prev, hi0) = range(0);
    let mut prev = vec![inf; hi0 - lo_prev + 1];
    for j in lo_prev..=hi0 {
        let f = if j == 0 {
            0.0
        } else {
            let fp = prev[j - 1 - lo_prev];
            if fp < b[j - 1].0 && close(0, j) {
                b[j - 1].0
            } else {
                inf
            }
        };
        prev[j - lo_prev] = f;
    }
    for i in 1..=m {
        let (ai, _) = a[i - 1];
        let (lo, hi) = range(i);
        let lo = lo.min(lo_prev).min(hi);
        let mut cur = vec![inf; hi - lo + 1];
        let get_prev = |j: usize| if j >= lo_prev && j - lo_prev < prev.len() { prev[j - lo_prev] } else { inf };
        for j in lo..=hi {
            let mut best = inf;
            // p jumps alone
            let f = get_prev(j);
            if f < inf && f < ai + eps && close(i, j) {
                let t = (ai - eps).max(f);
                let ok = if ai == 1.0 { j == k || b[j].0 > 1.0 } else { t < 1.0 && (j == k || t < b[j].0) };
                if ok {
                    best = best.min(t);
                }
            }
            if j > 0 {
                let bj = b[j - 1].0;
                // q jumps alone
                if j > lo {
                    let f = cur[j - 1 - lo];
                    if f < bj && close(i, j) {
                        best = best.min(bj);
                    }
                }
                // both jump together
                let f = get_prev(j - 1);
                if f < bj && (ai - bj).abs() <= eps && (ai == 1.0) == (bj == 1.0) && close(i, j) {
                    best = best.min(bj);
                }
            }
            cur[j - lo] = best;
        }
        prev = cur;
        lo_prev = lo;
    }
    k >= lo_prev && k - lo_prev < prev.len() && prev[k - lo_prev] < inf
}

/// `d_J1` between two piecewise-constant paths: exact over the critical
/// values when they are few, otherwise bisection down to `tol`.
fn j1_steps(p: &StepPath, q: &StepPath, tol: f64) -> f64 {
    let (p0, a) = p.jumps();
    let (q0, b) = q.jumps();
    let slack = |e: f64| e * (1.0 + 1e-12) + 1e-15;
    let decide = |e: f64| j1_decide(p0, &a, q0, &b, slack(e));
    if a.len() * b.len() <= 250_000 {
        let pv: Vec<f64> = std::iter::once(p0).chain(a.iter().map(|x| x.1)).collect();
        let qv: Vec<f64> = std::iter::once(q0).chain(b.iter().map(|x| x.1)).collect();
        let mut cand: Vec<f64> = Vec::with_capacity(2 * pv.len() * qv.len());
        for x in &pv {
            for y in &qv {
                cand.push((x - y).abs());
            }
        }
        for x in &a {
            for y in &b {
                cand.push((x.0 - y.0).abs());
            }
        }
        cand.sort_by(f64::total_cmp);
        cand.dedup();
        // the identity time change is always feasible at the sup distance
        let (mut lo, mut hi) = (0usize, cand.len() - 1);
        if !decide(cand[hi]) {
            return sup_distance(p, q);
        }
        while lo < hi {
            let mid = (lo + hi) / 2;
            if decide(cand[mid]) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        cand[lo]
    } else {
        let mut lo = j1_lower_bound(p, q);
        let mut hi = sup_distance(p, q);
        while hi - lo > tol.max(1e-12 * (1.0 + hi)) {
            let mid = 0.5 * (lo + hi);
            if decide(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Step approximation of a linear path with sup-norm error at most `tol/2`.
fn discretize(p: &StepPath, tol: f64) -> (StepPath, f64) {
    if p.kind == PathKind::PiecewiseConstant {
        return (p.clone(), 0.0);
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut err: f64 = 0.0;
    for k in 0..p.times.len() - 1 {
        let (t0, t1) = (p.times[k], p.times[k + 1]);
        let (v0, v1) = (p.values[k], p.values[k + 1]);
        let m = ((v1 - v0).abs() / tol).ceil().max(1.0) as usize;
        for r in 0..m {
            let u0 = t0 + (t1 - t0) * r as f64 / m as f64;
            times.push(u0);
            values.push(v0 + (v1 - v0) * (r as f64 + 0.5) / m as f64);
        }
        err = err.max((v1 - v0).abs() / (2 * m) as f64);
    }
    // the value at t = 1 itself
    let last = *p.values.last().unwrap();
    if (last - values.last().unwrap()).abs() > 0.0 {
        times.push(1.0);
        values.push(last);
    }
    (StepPath { times, values, kind: PathKind::PiecewiseConstant }, err)
}

/// Closed pieces of `{t in [lo, hi] : |q(t) - level| <= eps}` for a
/// piecewise-linear `q`, merged where they touch.
fn level_components(q: &StepPath, level: f64, eps: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let last = q.times.len() - 1;
    let mut k = q.locate(lo).min(last - 1);
    while k < last && q.times[k] <= hi {
        let (t0, t1) = (q.times[k], q.times[k + 1]);
        let (v0, v1) = (q.values[k], q.values[k + 1]);
        let piece = if v1 == v0 {
            ((v0 - level).abs() <= eps).then_some((t0, t1))
        } else {
            let sa = (level - eps - v0) / (v1 - v0);
            let sb = (level + eps - v0) / (v1 - v0);
            let (s0, s1) = (sa.min(sb).max(0.0), sa.max(sb).min(1.0));
            (s0 <= s1).then(|| {
                let u0 = if s0 == 0.0 { t0 } else { t0 + (t1 - t0) * s0 };
                let u1 = if s1 == 1.0 { t1 } else { t0 + (t1 - t0) * s1 };
                (u0, u1)
            })
        };
        if let Some((u0, u1)) = piece {
            let (u0, u1) = (u0.max(lo), u1.min(hi));
            if u0 <= u1 {
                match out.last_mut() {
                    Some(c) if u0 <= c.1 => c.1 = c.1.max(u1),
                    _ => out.push((u0, u1)),
                }
            }
        }
        k += 1;
    }
    out
}

/// Feasibility of `d_J1 <= eps` between a step path (initial value, jumps)
/// and a piecewise-linear path. Tracks the set of admissible positions of
/// each relocated jump as a union of intervals.
fn j1_step_linear_decide(p0: f64, a: &[(f64, f64)], q: &StepPath, eps: f64) -> bool {
    let window = |t: f64| if t >= 1.0 { (1.0, 1.0) } else { ((t - eps).max(0.0), (t + eps).min(1.0)) };
    let mut reach: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut level = p0;
    for &(t, v) in a {
        let (w0, w1) = window(t);
        let comps = level_components(q, level, eps, reach[0].0, w1);
        let mut next: Vec<(f64, f64)> = Vec::new();
        let mut r = 0;
        for &(c0, c1) in &comps {
            while r < reach.len() && reach[r].1 < c0 {
                r += 1;
            }
            if r == reach.len() {
                break;
            }
            if reach[r].0 > c1 {
                continue;
            }
            let lo = reach[r].0.max(c0).max(w0);
            let hi = c1.min(w1);
            if lo <= hi {
                next.push((lo, hi));
            }
        }
        if next.is_empty() {
            return false;
        }
        reach = next;
        level = v;
    }
    let comps = level_components(q, level, eps, reach[0].0, 1.0);
    match comps.last() {
        Some(&(c0, c1)) if c1 >= 1.0 => reach.iter().any(|&(lo, hi)| hi >= c0 && lo <= c1),
        _ => false,
    }
}

/// `d_J1` between a step path and a piecewise-linear path by bisection.
fn j1_step_linear(p: &StepPath, q: &StepPath, tol: f64) -> f64 {
    let (p0, a) = p.jumps();
    let slack = |e: f64| e * (1.0 + 1e-12) + 1e-15;
    let mut lo = j1_lower_bound(p, q);
    let mut hi = sup_distance(p, q);
    if j1_step_linear_decide(p0, &a, q, slack(lo)) {
        return lo;
    }
    while hi - lo > tol.max(1e-12 * (1.0 + hi)) {
        let mid = 0.5 * (lo + hi);
        if j1_step_linear_decide(p0, &a, q, slack(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `d_J1` with accuracy `tol`: exact for two step paths, otherwise an upper
/// bound within `tol` of the exact value.
pub fn j1_distance_tol(p: &StepPath, q: &StepPath, tol: f64) -> f64 {
    use PathKind::*;
    match (p.kind, q.kind) {
        (PiecewiseConstant, PiecewiseConstant) => j1_steps(p, q, 0.0),
        (PiecewiseConstant, PiecewiseLinear) => j1_step_linear(p, q, tol),
        (PiecewiseLinear, PiecewiseConstant) => j1_step_linear(q, p, tol),
        (PiecewiseLinear, PiecewiseLinear) => {
            let sup = sup_distance(p, q);
            if sup <= j1_lower_bound(p, q) + tol {
                return sup;
            }
            let (ph, err) = discretize(p, tol / 2.0);
            (j1_step_linear(&ph, q, tol / 2.0) + err).min(sup)
        }
    }
}

pub fn j1_distance(p: &StepPath, q: &StepPath) -> f64 {
    j1_distance_tol(p, q, TOL_M1)
}

/// Certified lower bound on `d_J1`: endpoint values are fixed by every time
/// change, and a jump facing a continuous path leaves half its size.
pub fn j1_lower_bound(p: &StepPath, q: &StepPath) -> f64 {
    let mut lb = (p.eval(0.0) - q.eval(0.0)).abs().max((p.eval(1.0) - q.eval(1.0)).abs());
    if q.kind == PathKind::PiecewiseLinear {
        lb = lb.max(p.max_jump() / 2.0);
    }
    if p.kind == PathKind::PiecewiseLinear {
        lb = lb.max(q.max_jump() / 2.0);
    }
    lb
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsRow {
    pub n: usize,
    pub rep: usize,
    pub max_jump: f64,
    /// Largest `|Σ f| / n^{1/α}` over one stay in the cusp neighbourhoods.
    pub macro_jump: f64,
    pub sup_dist: f64,
    pub m1_dist: f64,
    /// `d_J1` upper bound; refined only for paths with a jump above `J₀`.
    pub j1_dist: f64,
    pub j1_lower: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsReport {
    pub rows: Vec<PathsRow>,
    /// 0.9-quantile of the largest jump at the first rung.
    pub j0: f64,
    /// 0.9-quantile of the largest excursion increment at the first rung.
    pub macro_j0: f64,
    pub sup_norm: f64,
    pub alpha: f64,
}

impl PathsReport {
    /// Fraction of reps at `n` whose largest excursion increment exceeds
    /// `macro_j0`.
    pub fn macro_fraction(&self, n: usize) -> f64 {
        let r: Vec<&PathsRow> = self.rows.iter().filter(|r| r.n == n).collect();
        r.iter().filter(|r| r.macro_jump > self.macro_j0).count() as f64 / r.len().max(1) as f64
    }
}

fn sample_path_values(
    table: &TableSpec,
    f: &dyn PhaseFunction,
    n: usize,
    seed: u64,
    task: u64,
) -> (Vec<f64>, Vec<bool>) {
    let mut rng = task_rng(seed, task);
    'outer: loop {
        let mut st = sample_mu_state(table, &mut rng);
        let mut vals = Vec::with_capacity(n);
        let mut cusp = Vec::with_capacity(n);
        for k in 0..n {
            vals.push(f.eval(table, &st));
            cusp.push(!in_base(table, &st));
            if k + 1 < n {
                match step(table, &st) {
                    Ok((nx, _)) => st = nx,
                    Err(_) => continue 'outer,
                }
            }
        }
        return (vals, cusp);
    }
}

/// `W_n` against its linearization over a ladder of `n`, `reps` orbits each.
pub fn m1_vs_j1_experiment(
    table: &TableSpec,
    f: &dyn PhaseFunction,
    sup_norm: f64,
    ladder: &[usize],
    reps: usize,
    seed: u64,
) -> Result<PathsReport> {
    if ladder.is_empty() || reps < 10 {
        return Err(Error::Domain("need a nonempty ladder and at least 10 reps".into()));
    }
    let alpha = table.alpha();
    let mut rows = Vec::new();
    for (li, &n) in ladder.iter().enumerate() {
        let part: Vec<Result<PathsRow>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let (vals, cusp) = sample_path_values(table, f, n, seed, (li * reps + rep) as u64);
                let w = build_wn(&vals, n, alpha)?;
                let lin = linearize(&w)?;
                let norm = (n as f64).powf(1.0 / alpha);
                let mut macro_jump: f64 = 0.0;
                let mut run = 0.0;
                for (v, c) in vals.iter().zip(&cusp) {
                    if *c {
                        run += v;
                        macro_jump = macro_jump.max(run.abs() / norm);
                    } else {
                        run = 0.0;
                    }
                }
                let sup = sup_distance(&w, &lin);
                Ok(PathsRow {
                    n,
                    rep,
                    max_jump: w.max_jump(),
                    macro_jump,
                    sup_dist: sup,
                    m1_dist: m1_distance(&w, &lin),
                    j1_dist: sup,
                    j1_lower: j1_lower_bound(&w, &lin),
                })
            })
            .collect();
        for r in part {
            rows.push(r?);
        }
    }
    let first: Vec<&PathsRow> = rows.iter().filter(|r| r.n == ladder[0]).collect();
    let q90 = |xs: Vec<f64>| {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        quantile_sorted(&xs, 0.9)
    };
    let j0 = q90(first.iter().map(|r| r.max_jump).collect());
    let macro_j0 = q90(first.iter().map(|r| r.macro_jump).collect());
    // refine the J1 upper bound where the lower bound is in play
    let refined: Vec<(usize, f64)> = rows
        .par_iter()
        .enumerate()
        .filter(|(_, r)| r.max_jump > j0)
        .map(|(k, r)| {
            let li = ladder.iter().position(|&n| n == r.n).unwrap();
            let (vals, _) = sample_path_values(table, f, r.n, seed, (li * reps + r.rep) as u64);
            let w = build_wn(&vals, r.n, alpha).unwrap();
            let lin = linearize(&w).unwrap();
            (k, j1_distance(&w, &lin))
        })
        .collect();
    for (k, d) in refined {
        rows[k].j1_dist = d;
    }
    Ok(PathsReport { rows, j0, macro_j0, sup_norm, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step_at(t: f64, h: f64) -> StepPath {
        StepPath::new(vec![0.0, t], vec![0.0, h], PathKind::PiecewiseConstant).unwrap()
    }

    #[test]
    fn wn_matches_partial_sums_and_linearization_stays_close() {
        let vals = [0.5, -1.0, 2.0, 0.25];
        let w = build_wn(&vals, 4, 1.5).unwrap();
        let norm = 4f64.powf(2.0 / 3.0);
        assert!((w.eval(1.0) - 1.75 / norm).abs() < 1e-15);
        assert!((w.eval(0.6) - (-0.5) / norm).abs() < 1e-15);
        let lin = linearize(&w).unwrap();
        for (t, v) in w.times.iter().zip(&w.values) {
            assert_eq!(lin.eval(*t), *v);
        }
        assert!(sup_distance(&w, &lin) <= 2.0 / norm + 1e-15);
        let zero = build_wn(&[0.0; 5], 5, 1.5).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        let one = build_wn(&[3.0], 1, 1.5).unwrap();
        assert_eq!(one.values, vec![0.0, 3.0]);
    }

    #[test]
    fn unordered_breakpoints_are_rejected() {
        assert!(StepPath::new(vec![0.0, 0.5, 0.4], vec![0.0; 3], PathKind::PiecewiseConstant).is_err());
        assert!(StepPath::new(vec![0.0, 0.5], vec![0.0; 2], PathKind::PiecewiseLinear).is_err());
    }

    #[test]
    fn step_against_ramp() {
        let delta = 0.1;
        let ramp = StepPath::new(vec![0.0, 0.5 - delta, 0.5, 1.0], vec![0.0, 0.0, 1.0, 1.0], PathKind::PiecewiseLinear)
            .unwrap();
        let s = step_at(0.5, 1.0);
        let m1 = m1_distance(&s, &ramp);
        assert!((m1 - delta / (1.0 + delta)).abs() < 1e-8, "{m1}");
        let j1 = j1_distance(&s, &ramp);
        assert!((0.5..=0.5 + TOL_M1).contains(&j1), "{j1}");
        assert!(j1_lower_bound(&s, &ramp) == 0.5);
    }

    #[test]
    fn shifted_steps() {
        let delta = 0.05;
        let a = step_at(0.5, 1.0);
        let b = step_at(0.5 + delta, 1.0);
        assert!((j1_distance(&a, &b) - delta).abs() < 1e-12);
        assert!((m1_distance(&a, &b) - delta).abs() < 1e-8);
        assert_eq!(j1_distance(&a, &a), 0.0);
        assert!(m1_distance(&a, &a) < 1e-12);
    }

    #[test]
    fn unmatched_jump_costs_sup_distance() {
        // a jump of 1 against a flat path: no time change helps
        let a = step_at(0.5, 1.0);
        let z = StepPath::constant(0.0);
        assert!((j1_distance(&a, &z) - 1.0).abs() < 1e-12);
        // a jump at t = 1 must stay at t = 1
        let e = step_at(1.0, 1.0);
        let f = step_at(0.99, 1.0);
        assert!((j1_distance(&e, &f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_small_jumps_against_one_big() {
        // q jumps by 1 at 0.5; p by 0.5 at 0.45 and 0.55
        let p = StepPath::new(vec![0.0, 0.45, 0.55], vec![0.0, 0.5, 1.0], PathKind::PiecewiseConstant).unwrap();
        let q = step_at(0.5, 1.0);
        // p sits at 0.5 on an interval while q is 0 or 1, whatever the time change
        assert!((j1_distance(&p, &q) - 0.5).abs() < 1e-12);
        // the completed graphs are close: a staircase hugs a vertical segment
        assert!((m1_distance(&p, &q) - 0.05).abs() < 1e-8);
    }

    fn arb_path() -> impl Strategy<Value = StepPath> {
        (proptest::collection::vec((0.01f64..0.99, -1.0f64..1.0), 0..6), -1.0f64..1.0, any::<bool>()).prop_map(
            |(mut pts, v0, linear)| {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-3);
                let mut times = vec![0.0];
                let mut values = vec![v0];
                for (t, v) in pts {
                    times.push(t);
                    values.push(v);
                }
                if linear {
                    times.push(1.0);
                    values.push(v0);
                    StepPath::new(times, values, PathKind::PiecewiseLinear).unwrap()
                } else {
                    StepPath::new(times, values, PathKind::PiecewiseConstant).unwrap()
                }
            },
        )
    }

    fn arb_steps() -> impl Strategy<Value = StepPath> {
        arb_path().prop_filter("step path", |p| p.kind == PathKind::PiecewiseConstant)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn m1_is_a_metric(p in arb_path(), q in arb_path(), r in arb_path()) {
            prop_assert!(m1_distance(&p, &p) < 1e-9);
            let pq = m1_distance(&p, &q);
            prop_assert!((pq - m1_distance(&q, &p)).abs() < 1e-8);
            prop_assert!(pq <= m1_distance(&p, &r) + m1_distance(&r, &q) + 2e-8);
            prop_assert!(pq <= sup_distance(&p, &q) + 1e-8);
        }

        #[test]
        fn j1_is_a_metric_on_step_paths(p in arb_steps(), q in arb_steps(), r in arb_steps()) {
            prop_assert_eq!(j1_distance(&p, &p), 0.0);
            let pq = j1_distance(&p, &q);
            prop_assert!((pq - j1_distance(&q, &p)).abs() < 1e-12);
            prop_assert!(pq <= j1_distance(&p, &r) + j1_distance(&r, &q) + 1e-12);
            prop_assert!(pq <= sup_distance(&p, &q) + 1e-12);
        }

        #[test]
        fn m1_below_j1(p in arb_path(), q in arb_path()) {
            let j1 = j1_distance_tol(&p, &q, 1e-2);
            prop_assert!(m1_distance(&p, &q) <= j1 + 1e-2);
            prop_assert!(j1_lower_bound(&p, &q) <= j1 + 1e-12);
        }

        #[test]
        fn step_linear_agrees_with_fine_step_matching(p in arb_steps(), q in arb_path()) {
            let q = linearize(&q).unwrap_or(q);
            prop_assume!(q.kind == PathKind::PiecewiseLinear);
            let tol = 1e-3;
            let direct = j1_distance_tol(&p, &q, tol);
            let (qh, err) = discretize(&q, 2e-3);
            let oracle = j1_steps(&p, &qh, 0.0);
            prop_assert!((direct - oracle).abs() <= err + tol + 1e-9, "{} vs {} (err {})", direct, oracle, err);
        }
    }
}
