//! Corner series: the alternating reflections of one excursion into a cusp,
//! and checks of their asymptotic structure.
//!
//! Within a series the first-hit wall is `A` and the opposite wall `B`. The
//! local frame has `x` along the cusp axis (pointing away from the vertex) and
//! `y` pointing from the axis towards `A`, so `A` is `y = z_A(x)` and `B` is
//! `y = -z_B(x)`. The angle `v_n` of an outgoing velocity is measured from the
//! direction of the vertex (`-x`), turning towards the wall about to be hit.
//! Indices in the public API are 1-based, as in the asymptotic formulas.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::dynamics::{cast_ray, reflect, state_from_collision, step, Collision, State, TrajectorySegment};
use crate::error::{Error, Result};
use crate::geometry::{CuspSpec, CuspWall, PieceKind, Side, TableSpec, WallProfile};
use crate::numeric::{gauss_legendre8, integrate, linear_fit};
use crate::stable::i_one;
use crate::stable_stats::task_rng;

/// `N'` above which [`Precision::Auto`] reruns a launch in double-double.
pub const EXTENDED_THRESHOLD: usize = 10_000;

/// Arithmetic used by the cusp-local stepper.
pub trait Scalar:
    Copy
    + PartialOrd
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EPS: f64;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, e: f64) -> Self;
}

impl Scalar for f64 {
    const EPS: f64 = f64::EPSILON;
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
}

impl Scalar for TwoFloat {
    const EPS: f64 = 1e-31;
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn sqrt(self) -> Self {
        TwoFloat::sqrt(self)
    }
    fn abs(self) -> Self {
        TwoFloat::abs(&self)
    }
    fn powi(self, n: i32) -> Self {
        TwoFloat::powi(self, n)
    }
    fn powf(self, e: f64) -> Self {
        TwoFloat::powf(self, TwoFloat::from(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    Extended,
    /// Double, rerun in extended precision when `N' > EXTENDED_THRESHOLD`.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerOptions {
    /// Minimum number of reflections on the first-hit wall.
    pub n0: usize,
    pub gamma_bar: f64,
    /// `ñ₂` is the last index with `v_n < π/2 - eta1`.
    pub eta1: f64,
    pub max_reflections: usize,
}

impl Default for CornerOptions {
    fn default() -> Self {
        CornerOptions { n0: 20, gamma_bar: 0.3, eta1: 0.1, max_reflections: 10_000_000 }
    }
}

/// Straight entry aimed near the vertex: the ray starts at local abscissa
/// `x0` on the line `y = x tan θ + offset` and moves towards the vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Launch {
    pub theta: f64,
    pub offset: f64,
    pub x0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CornerSeries {
    pub cusp_label: usize,
    /// Side of the first-hit wall.
    pub first_side: Side,
    pub beta: f64,
    pub c_bar: f64,
    /// Reflections on the first-hit wall.
    pub n: usize,
    /// All reflections in the cusp, `2N - 1` or `2N`.
    pub n_prime: usize,
    pub s: Vec<f64>,
    pub s_prime: Vec<f64>,
    pub gamma: Vec<f64>,
    pub gamma_prime: Vec<f64>,
    pub alpha_seq: Vec<f64>,
    pub alpha_prime: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    pub h: Vec<f64>,
    pub h_prime: Vec<f64>,
    /// Free path from the `n`-th `A` reflection to the `n`-th `B` reflection.
    pub tau: Vec<f64>,
    /// Free path from the `n`-th `B` reflection to the next `A` reflection.
    pub tau_prime: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub n_tilde2: usize,
    pub c_n: f64,
    pub c_n_prime: f64,
    pub precision: Precision,
}

/// One reflection in the `A` frame: outgoing unit velocity `(vx, vy)` and the
/// free path travelled since the previous reflection.
#[derive(Debug, Clone, Copy)]
struct Reflection {
    on_a: bool,
    s: f64,
    vx: f64,
    vy: f64,
    path: f64,
}

#[derive(Debug, Clone, Copy)]
struct LocalWalls {
    beta: f64,
    c: [f64; 2],
    int_beta: Option<i32>,
}

impl LocalWalls {
    fn new(beta: f64, c: [f64; 2]) -> Self {
        let int_beta = if (beta - beta.round()).abs() < 1e-15 { Some(beta.round() as i32) } else { None };
        LocalWalls { beta, c, int_beta }
    }

    #[inline]
    fn pow_bm1<T: Scalar>(&self, x: T) -> T {
        match self.int_beta {
            Some(b) => x.powi(b - 1),
            None => x.powf(self.beta - 1.0),
        }
    }

    #[inline]
    fn z<T: Scalar>(&self, w: usize, x: T) -> T {
        T::from(self.c[w] / self.beta) * x * self.pow_bm1(x)
    }

    #[inline]
    fn dz<T: Scalar>(&self, w: usize, x: T) -> T {
        T::from(self.c[w]) * self.pow_bm1(x)
    }

    /// First `t > 0` where the ray meets wall `w` placed at `y = -sigma z_w(x)`.
    /// `g(t) = z_w(x(t)) + sigma y(t)` is convex and positive at `t = 0`, so
    /// Newton from `t = 0` increases monotonically to its first root. A ray
    /// that only meets the wall at the vertex counts as a miss when
    /// `vertex_miss` is set and as an error otherwise.
    fn first_root<T: Scalar>(
        &self,
        w: usize,
        sigma: f64,
        p: (T, T),
        d: (T, T),
        vertex_miss: bool,
    ) -> Result<Option<T>> {
        let zero = T::from(0.0);
        let sg = T::from(sigma);
        let tol = T::from(4.0 * T::EPS);
        let mut t = zero;
        for _ in 0..200 {
            let xt = p.0 + t * d.0;
            if !(xt > zero) {
                if vertex_miss {
                    return Ok(None);
                }
                return Err(Error::Numerical("local ray passed the cusp vertex".into()));
            }
            let g = self.z(w, xt) + sg * (p.1 + t * d.1);
            let dg = self.dz(w, xt) * d.0 + sg * d.1;
            if !(dg < zero) {
                return Ok(None);
            }
            let dt = -g / dg;
            if dt <= tol * t {
                return Ok(Some(if dt > zero { t + dt } else { t }));
            }
            t = t + dt;
        }
        Err(Error::Numerical("local wall intersection did not converge".into()))
    }

    /// Runs the local model from an interior point until the orbit leaves
    /// `x <= x_exit`. Returns the reflections and whether wall 0 was hit first.
    fn run<T: Scalar>(
        &self,
        start: (f64, f64),
        dir: (f64, f64),
        x_exit: f64,
        max: usize,
    ) -> Result<(Vec<Reflection>, bool)> {
        let mut p = (T::from(start.0), T::from(start.1));
        let mut d = (T::from(dir.0), T::from(dir.1));
        // `up` sits at y = +z, `lo` at y = -z
        let (mut up, mut lo) = (0usize, 1usize);
        let hit_up = self.first_root(up, -1.0, p, d, true)?;
        let hit_lo = self.first_root(lo, 1.0, p, d, true)?;
        let mut first_t = match (hit_up, hit_lo) {
            (None, None) => return Err(Error::Domain("launch misses both cusp walls".into())),
            (Some(a), None) => {
                // flip so that the wall about to be hit is the lower one
                p.1 = -p.1;
                d.1 = -d.1;
                std::mem::swap(&mut up, &mut lo);
                Some(a)
            }
            (None, Some(b)) => Some(b),
            (Some(a), Some(b)) => {
                if a < b {
                    p.1 = -p.1;
                    d.1 = -d.1;
                    std::mem::swap(&mut up, &mut lo);
                    Some(a)
                } else {
                    Some(b)
                }
            }
        };
        let first_wall = lo;
        let mut out = Vec::new();
        loop {
            let t = match first_t.take() {
                Some(t) => t,
                None => match self.first_root(lo, 1.0, p, d, false)? {
                    Some(t) => t,
                    None => break,
                },
            };
            let x1 = p.0 + t * d.0;
            if x1.to_f64() > x_exit {
                break;
            }
            if out.len() >= max {
                return Err(Error::Numerical(format!("corner series exceeded {max} reflections")));
            }
            let slope = self.dz(lo, x1);
            let n2 = T::from(1.0) + slope * slope;
            let vt = d.0 - slope * d.1;
            let two = T::from(2.0);
            let mut vx = two * vt / n2 - d.0;
            let mut vy = -(two * vt * slope) / n2 - d.1;
            let norm = (vx * vx + vy * vy).sqrt();
            vx = vx / norm;
            vy = vy / norm;
            // the wall just hit becomes the upper one
            p = (x1, self.z(lo, x1));
            d = (vx, -vy);
            std::mem::swap(&mut up, &mut lo);
            let on_a = up == first_wall;
            let vy_a = if on_a { d.1 } else { -d.1 };
            out.push(Reflection { on_a, s: x1.to_f64(), vx: d.0.to_f64(), vy: vy_a.to_f64(), path: t.to_f64() });
        }
        Ok((out, first_wall == 0))
    }
}

fn other(side: Side) -> Side {
    match side {
        Side::Plus => Side::Minus,
        Side::Minus => Side::Plus,
    }
}

/// Builds all sequences from alternating reflections, `A` first.
fn build_series(
    spec: &CuspSpec,
    first_side: Side,
    refl: &[Reflection],
    offset: usize,
    opts: &CornerOptions,
    precision: Precision,
) -> Result<CornerSeries> {
    for (k, r) in refl.iter().enumerate() {
        if r.on_a != (k % 2 == 0) {
            return Err(Error::Extraction { index: offset + k, msg: "two consecutive reflections on one wall".into() });
        }
    }
    let n = refl.len().div_ceil(2);
    if n < opts.n0.max(3) {
        return Err(Error::Extraction {
            index: offset,
            msg: format!("only {n} reflections on the first wall (need {})", opts.n0),
        });
    }
    let ca = spec.coefficient(first_side);
    let cb = spec.coefficient(other(first_side));
    let smax = refl.iter().map(|r| r.s).fold(0.0, f64::max).max(spec.wall_length);
    let pa = WallProfile::new(spec.beta, ca, smax);
    let pb = WallProfile::new(spec.beta, cb, smax);
    let beta = spec.beta;
    let mut sr = CornerSeries {
        cusp_label: spec.label,
        first_side,
        beta,
        c_bar: spec.c_bar(),
        n,
        n_prime: refl.len(),
        s: Vec::with_capacity(n),
        s_prime: Vec::with_capacity(n),
        gamma: Vec::with_capacity(n),
        gamma_prime: Vec::with_capacity(n),
        alpha_seq: Vec::with_capacity(n),
        alpha_prime: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        v_prime: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        h_prime: Vec::with_capacity(n),
        tau: Vec::with_capacity(n),
        tau_prime: Vec::with_capacity(n),
        n1: 0,
        n2: 0,
        n3: 0,
        n_tilde2: 0,
        c_n: f64::NAN,
        c_n_prime: f64::NAN,
        precision,
    };
    for (k, r) in refl.iter().enumerate() {
        if r.on_a {
            let dz = pa.dz(r.s);
            let nt = (1.0 + dz * dz).sqrt();
            let cross = (r.vx * dz - r.vy).abs() / nt;
            let dot = (r.vx + r.vy * dz).abs() / nt;
            sr.s.push(r.s);
            sr.alpha_seq.push(dz.atan());
            sr.v.push(angle((-r.vy).atan2(-r.vx)));
            sr.gamma.push(cross.atan2(dot));
            sr.h.push(pa.arclength(r.s).powf(beta) * cross);
            if k > 0 {
                sr.tau_prime.push(r.path);
            }
        } else {
            let dz = pb.dz(r.s);
            let nt = (1.0 + dz * dz).sqrt();
            let cross = (r.vx * dz + r.vy).abs() / nt;
            let dot = (r.vx - r.vy * dz).abs() / nt;
            sr.s_prime.push(r.s);
            sr.alpha_prime.push(dz.atan());
            sr.v_prime.push(angle(r.vy.atan2(-r.vx)));
            sr.gamma_prime.push(cross.atan2(dot));
            sr.h_prime.push(pb.arclength(r.s).powf(beta) * cross);
            sr.tau.push(r.path);
        }
    }
    let (n1, n2, n3) = segment_series(&sr, opts.gamma_bar)?;
    sr.n1 = n1;
    sr.n2 = n2;
    sr.n3 = n3;
    let lim = FRAC_PI_2 - opts.eta1;
    sr.n_tilde2 = sr.v.iter().rposition(|&v| v < lim).map(|i| i + 1).unwrap_or(0);
    if sr.n_tilde2 == 0 {
        return Err(Error::Segmentation("no reflection with v_n below pi/2 - eta1".into()));
    }
    sr.c_n = sr.h[sr.n_tilde2 - 1];
    sr.c_n_prime = sr.v_prime.iter().rposition(|&v| v < lim).map(|i| sr.h_prime[i]).unwrap_or(f64::NAN);
    Ok(sr)
}

/// Outgoing angles lie in `(0, π + α)`, so they are taken in `[0, 2π)`.
fn angle(a: f64) -> f64 {
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

/// `(N1, N2, N3)`: the deepest reflection and the ends of the entering and
/// turning periods.
pub fn segment_series(series: &CornerSeries, gamma_bar: f64) -> Result<(usize, usize, usize)> {
    if !(gamma_bar > 0.0 && gamma_bar < std::f64::consts::FRAC_PI_4) {
        return Err(Error::Domain(format!("gamma_bar {gamma_bar} outside (0, pi/4)")));
    }
    let a = &series.alpha_seq;
    let mut i2 = 0;
    for (i, &x) in a.iter().enumerate() {
        if x < a[i2] {
            i2 = i;
        }
    }
    let n1 = series.gamma[..=i2].iter().rposition(|&g| g < gamma_bar);
    let n3 = series.gamma[i2..].iter().rposition(|&g| g > gamma_bar);
    match (n1, n3) {
        (Some(i1), Some(j)) => Ok((i1 + 1, i2 + 1, i2 + j + 1)),
        _ => Err(Error::Segmentation(format!(
            "series of N = {} has no entering or turning period at gamma_bar = {gamma_bar}",
            series.n
        ))),
    }
}

/// Initial angle whose vertex-aimed launch gives roughly `n_target`
/// reflections on the first wall, from the first-hit invariant.
pub fn theta_for_reflections(spec: &CuspSpec, first_side: Side, n_target: f64, x0: f64) -> Result<f64> {
    if !(n_target >= 1.0) {
        return Err(Error::Domain(format!("target N = {n_target} must be >= 1")));
    }
    let beta = spec.beta;
    let alpha = spec.alpha();
    let ca = spec.coefficient(first_side);
    if !(ca > 0.0) {
        return Err(Error::Domain("first wall must have a positive coefficient".into()));
    }
    let target = (i_one(alpha) / (spec.c_bar() * 2.0 * n_target)).powf(alpha);
    let h = |theta: f64| {
        let t = theta.tan();
        let s1 = (beta * t / ca).powf(1.0 / (beta - 1.0));
        let gamma1 = (beta * t).atan() - theta;
        s1.powf(beta) * gamma1.sin()
    };
    let hi = (ca * x0.powf(beta - 1.0) / beta).atan() * 0.999;
    if h(hi) < target {
        return Err(Error::Domain(format!("N = {n_target} is too shallow for a launch from x0 = {x0}")));
    }
    let mut a = 1e-14f64.ln();
    let mut b = hi.ln();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if h(m.exp()) < target {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

fn launch_reflections(
    spec: &CuspSpec,
    first_side: Side,
    launch: &Launch,
    precision: Precision,
    max: usize,
) -> Result<(Vec<Reflection>, Side)> {
    if !(launch.x0 > 0.0 && launch.x0 <= spec.wall_length) {
        return Err(Error::Domain(format!("launch abscissa {} outside (0, {}]", launch.x0, spec.wall_length)));
    }
    let walls = LocalWalls::new(spec.beta, [spec.coefficient(first_side), spec.coefficient(other(first_side))]);
    let y0 = launch.x0 * launch.theta.tan() + launch.offset;
    let za = walls.z(0, launch.x0);
    let zb = walls.z(1, launch.x0);
    if !(y0 < za && y0 > -zb) {
        return Err(Error::Domain("launch point lies outside the cusp".into()));
    }
    let start = (launch.x0, y0);
    let dir = (-launch.theta.cos(), -launch.theta.sin());
    let (refl, zero_first) = match precision {
        Precision::Extended => walls.run::<TwoFloat>(start, dir, launch.x0, max)?,
        _ => walls.run::<f64>(start, dir, launch.x0, max)?,
    };
    let side = if zero_first { first_side } else { other(first_side) };
    Ok((refl, side))
}

/// Launches into the local cusp model and extracts the corner series.
pub fn launch_series(
    spec: &CuspSpec,
    first_side: Side,
    launch: &Launch,
    precision: Precision,
    opts: &CornerOptions,
) -> Result<CornerSeries> {
    let (refl, side) = launch_reflections(spec, first_side, launch, precision, opts.max_reflections)?;
    if precision == Precision::Auto && refl.len() > EXTENDED_THRESHOLD {
        return launch_series(spec, first_side, launch, Precision::Extended, opts);
    }
    let used = if precision == Precision::Auto { Precision::Double } else { precision };
    build_series(spec, side, &refl, 0, opts, used)
}

/// `count` launches with target `N` log-uniform in `n_range`, in task order.
pub fn launch_batch(
    spec: &CuspSpec,
    first_side: Side,
    n_range: (f64, f64),
    count: usize,
    seed: u64,
    precision: Precision,
    opts: &CornerOptions,
) -> Vec<Result<CornerSeries>> {
    let x0 = 0.9 * spec.wall_length;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(seed, i as u64);
            let u: f64 = rng.random();
            let n_target = (n_range.0.ln() + u * (n_range.1.ln() - n_range.0.ln())).exp();
            let theta = theta_for_reflections(spec, first_side, n_target, x0)?;
            // offsets up to a quarter of the first-hit height keep the entry natural
            let s1 = (spec.beta * theta.tan() / spec.coefficient(first_side)).powf(1.0 / (spec.beta - 1.0));
            let offset = (rng.random::<f64>() - 0.5) * 0.5 * theta.tan() * s1;
            launch_series(spec, first_side, &Launch { theta, offset, x0 }, precision, opts)
        })
        .collect()
}

fn cusp_walls(table: &TableSpec, label: usize) -> Result<(usize, usize, usize)> {
    let ci = table
        .cusps
        .iter()
        .position(|c| c.label == label)
        .ok_or_else(|| Error::Domain(format!("no cusp with label {label}")))?;
    let (wp, wm) = table.walls[ci];
    Ok((ci, wp, wm))
}

fn wall_of(table: &TableSpec, piece: usize) -> &CuspWall {
    match &table.pieces[piece].kind {
        PieceKind::Wall(w) => w,
        PieceKind::Arc(_) => unreachable!("cusp wall index points at an arc"),
    }
}

/// Runs the full table map from a vertex-aimed launch until the orbit leaves
/// the walls of the cusp (or returns beyond the launch abscissa).
pub fn table_launch(
    table: &TableSpec,
    label: usize,
    first_side: Side,
    launch: &Launch,
    max_steps: usize,
) -> Result<TrajectorySegment> {
    let (_, wp, wm) = cusp_walls(table, label)?;
    let wa = wall_of(table, if first_side == Side::Plus { wp } else { wm });
    let y0 = launch.x0 * launch.theta.tan() + launch.offset;
    let o = wa.vertex + wa.e_s * launch.x0 + wa.e_n * y0;
    let d = -(wa.e_s * launch.theta.cos() + wa.e_n * launch.theta.sin());
    let (piece, param, _) = cast_ray(table, o, d, None)?;
    let p = &table.pieces[piece];
    let vel = reflect(d, p.tangent(param).perp_cw())?;
    let mut st = State { piece, param, pos: p.point(param), vel: vel * (1.0 / vel.norm()) };
    let mut seg = TrajectorySegment::default();
    let inside = |st: &State| (st.piece == wp || st.piece == wm) && st.param <= launch.x0;
    while inside(&st) {
        let pc = &table.pieces[st.piece];
        let t = pc.tangent(st.param);
        let phi = st.vel.dot(t.perp_cw()).atan2(st.vel.dot(t));
        seg.collisions.push(Collision { r: pc.r_of_param(st.param), phi });
        if seg.collisions.len() > max_steps {
            return Err(Error::Numerical(format!("table launch exceeded {max_steps} steps")));
        }
        let (next, tau) = step(table, &st)?;
        if inside(&next) {
            seg.free_paths.push(tau);
        }
        st = next;
    }
    Ok(seg)
}

/// Corner series of the first run of consecutive reflections on the walls of
/// cusp `label` in a stored trajectory. A double bounce on one wall is
/// tolerated only as the first or last reflection of the run.
pub fn extract_corner_series(
    table: &TableSpec,
    label: usize,
    seg: &TrajectorySegment,
    opts: &CornerOptions,
) -> Result<CornerSeries> {
    let (ci, wp, wm) = cusp_walls(table, label)?;
    let on_cusp = |c: &Collision| {
        let i = table.piece_index(table.wrap(c.r));
        (i == wp || i == wm).then_some(i)
    };
    let start = seg
        .collisions
        .iter()
        .position(|c| on_cusp(c).is_some())
        .ok_or_else(|| Error::Extraction { index: 0, msg: format!("trajectory never reaches cusp {label}") })?;
    let mut end = start;
    while end < seg.collisions.len() && on_cusp(&seg.collisions[end]).is_some() {
        end += 1;
    }
    let mut lo = start;
    let mut hi = end;
    if hi - lo >= 2 && on_cusp(&seg.collisions[lo]) == on_cusp(&seg.collisions[lo + 1]) {
        lo += 1;
    }
    if hi - lo >= 2 && on_cusp(&seg.collisions[hi - 1]) == on_cusp(&seg.collisions[hi - 2]) {
        hi -= 1;
    }
    let first_piece = on_cusp(&seg.collisions[lo]).unwrap();
    let wa = wall_of(table, first_piece);
    let first_side = wa.side;
    let mut refl = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let c = seg.collisions[k];
        let st = state_from_collision(table, c)?;
        let w = wall_of(table, st.piece);
        let path = if k > lo { seg.free_paths.get(k - 1).copied().unwrap_or(f64::NAN) } else { 0.0 };
        refl.push(Reflection {
            on_a: st.piece == first_piece,
            s: st.param,
            vx: st.vel.dot(w.e_s),
            vy: st.vel.dot(wa.e_n),
            path,
        });
    }
    build_series(&table.cusps[ci], first_side, &refl, lo, opts, Precision::Double)
}

/// Structural checks on one series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesChecks {
    pub n2_balanced: bool,
    pub n13_balanced: bool,
    pub alpha_decreasing: bool,
    pub gamma_increasing: bool,
    /// Max residual of `v'_n = v_n + 2α'_n` and `v_{n+1} = v'_n + 2α_{n+1}`.
    pub v_recurrence: f64,
    /// Max residual of `γ_{n+1} = γ'_n + α'_n + α_{n+1}` while all angles are
    /// measured from the vertex-pointing tangent.
    pub gamma_recurrence: f64,
    /// `Σ_{n ≤ N2} α_n ≤ v_{N2}/2`.
    pub alpha_sum_bounded: bool,
    /// `v_{N2} ≤ π/2`; the deepest reflection can sit `O(1/N)` past the turn.
    pub turn_at_n2: bool,
    /// Max relative error of `τ_n = (z_A(s_n) + z_B(s'_n)) / sin v_n`.
    pub free_path_residual: f64,
}

pub fn check_series(series: &CornerSeries) -> SeriesChecks {
    let n = series.n;
    let i2 = series.n2 - 1;
    let mut vr: f64 = 0.0;
    let mut gr: f64 = 0.0;
    for k in 0..series.v_prime.len() {
        vr = vr.max((series.v_prime[k] - series.v[k] - 2.0 * series.alpha_prime[k]).abs());
        if k + 1 < n {
            vr = vr.max((series.v[k + 1] - series.v_prime[k] - 2.0 * series.alpha_seq[k + 1]).abs());
            let from_tangent = series.v[k + 1] - series.alpha_seq[k + 1] <= FRAC_PI_2
                && series.v_prime[k] - series.alpha_prime[k] <= FRAC_PI_2;
            if from_tangent {
                gr = gr.max(
                    (series.gamma[k + 1] - series.gamma_prime[k] - series.alpha_prime[k] - series.alpha_seq[k + 1])
                        .abs(),
                );
            }
        }
    }
    let alpha_sum: f64 = series.alpha_seq[..=i2].iter().sum();
    SeriesChecks {
        n2_balanced: (series.n2 as f64 - n as f64 / 2.0).abs() <= 2.0,
        n13_balanced: (series.n3 as f64 + series.n1 as f64 - n as f64).abs() <= 6.0,
        alpha_decreasing: series.alpha_seq[..=i2].windows(2).all(|w| w[1] <= w[0]),
        gamma_increasing: series.gamma[..=i2].windows(2).all(|w| w[1] >= w[0]),
        v_recurrence: vr,
        gamma_recurrence: gr,
        alpha_sum_bounded: alpha_sum <= series.v[i2] / 2.0,
        turn_at_n2: series.v[i2] <= FRAC_PI_2,
        free_path_residual: free_path_residual(series),
    }
}

fn free_path_residual(series: &CornerSeries) -> f64 {
    let (b, cb) = (series.beta, side_coefficients(series));
    let z = |c: f64, s: f64| c * s.powf(b) / b;
    let mut worst: f64 = 0.0;
    for k in 0..series.tau.len() {
        let pred = (z(cb.0, series.s[k]) + z(cb.1, series.s_prime[k])) / series.v[k].sin();
        worst = worst.max((series.tau[k] - pred).abs() / pred);
    }
    worst
}

/// `(c_A, c_B)` recovered from the first reflections' wall slopes.
fn side_coefficients(series: &CornerSeries) -> (f64, f64) {
    let b = series.beta;
    let ca = series.alpha_seq[0].tan() / series.s[0].powf(b - 1.0);
    let cb = series.alpha_prime[0].tan() / series.s_prime[0].powf(b - 1.0);
    (ca, cb)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HInvariance {
    pub c_n: f64,
    pub c_n_prime: f64,
    /// `max |H_n - C_N| / C_N` over `[N1, N3]`.
    pub max_rel_dev_turning: f64,
    /// The same for `H'_n` against `C'_N`.
    pub max_rel_dev_turning_prime: f64,
    /// Over the whole series; of order one near `n = 2`.
    pub max_rel_dev_full: f64,
}

pub fn h_invariance(series: &CornerSeries) -> HInvariance {
    let c = series.c_n;
    let cp = series.c_n_prime;
    let dev = |h: &[f64], c: f64| h.iter().map(|x| (x - c).abs() / c).fold(0.0, f64::max);
    let (a, b) = (series.n1 - 1, series.n3.min(series.h.len()));
    let bp = series.n3.min(series.h_prime.len());
    HInvariance {
        c_n: c,
        c_n_prime: cp,
        max_rel_dev_turning: dev(&series.h[a..b], c),
        max_rel_dev_turning_prime: if a < bp { dev(&series.h_prime[a..bp], cp) } else { f64::NAN },
        max_rel_dev_full: dev(&series.h, c),
    }
}

/// Batch fit of the turning-period deviation `dev ≈ K/N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationFit {
    /// `max_batch N · dev`.
    pub k: f64,
    /// Log-log slope of `dev` against `N`.
    pub slope: f64,
    pub slope_se: f64,
    pub series: usize,
}

pub fn deviation_fit(batch: &[CornerSeries]) -> Result<DeviationFit> {
    if batch.len() < 3 {
        return Err(Error::Inconclusive("need at least 3 series".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut k: f64 = 0.0;
    for s in batch {
        let d = h_invariance(s).max_rel_dev_turning;
        k = k.max(s.n as f64 * d);
        xs.push((s.n as f64).ln());
        ys.push(d.max(f64::MIN_POSITIVE).ln());
    }
    let f = linear_fit(&xs, &ys).ok_or_else(|| Error::Inconclusive("degenerate N range".into()))?;
    Ok(DeviationFit { k, slope: f.slope, slope_se: f.slope_se, series: batch.len() })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingFit {
    pub name: String,
    pub expected: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub fits: Vec<ScalingFit>,
    /// True when the batch spans less than two decades of `N`.
    pub inconclusive: bool,
}

impl ScalingReport {
    pub fn get(&self, name: &str) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.name == name)
    }
}

/// Log-log regressions of the power laws of the entering and turning periods.
pub fn check_scalings(batch: &[CornerSeries]) -> Result<ScalingReport> {
    if batch.len() < 3 {
        return Err(Error::Inconclusive("need at least 3 series".into()));
    }
    let beta = batch[0].beta;
    if batch.iter().any(|s| s.beta != beta) {
        return Err(Error::Domain("batch mixes cusp orders".into()));
    }
    let nmin = batch.iter().map(|s| s.n).min().unwrap() as f64;
    let nmax = batch.iter().map(|s| s.n).max().unwrap() as f64;
    let e = 2.0 * beta - 1.0;
    let a = beta / (beta - 1.0);
    let mut fits = Vec::new();
    let mut push = |name: &str, expected: f64, xs: Vec<f64>, ys: Vec<f64>| {
        if let Some(f) = linear_fit(&xs, &ys) {
            fits.push(ScalingFit {
                name: name.into(),
                expected,
                slope: f.slope,
                slope_se: f.slope_se,
                points: xs.len(),
            });
        }
    };
    let (mut xs, mut ys, mut xg, mut yg) = (vec![], vec![], vec![], vec![]);
    for s in batch {
        let nf = s.n as f64;
        for i in 1..s.n1 {
            let n = (i + 1) as f64;
            xs.push(-(n * nf.powf(a)).ln() / e);
            ys.push(s.s[i].ln());
            xg.push((n / nf).ln());
            yg.push(s.gamma[i].ln());
        }
    }
    push("entering_s", 1.0, xs, ys);
    push("entering_gamma", beta / e, xg, yg);
    let ln_n: Vec<f64> = batch.iter().map(|s| (s.n as f64).ln()).collect();
    push("turning_s", -1.0 / (beta - 1.0), ln_n.clone(), batch.iter().map(|s| s.s[s.n2 - 1].ln()).collect());
    push("s2", -beta / (e * (beta - 1.0)), ln_n.clone(), batch.iter().map(|s| s.s[1].ln()).collect());
    push("gamma2", -beta / e, ln_n.clone(), batch.iter().map(|s| s.gamma[1].ln()).collect());
    push("c_n", -a, ln_n, batch.iter().map(|s| s.c_n.ln()).collect());
    Ok(ScalingReport { fits, inconclusive: nmax / nmin < 100.0 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnScaling {
    /// Intercept of `C_N N'^α` regressed on `ln N' / N'`.
    pub limit_estimate: f64,
    pub limit_se: f64,
    /// `c̄^{-α} I₁^α`.
    pub target: f64,
    pub slope: f64,
    /// RMS residual relative to the target.
    pub residual: f64,
    pub flagged: bool,
}

pub fn cn_target(beta: f64, c_bar: f64) -> f64 {
    let a = beta / (beta - 1.0);
    c_bar.powf(-a) * i_one(a).powf(a)
}

/// Fits `C_N N'^α = L + b ln N' / N'`; flagged when the relative RMS residual
/// exceeds `max_residual`.
pub fn cn_scaling(batch: &[CornerSeries], max_residual: f64) -> Result<CnScaling> {
    if batch.len() < 3 {
        return Err(Error::Inconclusive("need at least 3 series".into()));
    }
    let beta = batch[0].beta;
    let c_bar = batch[0].c_bar;
    if batch.iter().any(|s| s.beta != beta || s.c_bar != c_bar) {
        return Err(Error::Domain("batch mixes cusp geometries".into()));
    }
    let a = beta / (beta - 1.0);
    let xs: Vec<f64> = batch.iter().map(|s| (s.n_prime as f64).ln() / s.n_prime as f64).collect();
    let ys: Vec<f64> = batch.iter().map(|s| s.c_n * (s.n_prime as f64).powf(a)).collect();
    let f = linear_fit(&xs, &ys).ok_or_else(|| Error::Inconclusive("degenerate N' range".into()))?;
    let target = cn_target(beta, c_bar);
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - f.intercept - f.slope * x).powi(2)).sum();
    let residual = (rss / xs.len() as f64).sqrt() / target;
    Ok(CnScaling {
        limit_estimate: f.intercept,
        limit_se: f.intercept_se,
        target,
        slope: f.slope,
        residual,
        flagged: residual > max_residual,
    })
}

/// `w_n = ∫_0^{γ_n} sin^{1-1/β} u du` for `n = 1..=N2`.
pub fn w_sequence(series: &CornerSeries) -> Vec<f64> {
    let e = 1.0 - 1.0 / series.beta;
    let f = |u: f64| u.sin().powf(e);
    let mut out = Vec::with_capacity(series.n2);
    let mut w = integrate(f, 0.0, series.gamma[0], 1e-14);
    out.push(w);
    for k in 1..series.n2 {
        w += gauss_legendre8(f, series.gamma[k - 1], series.gamma[k]);
        out.push(w);
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WSlope {
    pub slope: f64,
    pub slope_se: f64,
    /// `2 I₁`.
    pub expected: f64,
}

/// Pooled regression of `w_n` on `n / N` over the entering and turning periods.
pub fn w_slope(batch: &[CornerSeries]) -> Result<WSlope> {
    let beta = batch.first().ok_or_else(|| Error::Inconclusive("empty batch".into()))?.beta;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in batch {
        for (i, w) in w_sequence(s).into_iter().enumerate() {
            xs.push((i + 1) as f64 / s.n as f64);
            ys.push(w);
        }
    }
    let f = linear_fit(&xs, &ys).ok_or_else(|| Error::Inconclusive("degenerate w_n data".into()))?;
    Ok(WSlope { slope: f.slope, slope_se: f.slope_se, expected: 2.0 * i_one(beta / (beta - 1.0)) })
}
