//! Billiard tables built from dispersing circular arcs and cusp walls.
//!
//! Orientation: the boundary is traversed clockwise, so the interior lies to
//! the right of the tangent. The inward normal is the tangent rotated by -90
//! degrees. A cusp with vertex `P` and opening axis `e_s` has its walls at
//! `P + s e_s ± z(s) e_perp` with `z(s) = c s^β / β`, where `e_perp` is `e_s`
//! rotated by +90 degrees. The `plus` wall sits on the `+e_perp` side and is
//! the wall that follows the vertex in abscissa order.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::dynamics::{next_collision, Collision};
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre8, Vec2};

/// Distance (in parameter units) from a piece endpoint below which a hit is
/// treated as landing on a corner or cusp vertex.
pub const SINGULAR_TOL: f64 = 1e-10;

const ARCLENGTH_PANELS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspSpec {
    pub label: usize,
    pub beta: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub epsilon: f64,
    pub vertex_abscissa: f64,
    /// Range of `s` over which the walls follow the local model.
    pub wall_length: f64,
}

impl CuspSpec {
    pub fn c_bar(&self) -> f64 {
        0.5 * (self.c_plus + self.c_minus)
    }

    pub fn coefficient(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.c_plus,
            Side::Minus => self.c_minus,
        }
    }

    /// Stability index `β/(β-1)` attached to this cusp alone.
    pub fn alpha(&self) -> f64 {
        self.beta / (self.beta - 1.0)
    }

    fn check(&self) -> Result<()> {
        if !(self.beta >= 2.0) {
            return Err(Error::Construction(format!("cusp {}: beta {} < 2", self.label, self.beta)));
        }
        if self.c_plus < 0.0 || self.c_minus < 0.0 || self.c_bar() <= 0.0 {
            return Err(Error::Construction(format!(
                "cusp {}: coefficients ({}, {}) must be nonnegative and not both zero",
                self.label, self.c_plus, self.c_minus
            )));
        }
        if !(self.epsilon > 0.0) || !(self.wall_length > 0.0) {
            return Err(Error::Construction(format!("cusp {}: epsilon and wall length must be positive", self.label)));
        }
        Ok(())
    }
}

/// Local model `z(s) = c s^β/β` and its derivative.
pub fn cusp_wall(spec: &CuspSpec, side: Side, s: f64) -> Result<(f64, f64)> {
    if !(0.0..=spec.wall_length).contains(&s) {
        return Err(Error::Domain(format!("s = {s} outside [0, {}]", spec.wall_length)));
    }
    let c = spec.coefficient(side);
    let p = s.powf(spec.beta - 1.0);
    Ok((c * s * p / spec.beta, c * p))
}

/// Profile of one cusp wall with a cumulative arclength table.
#[derive(Debug, Clone)]
pub struct WallProfile {
    pub beta: f64,
    pub c: f64,
    pub s_max: f64,
    int_exp: Option<i32>,
    /// `k` when `β - 1 = k + 1/2`.
    half_exp: Option<i32>,
    panel: f64,
    cum: Vec<f64>,
}

impl WallProfile {
    pub fn new(beta: f64, c: f64, s_max: f64) -> Self {
        let e = beta - 1.0;
        let int_exp = if (e - e.round()).abs() < 1e-15 { Some(e.round() as i32) } else { None };
        let h = e - 0.5;
        let half_exp = if int_exp.is_none() && (h - h.round()).abs() < 1e-15 { Some(h.round() as i32) } else { None };
        let mut w =
            WallProfile { beta, c, s_max, int_exp, half_exp, panel: s_max / ARCLENGTH_PANELS as f64, cum: Vec::new() };
        let mut cum = Vec::with_capacity(ARCLENGTH_PANELS + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for k in 0..ARCLENGTH_PANELS {
            let a = k as f64 * w.panel;
            acc += gauss_legendre8(|u| w.speed(u), a, a + w.panel);
            cum.push(acc);
        }
        w.cum = cum;
        w
    }

    /// `s^(β-1)`.
    #[inline]
    pub fn pow_bm1(&self, s: f64) -> f64 {
        match self.int_exp {
            Some(1) => s,
            Some(2) => s * s,
            Some(3) => s * s * s,
            Some(k) => s.powi(k),
            None => match self.half_exp {
                Some(1) => s * s.sqrt(),
                Some(k) => s.powi(k) * s.sqrt(),
                None => s.powf(self.beta - 1.0),
            },
        }
    }

    /// Inverse of `s -> s^(β-1)`.
    #[inline]
    pub fn root_bm1(&self, x: f64) -> f64 {
        match self.int_exp {
            Some(1) => x,
            Some(2) => x.sqrt(),
            Some(3) => x.cbrt(),
            None if self.half_exp == Some(1) => {
                let c = x.cbrt();
                c * c
            }
            _ => x.powf(1.0 / (self.beta - 1.0)),
        }
    }

    #[inline]
    pub fn z(&self, s: f64) -> f64 {
        self.c * s * self.pow_bm1(s) / self.beta
    }

    #[inline]
    pub fn dz(&self, s: f64) -> f64 {
        self.c * self.pow_bm1(s)
    }

    #[inline]
    pub fn ddz(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return if self.beta == 2.0 { self.c } else { 0.0 };
        }
        self.c * (self.beta - 1.0) * self.pow_bm1(s) / s
    }

    #[inline]
    fn speed(&self, s: f64) -> f64 {
        let d = self.dz(s);
        (1.0 + d * d).sqrt()
    }

    pub fn curvature(&self, s: f64) -> f64 {
        let d = self.dz(s);
        self.ddz(s) / (1.0 + d * d).powf(1.5)
    }

    /// Arclength from the vertex to local coordinate `s`.
    pub fn arclength(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let k = ((s / self.panel) as usize).min(ARCLENGTH_PANELS - 1);
        let a = k as f64 * self.panel;
        self.cum[k] + gauss_legendre8(|u| self.speed(u), a, s)
    }

    pub fn total_length(&self) -> f64 {
        self.cum[ARCLENGTH_PANELS]
    }

    /// Inverse of [`arclength`](Self::arclength) by Newton iteration.
    pub fn s_of_arclength(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        let mut s = l.min(self.s_max);
        for _ in 0..50 {
            let f = self.arclength(s) - l;
            let step = f / self.speed(s);
            s -= step;
            if step.abs() <= 1e-16 * (1.0 + s.abs()) {
                break;
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct CuspWall {
    /// Index into `TableSpec::cusps`.
    pub cusp: usize,
    pub side: Side,
    pub vertex: Vec2,
    pub e_s: Vec2,
    pub e_n: Vec2,
    pub profile: WallProfile,
    /// True when the abscissa increases with `s` (the wall leaves the vertex).
    pub outward: bool,
    /// Local coordinate where the cusp neighbourhood ends; `INFINITY` when the
    /// neighbourhood covers the whole wall.
    pub s_eps: f64,
}

impl CuspWall {
    #[inline]
    pub fn point(&self, s: f64) -> Vec2 {
        self.vertex + self.e_s * s + self.e_n * self.profile.z(s)
    }

    /// Unit tangent in the direction of increasing abscissa.
    #[inline]
    pub fn tangent(&self, s: f64) -> Vec2 {
        let t = (self.e_s + self.e_n * self.profile.dz(s)).normalized();
        if self.outward {
            t
        } else {
            -t
        }
    }

    #[inline]
    pub fn to_local(&self, p: Vec2) -> (f64, f64) {
        let q = p - self.vertex;
        (q.dot(self.e_s), q.dot(self.e_n))
    }
}

#[derive(Debug, Clone)]
pub struct CircularArc {
    pub centre: Vec2,
    pub radius: f64,
    pub theta0: f64,
    /// Signed swept angle: positive for counterclockwise traversal (dispersing).
    pub sweep: f64,
}

impl CircularArc {
    /// Arc from `x` to `y` whose midpoint sits at distance `|bulge|` from the
    /// chord, toward the interior (dispersing) when `bulge > 0`.
    pub fn through(x: Vec2, y: Vec2, bulge: f64) -> Result<Self> {
        let chord = y - x;
        let l = chord.norm();
        let h = bulge.abs();
        if !(h > 0.0) || h >= 0.5 * l {
            return Err(Error::Construction(format!(
                "arc bulge {bulge} must satisfy 0 < |bulge| < chord/2 = {}",
                0.5 * l
            )));
        }
        let radius = (h * h + 0.25 * l * l) / (2.0 * h);
        let left = chord.normalized().perp();
        let mid = (x + y) * 0.5;
        let sign = bulge.signum();
        let centre = mid + left * (sign * (radius - h));
        let a0 = x - centre;
        let a1 = y - centre;
        let theta0 = a0.y.atan2(a0.x);
        let mut delta = a1.y.atan2(a1.x) - theta0;
        if sign > 0.0 {
            while delta <= 0.0 {
                delta += 2.0 * PI;
            }
        } else {
            while delta >= 0.0 {
                delta -= 2.0 * PI;
            }
        }
        Ok(CircularArc { centre, radius, theta0, sweep: delta })
    }

    pub fn length(&self) -> f64 {
        self.radius * self.sweep.abs()
    }

    #[inline]
    fn sign(&self) -> f64 {
        self.sweep.signum()
    }

    #[inline]
    pub fn angle(&self, u: f64) -> f64 {
        self.theta0 + self.sign() * u / self.radius
    }

    #[inline]
    pub fn point(&self, u: f64) -> Vec2 {
        self.centre + Vec2::from_angle(self.angle(u)) * self.radius
    }

    #[inline]
    pub fn tangent(&self, u: f64) -> Vec2 {
        Vec2::from_angle(self.angle(u)).perp() * self.sign()
    }

    pub fn curvature(&self) -> f64 {
        self.sign() / self.radius
    }

    /// Arclength parameter of a point on the supporting circle, or `None` when
    /// it lies outside the swept range.
    #[inline]
    pub fn param_of(&self, p: Vec2) -> Option<f64> {
        let q = p - self.centre;
        let u0 = Vec2::from_angle(self.theta0);
        let mut rel = self.sign() * u0.cross(q).atan2(u0.dot(q));
        if rel < -1e-12 {
            rel += 2.0 * PI;
        }
        let u = rel.max(0.0) * self.radius;
        if u <= self.length() * (1.0 + 1e-14) {
            Some(u.min(self.length()))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub enum PieceKind {
    Arc(CircularArc),
    Wall(CuspWall),
}

#[derive(Debug, Clone)]
pub struct BoundaryPiece {
    pub kind: PieceKind,
    pub r_lo: f64,
    pub r_hi: f64,
    /// Axis-aligned bounding box (min corner, max corner).
    pub bbox: (Vec2, Vec2),
}

impl BoundaryPiece {
    pub fn length(&self) -> f64 {
        self.r_hi - self.r_lo
    }

    /// Local parameter (arc offset or wall `s`) for abscissa `r` in the span.
    pub fn param_of_r(&self, r: f64) -> f64 {
        match &self.kind {
            PieceKind::Arc(_) => (r - self.r_lo).clamp(0.0, self.length()),
            PieceKind::Wall(w) => {
                let l = if w.outward { r - self.r_lo } else { self.r_hi - r };
                w.profile.s_of_arclength(l.clamp(0.0, self.length()))
            }
        }
    }

    pub fn r_of_param(&self, p: f64) -> f64 {
        match &self.kind {
            PieceKind::Arc(_) => self.r_lo + p,
            PieceKind::Wall(w) => {
                let l = w.profile.arclength(p);
                if w.outward {
                    self.r_lo + l
                } else {
                    self.r_hi - l
                }
            }
        }
    }

    /// Distance of the parameter from the ends of its range.
    pub fn param_margin(&self, p: f64) -> f64 {
        match &self.kind {
            PieceKind::Arc(a) => p.min(a.length() - p),
            PieceKind::Wall(w) => p.min(w.profile.s_max - p),
        }
    }

    #[inline]
    pub fn point(&self, p: f64) -> Vec2 {
        match &self.kind {
            PieceKind::Arc(a) => a.point(p),
            PieceKind::Wall(w) => w.point(p),
        }
    }

    #[inline]
    pub fn tangent(&self, p: f64) -> Vec2 {
        match &self.kind {
            PieceKind::Arc(a) => a.tangent(p),
            PieceKind::Wall(w) => w.tangent(p),
        }
    }

    pub fn curvature(&self, p: f64) -> f64 {
        match &self.kind {
            PieceKind::Arc(a) => a.curvature(),
            PieceKind::Wall(w) => w.profile.curvature(p),
        }
    }

    pub fn is_dispersing(&self) -> bool {
        match &self.kind {
            PieceKind::Arc(a) => a.sweep > 0.0,
            PieceKind::Wall(w) => w.profile.c >= 0.0,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            PieceKind::Arc(a) => format!(
                "arc     r=[{:.6}, {:.6}] centre=({:.6}, {:.6}) R={:.6} curvature={:.6}",
                self.r_lo,
                self.r_hi,
                a.centre.x,
                a.centre.y,
                a.radius,
                a.curvature()
            ),
            PieceKind::Wall(w) => format!(
                "wall    r=[{:.6}, {:.6}] cusp={} side={:?} beta={} c={} s_max={:.6}",
                self.r_lo,
                self.r_hi,
                w.cusp + 1,
                w.side,
                w.profile.beta,
                w.profile.c,
                w.profile.s_max
            ),
        }
    }
}

/// Boundary frame at a point.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub point: Vec2,
    pub tangent: Vec2,
    pub inward_normal: Vec2,
    pub curvature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OneCuspParams {
    pub beta: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub wall_length: f64,
    pub epsilon: f64,
    #[serde(default = "default_bulge")]
    pub bulge: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TwoCuspParams {
    pub beta_a: f64,
    pub c_a_plus: f64,
    pub c_a_minus: f64,
    pub beta_b: f64,
    pub c_b_plus: f64,
    pub c_b_minus: f64,
    pub wall_length: f64,
    pub epsilon: f64,
    /// Distance between the ends of the two cusps' walls along the axis.
    #[serde(default = "default_gap")]
    pub gap: f64,
    /// Lateral offset of cusp b's axis, which keeps the cusps out of each
    /// other's line of sight.
    #[serde(default = "default_offset")]
    pub offset: f64,
    #[serde(default = "default_bulge")]
    pub bulge: f64,
}

fn default_bulge() -> f64 {
    0.1
}
fn default_gap() -> f64 {
    1.0
}
fn default_offset() -> f64 {
    0.2
}

impl Default for OneCuspParams {
    fn default() -> Self {
        OneCuspParams { beta: 3.0, c_plus: 1.0, c_minus: 1.0, wall_length: 1.0, epsilon: 0.1, bulge: 0.1 }
    }
}

impl Default for TwoCuspParams {
    fn default() -> Self {
        TwoCuspParams {
            beta_a: 3.0,
            c_a_plus: 1.0,
            c_a_minus: 1.0,
            beta_b: 3.0,
            c_b_plus: 1.0,
            c_b_minus: 1.0,
            wall_length: 1.0,
            epsilon: 0.1,
            gap: 1.0,
            offset: 0.2,
            bulge: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TableParams {
    OneCusp(OneCuspParams),
    TwoCusp(TwoCuspParams),
}

impl TableParams {
    pub fn build(&self) -> Result<TableSpec> {
        match self {
            TableParams::OneCusp(p) => build_one_cusp_table(p),
            TableParams::TwoCusp(p) => build_two_cusp_table(p),
        }
    }

    pub fn build_unchecked(&self) -> Result<TableSpec> {
        match self {
            TableParams::OneCusp(p) => build_one_cusp_table_unchecked(p),
            TableParams::TwoCusp(p) => build_two_cusp_table_unchecked(p),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableSpec {
    pub pieces: Vec<BoundaryPiece>,
    pub cusps: Vec<CuspSpec>,
    pub perimeter: f64,
    pub beta_star: f64,
    /// Labels of the maximally flat cusps.
    pub j_star: Vec<usize>,
    /// Per cusp: the slab `0 <= s <= s_safe` between its walls contains no
    /// other piece.
    pub s_safe: Vec<f64>,
    /// Per cusp: indices of the (plus, minus) wall pieces.
    pub walls: Vec<(usize, usize)>,
}

impl TableSpec {
    pub fn alpha(&self) -> f64 {
        self.beta_star / (self.beta_star - 1.0)
    }

    pub fn cusp_by_label(&self, label: usize) -> Option<&CuspSpec> {
        self.cusps.iter().find(|c| c.label == label)
    }

    /// Index of the piece containing abscissa `r` (already reduced mod |∂Q|).
    pub fn piece_index(&self, r: f64) -> usize {
        match self.pieces.binary_search_by(|p| p.r_lo.partial_cmp(&r).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
        .min(self.pieces.len() - 1)
    }

    pub fn wrap(&self, r: f64) -> f64 {
        let w = r.rem_euclid(self.perimeter);
        if w >= self.perimeter {
            0.0
        } else {
            w
        }
    }

    /// Abscissa intervals of the cusp neighbourhoods, wrapped into
    /// `[0, |∂Q|)` (a neighbourhood straddling 0 yields two intervals).
    pub fn neighbourhood_intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for c in &self.cusps {
            let lo = c.vertex_abscissa - c.epsilon;
            let hi = c.vertex_abscissa + c.epsilon;
            if lo < 0.0 {
                out.push((0.0, hi));
                out.push((lo + self.perimeter, self.perimeter));
            } else if hi > self.perimeter {
                out.push((lo, self.perimeter));
                out.push((0.0, hi - self.perimeter));
            } else {
                out.push((lo, hi));
            }
        }
        out
    }

    /// Human readable summary followed by a TOML record.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "perimeter  {:.12}", self.perimeter);
        let _ = writeln!(s, "beta_star  {}", self.beta_star);
        let _ = writeln!(s, "alpha      {:.12}", self.alpha());
        let _ = writeln!(s, "J_star     {:?}", self.j_star);
        for c in &self.cusps {
            let _ = writeln!(
                s,
                "cusp {}     beta={} c+={} c-={} c_bar={} epsilon={} vertex_r={:.12}",
                c.label,
                c.beta,
                c.c_plus,
                c.c_minus,
                c.c_bar(),
                c.epsilon,
                c.vertex_abscissa
            );
        }
        for (i, p) in self.pieces.iter().enumerate() {
            let _ = writeln!(s, "piece {i}    {}", p.describe());
        }
        s
    }

    pub fn describe_record(&self) -> TableRecord {
        TableRecord {
            perimeter: self.perimeter,
            beta_star: self.beta_star,
            alpha: self.alpha(),
            j_star: self.j_star.clone(),
            cusps: self.cusps.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| PieceRecord {
                    kind: match p.kind {
                        PieceKind::Arc(_) => "circular_arc".into(),
                        PieceKind::Wall(_) => "cusp_wall".into(),
                    },
                    r_lo: p.r_lo,
                    r_hi: p.r_hi,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PieceRecord {
    pub kind: String,
    pub r_lo: f64,
    pub r_hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRecord {
    pub perimeter: f64,
    pub beta_star: f64,
    pub alpha: f64,
    pub j_star: Vec<usize>,
    pub cusps: Vec<CuspSpec>,
    pub pieces: Vec<PieceRecord>,
}

/// Frame at abscissa `r`; errors when `r` is a corner or cusp vertex.
pub fn boundary_at(table: &TableSpec, r: f64) -> Result<BoundaryPoint> {
    let r = table.wrap(r);
    let i = table.piece_index(r);
    let piece = &table.pieces[i];
    let p = piece.param_of_r(r);
    let near_end = (r - piece.r_lo).abs().min((piece.r_hi - r).abs()) <= 1e-14 * table.perimeter;
    if near_end || piece.param_margin(p) <= 0.0 {
        return Err(Error::Singular(format!("abscissa {r} is a corner or cusp vertex")));
    }
    let t = piece.tangent(p);
    Ok(BoundaryPoint { point: piece.point(p), tangent: t, inward_normal: t.perp_cw(), curvature: piece.curvature(p) })
}

/// Abscissa of a point on the boundary (nearest piece projection).
pub fn abscissa_of_point(table: &TableSpec, q: Vec2) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for piece in &table.pieces {
        let (dist, param) = match &piece.kind {
            PieceKind::Arc(a) => {
                let d = ((q - a.centre).norm() - a.radius).abs();
                match a.param_of(q) {
                    Some(u) => (d, u),
                    None => continue,
                }
            }
            PieceKind::Wall(w) => {
                let (mut s, _) = w.to_local(q);
                s = s.clamp(0.0, w.profile.s_max);
                for _ in 0..30 {
                    // minimise |point(s) - q|^2
                    let diff = w.point(s) - q;
                    let dp = w.e_s + w.e_n * w.profile.dz(s);
                    let ddp = w.e_n * w.profile.ddz(s);
                    let g = diff.dot(dp);
                    let h = dp.dot(dp) + diff.dot(ddp);
                    let step = g / h;
                    s = (s - step).clamp(0.0, w.profile.s_max);
                    if step.abs() < 1e-16 {
                        break;
                    }
                }
                ((w.point(s) - q).norm(), s)
            }
        };
        if dist < best.0 {
            best = (dist, piece.r_of_param(param));
        }
    }
    best.1
}

fn bbox_of(points: impl Iterator<Item = Vec2>) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let pad = 1e-9;
    (Vec2::new(lo.x - pad, lo.y - pad), Vec2::new(hi.x + pad, hi.y + pad))
}

fn sample_params(kind: &PieceKind, n: usize) -> Vec<f64> {
    let top = match kind {
        PieceKind::Arc(a) => a.length(),
        PieceKind::Wall(w) => w.profile.s_max,
    };
    (0..=n).map(|k| top * k as f64 / n as f64).collect()
}

struct CuspFrame {
    vertex: Vec2,
    e_s: Vec2,
}

fn make_wall(cusp: usize, spec: &CuspSpec, frame: &CuspFrame, side: Side) -> CuspWall {
    let e_perp = frame.e_s.perp();
    let e_n = match side {
        Side::Plus => e_perp,
        Side::Minus => -e_perp,
    };
    let profile = WallProfile::new(spec.beta, spec.coefficient(side), spec.wall_length);
    let s_eps =
        if spec.epsilon < profile.total_length() { profile.s_of_arclength(spec.epsilon) } else { f64::INFINITY };
    CuspWall { cusp, side, vertex: frame.vertex, e_s: frame.e_s, e_n, profile, outward: side == Side::Plus, s_eps }
}

fn assemble(kinds: Vec<PieceKind>, mut cusps: Vec<CuspSpec>) -> Result<TableSpec> {
    for c in &cusps {
        c.check()?;
    }
    if !cusps.iter().any(|c| c.beta > 2.0) {
        return Err(Error::Construction("at least one cusp needs beta > 2".into()));
    }
    let mut pieces = Vec::with_capacity(kinds.len());
    let mut r = 0.0;
    for kind in kinds {
        let len = match &kind {
            PieceKind::Arc(a) => a.length(),
            PieceKind::Wall(w) => w.profile.total_length(),
        };
        let pts: Vec<Vec2> = {
            let params = sample_params(&kind, 256);
            params
                .iter()
                .map(|&p| match &kind {
                    PieceKind::Arc(a) => a.point(p),
                    PieceKind::Wall(w) => w.point(p),
                })
                .collect()
        };
        let bbox = bbox_of(pts.into_iter());
        pieces.push(BoundaryPiece { kind, r_lo: r, r_hi: r + len, bbox });
        r += len;
    }
    let perimeter = r;
    let mut walls = vec![(usize::MAX, usize::MAX); cusps.len()];
    for (i, p) in pieces.iter().enumerate() {
        if let PieceKind::Wall(w) = &p.kind {
            match w.side {
                Side::Plus => {
                    walls[w.cusp].0 = i;
                    cusps[w.cusp].vertex_abscissa = p.r_lo;
                }
                Side::Minus => walls[w.cusp].1 = i,
            }
        }
    }
    if walls.iter().any(|&(a, b)| a == usize::MAX || b == usize::MAX) {
        return Err(Error::Construction("every cusp needs a plus and a minus wall".into()));
    }
    // s_safe: the slab below it between the walls holds no other piece.
    let mut s_safe = Vec::with_capacity(cusps.len());
    for (ci, &(wp, wm)) in walls.iter().enumerate() {
        let PieceKind::Wall(w) = &pieces[wp].kind else { unreachable!() };
        let mut lim = w.profile.s_max;
        if let PieceKind::Wall(wm_) = &pieces[wm].kind {
            lim = lim.min(wm_.profile.s_max);
        }
        for (j, p) in pieces.iter().enumerate() {
            if j == wp || j == wm {
                continue;
            }
            for q in sample_params(&p.kind, 2000) {
                let s = (p.point(q) - w.vertex).dot(w.e_s);
                lim = lim.min(s);
            }
        }
        let _ = ci;
        s_safe.push((0.9 * lim).max(0.0));
    }
    let beta_star = cusps.iter().map(|c| c.beta).fold(f64::NEG_INFINITY, f64::max);
    let j_star = cusps.iter().filter(|c| c.beta == beta_star).map(|c| c.label).collect();
    Ok(TableSpec { pieces, cusps, perimeter, beta_star, j_star, s_safe, walls })
}

/// One cusp at the origin opening along +x, closed by a single dispersing arc.
pub fn build_one_cusp_table_unchecked(p: &OneCuspParams) -> Result<TableSpec> {
    let spec = CuspSpec {
        label: 1,
        beta: p.beta,
        c_plus: p.c_plus,
        c_minus: p.c_minus,
        epsilon: p.epsilon,
        vertex_abscissa: 0.0,
        wall_length: p.wall_length,
    };
    spec.check()?;
    let frame = CuspFrame { vertex: Vec2::new(0.0, 0.0), e_s: Vec2::new(1.0, 0.0) };
    let plus = make_wall(0, &spec, &frame, Side::Plus);
    let minus = make_wall(0, &spec, &frame, Side::Minus);
    let a = plus.point(p.wall_length);
    let b = minus.point(p.wall_length);
    let arc = CircularArc::through(a, b, p.bulge)?;
    assemble(vec![PieceKind::Arc(arc), PieceKind::Wall(minus), PieceKind::Wall(plus)], vec![spec])
}

pub fn build_one_cusp_table(p: &OneCuspParams) -> Result<TableSpec> {
    let t = build_one_cusp_table_unchecked(p)?;
    validate_table(&t).into_result()?;
    Ok(t)
}

/// Cusp `a` at the origin opening along +x and cusp `b` facing it from the
/// right, offset laterally, joined by two dispersing arcs.
pub fn build_two_cusp_table_unchecked(p: &TwoCuspParams) -> Result<TableSpec> {
    if !(p.gap > 0.0) {
        return Err(Error::Construction(format!("gap {} must be positive", p.gap)));
    }
    let spec_a = CuspSpec {
        label: 1,
        beta: p.beta_a,
        c_plus: p.c_a_plus,
        c_minus: p.c_a_minus,
        epsilon: p.epsilon,
        vertex_abscissa: 0.0,
        wall_length: p.wall_length,
    };
    let spec_b = CuspSpec {
        label: 2,
        beta: p.beta_b,
        c_plus: p.c_b_plus,
        c_minus: p.c_b_minus,
        epsilon: p.epsilon,
        vertex_abscissa: 0.0,
        wall_length: p.wall_length,
    };
    spec_a.check()?;
    spec_b.check()?;
    let fa = CuspFrame { vertex: Vec2::new(0.0, 0.0), e_s: Vec2::new(1.0, 0.0) };
    let fb = CuspFrame { vertex: Vec2::new(2.0 * p.wall_length + p.gap, p.offset), e_s: Vec2::new(-1.0, 0.0) };
    let a_plus = make_wall(0, &spec_a, &fa, Side::Plus);
    let a_minus = make_wall(0, &spec_a, &fa, Side::Minus);
    let b_plus = make_wall(1, &spec_b, &fb, Side::Plus);
    let b_minus = make_wall(1, &spec_b, &fb, Side::Minus);
    let a_top = a_plus.point(p.wall_length);
    let a_bot = a_minus.point(p.wall_length);
    let b_top = b_minus.point(p.wall_length);
    let b_bot = b_plus.point(p.wall_length);
    let top = CircularArc::through(a_top, b_top, p.bulge)?;
    let bottom = CircularArc::through(b_bot, a_bot, p.bulge)?;
    assemble(
        vec![
            PieceKind::Arc(top),
            PieceKind::Wall(b_minus),
            PieceKind::Wall(b_plus),
            PieceKind::Arc(bottom),
            PieceKind::Wall(a_minus),
            PieceKind::Wall(a_plus),
        ],
        vec![spec_a, spec_b],
    )
}

pub fn build_two_cusp_table(p: &TwoCuspParams) -> Result<TableSpec> {
    let t = build_two_cusp_table_unchecked(p)?;
    validate_table(&t).into_result()?;
    Ok(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        CheckResult { passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dispersing: CheckResult,
    pub separation: CheckResult,
    pub tangent_exit: CheckResult,
    pub joins: CheckResult,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.dispersing.passed && self.separation.passed && self.tangent_exit.passed && self.joins.passed
    }

    pub fn into_result(self) -> Result<()> {
        if self.all_passed() {
            Ok(())
        } else {
            Err(Error::Construction(format!("table validation failed: {self}")))
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = |c: &CheckResult| if c.passed { "pass" } else { "FAIL" };
        writeln!(f, "dispersing    {}  {}", mark(&self.dispersing), self.dispersing.detail)?;
        writeln!(f, "separation    {}  {}", mark(&self.separation), self.separation.detail)?;
        writeln!(f, "tangent_exit  {}  {}", mark(&self.tangent_exit), self.tangent_exit.detail)?;
        write!(f, "joins         {}  {}", mark(&self.joins), self.joins.detail)
    }
}

/// Cusp label whose neighbourhood contains the collision, if any.
pub fn neighbourhood_of(table: &TableSpec, piece: usize, param: f64) -> Option<usize> {
    match &table.pieces[piece].kind {
        PieceKind::Wall(w) if param < w.s_eps => Some(table.cusps[w.cusp].label),
        _ => None,
    }
}

fn check_dispersing(table: &TableSpec) -> CheckResult {
    let mut min_arc = f64::INFINITY;
    let mut bad = Vec::new();
    for (i, p) in table.pieces.iter().enumerate() {
        match &p.kind {
            PieceKind::Arc(a) => {
                min_arc = min_arc.min(a.curvature());
                if a.curvature() <= 0.0 {
                    bad.push(format!("piece {i}: arc curvature {:.4}", a.curvature()));
                }
            }
            PieceKind::Wall(w) => {
                if w.profile.c < 0.0 {
                    bad.push(format!("piece {i}: wall coefficient {}", w.profile.c));
                }
            }
        }
    }
    if bad.is_empty() {
        CheckResult::new(true, format!("min arc curvature {min_arc:.4}; walls nonnegative"))
    } else {
        CheckResult::new(false, bad.join("; "))
    }
}

fn check_separation(table: &TableSpec) -> CheckResult {
    let mut intervals = table.neighbourhood_intervals();
    intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in intervals.windows(2) {
        if w[1].0 < w[0].1 {
            return CheckResult::new(false, "cusp neighbourhoods overlap");
        }
    }
    let covered: f64 = intervals.iter().map(|(a, b)| b - a).sum();
    if covered >= table.perimeter {
        return CheckResult::new(false, "cusp neighbourhoods cover the whole boundary");
    }
    for p in &table.pieces {
        if let PieceKind::Wall(w) = &p.kind {
            if !w.s_eps.is_finite() {
                return CheckResult::new(
                    false,
                    format!("neighbourhood of cusp {} extends beyond its walls", table.cusps[w.cusp].label),
                );
            }
        }
    }
    // Direct flights between distinct neighbourhoods, on a grid of launches.
    const NR: usize = 48;
    const NPHI: usize = 96;
    let mut launches = 0usize;
    for (ci, &(wp, wm)) in table.walls.iter().enumerate() {
        for &wi in &[wp, wm] {
            let piece = &table.pieces[wi];
            let PieceKind::Wall(w) = &piece.kind else { continue };
            for k in 0..NR {
                let s = w.s_eps * (k as f64 + 0.5) / NR as f64;
                let r = piece.r_of_param(s);
                for j in 0..NPHI {
                    let phi = PI * (j as f64 + 0.5) / NPHI as f64;
                    launches += 1;
                    if let Ok((y, _)) = next_collision(table, Collision { r, phi }) {
                        let yi = table.piece_index(y.r);
                        let p = table.pieces[yi].param_of_r(y.r);
                        if let Some(l) = neighbourhood_of(table, yi, p) {
                            if l != table.cusps[ci].label {
                                return CheckResult::new(
                                    false,
                                    format!("flight from cusp {} lands in cusp {l}", table.cusps[ci].label),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    CheckResult::new(
        true,
        format!("{} neighbourhoods, {launches} launches, coverage {:.4}", table.cusps.len(), covered / table.perimeter),
    )
}

fn check_tangent_exit(table: &TableSpec) -> CheckResult {
    let mut details = Vec::new();
    for (ci, &(wp, wm)) in table.walls.iter().enumerate() {
        let (PieceKind::Wall(w), PieceKind::Wall(wmn)) = (&table.pieces[wp].kind, &table.pieces[wm].kind) else {
            unreachable!()
        };
        let d = 1e-6 * w.profile.s_max;
        let mid = (w.point(d) + wmn.point(d)) * 0.5;
        let hit = crate::dynamics::cast_ray(table, mid, w.e_s, None);
        match hit {
            Ok((piece, param, _)) => {
                if let Some(l) = neighbourhood_of(table, piece, param) {
                    return CheckResult::new(
                        false,
                        format!("tangent ray from cusp {} lands in neighbourhood of cusp {l}", table.cusps[ci].label),
                    );
                }
                details.push(format!(
                    "cusp {} -> r={:.6}",
                    table.cusps[ci].label,
                    table.pieces[piece].r_of_param(param)
                ));
            }
            Err(e) => return CheckResult::new(false, format!("tangent ray from cusp {}: {e}", table.cusps[ci].label)),
        }
    }
    CheckResult::new(true, details.join(", "))
}

fn check_joins(table: &TableSpec) -> CheckResult {
    let n = table.pieces.len();
    let mut corners = 0;
    let mut vertices = 0;
    for i in 0..n {
        let a = &table.pieces[i];
        let b = &table.pieces[(i + 1) % n];
        let (pa, ta) = match &a.kind {
            PieceKind::Arc(x) => (x.point(x.length()), x.tangent(x.length())),
            PieceKind::Wall(w) => {
                let s = if w.outward { w.profile.s_max } else { 0.0 };
                (w.point(s), w.tangent(s))
            }
        };
        let (pb, tb) = match &b.kind {
            PieceKind::Arc(x) => (x.point(0.0), x.tangent(0.0)),
            PieceKind::Wall(w) => {
                let s = if w.outward { 0.0 } else { w.profile.s_max };
                (w.point(s), w.tangent(s))
            }
        };
        if (pa - pb).norm() > 1e-9 {
            return CheckResult::new(
                false,
                format!("gap of {:.3e} between pieces {i} and {}", (pa - pb).norm(), (i + 1) % n),
            );
        }
        let is_vertex = matches!((&a.kind, &b.kind), (PieceKind::Wall(x), PieceKind::Wall(y)) if x.cusp == y.cusp);
        if is_vertex {
            if ta.dot(tb) > -1.0 + 1e-12 {
                return CheckResult::new(false, format!("cusp vertex after piece {i} is not tangential"));
            }
            vertices += 1;
        } else {
            let turn = ta.cross(tb);
            if turn >= 0.0 || ta.dot(tb) <= -1.0 + 1e-12 {
                return CheckResult::new(false, format!("joint after piece {i} is not a proper corner"));
            }
            corners += 1;
        }
    }
    // Shoelace on a dense sampling: clockwise traversal gives negative area.
    let mut area = 0.0;
    let mut prev: Option<Vec2> = None;
    let mut first: Option<Vec2> = None;
    for p in &table.pieces {
        for q in sample_params(&p.kind, 400) {
            let x = p.point(q);
            if let Some(pr) = prev {
                area += pr.cross(x);
            } else {
                first = Some(x);
            }
            prev = Some(x);
        }
    }
    if let (Some(a), Some(b)) = (prev, first) {
        area += a.cross(b);
    }
    area *= 0.5;
    if area >= 0.0 {
        return CheckResult::new(false, format!("boundary is not clockwise (signed area {area:.4})"));
    }
    CheckResult::new(true, format!("{corners} corners, {vertices} cusp vertices, area {:.6}", -area))
}

pub fn validate_table(table: &TableSpec) -> ValidationReport {
    ValidationReport {
        dispersing: check_dispersing(table),
        separation: check_separation(table),
        tangent_exit: check_tangent_exit(table),
        joins: check_joins(table),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;

    fn spec(beta: f64, c: f64) -> CuspSpec {
        CuspSpec { label: 1, beta, c_plus: c, c_minus: c, epsilon: 0.1, vertex_abscissa: 0.0, wall_length: 1.0 }
    }

    #[test]
    fn wall_values() {
        let s = spec(3.0, 1.0);
        assert_eq!(cusp_wall(&s, Side::Plus, 0.0).unwrap(), (0.0, 0.0));
        let (z, dz) = cusp_wall(&s, Side::Plus, 0.1).unwrap();
        assert!((z - 1e-3 / 3.0).abs() < 1e-18);
        assert!((dz - 1e-2).abs() < 1e-17);
        assert!(cusp_wall(&s, Side::Minus, 1.5).is_err());
        assert!(cusp_wall(&s, Side::Minus, -0.1).is_err());
    }

    #[test]
    fn wall_derivative_matches_central_difference() {
        let s = spec(2.5, 0.8);
        let h = 1e-5;
        let (_, dz) = cusp_wall(&s, Side::Plus, 0.2).unwrap();
        let zp = cusp_wall(&s, Side::Plus, 0.2 + h).unwrap().0;
        let zm = cusp_wall(&s, Side::Plus, 0.2 - h).unwrap().0;
        assert!((dz - (zp - zm) / (2.0 * h)).abs() < 1e-10);
    }

    #[test]
    fn arclength_against_adaptive_quadrature() {
        let w = WallProfile::new(3.0, 1.0, 1.0);
        for &s in &[1e-4, 0.05, 0.3, 0.77, 1.0] {
            let q = integrate(|u| (1.0 + u.powi(4)).sqrt(), 0.0, s, 1e-14);
            assert!((w.arclength(s) - q).abs() < 1e-12, "s={s}");
            assert!((w.s_of_arclength(q) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn arc_geometry() {
        let arc = CircularArc::through(Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0), 0.5).unwrap();
        assert!(arc.curvature() > 0.0);
        let mid = arc.point(0.5 * arc.length());
        assert!((mid.x + 0.5).abs() < 1e-12 && mid.y.abs() < 1e-12);
        assert!(CircularArc::through(Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0), 1.5).is_err());
    }

    #[test]
    fn canonical_tables_validate() {
        let one = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        assert_eq!(one.j_star, vec![1]);
        let two = build_two_cusp_table(&TwoCuspParams::default()).unwrap();
        assert_eq!(two.j_star, vec![1, 2]);
        let mixed = build_two_cusp_table(&TwoCuspParams { beta_b: 2.5, ..Default::default() }).unwrap();
        assert_eq!(mixed.j_star, vec![1]);
        let perim: f64 = two.pieces.iter().map(|p| p.length()).sum();
        assert!((perim - two.perimeter).abs() <= 1e-12 * two.perimeter);
    }

    #[test]
    fn one_sided_cusp_is_accepted() {
        let t = build_two_cusp_table(&TwoCuspParams { c_a_minus: 0.0, ..Default::default() }).unwrap();
        assert!((t.cusps[0].c_bar() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validation_failures() {
        let wide = build_one_cusp_table_unchecked(&OneCuspParams { epsilon: 1.5, ..Default::default() }).unwrap();
        assert!(!validate_table(&wide).separation.passed);
        let focusing = build_one_cusp_table_unchecked(&OneCuspParams { bulge: -0.1, ..Default::default() }).unwrap();
        assert!(!validate_table(&focusing).dispersing.passed);
    }

    #[test]
    fn curvature_vanishes_at_vertex() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let rv = t.cusps[0].vertex_abscissa;
        let k1 = boundary_at(&t, rv + 1e-3).unwrap().curvature;
        let k2 = boundary_at(&t, rv + 1e-5).unwrap().curvature;
        assert!(k1 > 0.0 && k2 < k1 && k2 < 1e-4);
        assert!(boundary_at(&t, rv).is_err());
    }

    #[test]
    fn round_trip_abscissa() {
        let t = build_two_cusp_table(&TwoCuspParams::default()).unwrap();
        for k in 1..200 {
            let r = t.perimeter * (k as f64 + 0.37) / 200.0;
            if let Ok(b) = boundary_at(&t, r) {
                let back = abscissa_of_point(&t, b.point);
                assert!((back - r).abs() < 1e-10 * t.perimeter, "r={r} back={back}");
                assert!((b.tangent.norm() - 1.0).abs() < 1e-14);
            }
        }
    }
}
