//! Billiard map on the collision space.
//!
//! A collision `(r, φ)` has outgoing velocity `cos φ · t + sin φ · n`, where
//! `t` is the unit tangent in the direction of increasing abscissa and `n`
//! the inward normal (`t` rotated clockwise). Time reversal is
//! `(r, φ) -> (r, π - φ)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{CircularArc, CuspWall, PieceKind, TableSpec, SINGULAR_TOL};
use crate::numeric::Vec2;

/// Collisions with `|sin φ|` below this are rejected as grazing.
pub const TOL_GRAZE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub r: f64,
    pub phi: f64,
}

impl Collision {
    pub fn reversed(self) -> Collision {
        Collision { r: self.r, phi: PI - self.phi }
    }
}

/// Internal state: piece index, local parameter, position and unit velocity.
#[derive(Debug, Clone, Copy)]
pub struct State {
    pub piece: usize,
    pub param: f64,
    pub pos: Vec2,
    pub vel: Vec2,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub collisions: Vec<Collision>,
    pub free_paths: Vec<f64>,
}

/// Specular reflection of `incoming` off a surface with unit `normal`.
pub fn reflect(incoming: Vec2, normal: Vec2) -> Result<Vec2> {
    let dn = incoming.dot(normal);
    if dn.abs() < TOL_GRAZE {
        return Err(Error::Grazing(dn.abs()));
    }
    if dn > 0.0 {
        return Err(Error::Domain("incoming direction leaves the surface".into()));
    }
    Ok(incoming - normal * (2.0 * dn))
}

pub fn state_from_collision(table: &TableSpec, x: Collision) -> Result<State> {
    if !(x.phi > 0.0 && x.phi < PI) {
        return Err(Error::Domain(format!("phi = {} outside (0, pi)", x.phi)));
    }
    if x.phi.sin() < TOL_GRAZE {
        return Err(Error::Grazing(x.phi.sin()));
    }
    let r = table.wrap(x.r);
    let piece = table.piece_index(r);
    let p = &table.pieces[piece];
    let param = p.param_of_r(r);
    if p.param_margin(param) < SINGULAR_TOL {
        return Err(Error::Singular(format!("abscissa {r} at a corner or vertex")));
    }
    let t = p.tangent(param);
    let n = t.perp_cw();
    let (s, c) = x.phi.sin_cos();
    Ok(State { piece, param, pos: p.point(param), vel: t * c + n * s })
}

pub fn collision_of_state(table: &TableSpec, st: &State) -> Collision {
    let p = &table.pieces[st.piece];
    let t = p.tangent(st.param);
    let n = t.perp_cw();
    let phi = st.vel.dot(n).atan2(st.vel.dot(t));
    Collision { r: p.r_of_param(st.param), phi }
}

/// `sin φ` of a state.
#[inline]
pub fn sin_phi(table: &TableSpec, st: &State) -> f64 {
    st.vel.dot(table.pieces[st.piece].tangent(st.param).perp_cw())
}

#[inline]
fn ray_box(o: Vec2, d: Vec2, lo: Vec2, hi: Vec2) -> (f64, f64) {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (oc, dc, l, h) in [(o.x, d.x, lo.x, hi.x), (o.y, d.y, lo.y, hi.y)] {
        if dc == 0.0 {
            if oc < l || oc > h {
                return (1.0, 0.0);
            }
        } else {
            let inv = 1.0 / dc;
            let (a, b) = if inv > 0.0 { ((l - oc) * inv, (h - oc) * inv) } else { ((h - oc) * inv, (l - oc) * inv) };
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
    }
    (t0, t1)
}

/// First crossing of the ray from the interior side of the arc.
fn intersect_arc(a: &CircularArc, o: Vec2, d: Vec2, same: bool) -> Option<(f64, f64)> {
    let oc = o - a.centre;
    let b = d.dot(oc);
    let dispersing = a.sweep > 0.0;
    let t = if same {
        if dispersing {
            return None;
        }
        -2.0 * b
    } else {
        let cc = oc.dot(oc) - a.radius * a.radius;
        let disc = b * b - cc;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        if dispersing {
            if b >= 0.0 {
                return None;
            }
            cc / (-b + sq)
        } else if b > 0.0 {
            -cc / (b + sq)
        } else {
            -b + sq
        }
    };
    if !(t > 0.0) {
        return None;
    }
    a.param_of(o + d * t).map(|u| (t, u))
}

/// First crossing of the ray through a cusp wall from the interior side.
///
/// In local coordinates `G(t) = o_z + t d_z - z(o_s + t d_s)` is concave, so
/// the entry root is the left root, reached monotonically by Newton's method
/// started to its left.
fn intersect_wall(w: &CuspWall, o: Vec2, d: Vec2) -> Option<(f64, f64)> {
    let (os, oz) = w.to_local(o);
    let ds = d.dot(w.e_s);
    let dz = d.dot(w.e_n);
    let prof = &w.profile;
    let smax = prof.s_max;
    let (mut tlo, thi) = if ds == 0.0 {
        if !(0.0..=smax).contains(&os) {
            return None;
        }
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        let t0 = -os / ds;
        let t1 = (smax - os) / ds;
        if t0 < t1 {
            (t0, t1)
        } else {
            (t1, t0)
        }
    };
    tlo = tlo.max(0.0);
    if !(tlo < thi) {
        return None;
    }
    let g = |t: f64| oz + t * dz - prof.z(os + t * ds);
    let gp = |t: f64| dz - prof.dz(os + t * ds) * ds;
    let g_lo = g(tlo);
    if g_lo >= 0.0 {
        return None;
    }
    let t_peak = if prof.c == 0.0 || ds == 0.0 {
        if gp(tlo) > 0.0 {
            thi
        } else {
            tlo
        }
    } else {
        let ratio = dz / (prof.c * ds);
        if ratio > 0.0 {
            let sp = prof.root_bm1(ratio);
            ((sp - os) / ds).clamp(tlo, thi)
        } else if ds > 0.0 {
            tlo
        } else {
            thi
        }
    };
    if !t_peak.is_finite() || g(t_peak) < 0.0 {
        return None;
    }
    // Newton steps from the left stay below the root and chords of the
    // concave G land above it, so the bracket [a, b] shrinks from both ends.
    let mut a = tlo;
    let mut ga = g_lo;
    let mut b = t_peak;
    let mut gb = g(t_peak);
    for _ in 0..100 {
        let slope = gp(a);
        let tn = if slope > 0.0 { a - ga / slope } else { f64::NAN };
        let next = if tn > a && tn < b { tn } else { 0.5 * (a + b) };
        let gn = g(next);
        if gn <= 0.0 {
            a = next;
            ga = gn;
        } else {
            b = next;
            gb = gn;
        }
        if ga == 0.0 || b - a <= 1e-14 * a.abs() {
            break;
        }
        let ts = a - ga * (b - a) / (gb - ga);
        if ts > a && ts < b {
            let gs = g(ts);
            if gs <= 0.0 {
                a = ts;
                ga = gs;
            } else {
                b = ts;
                gb = gs;
            }
            if ga == 0.0 || b - a <= 1e-14 * a.abs() {
                break;
            }
        }
    }
    if !(a > 0.0) {
        return None;
    }
    Some((a, os + a * ds))
}

/// Casts a ray and returns `(piece, param, t)` of the first boundary hit.
/// `from` is the piece the ray leaves, if any.
pub fn cast_ray(table: &TableSpec, o: Vec2, d: Vec2, from: Option<usize>) -> Result<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, p) in table.pieces.iter().enumerate() {
        let same = from == Some(i);
        if same && p.is_dispersing() {
            continue;
        }
        let (t0, t1) = ray_box(o, d, p.bbox.0, p.bbox.1);
        if t1 < 0.0 || t0 > t1 || best.is_some_and(|b| t0 > b.2) {
            continue;
        }
        let hit = match &p.kind {
            PieceKind::Arc(a) => intersect_arc(a, o, d, same),
            PieceKind::Wall(w) => intersect_wall(w, o, d),
        };
        if let Some((t, param)) = hit {
            if best.is_none_or(|b| t < b.2) {
                best = Some((i, param, t));
            }
        }
    }
    best.ok_or_else(|| {
        Error::Numerical(format!("ray from ({}, {}) along ({}, {}) escaped the table", o.x, o.y, d.x, d.y))
    })
}

/// Cusp-interior shortcut: from a wall deep in its cusp, the opposite wall is
/// hit first whenever the hit is also within the guaranteed-empty slab.
#[inline]
fn cast_from_state(table: &TableSpec, st: &State) -> Result<(usize, f64, f64)> {
    if let PieceKind::Wall(w) = &table.pieces[st.piece].kind {
        let safe = table.s_safe[w.cusp];
        if st.param <= safe {
            let (wp, wm) = table.walls[w.cusp];
            let other = if wp == st.piece { wm } else { wp };
            if let PieceKind::Wall(ow) = &table.pieces[other].kind {
                if let Some((t, s)) = intersect_wall(ow, st.pos, st.vel) {
                    if s <= safe {
                        return Ok((other, s, t));
                    }
                }
            }
        }
    }
    cast_ray(table, st.pos, st.vel, Some(st.piece))
}

/// One application of the billiard map on internal states.
#[inline]
pub fn step(table: &TableSpec, st: &State) -> Result<(State, f64)> {
    let (piece, param, t) = cast_from_state(table, st)?;
    let p = &table.pieces[piece];
    if p.param_margin(param) < SINGULAR_TOL {
        return Err(Error::Singular(format!("hit within {SINGULAR_TOL:e} of a corner or vertex (piece {piece})")));
    }
    let pos = p.point(param);
    let n = p.tangent(param).perp_cw();
    let vel = reflect(st.vel, n)?;
    let vel = vel * (1.0 / vel.norm());
    Ok((State { piece, param, pos, vel }, t))
}

pub fn next_collision(table: &TableSpec, x: Collision) -> Result<(Collision, f64)> {
    let st = state_from_collision(table, x)?;
    let (next, tau) = step(table, &st)?;
    Ok((collision_of_state(table, &next), tau))
}

/// Iterates the map `steps` times from `x`.
pub fn trajectory(table: &TableSpec, x: Collision, steps: usize) -> Result<TrajectorySegment> {
    let mut st = state_from_collision(table, x)?;
    let mut seg = TrajectorySegment { collisions: vec![x], free_paths: Vec::with_capacity(steps) };
    for _ in 0..steps {
        let (next, tau) = step(table, &st)?;
        seg.collisions.push(collision_of_state(table, &next));
        seg.free_paths.push(tau);
        st = next;
    }
    Ok(seg)
}

/// Draws from `μ`: uniform abscissa, `φ` with density `sin φ / 2`.
pub fn sample_mu<R: Rng + ?Sized>(table: &TableSpec, rng: &mut R) -> Collision {
    let r = rng.random::<f64>() * table.perimeter;
    let u: f64 = rng.random();
    Collision { r, phi: (1.0 - 2.0 * u).acos() }
}

/// Draws a nonsingular state from `μ`, resampling measure-zero failures.
pub fn sample_mu_state<R: Rng + ?Sized>(table: &TableSpec, rng: &mut R) -> State {
    loop {
        if let Ok(st) = state_from_collision(table, sample_mu(table, rng)) {
            return st;
        }
    }
}

/// `μ` of the set of collisions whose abscissa lies in the given intervals.
pub fn mu_of_boundary_region(table: &TableSpec, arcs: &[(f64, f64)]) -> Result<f64> {
    let mut v: Vec<(f64, f64)> = arcs.to_vec();
    for &(a, b) in &v {
        if !(a >= 0.0 && b <= table.perimeter && a <= b) {
            return Err(Error::Domain(format!("interval [{a}, {b}] outside [0, {}]", table.perimeter)));
        }
    }
    v.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for w in v.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Domain(format!(
                "intervals [{}, {}] and [{}, {}] overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(v.iter().map(|(a, b)| b - a).sum::<f64>() / table.perimeter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_one_cusp_table, build_two_cusp_table, OneCuspParams, TwoCuspParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reflect_cases() {
        let up = Vec2::new(0.0, 1.0);
        let v = reflect(Vec2::new(0.0, -1.0), up).unwrap();
        assert_eq!(v, up);
        assert!(matches!(reflect(Vec2::new(1.0, 0.0), up), Err(Error::Grazing(_))));
        let h = 0.5f64.sqrt();
        let v = reflect(Vec2::new(h, -h), up).unwrap();
        assert!((v.x - h).abs() < 1e-15 && (v.y - h).abs() < 1e-15);
    }

    #[test]
    fn circle_chords_preserve_angle() {
        // A focusing arc covering almost the whole circle: inside it the
        // billiard is the circle billiard.
        let r = 2.0;
        let arc = CircularArc { centre: Vec2::new(0.3, -0.1), radius: r, theta0: 0.1, sweep: -(2.0 * PI - 0.2) };
        let mut u = 1.0;
        let phi: f64 = 0.7;
        for _ in 0..3 {
            let t = arc.tangent(u);
            let n = t.perp_cw();
            let v = t * phi.cos() + n * phi.sin();
            let (tau, u2) = intersect_arc(&arc, arc.point(u), v, true).unwrap();
            assert!((tau - 2.0 * r * phi.sin()).abs() < 1e-12);
            let t2 = arc.tangent(u2);
            let n2 = t2.perp_cw();
            let out = reflect(v, n2).unwrap();
            let phi2 = out.dot(n2).atan2(out.dot(t2));
            assert!((phi2 - phi).abs() < 1e-12);
            u = u2;
        }
    }

    #[test]
    fn time_reversal_conjugacy_along_orbits() {
        // Whole orbits cannot be run backwards in double precision (errors
        // grow exponentially), so the identity T(I(T x)) = I x is checked at
        // every point of each orbit.
        let table = build_two_cusp_table(&TwoCuspParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x = sample_mu(&table, &mut rng);
            let Ok(seg) = trajectory(&table, x, 50) else { continue };
            for w in seg.collisions.windows(2) {
                let (b, _) = next_collision(&table, w[1].reversed()).unwrap();
                let b = b.reversed();
                let dr = (b.r - w[0].r).abs();
                assert!(dr.min(table.perimeter - dr) < 1e-8, "dr = {dr}");
                assert!((b.phi - w[0].phi).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn chords_stay_inside() {
        let table = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut st = sample_mu_state(&table, &mut rng);
        for _ in 0..5000 {
            let (next, tau) = match step(&table, &st) {
                Ok(v) => v,
                Err(_) => {
                    st = sample_mu_state(&table, &mut rng);
                    continue;
                }
            };
            assert!(tau > 0.0);
            let mid = (st.pos + next.pos) * 0.5;
            // the midpoint must not be beyond any piece: casting from it in
            // both chord directions reaches the two endpoints.
            let d = (next.pos - st.pos).normalized();
            let (_, _, t_fwd) = cast_ray(&table, mid, d, None).unwrap();
            assert!((t_fwd - 0.5 * tau).abs() < 1e-9 * (1.0 + tau));
            st = next;
        }
    }

    #[test]
    fn mu_regions() {
        let table = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        assert_eq!(mu_of_boundary_region(&table, &[(0.0, table.perimeter)]).unwrap(), 1.0);
        assert_eq!(mu_of_boundary_region(&table, &[]).unwrap(), 0.0);
        assert!(mu_of_boundary_region(&table, &[(0.0, 0.5), (0.4, 0.6)]).is_err());
    }

    #[test]
    fn sample_phi_moment() {
        let table = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| sample_mu(&table, &mut rng).phi.sin()).sum::<f64>() / n as f64;
        assert!((m - PI / 4.0).abs() < 5.0 * 0.22 / (n as f64).sqrt());
    }
}
