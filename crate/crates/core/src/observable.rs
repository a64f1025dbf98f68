//! Closed-form mean-zero observables on the collision space.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dynamics::{sin_phi, state_from_collision, Collision, State};
use crate::error::{Error, Result};
use crate::geometry::{PieceKind, Side, TableSpec};
use crate::induced::PhaseFunction;
use crate::numeric::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Angular {
    #[default]
    Uniform,
    Sine,
}

impl Angular {
    #[inline]
    fn factor(self, sin_phi: f64) -> f64 {
        match self {
            Angular::Uniform => 1.0,
            Angular::Sine => sin_phi,
        }
    }

    /// `∫_0^π A(φ) sin φ / 2 dφ`.
    fn mu_mean(self) -> f64 {
        match self {
            Angular::Uniform => 1.0,
            Angular::Sine => PI / 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpWeight {
    pub label: usize,
    pub plus: f64,
    pub minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    /// Constant function; only the zero constant is mean-zero.
    Constant { value: f64 },
    /// `Σ a_{i,±} (1 - (d/w)^2)^2 A(φ)` on the cusp walls, `d` the arclength
    /// to the vertex.
    CuspBump {
        weights: Vec<BumpWeight>,
        width: f64,
        #[serde(default)]
        angular: Angular,
    },
    /// `a cos(2π k r/|∂Q| + θ) A(φ)`.
    Wave {
        mode: u32,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        angular: Angular,
    },
}

impl ObservableSpec {
    pub fn single_cusp(label: usize, weight: f64, width: f64) -> Self {
        ObservableSpec::CuspBump {
            weights: vec![BumpWeight { label, plus: weight, minus: weight }],
            width,
            angular: Angular::Uniform,
        }
    }

    pub fn two_cusp(wa: f64, wb: f64, width: f64) -> Self {
        ObservableSpec::CuspBump {
            weights: vec![BumpWeight { label: 1, plus: wa, minus: wa }, BumpWeight { label: 2, plus: wb, minus: wb }],
            width,
            angular: Angular::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct WallBump {
    weight: f64,
    width: f64,
}

/// A constructed observable bound to a table, centred under μ.
#[derive(Debug, Clone)]
pub struct Observable {
    pub spec: ObservableSpec,
    /// Mean of the uncentred function, subtracted at construction.
    pub raw_mean: f64,
    pub sup_norm: f64,
    pub holder_exponent: f64,
    pub single_sign_near_max_cusps: bool,
    bumps: Vec<Option<WallBump>>,
    angular: Angular,
    perimeter: f64,
}

#[inline]
fn bump(x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        let t = 1.0 - x * x;
        t * t
    }
}

impl Observable {
    pub fn new(table: &TableSpec, spec: ObservableSpec) -> Result<Self> {
        let mut bumps = vec![None; table.pieces.len()];
        let angular = match &spec {
            ObservableSpec::Constant { value } => {
                if *value != 0.0 {
                    return Err(Error::Hypothesis(format!("constant observable {value} is not mean-zero")));
                }
                Angular::Uniform
            }
            ObservableSpec::CuspBump { weights, width, angular } => {
                if !(*width > 0.0) {
                    return Err(Error::Config(format!("bump width must be positive, got {width}")));
                }
                for w in weights {
                    let k = table
                        .cusps
                        .iter()
                        .position(|c| c.label == w.label)
                        .ok_or_else(|| Error::Config(format!("no cusp with label {}", w.label)))?;
                    let (ip, im) = table.walls[k];
                    bumps[ip] = Some(WallBump { weight: w.plus, width: *width });
                    bumps[im] = Some(WallBump { weight: w.minus, width: *width });
                }
                *angular
            }
            ObservableSpec::Wave { angular, .. } => *angular,
        };
        let mut obs = Observable {
            spec,
            raw_mean: 0.0,
            sup_norm: 0.0,
            holder_exponent: 1.0,
            single_sign_near_max_cusps: false,
            bumps,
            angular,
            perimeter: table.perimeter,
        };
        let mut spatial = 0.0;
        for (i, p) in table.pieces.iter().enumerate() {
            spatial += integrate(|r| obs.spatial(table, i, p.param_of_r(r)), p.r_lo, p.r_hi, 1e-14);
        }
        obs.raw_mean = spatial / table.perimeter * angular.mu_mean();
        let m = obs.raw_mean;
        obs.sup_norm = match &obs.spec {
            ObservableSpec::Constant { .. } => 0.0,
            ObservableSpec::CuspBump { weights, .. } => {
                weights.iter().flat_map(|w| [w.plus, w.minus]).map(|a| (a - m).abs()).fold(m.abs(), f64::max)
            }
            ObservableSpec::Wave { amplitude, .. } => amplitude.abs() + m.abs(),
        };
        obs.single_sign_near_max_cusps = table.j_star.iter().all(|&l| {
            let (lo, hi) = (0..=64)
                .map(|k| PI * (k as f64 + 0.5) / 65.0)
                .flat_map(|phi| [obs.cusp_limit(table, l, Side::Plus, phi), obs.cusp_limit(table, l, Side::Minus, phi)])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            lo >= 0.0 || hi <= 0.0
        });
        Ok(obs)
    }

    /// Position-dependent factor of the uncentred function.
    #[inline]
    fn spatial(&self, table: &TableSpec, piece: usize, param: f64) -> f64 {
        match &self.spec {
            ObservableSpec::Constant { value } => *value,
            ObservableSpec::CuspBump { .. } => match (&self.bumps[piece], &table.pieces[piece].kind) {
                (Some(b), PieceKind::Wall(w)) => {
                    if b.weight == 0.0 {
                        return 0.0;
                    }
                    b.weight * bump(w.profile.arclength(param) / b.width)
                }
                _ => 0.0,
            },
            ObservableSpec::Wave { mode, amplitude, phase, .. } => {
                let r = table.pieces[piece].r_of_param(param);
                amplitude * (2.0 * PI * *mode as f64 * r / self.perimeter + phase).cos()
            }
        }
    }

    #[inline]
    pub fn eval_state(&self, table: &TableSpec, st: &State) -> f64 {
        let sp = self.spatial(table, st.piece, st.param);
        let a = match self.angular {
            Angular::Uniform => 1.0,
            Angular::Sine => sin_phi(table, st),
        };
        sp * a - self.raw_mean
    }

    pub fn eval(&self, table: &TableSpec, x: Collision) -> Result<f64> {
        let st = state_from_collision(table, x)?;
        let r = table.wrap(x.r);
        let piece = table.piece_index(r);
        Ok(self.spatial(table, piece, st.param) * self.angular.factor(x.phi.sin()) - self.raw_mean)
    }

    /// `f̃_{i,±}(φ)`: limit of `f` at the vertex of cusp `label` along a wall.
    pub fn cusp_limit(&self, table: &TableSpec, label: usize, side: Side, phi: f64) -> f64 {
        let a = self.angular.factor(phi.sin());
        let sp = match &self.spec {
            ObservableSpec::Constant { value } => *value,
            ObservableSpec::CuspBump { weights, .. } => weights
                .iter()
                .find(|w| w.label == label)
                .map(|w| match side {
                    Side::Plus => w.plus,
                    Side::Minus => w.minus,
                })
                .unwrap_or(0.0),
            ObservableSpec::Wave { mode, amplitude, phase, .. } => {
                let r = table.cusp_by_label(label).map(|c| c.vertex_abscissa).unwrap_or(0.0);
                amplitude * (2.0 * PI * *mode as f64 * r / self.perimeter + phase).cos()
            }
        };
        sp * a - self.raw_mean
    }

    /// `I_{f,i} = ¼ ∫_0^π (f̃_{i,-} + f̃_{i,+}) sin^{1/α} φ dφ`.
    pub fn i_f(&self, table: &TableSpec, label: usize, alpha: f64) -> f64 {
        let p = 1.0 / alpha;
        0.25 * integrate(
            |phi| {
                (self.cusp_limit(table, label, Side::Minus, phi) + self.cusp_limit(table, label, Side::Plus, phi))
                    * phi.sin().powf(p)
            },
            0.0,
            PI,
            1e-13,
        )
    }
}

impl PhaseFunction for Observable {
    #[inline]
    fn eval(&self, table: &TableSpec, st: &State) -> f64 {
        self.eval_state(table, st)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sample_mu;
    use crate::geometry::{build_one_cusp_table, build_two_cusp_table, OneCuspParams, TwoCuspParams};
    use crate::stable::i_one;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bump_mean_matches_closed_form() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        for angular in [Angular::Uniform, Angular::Sine] {
            let spec = ObservableSpec::CuspBump {
                weights: vec![BumpWeight { label: 1, plus: 0.7, minus: 1.3 }],
                width: 0.4,
                angular,
            };
            let f = Observable::new(&t, spec).unwrap();
            let want = 2.0 * (8.0 * 0.4 / 15.0) * angular.mu_mean() / t.perimeter;
            assert!((f.raw_mean - want).abs() < 1e-10, "{} vs {want}", f.raw_mean);
        }
    }

    #[test]
    fn wave_has_zero_mean() {
        let t = build_two_cusp_table(&TwoCuspParams::default()).unwrap();
        let f =
            Observable::new(&t, ObservableSpec::Wave { mode: 2, amplitude: 1.0, phase: 0.3, angular: Angular::Sine })
                .unwrap();
        assert!(f.raw_mean.abs() < 1e-8);
    }

    #[test]
    fn monte_carlo_mean_is_zero() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let f = Observable::new(&t, ObservableSpec::single_cusp(1, 1.0, 0.5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).filter_map(|_| f.eval(&t, sample_mu(&t, &mut rng)).ok()).collect();
        let (m, se) = crate::numeric::mean_and_se(&xs);
        assert!(m.abs() < 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn nonzero_constant_rejected() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        assert!(Observable::new(&t, ObservableSpec::Constant { value: 2.0 }).is_err());
        let z = Observable::new(&t, ObservableSpec::Constant { value: 0.0 }).unwrap();
        assert_eq!(z.i_f(&t, 1, 1.5), 0.0);
    }

    #[test]
    fn cusp_limits_match_eval_near_vertex() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let spec = ObservableSpec::CuspBump {
            weights: vec![BumpWeight { label: 1, plus: 0.5, minus: -0.25 }],
            width: 0.3,
            angular: Angular::Sine,
        };
        let f = Observable::new(&t, spec).unwrap();
        let c = &t.cusps[0];
        for &d in &[1e-3, 1e-2] {
            for &phi in &[0.3, 1.5, 2.8] {
                let up = f.eval(&t, Collision { r: c.vertex_abscissa + d, phi }).unwrap();
                let dn = f.eval(&t, Collision { r: c.vertex_abscissa - d, phi }).unwrap();
                // Lipschitz bound of the bump: |b'| <= 8/(3√3) / w
                let lip = 0.5 * 1.54 / 0.3 * d;
                assert!((up - f.cusp_limit(&t, 1, Side::Plus, phi)).abs() <= lip);
                assert!((dn - f.cusp_limit(&t, 1, Side::Minus, phi)).abs() <= lip);
            }
        }
    }

    #[test]
    fn i_f_closed_forms() {
        let t = build_one_cusp_table(&OneCuspParams::default()).unwrap();
        let a = 1.5;
        // f ≡ 1 near the cusp (before centring)
        let f = Observable::new(&t, ObservableSpec::single_cusp(1, 1.0, 0.5)).unwrap();
        let want = (1.0 - f.raw_mean) * i_one(a);
        assert!((f.i_f(&t, 1, a) - want).abs() < 1e-10);
        // antisymmetric sides cancel
        let g = Observable::new(
            &t,
            ObservableSpec::CuspBump {
                weights: vec![BumpWeight { label: 1, plus: 1.0, minus: -1.0 }],
                width: 0.5,
                angular: Angular::Uniform,
            },
        )
        .unwrap();
        assert!(g.i_f(&t, 1, a).abs() < 1e-12);
        // sin φ angular factor: ½∫ sin^{1+1/α}, checked with Gauss-Legendre panels
        let h = Observable::new(
            &t,
            ObservableSpec::CuspBump {
                weights: vec![BumpWeight { label: 1, plus: 1.0, minus: 1.0 }],
                width: 0.5,
                angular: Angular::Sine,
            },
        )
        .unwrap();
        let mut gl = 0.0;
        let panels = 4000;
        for k in 0..panels {
            let lo = PI * k as f64 / panels as f64;
            let hi = PI * (k + 1) as f64 / panels as f64;
            gl += crate::numeric::gauss_legendre8(|x| x.sin().powf(1.0 + 1.0 / a), lo, hi);
        }
        let want = 0.5 * gl - h.raw_mean * i_one(a);
        assert!((h.i_f(&t, 1, a) - want).abs() < 1e-10);
    }

    #[test]
    fn sign_flags() {
        let t = build_two_cusp_table(&TwoCuspParams::default()).unwrap();
        let pos = Observable::new(&t, ObservableSpec::two_cusp(1.0, 1.0, 0.3)).unwrap();
        assert!(pos.single_sign_near_max_cusps);
        let split = Observable::new(
            &t,
            ObservableSpec::CuspBump {
                weights: vec![BumpWeight { label: 1, plus: 1.0, minus: -1.0 }],
                width: 0.3,
                angular: Angular::Uniform,
            },
        )
        .unwrap();
        assert!(!split.single_sign_near_max_cusps);
    }
}
