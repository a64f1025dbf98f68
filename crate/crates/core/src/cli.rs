//! Run configuration, manifests and CSV output for the `cusp` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cusp_analysis::{launch_batch, CornerOptions, Precision};
use crate::dynamics::{collision_of_state, sample_mu, trajectory};
use crate::error::{Error, Result};
use crate::geometry::{OneCuspParams, Side, TableParams, TableSpec};
use crate::induced::{return_map, sample_mu_tilde_state, ReturnOptions};
use crate::observable::{Observable, ObservableSpec};
use crate::paths_metrics::m1_vs_j1_experiment;
use crate::stable::{ks_distance, stable_fit};
use crate::stable_stats::{
    birkhoff_samples, correlation_decay, point_process_counts, return_tail_check, return_tail_options, stream_returns,
    task_rng, theoretical_params, PpRegion,
};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    /// Double precision, switching to double-double for long corner series.
    #[default]
    Standard,
    Extended,
}

impl PrecisionMode {
    pub fn corner(self) -> Precision {
        match self {
            PrecisionMode::Standard => Precision::Auto,
            PrecisionMode::Extended => Precision::Extended,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelWeight {
    pub label: usize,
    pub weight: f64,
}

/// Subcommand-specific settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Table,
    Simulate {
        orbits: usize,
        steps: usize,
    },
    Induce {
        returns: usize,
        chains: usize,
    },
    CornerSeries {
        cusp: usize,
        side: Side,
        count: usize,
        n_min: f64,
        n_max: f64,
        gamma_bar: f64,
        eta1: f64,
        /// Minimum number of reflections on the first-hit wall.
        #[serde(default = "default_n0")]
        n0: usize,
    },
    StableCheck {
        n: usize,
        reps: usize,
    },
    TailCheck {
        cusp: usize,
        returns: u64,
        chunks: usize,
    },
    CorrDecay {
        lags: Vec<usize>,
        orbits: usize,
        orbit_len: usize,
        fit_range: (usize, usize),
        /// Second observable; the first one is reused when absent.
        #[serde(default)]
        g: Option<ObservableSpec>,
    },
    PpCheck {
        n: usize,
        reps: usize,
        weights: Vec<LabelWeight>,
        regions: Vec<PpRegion>,
    },
    Paths {
        ladder: Vec<usize>,
        reps: usize,
    },
}

fn default_n0() -> usize {
    CornerOptions::default().n0
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Table => "table",
            Experiment::Simulate { .. } => "simulate",
            Experiment::Induce { .. } => "induce",
            Experiment::CornerSeries { .. } => "corner-series",
            Experiment::StableCheck { .. } => "stable-check",
            Experiment::TailCheck { .. } => "tail-check",
            Experiment::CorrDecay { .. } => "corr-decay",
            Experiment::PpCheck { .. } => "pp-check",
            Experiment::Paths { .. } => "paths",
        }
    }

    /// Default settings for a subcommand name.
    pub fn default_for(name: &str) -> Result<Experiment> {
        Ok(match name {
            "table" => Experiment::Table,
            "simulate" => Experiment::Simulate { orbits: 10, steps: 1000 },
            "induce" => Experiment::Induce { returns: 10_000, chains: 4 },
            "corner-series" => Experiment::CornerSeries {
                cusp: 1,
                side: Side::Plus,
                count: 100,
                n_min: 100.0,
                n_max: 10_000.0,
                gamma_bar: 0.3,
                eta1: 0.1,
                n0: default_n0(),
            },
            "stable-check" => Experiment::StableCheck { n: 10_000, reps: 1000 },
            "tail-check" => Experiment::TailCheck { cusp: 1, returns: 10_000_000, chunks: 64 },
            "corr-decay" => Experiment::CorrDecay {
                lags: vec![1, 2, 4, 8, 16, 32, 64, 128, 256],
                orbits: 256,
                orbit_len: 100_000,
                fit_range: (8, 256),
                g: None,
            },
            "pp-check" => Experiment::PpCheck {
                n: 100_000,
                reps: 200,
                weights: vec![LabelWeight { label: 1, weight: 1.0 }],
                regions: vec![PpRegion { t: (0.0, 1.0), y: (0.2, f64::INFINITY) }],
            },
            "paths" => Experiment::Paths { ladder: vec![100, 1000, 10_000], reps: 200 },
            other => return Err(Error::Config(format!("unknown subcommand `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub precision: PrecisionMode,
    pub table: TableParams,
    #[serde(default)]
    pub observable: Option<ObservableSpec>,
    #[serde(default)]
    pub experiment: Option<Experiment>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            precision: PrecisionMode::Standard,
            table: TableParams::OneCusp(OneCuspParams::default()),
            observable: None,
            experiment: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills in the experiment section for `command`, rejecting a config
    /// written for a different subcommand.
    pub fn resolve(mut self, command: &str) -> Result<RunConfig> {
        match &self.experiment {
            Some(e) if e.name() != command => {
                return Err(Error::Config(format!(
                    "config experiment is `{}` but the subcommand is `{command}`",
                    e.name()
                )))
            }
            Some(_) => {}
            None => self.experiment = Some(Experiment::default_for(command)?),
        }
        if self.observable.is_none() {
            let first = match &self.table {
                TableParams::OneCusp(_) => ObservableSpec::single_cusp(1, 1.0, 0.3),
                TableParams::TwoCusp(_) => ObservableSpec::two_cusp(1.0, -1.0, 0.3),
            };
            self.observable = Some(first);
        }
        Ok(self)
    }

    /// SHA-256 of the resolved config and the artifact version. The output
    /// directory is left out so that reruns elsewhere compare equal.
    pub fn manifest_hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = format!("{}\nversion = \"{ARTIFACT_VERSION}\"\n", c.to_toml()?);
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn manifest(&self) -> Result<String> {
        Ok(format!(
            "# manifest {}\nartifact_version = \"{ARTIFACT_VERSION}\"\n\n{}",
            self.manifest_hash()?,
            self.to_toml()?
        ))
    }
}

/// Reals with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// CSV text with a leading manifest comment and a header row.
pub struct Csv {
    text: String,
    width: usize,
}

pub enum Cell {
    I(u64),
    R(f64),
    S(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as u64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::I(v)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::R(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::I(v as u64)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl Csv {
    pub fn new(hash: &str, header: &[&str]) -> Self {
        Csv { text: format!("# manifest {hash}\n{}\n", header.join(",")), width: header.len() }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.width);
        let line: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::I(v) => v.to_string(),
                Cell::R(v) => fmt_real(v),
                Cell::S(s) => s,
            })
            .collect();
        let _ = writeln!(self.text, "{}", line.join(","));
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

macro_rules! row {
    ($csv:expr, $($x:expr),* $(,)?) => { $csv.row(vec![$(Cell::from($x)),*]) };
}

/// Files produced by one run, in write order.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    /// Human-readable summary lines.
    pub report: Vec<String>,
    /// Hypothesis or validation failures; a nonempty list means a nonzero
    /// exit status.
    pub failures: Vec<String>,
}

impl RunOutput {
    fn put(&mut self, name: &str, csv: Csv) {
        self.files.push((name.to_string(), csv.text));
    }

    /// Writes the files and the manifest under `dir`.
    pub fn write(&self, cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        let m = dir.join("manifest.toml");
        fs::write(&m, cfg.manifest()?)?;
        paths.push(m);
        for (name, text) in &self.files {
            let p = dir.join(name);
            fs::write(&p, text)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// The files a resolved config would produce.
pub fn plan(cfg: &RunConfig) -> Vec<&'static str> {
    let mut out = vec!["manifest.toml"];
    out.extend(match cfg.experiment.as_ref() {
        Some(Experiment::Table) => vec!["table.csv", "table_summary.csv"],
        Some(Experiment::Simulate { .. }) => vec!["orbits.csv"],
        Some(Experiment::Induce { .. }) => vec!["returns.csv"],
        Some(Experiment::CornerSeries { .. }) => vec!["corner_series.csv", "corner_summary.csv"],
        Some(Experiment::StableCheck { .. }) => vec!["stable_samples.csv", "stable_summary.csv"],
        Some(Experiment::TailCheck { .. }) => vec!["tail_curve.csv", "tail_summary.csv"],
        Some(Experiment::CorrDecay { .. }) => vec!["correlation.csv", "correlation_summary.csv"],
        Some(Experiment::PpCheck { .. }) => vec!["pp_counts.csv"],
        Some(Experiment::Paths { .. }) => vec!["paths.csv", "paths_summary.csv"],
        None => vec![],
    });
    out
}

fn observable(table: &TableSpec, cfg: &RunConfig) -> Result<Observable> {
    let spec = cfg.observable.clone().ok_or_else(|| Error::Config("missing observable section".into()))?;
    Observable::new(table, spec)
}

/// Runs a resolved config and returns the CSV contents.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let exp = cfg.experiment.clone().ok_or_else(|| Error::Config("missing experiment section".into()))?;
    let table = cfg.table.build()?;
    let hash = cfg.manifest_hash()?;
    let seed = cfg.seed;
    let mut out = RunOutput::default();
    match exp {
        Experiment::Table => {
            let mut csv = Csv::new(&hash, &["piece", "r_start", "length", "description"]);
            let mut r = 0.0;
            for (k, p) in table.pieces.iter().enumerate() {
                row!(csv, k, r, p.length(), format!("\"{}\"", p.describe()).as_str());
                r += p.length();
            }
            out.put("table.csv", csv);
            let mut s = Csv::new(
                &hash,
                &["cusp_label", "beta", "c_plus", "c_minus", "alpha_i", "in_j_star", "perimeter", "alpha"],
            );
            for c in &table.cusps {
                row!(
                    s,
                    c.label,
                    c.beta,
                    c.c_plus,
                    c.c_minus,
                    c.alpha(),
                    table.j_star.contains(&c.label),
                    table.perimeter,
                    table.alpha()
                );
            }
            out.put("table_summary.csv", s);
            out.report.push(format!(
                "perimeter {:.6}, alpha {:.6}, J* {:?}",
                table.perimeter,
                table.alpha(),
                table.j_star
            ));
        }
        Experiment::Simulate { orbits, steps } => {
            let parts: Vec<Result<Vec<(f64, f64, f64)>>> = (0..orbits)
                .into_par_iter()
                .map(|o| {
                    let mut rng = task_rng(seed, o as u64);
                    let x = sample_mu(&table, &mut rng);
                    let seg = trajectory(&table, x, steps)?;
                    Ok(seg
                        .collisions
                        .iter()
                        .zip(seg.free_paths.iter().chain(std::iter::repeat(&f64::NAN)))
                        .map(|(c, &d)| (c.r, c.phi, d))
                        .collect())
                })
                .collect();
            let mut csv = Csv::new(&hash, &["orbit_id", "step", "r", "phi", "free_path"]);
            for (o, part) in parts.into_iter().enumerate() {
                for (k, (r, phi, d)) in part?.into_iter().enumerate() {
                    row!(csv, o, k, r, phi, d);
                }
            }
            out.put("orbits.csv", csv);
        }
        Experiment::Induce { returns, chains } => {
            let f = observable(&table, cfg)?;
            let chains = chains.max(1);
            let parts: Vec<Vec<crate::induced::ReturnRecord>> = (0..chains)
                .into_par_iter()
                .map(|c| {
                    let mut rng = task_rng(seed, c as u64);
                    let quota = returns / chains + usize::from(c < returns % chains);
                    let mut recs = Vec::with_capacity(quota);
                    let mut x = collision_of_state(&table, &sample_mu_tilde_state(&table, &mut rng));
                    while recs.len() < quota {
                        match return_map(&table, x, Some(&f), ReturnOptions::default()) {
                            Ok(r) => {
                                x = r.end;
                                recs.push(r);
                            }
                            Err(e) => {
                                log::debug!("discarding excursion: {e}");
                                x = collision_of_state(&table, &sample_mu_tilde_state(&table, &mut rng));
                            }
                        }
                    }
                    recs
                })
                .collect();
            let mut csv = Csv::new(&hash, &["start_r", "start_phi", "R", "cusp_label", "f_tilde", "f_star"]);
            for r in parts.into_iter().flatten() {
                row!(
                    csv,
                    r.start.r,
                    r.start.phi,
                    r.return_time,
                    r.cusp_label,
                    r.induced_value.unwrap_or(f64::NAN),
                    r.f_star.unwrap_or(f64::NAN)
                );
            }
            out.put("returns.csv", csv);
        }
        Experiment::CornerSeries { cusp, side, count, n_min, n_max, gamma_bar, eta1, n0 } => {
            let spec = table.cusp_by_label(cusp).ok_or_else(|| Error::Config(format!("unknown cusp label {cusp}")))?;
            let opts = CornerOptions { gamma_bar, eta1, n0, ..CornerOptions::default() };
            let batch = launch_batch(spec, side, (n_min, n_max), count, seed, cfg.precision.corner(), &opts);
            let mut per = Csv::new(&hash, &["series_id", "n", "s_n", "gamma_n", "v_n", "H_n"]);
            let mut sum =
                Csv::new(&hash, &["series_id", "N", "N_prime", "N1", "N2", "N3", "C_N", "C_N_prime", "precision"]);
            let mut failed = 0;
            for (id, s) in batch.iter().enumerate() {
                match s {
                    Ok(s) => {
                        for k in 0..s.n {
                            row!(per, id, k + 1, s.s[k], s.gamma[k], s.v[k], s.h[k]);
                        }
                        let prec = format!("{:?}", s.precision).to_lowercase();
                        row!(sum, id, s.n, s.n_prime, s.n1, s.n2, s.n3, s.c_n, s.c_n_prime, prec.as_str());
                    }
                    Err(e) => {
                        failed += 1;
                        log::warn!("series {id}: {e}");
                    }
                }
            }
            out.put("corner_series.csv", per);
            out.put("corner_summary.csv", sum);
            out.report.push(format!("{} series, {failed} failed", batch.len()));
            if failed > 0 {
                out.failures.push(format!("{failed} corner series failed to extract"));
            }
        }
        Experiment::StableCheck { n, reps } => {
            let f = observable(&table, cfg)?;
            if !f.single_sign_near_max_cusps {
                log::warn!("observable changes sign near a maximal cusp");
            }
            let th = theoretical_params(&table, &f)?;
            let run = birkhoff_samples(&table, &f, n, reps, seed)?;
            let mut csv = Csv::new(&hash, &["rep", "scaled_sum"]);
            for (k, x) in run.samples.iter().enumerate() {
                row!(csv, k, *x);
            }
            out.put("stable_samples.csv", csv);
            let fit = stable_fit(&run.samples)?;
            let mut sorted = run.samples.clone();
            sorted.sort_by(f64::total_cmp);
            let ks_theory = ks_distance(&sorted, |x| th.params.cdf(x));
            let mut s = Csv::new(
                &hash,
                &[
                    "n",
                    "reps",
                    "discarded",
                    "alpha",
                    "sigma_theory",
                    "xi_theory",
                    "scale_theory",
                    "alpha_fit",
                    "xi_fit",
                    "scale_fit",
                    "ks_fit",
                    "ks_theory",
                ],
            );
            row!(
                s,
                n,
                reps,
                run.discarded,
                th.alpha,
                th.sigma_f,
                th.xi_f,
                th.params.scale,
                fit.params.alpha,
                fit.params.xi,
                fit.params.scale,
                fit.ks_distance,
                ks_theory
            );
            out.put("stable_summary.csv", s);
            out.report.push(format!(
                "alpha fit {:.4} (theory {:.4}), xi fit {:.4} (theory {:.4}), KS {:.4}",
                fit.params.alpha, th.alpha, fit.params.xi, th.xi_f, fit.ks_distance
            ));
        }
        Experiment::TailCheck { cusp, returns, chunks } => {
            let stream = stream_returns(&table, returns, chunks, seed);
            let rep = return_tail_check(&table, cusp, &stream, &return_tail_options())?;
            let mut c = Csv::new(&hash, &["y", "tail_probability", "count"]);
            for &(y, p, k) in &rep.curve {
                row!(c, y, p, k);
            }
            out.put("tail_curve.csv", c);
            let mut s = Csv::new(
                &hash,
                &[
                    "cusp_label",
                    "returns",
                    "discarded",
                    "alpha_i",
                    "alpha_hat",
                    "alpha_lo",
                    "alpha_hi",
                    "constant_at_alpha",
                    "target_constant",
                    "k",
                    "inconclusive",
                ],
            );
            row!(
                s,
                cusp,
                stream.total(),
                stream.discarded,
                rep.alpha_i,
                rep.fit.exponent,
                rep.fit.exponent_ci.0,
                rep.fit.exponent_ci.1,
                rep.constant_at_alpha,
                rep.target_constant,
                rep.fit.k,
                rep.fit.inconclusive
            );
            out.put("tail_summary.csv", s);
            out.report.push(format!(
                "cusp {cusp}: exponent {:.4} (alpha_i {:.4}), constant {:.5} (target {:.5})",
                rep.fit.exponent, rep.alpha_i, rep.constant_at_alpha, rep.target_constant
            ));
        }
        Experiment::CorrDecay { lags, orbits, orbit_len, fit_range, g } => {
            let f = observable(&table, cfg)?;
            let g = match g {
                Some(spec) => Observable::new(&table, spec)?,
                None => f.clone(),
            };
            let rep = correlation_decay(&table, &f, &g, &lags, orbits, orbit_len, fit_range, seed)?;
            let mut c = Csv::new(&hash, &["lag", "cov", "std_error", "reliable"]);
            for k in 0..rep.lags.len() {
                row!(c, rep.lags[k], rep.cov[k], rep.std_error[k], rep.reliable[k]);
            }
            out.put("correlation.csv", c);
            let mut s = Csv::new(&hash, &["slope", "slope_se", "fit_lo", "fit_hi"]);
            let (lo, hi) = rep.fit_range.unwrap_or((0, 0));
            row!(s, rep.slope.unwrap_or(f64::NAN), rep.slope_se.unwrap_or(f64::NAN), lo, hi);
            out.put("correlation_summary.csv", s);
            match rep.slope {
                Some(b) => out.report.push(format!("decay slope {b:.4}")),
                None => out.report.push("too few reliable lags for a slope".into()),
            }
        }
        Experiment::PpCheck { n, reps, weights, regions } => {
            let w: BTreeMap<usize, f64> = weights.iter().map(|x| (x.label, x.weight)).collect();
            let rep = point_process_counts(&table, &w, n, reps, &regions, seed)?;
            let mut c =
                Csv::new(&hash, &["t0", "t1", "y0", "y1", "mean", "variance", "std_error", "dispersion", "target"]);
            for r in &rep {
                row!(
                    c,
                    r.region.t.0,
                    r.region.t.1,
                    r.region.y.0,
                    r.region.y.1,
                    r.mean,
                    r.variance,
                    r.std_error,
                    r.dispersion,
                    r.target
                );
            }
            out.put("pp_counts.csv", c);
        }
        Experiment::Paths { ladder, reps } => {
            let f = observable(&table, cfg)?;
            let rep = m1_vs_j1_experiment(&table, &f, f.sup_norm, &ladder, reps, seed)?;
            let mut c =
                Csv::new(&hash, &["n", "rep", "max_jump", "m1_dist", "j1_dist", "j1_lower", "sup_dist", "macro_jump"]);
            for r in &rep.rows {
                row!(c, r.n, r.rep, r.max_jump, r.m1_dist, r.j1_dist, r.j1_lower, r.sup_dist, r.macro_jump);
            }
            out.put("paths.csv", c);
            let mut s = Csv::new(&hash, &["n", "m1_max", "m1_bound", "j0", "qualifying", "macro_j0", "macro_fraction"]);
            for &n in &ladder {
                let rows: Vec<_> = rep.rows.iter().filter(|r| r.n == n).collect();
                let m1_max = rows.iter().map(|r| r.m1_dist).fold(0.0, f64::max);
                let bound = rep.sup_norm * (n as f64).powf(-1.0 / rep.alpha);
                let q = rows.iter().filter(|r| r.max_jump > rep.j0).count();
                row!(s, n, m1_max, bound, rep.j0, q, rep.macro_j0, rep.macro_fraction(n));
            }
            out.put("paths_summary.csv", s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TwoCuspParams;

    fn sample_config() -> RunConfig {
        RunConfig {
            seed: 42,
            output_dir: "runs/a".into(),
            precision: PrecisionMode::Extended,
            table: TableParams::TwoCusp(TwoCuspParams::default()),
            observable: Some(ObservableSpec::two_cusp(1.0, -0.5, 0.3)),
            experiment: Some(Experiment::PpCheck {
                n: 1000,
                reps: 10,
                weights: vec![LabelWeight { label: 1, weight: 1.0 }, LabelWeight { label: 2, weight: -1.0 }],
                regions: vec![PpRegion { t: (0.0, 1.0), y: (0.2, f64::INFINITY) }],
            }),
        }
    }

    #[test]
    fn config_round_trips() {
        let c = sample_config();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        for name in [
            "table",
            "simulate",
            "induce",
            "corner-series",
            "stable-check",
            "tail-check",
            "corr-decay",
            "pp-check",
            "paths",
        ] {
            let c = RunConfig::default().resolve(name).unwrap();
            assert_eq!(RunConfig::parse(&c.to_toml().unwrap()).unwrap(), c, "{name}");
            assert_eq!(c.experiment.as_ref().unwrap().name(), name);
        }
    }

    #[test]
    fn missing_field_is_named() {
        let text = "output_dir = \"x\"\n[table]\nfamily = \"one_cusp\"\nbeta = 3.0\nc_plus = 1.0\nc_minus = 1.0\nwall_length = 1.0\nepsilon = 0.1\n";
        let e = RunConfig::parse(text).unwrap_err().to_string();
        assert!(e.contains("seed"), "{e}");
        let text = "seed = 1\noutput_dir = \"x\"\n[table]\nfamily = \"one_cusp\"\nbeta = 3.0\nc_plus = 1.0\nwall_length = 1.0\nepsilon = 0.1\n";
        let e = RunConfig::parse(text).unwrap_err().to_string();
        assert!(e.contains("c_minus"), "{e}");
    }

    #[test]
    fn mismatched_experiment_is_rejected() {
        let c = sample_config();
        assert!(matches!(c.resolve("paths"), Err(Error::Config(_))));
    }

    #[test]
    fn reals_keep_seventeen_digits() {
        let x = 0.1f64 + 0.2;
        let s = fmt_real(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(fmt_real(f64::INFINITY), "inf");
    }

    #[test]
    fn manifest_hash_tracks_config() {
        let a = sample_config();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.manifest_hash().unwrap(), b.manifest_hash().unwrap());
        b.seed += 1;
        assert_ne!(a.manifest_hash().unwrap(), b.manifest_hash().unwrap());
        assert_eq!(a.manifest_hash().unwrap().len(), 64);
    }
}
