//! Blueprint-based data generation and the BOSS-vs-permutation experiment
//! harness.
//!
//! A blueprint is learnt from one biomarker: its selected cutoff, the effect
//! at that cutoff, an intercept and either a noise level (linear) or a
//! baseline hazard (Cox). Outcomes are then regenerated around the same
//! biomarker values, with the effect kept ("positive" data) or zeroed
//! ("negative" data).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::data::{build_grid, default_min_group, dichotomize, quantile_sorted, Dataset, Outcome};
use crate::engine::{boss_test, TestOptions};
use crate::error::{BossError, Result};
use crate::permutation::permute_fwer;
use crate::regress::{FitConfig, Fitter, Model};

/// Piecewise-constant hazard; the last rate continues past the last break.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineHazard {
    /// Interval starts, beginning at 0 and increasing.
    pub breaks: Vec<f64>,
    pub rates: Vec<f64>,
}

pub const MIN_HAZARD: f64 = 1e-8;

impl BaselineHazard {
    pub fn constant(rate: f64) -> Self {
        BaselineHazard {
            breaks: vec![0.0],
            rates: vec![rate.max(MIN_HAZARD)],
        }
    }

    /// Random smooth shape with mean hazard `level` over `[0, horizon]`: a
    /// natural cubic spline through `points` random heights, evaluated at
    /// interval midpoints.
    pub fn random_spline(rng: &mut impl Rng, horizon: f64, level: f64, points: usize, intervals: usize) -> Self {
        let points = points.max(2);
        let xs: Vec<f64> = (0..points)
            .map(|j| horizon * j as f64 / (points - 1) as f64)
            .collect();
        let ys: Vec<f64> = (0..points).map(|_| rng.random_range(0.25..1.75)).collect();
        let spline = NaturalSpline::new(&xs, &ys);
        let width = horizon / intervals as f64;
        let breaks: Vec<f64> = (0..intervals).map(|j| j as f64 * width).collect();
        let mut rates: Vec<f64> = breaks
            .iter()
            .map(|&s| spline.eval(s + 0.5 * width).max(MIN_HAZARD))
            .collect();
        let mean = rates.iter().sum::<f64>() / intervals as f64;
        for r in &mut rates {
            *r = (*r * level / mean).max(MIN_HAZARD);
        }
        BaselineHazard { breaks, rates }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        let mut h = 0.0;
        for (j, &start) in self.breaks.iter().enumerate() {
            if t <= start {
                break;
            }
            let end = self.breaks.get(j + 1).copied().unwrap_or(f64::INFINITY);
            h += self.rates[j] * (t.min(end) - start);
        }
        h
    }

    /// Smallest `t` with `cumulative(t) = h`.
    pub fn inverse_cumulative(&self, h: f64) -> f64 {
        let mut acc = 0.0;
        for (j, &start) in self.breaks.iter().enumerate() {
            let end = self.breaks.get(j + 1).copied().unwrap_or(f64::INFINITY);
            let block = self.rates[j] * (end - start);
            if acc + block >= h {
                return start + (h - acc) / self.rates[j];
            }
            acc += block;
        }
        f64::INFINITY
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative(t)).exp()
    }
}

/// Interpolating cubic with zero second derivative at both ends.
struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas algorithm)
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let size = n - 2;
            let mut diag: Vec<f64> = (0..size).map(|i| 2.0 * (h[i] + h[i + 1])).collect();
            let mut rhs: Vec<f64> = (0..size)
                .map(|i| 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]))
                .collect();
            for i in 1..size {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            for i in (0..size).rev() {
                let upper = if i + 1 < size { h[i + 1] * m[i + 2] } else { 0.0 };
                m[i + 1] = (rhs[i] - upper) / diag[i];
            }
        }
        NaturalSpline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let j = match self.x.iter().position(|&xi| xi > t) {
            Some(0) => 0,
            Some(p) => p - 1,
            None => n - 2,
        };
        let (x0, x1) = (self.x[j], self.x[j + 1]);
        let h = x1 - x0;
        let (a, b) = ((x1 - t) / h, (t - x0) / h);
        a * self.y[j]
            + b * self.y[j + 1]
            + ((a * a * a - a) * self.m[j] + (b * b * b - b) * self.m[j + 1]) * h * h / 6.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Blueprint {
    pub model: Model,
    pub beta: f64,
    pub cutoff: f64,
    pub intercept: f64,
    /// Linear model only.
    pub noise_sd: f64,
    /// Cox model only.
    pub baseline: Option<BaselineHazard>,
    pub censor_rate: f64,
}

const SPLINE_POINTS: usize = 6;
const HAZARD_INTERVALS: usize = 50;
const MAX_CENSOR_RATE: f64 = 0.95;

/// Learns a blueprint from the BOSS-selected cutoff of `data`. The seed only
/// drives the random baseline shape.
pub fn build_blueprint(
    data: &Dataset,
    k: usize,
    cfg: &FitConfig,
    opts: &TestOptions,
) -> Result<Blueprint> {
    let grid = build_grid(&data.biomarker, k, data.default_min_group())?;
    let result = boss_test(data, &grid, cfg, opts)?;
    let cutoff = result.optimal_cutoff;
    let x = dichotomize(&data.biomarker, cutoff);
    let fit = Fitter::for_dataset(data, cfg)?.fit(&x)?;
    match &data.outcome {
        Outcome::Quantitative(_) => Ok(Blueprint {
            model: Model::Linear,
            beta: fit.beta,
            cutoff,
            intercept: fit.intercept.unwrap_or(0.0),
            noise_sd: fit.residual_sd.unwrap_or(1.0).max(f64::MIN_POSITIVE),
            baseline: None,
            censor_rate: 0.0,
        }),
        Outcome::Survival { time, event } => {
            // exponential level given the fitted effect
            let exposure: f64 = time
                .iter()
                .zip(&x)
                .map(|(&t, &xi)| t * if xi { fit.beta.exp() } else { 1.0 })
                .sum();
            let events = event.iter().filter(|&&e| e).count();
            let level = events as f64 / exposure;
            let horizon = time.iter().copied().fold(0.0, f64::max);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            Ok(Blueprint {
                model: Model::Cox,
                beta: fit.beta,
                cutoff,
                intercept: 0.0,
                noise_sd: 1.0,
                baseline: Some(BaselineHazard::random_spline(
                    &mut rng,
                    horizon,
                    level,
                    SPLINE_POINTS,
                    HAZARD_INTERVALS,
                )),
                censor_rate: (1.0 - events as f64 / time.len() as f64).min(MAX_CENSOR_RATE),
            })
        }
    }
}

/// Regenerates an outcome for `biomarker` from the blueprint. The random
/// draws do not depend on `zero_effect`, so positive and negative data from
/// one seed differ only through the effect.
pub fn simulate_outcome(bp: &Blueprint, biomarker: &[f64], zero_effect: bool, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = if zero_effect { 0.0 } else { bp.beta };
    let x = dichotomize(biomarker, bp.cutoff);
    match bp.model {
        Model::Linear => Outcome::Quantitative(
            x.iter()
                .map(|&xi| {
                    let e: f64 = rng.sample(StandardNormal);
                    bp.intercept + if xi { beta } else { 0.0 } + bp.noise_sd * e
                })
                .collect(),
        ),
        Model::Cox => {
            let fallback = BaselineHazard::constant(1.0);
            let baseline = bp.baseline.as_ref().unwrap_or(&fallback);
            let n = x.len();
            let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let t: Vec<f64> = x
                .iter()
                .zip(&u)
                .map(|(&xi, &ui)| {
                    let lp = bp.intercept + if xi { beta } else { 0.0 };
                    let target = -(1.0 - ui).ln() * (-lp).exp();
                    baseline.inverse_cumulative(target).max(f64::MIN_POSITIVE)
                })
                .collect();
            match censor_horizon(&t, bp.censor_rate) {
                None => Outcome::Survival {
                    time: t,
                    event: vec![true; n],
                },
                Some(c) => {
                    let cens: Vec<f64> = v.iter().map(|&vi| (c * vi).max(f64::MIN_POSITIVE)).collect();
                    Outcome::Survival {
                        time: t.iter().zip(&cens).map(|(&ti, &ci)| ti.min(ci)).collect(),
                        event: t.iter().zip(&cens).map(|(&ti, &ci)| ti <= ci).collect(),
                    }
                }
            }
        }
    }
}

/// Upper end `c` of uniform censoring on `[0, c]` whose expected censored
/// fraction given the event times equals `rate`.
fn censor_horizon(times: &[f64], rate: f64) -> Option<f64> {
    if rate <= 0.0 {
        return None;
    }
    let expected = |c: f64| times.iter().map(|&t| (t / c).min(1.0)).sum::<f64>() / times.len() as f64;
    let finite_max = times.iter().copied().filter(|t| t.is_finite()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (finite_max * 1e-9, finite_max * 1e9);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if expected(mid) > rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((lo * hi).sqrt())
}

/// Log-normal mixture of two expression modes, loosely mimicking RNA-seq.
pub fn pseudo_gene(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let weight: f64 = rng.random_range(0.2..0.8);
    let mu1: f64 = rng.random_range(0.0..4.0);
    let mu2 = mu1 + rng.random_range(0.5..2.0);
    let sd: f64 = rng.random_range(0.3..1.0);
    let (low, high) = (
        Normal::new(mu1, sd).expect("sd > 0"),
        Normal::new(mu2, sd).expect("sd > 0"),
    );
    (0..n)
        .map(|_| {
            let z = if rng.random::<f64>() < weight {
                low.sample(rng)
            } else {
                high.sample(rng)
            };
            z.exp()
        })
        .collect()
}

/// splitmix64 finalizer over a combination of the inputs.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Self-contained stand-in for real data: pseudo-genes, each with its own
/// outcome carrying an effect of random size at a random cutoff. Effects are
/// drawn on the z-scale (`0..4` standard errors) so that the pool spans
/// null to clearly detectable.
pub fn synthetic_source(model: Model, n: usize, genes: usize, seed: u64) -> Result<Vec<Dataset>> {
    (0..genes)
        .map(|g| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, g as u64, 0));
            let b = pseudo_gene(n, &mut rng);
            let mut sorted = b.clone();
            sorted.sort_by(f64::total_cmp);
            let share: f64 = rng.random_range(0.25..0.75);
            let tau = quantile_sorted(&sorted, 1.0 - share);
            let delta: f64 = rng.random_range(0.0..4.0);
            let info = n as f64 * share * (1.0 - share);
            match model {
                Model::Linear => {
                    let bp = Blueprint {
                        model,
                        beta: delta / info.sqrt(),
                        cutoff: tau,
                        intercept: 1.0,
                        noise_sd: 1.0,
                        baseline: None,
                        censor_rate: 0.0,
                    };
                    let y = simulate_outcome(&bp, &b, false, rng.random());
                    Dataset::new(default_ids(n), y, b, nalgebra::DMatrix::zeros(n, 0), vec![])
                }
                Model::Cox => {
                    let censor = 0.3;
                    let bp = Blueprint {
                        model,
                        beta: delta / (info * (1.0 - censor)).sqrt(),
                        cutoff: tau,
                        intercept: 0.0,
                        noise_sd: 1.0,
                        baseline: Some(BaselineHazard::constant(0.1)),
                        censor_rate: censor,
                    };
                    let y = simulate_outcome(&bp, &b, false, rng.random());
                    Dataset::new(default_ids(n), y, b, nalgebra::DMatrix::zeros(n, 0), vec![])
                }
            }
        })
        .collect()
}

fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimGene {
    pub name: String,
    pub blueprint: Blueprint,
    pub biomarker: Vec<f64>,
    /// FWER of the source data, used for ranking.
    pub source_fwer: f64,
}

/// Strong- and weak-effect blueprints: among sources significant at
/// `alpha`, the `per_class` smallest and largest FWERs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Panel {
    pub model: Model,
    pub strong: Vec<SimGene>,
    pub weak: Vec<SimGene>,
}

pub const BLUEPRINT_K: usize = 10;

pub fn build_panel(
    sources: &[Dataset],
    cfg: &FitConfig,
    per_class: usize,
    alpha: f64,
    seed: u64,
) -> Result<Panel> {
    let mut genes: Vec<SimGene> = sources
        .par_iter()
        .enumerate()
        .filter_map(|(g, data)| {
            let opts = TestOptions {
                seed: derive_seed(seed, g as u64, 1),
                ..TestOptions::default()
            };
            let grid = build_grid(&data.biomarker, BLUEPRINT_K, data.default_min_group()).ok()?;
            let result = boss_test(data, &grid, cfg, &opts).ok()?;
            if result.fwer >= alpha {
                return None;
            }
            let blueprint = build_blueprint(data, BLUEPRINT_K, cfg, &opts).ok()?;
            Some(SimGene {
                name: format!("gene{}", g + 1),
                blueprint,
                biomarker: data.biomarker.clone(),
                source_fwer: result.fwer,
            })
        })
        .collect();
    if genes.is_empty() {
        return Err(BossError::InvalidInput("no source biomarker is significant".into()));
    }
    genes.sort_by(|a, b| a.source_fwer.total_cmp(&b.source_fwer).then(a.name.cmp(&b.name)));
    let take = per_class.min(genes.len());
    let strong = genes[..take].to_vec();
    let weak = genes[genes.len() - take..].to_vec();
    Ok(Panel {
        model: cfg.model,
        strong,
        weak,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Strong,
    Weak,
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scenario {
    pub model: Model,
    pub k: usize,
    pub effect: Effect,
    pub n_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub replicates: usize,
    /// 0 skips the permutation method.
    pub n_perm: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            replicates: 100,
            n_perm: 1000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    /// Rejection proportion per gene, in panel order.
    pub rates: Vec<f64>,
    pub pooled_rate: f64,
    pub median_rate: f64,
    pub q1_rate: f64,
    pub q3_rate: f64,
    pub mean_ms: f64,
    pub se_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub genes: Vec<String>,
    pub replicates: usize,
    pub n_perm: usize,
    pub boss: MethodSummary,
    pub permutation: Option<MethodSummary>,
    /// Exact two-sided sign test on replicates where the decisions differ.
    pub sign_test_p: Option<f64>,
    pub failed_replicates: usize,
}

struct Replicate {
    gene: usize,
    boss: bool,
    boss_ms: f64,
    perm: Option<(bool, f64)>,
}

pub fn run_experiment(panel: &Panel, scenario: &Scenario, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.replicates == 0 {
        return Err(BossError::InvalidInput("replicates must be at least 1".into()));
    }
    if !(scenario.n_scale > 0.0) {
        return Err(BossError::InvalidInput("n_scale must be positive".into()));
    }
    let genes: Vec<&SimGene> = match scenario.effect {
        Effect::Strong => panel.strong.iter().collect(),
        Effect::Weak => panel.weak.iter().collect(),
        Effect::Null => {
            let mut all: Vec<&SimGene> = panel.strong.iter().collect();
            all.extend(panel.weak.iter().filter(|g| !panel.strong.iter().any(|s| s.name == g.name)));
            all
        }
    };
    if genes.is_empty() {
        return Err(BossError::InvalidInput("panel has no genes for this effect".into()));
    }
    let fit_cfg = match scenario.model {
        Model::Linear => FitConfig::linear(),
        Model::Cox => FitConfig::cox(),
    };
    let zero_effect = scenario.effect == Effect::Null;

    let jobs: Vec<(usize, usize)> = (0..genes.len())
        .flat_map(|g| (0..cfg.replicates).map(move |r| (g, r)))
        .collect();
    let outcomes: Vec<Option<Replicate>> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let gene = genes[g];
            let seed = derive_seed(cfg.seed, g as u64, r as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n0 = gene.biomarker.len();
            let biomarker: Vec<f64> = if scenario.n_scale == 1.0 {
                gene.biomarker.clone()
            } else {
                let n = ((n0 as f64) * scenario.n_scale).round().max(2.0) as usize;
                (0..n).map(|_| gene.biomarker[rng.random_range(0..n0)]).collect()
            };
            let outcome = simulate_outcome(&gene.blueprint, &biomarker, zero_effect, rng.random());
            let n = biomarker.len();
            let data = Dataset::new(default_ids(n), outcome, biomarker, nalgebra::DMatrix::zeros(n, 0), vec![])
                .ok()?;
            let opts = TestOptions {
                alpha: cfg.alpha,
                seed: rng.random(),
                ..TestOptions::default()
            };

            let start = Instant::now();
            let grid = build_grid(&data.biomarker, scenario.k, default_min_group(0));
            let boss = grid.as_ref().ok().and_then(|g| boss_test(&data, g, &fit_cfg, &opts).ok());
            let boss_ms = start.elapsed().as_secs_f64() * 1e3;
            let boss = match boss {
                Some(b) => b,
                None => {
                    log::debug!("replicate {r} of {} failed", gene.name);
                    return None;
                }
            };
            let perm = if cfg.n_perm > 0 {
                let start = Instant::now();
                let grid = grid.as_ref().ok()?;
                let p = permute_fwer(&data, grid, &fit_cfg, cfg.n_perm, rng.random()).ok()?;
                Some((p.fwer < cfg.alpha, start.elapsed().as_secs_f64() * 1e3))
            } else {
                None
            };
            Some(Replicate {
                gene: g,
                boss: boss.reject,
                boss_ms,
                perm,
            })
        })
        .collect();

    let failed_replicates = outcomes.iter().filter(|o| o.is_none()).count();
    if failed_replicates > 0 {
        log::warn!("{failed_replicates} replicates failed and were excluded");
    }
    let done: Vec<Replicate> = outcomes.into_iter().flatten().collect();
    if done.is_empty() {
        return Err(BossError::AllFitsFailed("every replicate failed".into()));
    }

    let boss = summarize(
        "boss",
        genes.len(),
        done.iter().map(|r| (r.gene, r.boss, r.boss_ms)),
    );
    let (permutation, sign_test_p) = if cfg.n_perm > 0 {
        let s = summarize(
            "permutation",
            genes.len(),
            done.iter().filter_map(|r| r.perm.map(|(d, t)| (r.gene, d, t))),
        );
        let only_boss = done.iter().filter(|r| r.perm.is_some_and(|(d, _)| r.boss && !d)).count();
        let only_perm = done.iter().filter(|r| r.perm.is_some_and(|(d, _)| !r.boss && d)).count();
        (Some(s), Some(sign_test(only_boss, only_perm)))
    } else {
        (None, None)
    };

    Ok(ExperimentReport {
        scenario: *scenario,
        genes: genes.iter().map(|g| g.name.clone()).collect(),
        replicates: cfg.replicates,
        n_perm: cfg.n_perm,
        boss,
        permutation,
        sign_test_p,
        failed_replicates,
    })
}

fn summarize(method: &str, genes: usize, rows: impl Iterator<Item = (usize, bool, f64)>) -> MethodSummary {
    let mut hits = vec![0usize; genes];
    let mut counts = vec![0usize; genes];
    let mut times = Vec::new();
    for (g, reject, ms) in rows {
        counts[g] += 1;
        hits[g] += reject as usize;
        times.push(ms);
    }
    let rates: Vec<f64> = hits
        .iter()
        .zip(&counts)
        .map(|(&h, &c)| if c == 0 { f64::NAN } else { h as f64 / c as f64 })
        .collect();
    let mut sorted: Vec<f64> = rates.iter().copied().filter(|r| r.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| if sorted.is_empty() { f64::NAN } else { quantile_sorted(&sorted, p) };
    let total: usize = counts.iter().sum();
    let (mean_ms, se_ms) = mean_se(&times);
    MethodSummary {
        method: method.to_string(),
        pooled_rate: hits.iter().sum::<usize>() as f64 / total.max(1) as f64,
        median_rate: q(0.5),
        q1_rate: q(0.25),
        q3_rate: q(0.75),
        rates,
        mean_ms,
        se_ms,
    }
}

pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Two-sided exact binomial test of `a` vs `b` discordant counts.
pub fn sign_test(a: usize, b: usize) -> f64 {
    let n = a + b;
    if n == 0 {
        return 1.0;
    }
    let dist = Binomial::new(0.5, n as u64).expect("valid binomial");
    (2.0 * dist.cdf(a.min(b) as u64)).min(1.0)
}

/// x/y series for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ExperimentReport {
    /// Per-gene rejection rates of each method against the gene position.
    pub fn plot_series(&self) -> Vec<Series> {
        let x: Vec<f64> = (1..=self.genes.len()).map(|g| g as f64).collect();
        let mut out = vec![Series {
            name: "boss".into(),
            x: x.clone(),
            y: self.boss.rates.clone(),
        }];
        if let Some(p) = &self.permutation {
            out.push(Series {
                name: "permutation".into(),
                x,
                y: p.rates.clone(),
            });
        }
        out
    }
}
