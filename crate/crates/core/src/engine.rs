//! Optimal cutoff selection and its family-wise error rate.

use serde::{Deserialize, Serialize};

use crate::covariance::{cov_masked, cov_no_covariates, cov_with_covariates, CorrelationMatrix, MaskedDesign};
use crate::data::{dichotomize, dichotomize_pair, CutoffGrid, CutoffTest, Dataset};
use crate::error::{BossError, Result};
use crate::mvn::{mvn_rectangle_with, norm_sf, MvnOptions};
use crate::regress::{FitConfig, Fitter, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Sidedness {
    #[default]
    #[serde(rename = "two-sided")]
    TwoSided,
    #[serde(rename = "one-sided")]
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub seed: u64,
    pub mvn: MvnOptions,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            alpha: 0.05,
            sidedness: Sidedness::TwoSided,
            seed: 0,
            mvn: MvnOptions::default(),
        }
    }
}

impl TestOptions {
    pub fn with_seed(seed: u64) -> Self {
        TestOptions {
            seed,
            ..Default::default()
        }
    }
}

/// Ties in `|z|` closer than this go to the smallest index.
pub const ARGMAX_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BossResult {
    pub model: Model,
    pub n: usize,
    /// Cutoffs requested before filtering, deduplication and failed fits.
    pub k_requested: usize,
    /// Cutoffs that entered the FWER computation.
    pub k_used: usize,
    /// 1-based position in `per_cutoff`.
    pub optimal_index: usize,
    pub optimal_cutoff: f64,
    pub z_star: f64,
    pub fwer: f64,
    pub fwer_mc_error: f64,
    pub mvn_points: usize,
    pub mvn_converged: bool,
    pub reject: bool,
    pub alpha: f64,
    pub sidedness: Sidedness,
    /// How many cutoffs attained the maximum |z| (the first was chosen).
    pub argmax_ties: usize,
    pub per_cutoff: Vec<CutoffTest>,
    pub warnings: Vec<String>,
}

impl BossResult {
    pub fn optimal(&self) -> &CutoffTest {
        &self.per_cutoff[self.optimal_index - 1]
    }

    /// Unadjusted p-value of the selected cutoff, in the result's sidedness.
    pub fn unadjusted_p(&self) -> f64 {
        single_test_p(self.z_star.abs(), self.sidedness)
    }
}

fn single_test_p(z_abs: f64, sidedness: Sidedness) -> f64 {
    match sidedness {
        Sidedness::TwoSided => (2.0 * norm_sf(z_abs)).min(1.0),
        Sidedness::OneSided => norm_sf(z_abs),
    }
}

/// FWER of the maximum `|z|` among tests with null correlation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fwer {
    pub value: f64,
    pub error: f64,
    pub points: usize,
    pub converged: bool,
}

pub fn fwer(
    z_abs: f64,
    sigma: &CorrelationMatrix,
    sidedness: Sidedness,
    mvn: &MvnOptions,
    seed: u64,
) -> Result<Fwer> {
    let k = sigma.k();
    if k == 1 {
        return Ok(Fwer {
            value: single_test_p(z_abs, sidedness),
            error: 0.0,
            points: 0,
            converged: true,
        });
    }
    let lower = match sidedness {
        Sidedness::TwoSided => {
            if z_abs == 0.0 {
                return Ok(Fwer {
                    value: 1.0,
                    error: 0.0,
                    points: 0,
                    converged: true,
                });
            }
            vec![-z_abs; k]
        }
        Sidedness::OneSided => vec![f64::NEG_INFINITY; k],
    };
    let upper = vec![z_abs; k];
    let r = mvn_rectangle_with(&lower, &upper, sigma, mvn, seed)?;
    Ok(Fwer {
        value: (1.0 - r.probability).clamp(0.0, 1.0),
        error: r.error_estimate,
        points: r.points_used,
        converged: r.converged,
    })
}

/// Fits every cutoff, picks the largest `|z|` and computes its FWER under
/// the joint normal null.
pub fn boss_test(
    data: &Dataset,
    grid: &CutoffGrid,
    cfg: &FitConfig,
    opts: &TestOptions,
) -> Result<BossResult> {
    validate_options(opts)?;
    let fitter = Fitter::for_dataset(data, cfg)?;
    let mut warnings = Vec::new();
    if grid.truncated {
        warnings.push(format!(
            "cutoff grid reduced from {} to {} admissible cutoffs",
            grid.requested,
            grid.k()
        ));
    }
    if data.dropped_rows > 0 {
        warnings.push(format!("{} rows with missing values dropped", data.dropped_rows));
    }

    let mut tests = Vec::new();
    let mut designs: Vec<Vec<bool>> = Vec::new();
    for (i, &tau) in grid.cutoffs.iter().enumerate() {
        let x = dichotomize(&data.biomarker, tau);
        if designs.contains(&x) {
            warnings.push(format!("cutoff {tau} duplicates an earlier dichotomization; skipped"));
            continue;
        }
        match fitter.fit(&x) {
            Ok(f) => {
                tests.push(CutoffTest {
                    cutoff_index: tests.len() + 1,
                    cutoff: tau,
                    beta_hat: f.beta,
                    se: f.se,
                    z: f.z,
                    n_high: f.n_high,
                    n_low: f.n_low,
                });
                designs.push(x);
            }
            Err(e) => warnings.push(format!("cutoff {} ({tau}) dropped: {e}", i + 1)),
        }
    }
    if tests.is_empty() {
        return Err(BossError::AllFitsFailed(warnings.join("; ")));
    }

    let sigma = if data.p() == 0 {
        let m: Vec<usize> = tests.iter().map(|t| t.n_high).collect();
        cov_no_covariates(&m, data.n())?
    } else {
        cov_with_covariates(&designs, &data.covariates)?
    };
    finish(cfg.model, data.n(), grid.requested, tests, &sigma, opts, warnings)
}

fn validate_options(opts: &TestOptions) -> Result<()> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(BossError::InvalidInput("alpha must lie in (0, 1)".into()));
    }
    Ok(())
}

fn finish(
    model: Model,
    n: usize,
    k_requested: usize,
    tests: Vec<CutoffTest>,
    sigma: &CorrelationMatrix,
    opts: &TestOptions,
    warnings: Vec<String>,
) -> Result<BossResult> {
    let max_abs = tests.iter().map(|t| t.z.abs()).fold(0.0, f64::max);
    let best = tests
        .iter()
        .position(|t| t.z.abs() >= max_abs - ARGMAX_TIE_TOL)
        .expect("nonempty");
    let argmax_ties = tests
        .iter()
        .filter(|t| t.z.abs() >= max_abs - ARGMAX_TIE_TOL)
        .count();
    let f = fwer(max_abs, sigma, opts.sidedness, &opts.mvn, opts.seed)?;
    let mut warnings = warnings;
    if !f.converged {
        warnings.push(format!(
            "MVN integration did not reach tolerance (error {:.3e})",
            f.error
        ));
    }
    Ok(BossResult {
        model,
        n,
        k_requested,
        k_used: tests.len(),
        optimal_index: best + 1,
        optimal_cutoff: tests[best].cutoff,
        z_star: tests[best].z,
        fwer: f.value,
        fwer_mc_error: f.error,
        mvn_points: f.points,
        mvn_converged: f.converged,
        reject: f.value < opts.alpha,
        alpha: opts.alpha,
        sidedness: opts.sidedness,
        argmax_ties,
        per_cutoff: tests,
        warnings,
    })
}

/// Result over the lattice of cutoff pairs of two biomarkers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairResult {
    #[serde(flatten)]
    pub result: BossResult,
    /// `(first, second)` cutoff of each entry in `result.per_cutoff`.
    pub cutoff_pairs: Vec<(f64, f64)>,
    pub optimal_pair: (f64, f64),
    /// How correlations between tests on different sample subsets were
    /// obtained.
    pub covariance_method: &'static str,
}

/// Double-positive vs double-negative comparison over every pair of
/// cutoffs; discordant samples are excluded from each pair's fit.
pub fn boss_test_pair(
    data: &Dataset,
    grid1: &CutoffGrid,
    grid2: &CutoffGrid,
    cfg: &FitConfig,
    opts: &TestOptions,
    min_group: usize,
) -> Result<PairResult> {
    validate_options(opts)?;
    cfg.validate()?;
    let b2 = data
        .second_biomarker
        .as_ref()
        .ok_or_else(|| BossError::InvalidInput("pair test needs a second biomarker".into()))?;
    let mut warnings = Vec::new();
    let mut tests = Vec::new();
    let mut pairs = Vec::new();
    let mut designs: Vec<MaskedDesign> = Vec::new();

    for &t1 in &grid1.cutoffs {
        for &t2 in &grid2.cutoffs {
            let pd = match dichotomize_pair(&data.biomarker, t1, b2, t2, min_group) {
                Ok(pd) => pd,
                Err(e) => {
                    warnings.push(format!("pair ({t1}, {t2}) dropped: {e}"));
                    continue;
                }
            };
            let rows = pd.rows();
            let labels = pd.masked_labels();
            if designs.iter().any(|d| d.rows == rows && d.labels == labels) {
                warnings.push(format!("pair ({t1}, {t2}) duplicates an earlier design; skipped"));
                continue;
            }
            let sub = data.select_rows(&rows);
            let fit = Fitter::for_dataset(&sub, cfg).and_then(|f| f.fit(&labels));
            match fit {
                Ok(f) => {
                    tests.push(CutoffTest {
                        cutoff_index: tests.len() + 1,
                        cutoff: t1,
                        beta_hat: f.beta,
                        se: f.se,
                        z: f.z,
                        n_high: f.n_high,
                        n_low: f.n_low,
                    });
                    pairs.push((t1, t2));
                    designs.push(MaskedDesign { rows, labels });
                }
                Err(e) => warnings.push(format!("pair ({t1}, {t2}) dropped: {e}")),
            }
        }
    }
    if tests.is_empty() {
        return Err(BossError::AllFitsFailed(warnings.join("; ")));
    }
    let sigma = cov_masked(&designs, data.n(), &data.covariates)?;
    let result = finish(
        cfg.model,
        data.n(),
        grid1.requested * grid2.requested,
        tests,
        &sigma,
        opts,
        warnings,
    )?;
    let optimal_pair = pairs[result.optimal_index - 1];
    Ok(PairResult {
        result,
        cutoff_pairs: pairs,
        optimal_pair,
        covariance_method: "mask-intersection",
    })
}
