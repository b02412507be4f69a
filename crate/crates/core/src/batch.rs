//! Genome-scale runner: one BOSS test per biomarker, then Benjamini-Hochberg
//! across biomarkers using each biomarker's FWER as its p-value.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{build_grid, default_min_group};
use crate::engine::{boss_test, BossResult, TestOptions};
use crate::error::{BossError, Result};
use crate::io::{inner_join, Clinical, ExpressionFile};
use crate::regress::{FitConfig, Model};

/// Step-up adjusted values `q_(i) = min_{j >= i} p_(j) m / j`, capped at 1,
/// in input order.
pub fn bh_adjust(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(BossError::InvalidInput(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        q[i] = running.max(p[i]);
    }
    Ok(q)
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub fit: FitConfig,
    pub k: usize,
    /// `None` uses the default `max(5, p + 2)`.
    pub min_group: Option<usize>,
    pub alpha_fdr: f64,
    pub test: TestOptions,
    /// Genes parsed per pass over the expression file.
    pub block: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            fit: FitConfig::linear(),
            k: 10,
            min_group: None,
            alpha_fdr: 0.05,
            test: TestOptions::default(),
            block: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneResult {
    pub gene: String,
    pub optimal_cutoff: Option<f64>,
    pub n_high: Option<usize>,
    pub n_low: Option<usize>,
    pub beta: Option<f64>,
    pub z: Option<f64>,
    pub fwer: Option<f64>,
    pub q: Option<f64>,
    pub significant: bool,
    pub error_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchMetadata {
    pub model: Model,
    pub k: usize,
    pub min_group: usize,
    pub covariates: Vec<String>,
    pub alpha_fdr: f64,
    pub seed: u64,
    pub samples_joined: usize,
    pub unmatched_clinical: usize,
    pub unmatched_expression: usize,
    pub genes: usize,
    pub genes_failed: usize,
    pub significant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub metadata: BatchMetadata,
    pub genes: Vec<GeneResult>,
}

/// BOSS test of one biomarker against already-aligned clinical data.
pub fn test_biomarker(
    clinical: &Clinical,
    values: Vec<f64>,
    cfg: &BatchConfig,
    seed: u64,
) -> Result<BossResult> {
    let data = clinical.dataset(values)?;
    let min_group = cfg.min_group.unwrap_or_else(|| default_min_group(data.p()));
    let grid = build_grid(&data.biomarker, cfg.k, min_group)?;
    let opts = TestOptions { seed, ..cfg.test };
    boss_test(&data, &grid, &cfg.fit, &opts)
}

struct Joined {
    clinical: Clinical,
    /// Column of each joined sample in the expression data.
    expression_rows: Vec<usize>,
    unmatched_clinical: usize,
    unmatched_expression: usize,
}

fn join(clinical: &Clinical, expression_ids: &[String]) -> Result<Joined> {
    let (pairs, unmatched_clinical, unmatched_expression) =
        inner_join(&clinical.sample_ids, expression_ids)?;
    if pairs.is_empty() {
        return Err(BossError::NoJoinableBiomarkers);
    }
    if unmatched_clinical + unmatched_expression > 0 {
        log::warn!(
            "{unmatched_clinical} clinical and {unmatched_expression} expression samples unmatched"
        );
    }
    let rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    Ok(Joined {
        clinical: clinical.select(&rows),
        expression_rows: pairs.iter().map(|p| p.1).collect(),
        unmatched_clinical,
        unmatched_expression,
    })
}

fn gene_result(gene: &str, outcome: Result<BossResult>) -> GeneResult {
    match outcome {
        Ok(r) => {
            let best = r.optimal();
            GeneResult {
                gene: gene.to_string(),
                optimal_cutoff: Some(r.optimal_cutoff),
                n_high: Some(best.n_high),
                n_low: Some(best.n_low),
                beta: Some(best.beta_hat),
                z: Some(best.z),
                fwer: Some(r.fwer),
                q: None,
                significant: false,
                error_code: None,
            }
        }
        Err(e) => GeneResult {
            gene: gene.to_string(),
            optimal_cutoff: None,
            n_high: None,
            n_low: None,
            beta: None,
            z: None,
            fwer: None,
            q: None,
            significant: false,
            error_code: Some(e.code().to_string()),
        },
    }
}

fn run_block(
    joined: &Joined,
    genes: &[String],
    first: usize,
    values: Vec<Vec<f64>>,
    cfg: &BatchConfig,
    seed: u64,
    progress: &AtomicUsize,
) -> Vec<GeneResult> {
    values
        .into_par_iter()
        .enumerate()
        .map(|(offset, column)| {
            let g = first + offset;
            let aligned: Vec<f64> = joined.expression_rows.iter().map(|&r| column[r]).collect();
            let result = test_biomarker(&joined.clinical, aligned, cfg, seed.wrapping_add(g as u64));
            let done = progress.fetch_add(1, Ordering::Relaxed) + 1;
            if done.is_multiple_of(1000) {
                log::info!("{done} biomarkers tested");
            }
            gene_result(&genes[g], result)
        })
        .collect()
}

fn finish(
    joined: &Joined,
    mut genes: Vec<GeneResult>,
    cfg: &BatchConfig,
    seed: u64,
) -> Result<BatchReport> {
    let ok: Vec<usize> = (0..genes.len()).filter(|&g| genes[g].fwer.is_some()).collect();
    let p: Vec<f64> = ok.iter().map(|&g| genes[g].fwer.unwrap_or(1.0)).collect();
    let q = bh_adjust(&p)?;
    for (&g, q) in ok.iter().zip(q) {
        genes[g].q = Some(q);
        genes[g].significant = q < cfg.alpha_fdr;
    }
    let p_cov = joined.clinical.covariate_names.len();
    Ok(BatchReport {
        metadata: BatchMetadata {
            model: cfg.fit.model,
            k: cfg.k,
            min_group: cfg.min_group.unwrap_or_else(|| default_min_group(p_cov)),
            covariates: joined.clinical.covariate_names.clone(),
            alpha_fdr: cfg.alpha_fdr,
            seed,
            samples_joined: joined.clinical.n(),
            unmatched_clinical: joined.unmatched_clinical,
            unmatched_expression: joined.unmatched_expression,
            genes: genes.len(),
            genes_failed: genes.len() - ok.len(),
            significant: genes.iter().filter(|g| g.significant).count(),
        },
        genes,
    })
}

/// Batch over an in-memory matrix; `values[g]` is gene `g` over `sample_ids`.
pub fn run_batch_matrix(
    clinical: &Clinical,
    sample_ids: &[String],
    genes: &[String],
    values: Vec<Vec<f64>>,
    cfg: &BatchConfig,
    seed: u64,
) -> Result<BatchReport> {
    if genes.is_empty() {
        return Err(BossError::NoJoinableBiomarkers);
    }
    let joined = join(clinical, sample_ids)?;
    let progress = AtomicUsize::new(0);
    let results = run_block(&joined, genes, 0, values, cfg, seed, &progress);
    finish(&joined, results, cfg, seed)
}

/// Batch over an expression file, parsed in blocks of `cfg.block` genes.
pub fn run_batch(
    expression: &ExpressionFile,
    clinical: &Clinical,
    cfg: &BatchConfig,
    seed: u64,
) -> Result<BatchReport> {
    if expression.genes.is_empty() {
        return Err(BossError::NoJoinableBiomarkers);
    }
    let joined = join(clinical, &expression.sample_ids)?;
    let progress = AtomicUsize::new(0);
    let mut results = Vec::with_capacity(expression.genes.len());
    expression.for_each_block(cfg.block, |first, values| {
        results.extend(run_block(&joined, &expression.genes, first, values, cfg, seed, &progress));
        Ok(())
    })?;
    finish(&joined, results, cfg, seed)
}
