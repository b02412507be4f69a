//! Wall-time comparison of BOSS against the permutation baseline across the
//! number of candidate cutoffs.

use std::time::Instant;

use serde::Serialize;

use crate::data::{build_grid, Dataset};
use crate::engine::{boss_test, TestOptions};
use crate::error::{BossError, Result};
use crate::permutation::permute_fwer;
use crate::regress::{FitConfig, Model};
use crate::simulate::{derive_seed, mean_se, synthetic_source, Series};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub ks: Vec<usize>,
    pub n: usize,
    /// Datasets per model and k.
    pub datasets: usize,
    pub n_perm: usize,
    pub models: Vec<Model>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ks: vec![6, 8, 10, 12, 14],
            n: 500,
            datasets: 10,
            n_perm: 1000,
            models: vec![Model::Linear, Model::Cox],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelTiming {
    pub model: Model,
    pub boss_mean_ms: f64,
    pub perm_mean_ms: f64,
    pub ratio: f64,
}

/// Times pooled over models, as mean and standard error per run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub k: usize,
    pub runs: usize,
    pub boss_mean_ms: f64,
    pub boss_se_ms: f64,
    pub perm_mean_ms: f64,
    pub perm_se_ms: f64,
    pub ratio: f64,
    pub by_model: Vec<ModelTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub n: usize,
    pub n_perm: usize,
    pub datasets: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Mean times against k, one series per method, plus the ratio.
    pub fn plot_series(&self) -> Vec<Series> {
        let x: Vec<f64> = self.rows.iter().map(|r| r.k as f64).collect();
        vec![
            Series {
                name: "boss_ms".into(),
                x: x.clone(),
                y: self.rows.iter().map(|r| r.boss_mean_ms).collect(),
            },
            Series {
                name: "permutation_ms".into(),
                x: x.clone(),
                y: self.rows.iter().map(|r| r.perm_mean_ms).collect(),
            },
            Series {
                name: "ratio".into(),
                x,
                y: self.rows.iter().map(|r| r.ratio).collect(),
            },
        ]
    }
}

/// Runs on a single worker thread so that neither method benefits from
/// parallel hardware.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.ks.is_empty() || cfg.datasets == 0 || cfg.models.is_empty() {
        return Err(BossError::InvalidInput("bench needs k values, models and datasets".into()));
    }
    if cfg.n_perm == 0 {
        return Err(BossError::NoPermutations);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| BossError::InvalidInput(e.to_string()))?;
    pool.install(|| bench_rows(cfg))
}

fn bench_rows(cfg: &BenchConfig) -> Result<BenchReport> {
    let sources: Vec<(Model, Vec<Dataset>)> = cfg
        .models
        .iter()
        .enumerate()
        .map(|(m, &model)| Ok((model, synthetic_source(model, cfg.n, cfg.datasets, derive_seed(cfg.seed, m as u64, 7))?)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &k in &cfg.ks {
        let mut boss_all = Vec::new();
        let mut perm_all = Vec::new();
        let mut by_model = Vec::new();
        for (model, datasets) in &sources {
            let fit = match model {
                Model::Linear => FitConfig::linear(),
                Model::Cox => FitConfig::cox(),
            };
            let mut boss_ms = Vec::new();
            let mut perm_ms = Vec::new();
            for (d, data) in datasets.iter().enumerate() {
                let seed = derive_seed(cfg.seed, k as u64, d as u64);
                let opts = TestOptions::with_seed(seed);

                let start = Instant::now();
                let grid = build_grid(&data.biomarker, k, data.default_min_group())?;
                let boss = boss_test(data, &grid, &fit, &opts);
                let boss_time = start.elapsed().as_secs_f64() * 1e3;

                let start = Instant::now();
                let grid = build_grid(&data.biomarker, k, data.default_min_group())?;
                let perm = permute_fwer(data, &grid, &fit, cfg.n_perm, seed);
                let perm_time = start.elapsed().as_secs_f64() * 1e3;

                if boss.is_ok() && perm.is_ok() {
                    boss_ms.push(boss_time);
                    perm_ms.push(perm_time);
                }
            }
            let (b, _) = mean_se(&boss_ms);
            let (p, _) = mean_se(&perm_ms);
            by_model.push(ModelTiming {
                model: *model,
                boss_mean_ms: b,
                perm_mean_ms: p,
                ratio: p / b,
            });
            boss_all.extend(boss_ms);
            perm_all.extend(perm_ms);
        }
        let (boss_mean_ms, boss_se_ms) = mean_se(&boss_all);
        let (perm_mean_ms, perm_se_ms) = mean_se(&perm_all);
        log::info!("k = {k}: boss {boss_mean_ms:.3} ms, permutation {perm_mean_ms:.1} ms");
        rows.push(BenchRow {
            k,
            runs: boss_all.len(),
            boss_mean_ms,
            boss_se_ms,
            perm_mean_ms,
            perm_se_ms,
            ratio: perm_mean_ms / boss_mean_ms,
            by_model,
        });
    }
    Ok(BenchReport {
        n: cfg.n,
        n_perm: cfg.n_perm,
        datasets: cfg.datasets,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_row_per_k() {
        let cfg = BenchConfig {
            ks: vec![4, 6],
            n: 80,
            datasets: 2,
            n_perm: 20,
            ..Default::default()
        };
        let r = run_bench(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].k, 4);
        assert_eq!(r.rows[0].by_model.len(), 2);
        assert!(r.rows.iter().all(|row| row.ratio > 0.0 && row.runs == 4));
        assert_eq!(r.plot_series().len(), 3);
    }
}
