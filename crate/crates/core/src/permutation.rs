//! Permutation estimate of the FWER of the maximally selected statistic.
//!
//! The biomarker is shuffled while outcome and covariates stay in place, and
//! every permutation is dichotomized at the original cutoff values.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{dichotomize, CutoffGrid, Dataset};
use crate::error::{BossError, Result};
use crate::regress::{FitConfig, Fitter};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationResult {
    pub fwer: f64,
    pub se: f64,
    /// Observed `max |z|`.
    pub t_obs: f64,
    pub n_perm: usize,
    /// Permutations with `T >= t_obs`.
    pub exceedances: usize,
    /// Permutations in which at least one fit failed; failed cutoffs count
    /// as `|z| = 0`.
    pub degenerate: usize,
    pub k_used: usize,
}

pub fn permute_fwer(
    data: &Dataset,
    grid: &CutoffGrid,
    cfg: &FitConfig,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationResult> {
    if n_perm == 0 {
        return Err(BossError::NoPermutations);
    }
    let fitter = Fitter::for_dataset(data, cfg)?;

    let mut cutoffs = Vec::new();
    let mut designs: Vec<Vec<bool>> = Vec::new();
    let mut t_obs = 0.0f64;
    for &tau in &grid.cutoffs {
        let x = dichotomize(&data.biomarker, tau);
        if designs.contains(&x) {
            continue;
        }
        if let Ok(f) = fitter.fit(&x) {
            t_obs = t_obs.max(f.z.abs());
            cutoffs.push(tau);
        }
        designs.push(x);
    }
    if cutoffs.is_empty() {
        return Err(BossError::AllFitsFailed("no cutoff could be fitted".into()));
    }

    let stats: Vec<(f64, bool)> = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut b = data.biomarker.clone();
            b.shuffle(&mut rng);
            max_statistic(&fitter, &b, &cutoffs)
        })
        .collect();

    // relative slack so that bitwise-equal statistics from rounding count
    let threshold = t_obs * (1.0 - 1e-12);
    let exceedances = stats.iter().filter(|(t, _)| *t >= threshold).count();
    let degenerate = stats.iter().filter(|(_, d)| *d).count();
    if degenerate > 0 {
        log::warn!("{degenerate} of {n_perm} permutations had a failed fit");
    }
    let fwer = (1 + exceedances) as f64 / (n_perm + 1) as f64;
    Ok(PermutationResult {
        fwer,
        se: (fwer * (1.0 - fwer) / n_perm as f64).sqrt(),
        t_obs,
        n_perm,
        exceedances,
        degenerate,
        k_used: cutoffs.len(),
    })
}

fn max_statistic(fitter: &Fitter, biomarker: &[f64], cutoffs: &[f64]) -> (f64, bool) {
    let mut t = 0.0f64;
    let mut failed = false;
    for &tau in cutoffs {
        match fitter.fit(&dichotomize(biomarker, tau)) {
            Ok(f) => t = t.max(f.z.abs()),
            Err(_) => failed = true,
        }
    }
    (t, failed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_grid;
    use crate::engine::{boss_test, TestOptions};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn null_linear(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        Dataset::quantitative(y, b).unwrap()
    }

    #[test]
    fn zero_permutations_rejected() {
        let d = null_linear(40, 1);
        let g = build_grid(&d.biomarker, 3, 5).unwrap();
        let e = permute_fwer(&d, &g, &FitConfig::linear(), 0, 1).unwrap_err();
        assert_eq!(e, BossError::NoPermutations);
        assert_eq!(e.to_string(), "n_perm >= 1 required");
    }

    #[test]
    fn estimate_has_add_one_granularity() {
        let d = null_linear(60, 2);
        let g = build_grid(&d.biomarker, 4, 5).unwrap();
        let r = permute_fwer(&d, &g, &FitConfig::linear(), 1000, 3).unwrap();
        assert!(r.fwer > 0.0 && r.fwer <= 1.0);
        let scaled = r.fwer * 1001.0;
        assert!((scaled - scaled.round()).abs() < 1e-9);
        assert_eq!(r.fwer, (1 + r.exceedances) as f64 / 1001.0);
    }

    #[test]
    fn deterministic_for_seed() {
        let d = null_linear(50, 4);
        let g = build_grid(&d.biomarker, 3, 5).unwrap();
        let a = permute_fwer(&d, &g, &FitConfig::linear(), 200, 9).unwrap();
        let b = permute_fwer(&d, &g, &FitConfig::linear(), 200, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_cutoff_matches_normal_p() {
        // one cutoff: the permutation FWER estimates the two-sided p-value
        let n_perm = 4000;
        let mut misses = 0;
        for s in 0..20 {
            let d = null_linear(80, 100 + s);
            let g = CutoffGrid::from_values(&d.biomarker, &[0.5], 5).unwrap();
            let perm = permute_fwer(&d, &g, &FitConfig::linear(), n_perm, s).unwrap();
            let boss = boss_test(&d, &g, &FitConfig::linear(), &TestOptions::default()).unwrap();
            let p = boss.unadjusted_p();
            let se = (p * (1.0 - p) / n_perm as f64).sqrt().max(1.0 / n_perm as f64);
            if (perm.fwer - p).abs() > 3.0 * se {
                misses += 1;
            }
        }
        // t-based exactness differs from the normal tail slightly at n = 80
        assert!(misses <= 1, "{misses} of 20 outside 3 se");
    }

    #[test]
    fn agrees_with_boss_on_nested_grid() {
        let d = null_linear(200, 11);
        let g = build_grid(&d.biomarker, 6, 5).unwrap();
        let perm = permute_fwer(&d, &g, &FitConfig::linear(), 4000, 5).unwrap();
        let boss = boss_test(&d, &g, &FitConfig::linear(), &TestOptions::default()).unwrap();
        assert!((perm.t_obs - boss.z_star.abs()).abs() < 1e-12);
        assert!((perm.fwer - boss.fwer).abs() < 4.0 * perm.se + 0.01, "{perm:?} {}", boss.fwer);
    }
}
