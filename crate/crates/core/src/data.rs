//! Datasets, cutoff grids and dichotomization.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{BossError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Quantitative(Vec<f64>),
    /// `event[s]` is true when the event was observed, false when censored.
    Survival { time: Vec<f64>, event: Vec<bool> },
}

impl Outcome {
    pub fn len(&self) -> usize {
        match self {
            Outcome::Quantitative(y) => y.len(),
            Outcome::Survival { time, .. } => time.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_survival(&self) -> bool {
        matches!(self, Outcome::Survival { .. })
    }

    pub fn n_events(&self) -> Option<usize> {
        match self {
            Outcome::Quantitative(_) => None,
            Outcome::Survival { event, .. } => Some(event.iter().filter(|&&e| e).count()),
        }
    }

    pub fn select(&self, rows: &[usize]) -> Outcome {
        match self {
            Outcome::Quantitative(y) => Outcome::Quantitative(rows.iter().map(|&r| y[r]).collect()),
            Outcome::Survival { time, event } => Outcome::Survival {
                time: rows.iter().map(|&r| time[r]).collect(),
                event: rows.iter().map(|&r| event[r]).collect(),
            },
        }
    }

    fn row_missing(&self, s: usize) -> bool {
        match self {
            Outcome::Quantitative(y) => !y[s].is_finite(),
            Outcome::Survival { time, .. } => !time[s].is_finite(),
        }
    }
}

/// Samples with one outcome, one (or two) continuous biomarkers and an
/// optional covariate matrix. The intercept is never stored in `covariates`;
/// every model prepends it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sample_ids: Vec<String>,
    pub outcome: Outcome,
    pub biomarker: Vec<f64>,
    pub second_biomarker: Option<Vec<f64>>,
    pub covariates: DMatrix<f64>,
    pub covariate_names: Vec<String>,
    /// Rows removed at construction because some value was missing (NaN).
    pub dropped_rows: usize,
}

impl Dataset {
    /// Builds a dataset, dropping listwise any row whose biomarker, outcome
    /// or covariate value is NaN.
    pub fn new(
        sample_ids: Vec<String>,
        outcome: Outcome,
        biomarker: Vec<f64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        Self::assemble(sample_ids, outcome, biomarker, None, covariates, covariate_names)
    }

    /// Like [`Dataset::new`] with a second biomarker for the pair analysis.
    pub fn new_pair(
        sample_ids: Vec<String>,
        outcome: Outcome,
        biomarker: Vec<f64>,
        second_biomarker: Vec<f64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        Self::assemble(
            sample_ids,
            outcome,
            biomarker,
            Some(second_biomarker),
            covariates,
            covariate_names,
        )
    }

    /// Quantitative outcome, no covariates, generated ids. Mostly for tests
    /// and simulation.
    pub fn quantitative(y: Vec<f64>, biomarker: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(
            default_ids(n),
            Outcome::Quantitative(y),
            biomarker,
            DMatrix::zeros(n, 0),
            Vec::new(),
        )
    }

    pub fn survival(time: Vec<f64>, event: Vec<bool>, biomarker: Vec<f64>) -> Result<Self> {
        let n = time.len();
        Self::new(
            default_ids(n),
            Outcome::Survival { time, event },
            biomarker,
            DMatrix::zeros(n, 0),
            Vec::new(),
        )
    }

    fn assemble(
        sample_ids: Vec<String>,
        outcome: Outcome,
        biomarker: Vec<f64>,
        second_biomarker: Option<Vec<f64>>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = biomarker.len();
        if sample_ids.len() != n || outcome.len() != n || covariates.nrows() != n {
            return Err(BossError::InvalidInput(format!(
                "length mismatch: {} ids, {} outcomes, {} biomarker values, {} covariate rows",
                sample_ids.len(),
                outcome.len(),
                n,
                covariates.nrows()
            )));
        }
        if let Some(b2) = &second_biomarker {
            if b2.len() != n {
                return Err(BossError::InvalidInput(format!(
                    "second biomarker has {} values, expected {n}",
                    b2.len()
                )));
            }
        }
        if covariate_names.len() != covariates.ncols() {
            return Err(BossError::InvalidInput(format!(
                "{} covariate names for {} covariate columns",
                covariate_names.len(),
                covariates.ncols()
            )));
        }

        let keep: Vec<usize> = (0..n)
            .filter(|&s| {
                biomarker[s].is_finite()
                    && second_biomarker.as_ref().is_none_or(|b| b[s].is_finite())
                    && !outcome.row_missing(s)
                    && covariates.row(s).iter().all(|v| v.is_finite())
            })
            .collect();
        if keep.is_empty() {
            return Err(BossError::InvalidInput("no complete rows".into()));
        }

        let dropped_rows = n - keep.len();
        let data = Dataset {
            sample_ids: keep.iter().map(|&s| sample_ids[s].clone()).collect(),
            outcome: outcome.select(&keep),
            biomarker: keep.iter().map(|&s| biomarker[s]).collect(),
            second_biomarker: second_biomarker
                .as_ref()
                .map(|b| keep.iter().map(|&s| b[s]).collect()),
            covariates: covariates.select_rows(&keep),
            covariate_names,
            dropped_rows,
        };
        if let Outcome::Survival { time, .. } = &data.outcome {
            if let Some(s) = time.iter().position(|&t| t <= 0.0) {
                return Err(BossError::InvalidInput(format!(
                    "survival time must be strictly positive (sample {})",
                    data.sample_ids[s]
                )));
            }
        }
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.biomarker.len()
    }

    /// Number of covariates, intercept excluded.
    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    /// Row subset (duplicates allowed, as in resampling with replacement).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            sample_ids: rows.iter().map(|&s| self.sample_ids[s].clone()).collect(),
            outcome: self.outcome.select(rows),
            biomarker: rows.iter().map(|&s| self.biomarker[s]).collect(),
            second_biomarker: self
                .second_biomarker
                .as_ref()
                .map(|b| rows.iter().map(|&s| b[s]).collect()),
            covariates: self.covariates.select_rows(rows),
            covariate_names: self.covariate_names.clone(),
            dropped_rows: 0,
        }
    }

    /// Same samples and covariates with a different outcome.
    pub fn with_outcome(&self, outcome: Outcome) -> Result<Dataset> {
        if outcome.len() != self.n() {
            return Err(BossError::InvalidInput("outcome length mismatch".into()));
        }
        let mut d = self.clone();
        d.outcome = outcome;
        Ok(d)
    }

    /// Default per-arm minimum group size: max(5, p + 2).
    pub fn default_min_group(&self) -> usize {
        default_min_group(self.p())
    }
}

pub fn default_min_group(p: usize) -> usize {
    (p + 2).max(5)
}

fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i}")).collect()
}

/// `true` where `b > cutoff`; ties go to the low group.
pub fn dichotomize(biomarker: &[f64], cutoff: f64) -> Vec<bool> {
    biomarker.iter().map(|&b| b > cutoff).collect()
}

/// Sample quantile by linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Ordered candidate cutoffs with the number of samples above each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffGrid {
    pub cutoffs: Vec<f64>,
    pub group_sizes: Vec<usize>,
    /// Number of cutoffs originally requested.
    pub requested: usize,
    pub min_group: usize,
    /// Set when cutoffs were dropped or merged.
    pub truncated: bool,
}

impl CutoffGrid {
    pub fn k(&self) -> usize {
        self.cutoffs.len()
    }

    /// Grid from explicit cutoff values. Values are sorted; cutoffs that
    /// violate `min_group` or duplicate an earlier dichotomization are dropped.
    pub fn from_values(biomarker: &[f64], values: &[f64], min_group: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BossError::InvalidInput("cutoffs must be finite".into()));
        }
        let mut sorted_values = values.to_vec();
        sorted_values.sort_by(f64::total_cmp);
        let mut sorted_b = biomarker.to_vec();
        sorted_b.sort_by(f64::total_cmp);
        Self::admissible(&sorted_b, sorted_values, values.len(), min_group)
    }

    fn admissible(
        sorted_b: &[f64],
        candidates: Vec<f64>,
        requested: usize,
        min_group: usize,
    ) -> Result<Self> {
        let n = sorted_b.len();
        let mut cutoffs = Vec::with_capacity(candidates.len());
        let mut group_sizes: Vec<usize> = Vec::with_capacity(candidates.len());
        for tau in candidates {
            let n_low = sorted_b.partition_point(|&b| b <= tau);
            let m = n - n_low;
            if m < min_group || n_low < min_group {
                continue;
            }
            // identical dichotomization as the previous surviving cutoff
            if group_sizes.last() == Some(&m) {
                continue;
            }
            cutoffs.push(tau);
            group_sizes.push(m);
        }
        if cutoffs.is_empty() {
            return Err(BossError::NoAdmissibleCutoffs);
        }
        let truncated = cutoffs.len() < requested;
        if truncated {
            log::warn!("cutoff grid reduced from {requested} to {}", cutoffs.len());
        }
        Ok(CutoffGrid {
            cutoffs,
            group_sizes,
            requested,
            min_group,
            truncated,
        })
    }
}

/// Cutoffs at the `k` equally spaced interior quantiles `i / (k + 1)`.
pub fn build_grid(biomarker: &[f64], k: usize, min_group: usize) -> Result<CutoffGrid> {
    if k == 0 {
        return Err(BossError::InvalidInput("k must be at least 1".into()));
    }
    if biomarker.is_empty() || biomarker.iter().any(|b| !b.is_finite()) {
        return Err(BossError::InvalidInput(
            "biomarker must be nonempty and finite".into(),
        ));
    }
    if biomarker.len() < 2 * min_group {
        return Err(BossError::InvalidInput(format!(
            "n = {} is smaller than 2 * min_group = {}",
            biomarker.len(),
            2 * min_group
        )));
    }
    let mut sorted = biomarker.to_vec();
    sorted.sort_by(f64::total_cmp);
    let candidates = (1..=k)
        .map(|i| quantile_sorted(&sorted, i as f64 / (k + 1) as f64))
        .collect();
    CutoffGrid::admissible(&sorted, candidates, k, min_group)
}

/// Double-positive vs double-negative labelling of two biomarkers.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDichotomy {
    /// Label of each sample; meaningful only where `mask` is true.
    pub labels: Vec<bool>,
    /// False for discordant samples, which are excluded.
    pub mask: Vec<bool>,
}

impl PairDichotomy {
    pub fn included(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Indices of included samples, in order.
    pub fn rows(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&s| self.mask[s]).collect()
    }

    /// Labels restricted to the included samples.
    pub fn masked_labels(&self) -> Vec<bool> {
        self.rows().into_iter().map(|s| self.labels[s]).collect()
    }
}

pub fn dichotomize_pair(
    b1: &[f64],
    tau1: f64,
    b2: &[f64],
    tau2: f64,
    min_group: usize,
) -> Result<PairDichotomy> {
    if b1.len() != b2.len() {
        return Err(BossError::InvalidInput(
            "biomarkers differ in length".into(),
        ));
    }
    let mut labels = Vec::with_capacity(b1.len());
    let mut mask = Vec::with_capacity(b1.len());
    let (mut pos, mut neg) = (0usize, 0usize);
    for (&u, &v) in b1.iter().zip(b2) {
        let (h1, h2) = (u > tau1, v > tau2);
        labels.push(h1 && h2);
        mask.push(h1 == h2);
        match (h1, h2) {
            (true, true) => pos += 1,
            (false, false) => neg += 1,
            _ => {}
        }
    }
    if pos < min_group || neg < min_group {
        return Err(BossError::InvalidInput(format!(
            "pair cutoff ({tau1}, {tau2}) leaves {pos} double-positive and {neg} double-negative samples (minimum {min_group})"
        )));
    }
    Ok(PairDichotomy { labels, mask })
}

/// Per-cutoff fit summary. `cutoff_index` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffTest {
    pub cutoff_index: usize,
    pub cutoff: f64,
    pub beta_hat: f64,
    pub se: f64,
    pub z: f64,
    pub n_high: usize,
    pub n_low: usize,
}
