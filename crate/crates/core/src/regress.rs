//! Per-cutoff regression fits producing Wald Z-statistics.
//!
//! Both fitters are built once per outcome/covariate set and then fit any
//! number of binary group vectors, which is what the engine and the
//! permutation loop need. [`fit_linear`] and [`fit_cox`] are one-shot
//! conveniences over them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Outcome};
use crate::error::{BossError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Linear,
    Cox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    Efron,
    Breslow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub model: Model,
    pub max_iter: usize,
    pub tol: f64,
    pub ties: Ties,
}

impl FitConfig {
    pub fn linear() -> Self {
        FitConfig {
            model: Model::Linear,
            ..Default::default()
        }
    }

    pub fn cox() -> Self {
        FitConfig {
            model: Model::Cox,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(BossError::InvalidInput(
                "fit config needs tol > 0 and max_iter >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            model: Model::Linear,
            max_iter: 50,
            tol: 1e-9,
            ties: Ties::Efron,
        }
    }
}

/// Estimate for the group indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub beta: f64,
    pub se: f64,
    pub z: f64,
    pub n_high: usize,
    pub n_low: usize,
    /// Linear model only.
    pub intercept: Option<f64>,
    /// Linear model only: sqrt of the unbiased residual variance.
    pub residual_sd: Option<f64>,
}

fn count_high(x: &[bool]) -> usize {
    x.iter().filter(|&&v| v).count()
}

/// Ordinary least squares for `y ~ 1 + C + x` with the group indicator last.
///
/// The intercept/covariate block is factored once (Householder QR); each
/// indicator is orthogonalized against it, which is the last column of the
/// QR of the full design. No matrix is ever inverted.
#[derive(Debug, Clone)]
pub struct LinearFitter {
    n: usize,
    p: usize,
    /// Orthonormal basis of [1, C], column-major n x (p + 1).
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    y: Vec<f64>,
    /// (I - H) y
    resid_y: Vec<f64>,
    y_norm2: f64,
    /// Q^T y
    qty: DVector<f64>,
}

impl LinearFitter {
    pub fn new(y: &[f64], covariates: &DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        let p = covariates.ncols();
        if covariates.nrows() != n {
            return Err(BossError::InvalidInput(
                "covariate rows do not match outcome length".into(),
            ));
        }
        if n <= p + 2 {
            return Err(BossError::InvalidInput(format!(
                "linear fit needs n > p + 2 (n = {n}, p = {p})"
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(BossError::InvalidInput("outcome must be finite".into()));
        }
        let mut basis = DMatrix::from_element(n, p + 1, 1.0);
        basis.columns_mut(1, p).copy_from(covariates);
        let (q, r) = basis.clone().qr().unpack();
        for j in 0..=p {
            let col_norm = basis.column(j).norm();
            if r[(j, j)].abs() <= 1e-10 * col_norm.max(f64::MIN_POSITIVE) {
                return Err(BossError::CollinearDesign);
            }
        }
        let yv = DVector::from_column_slice(y);
        let qty = q.tr_mul(&yv);
        let fitted = &q * &qty;
        let resid_y: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
        let y_norm2 = y.iter().map(|v| v * v).sum();
        Ok(LinearFitter {
            n,
            p,
            q,
            r,
            y: y.to_vec(),
            resid_y,
            y_norm2,
            qty,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fit(&self, x: &[bool]) -> Result<Fit> {
        let n = self.n;
        if x.len() != n {
            return Err(BossError::InvalidInput("group vector length mismatch".into()));
        }
        let n_high = count_high(x);
        if n_high == 0 || n_high == n {
            return Err(BossError::CollinearDesign);
        }

        let mut resid_x: Vec<f64> = x.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        let q = self.q.as_slice();
        let mut proj = vec![0.0; self.p + 1];
        for (j, pj) in proj.iter_mut().enumerate() {
            let col = &q[j * n..(j + 1) * n];
            *pj = x.iter().zip(col).filter(|(&v, _)| v).map(|(_, c)| c).sum();
        }
        for (j, &pj) in proj.iter().enumerate() {
            let col = &q[j * n..(j + 1) * n];
            for (r, c) in resid_x.iter_mut().zip(col) {
                *r -= pj * c;
            }
        }
        let rr: f64 = resid_x.iter().map(|v| v * v).sum();
        if rr <= 1e-10 * n_high as f64 {
            return Err(BossError::CollinearDesign);
        }
        let ry: f64 = resid_x.iter().zip(&self.resid_y).map(|(a, b)| a * b).sum();
        let beta = ry / rr;
        let rss: f64 = self
            .resid_y
            .iter()
            .zip(&resid_x)
            .map(|(e, r)| {
                let v = e - beta * r;
                v * v
            })
            .sum();
        // exact fit up to rounding, relative to the outcome's own scale
        if rss <= 1e-20 * self.y_norm2 {
            return Err(BossError::DegenerateOutcome);
        }
        let df = (n - self.p - 2) as f64;
        let sigma2 = rss / df;
        let se = (sigma2 / rr).sqrt();

        // [1, C] coefficients: R gamma = Q^T (y - beta x)
        let rhs = DVector::from_iterator(
            self.p + 1,
            self.qty.iter().zip(&proj).map(|(a, b)| a - beta * b),
        );
        let gamma = self
            .r
            .solve_upper_triangular(&rhs)
            .ok_or(BossError::CollinearDesign)?;

        Ok(Fit {
            beta,
            se,
            z: beta / se,
            n_high,
            n_low: n - n_high,
            intercept: Some(gamma[0]),
            residual_sd: Some(sigma2.sqrt()),
        })
    }

    pub fn outcome(&self) -> &[f64] {
        &self.y
    }
}

/// Maximum partial likelihood for a Cox model with the group indicator and
/// covariates, by damped Newton iterations.
#[derive(Debug, Clone)]
pub struct CoxFitter {
    n: usize,
    p: usize,
    /// Sample indices by decreasing time.
    order: Vec<usize>,
    /// Ranges of `order` sharing one time value, in decreasing time.
    tie_groups: Vec<(usize, usize)>,
    /// Event flags in sorted order.
    event: Vec<bool>,
    /// Centered covariates, sorted order, row-major n x p.
    cov: Vec<f64>,
    cov_range: Vec<f64>,
}

/// Coefficient magnitude (times covariate range) treated as divergence.
const DIVERGENCE_BOUND: f64 = 30.0;

impl CoxFitter {
    pub fn new(time: &[f64], event: &[bool], covariates: &DMatrix<f64>) -> Result<Self> {
        let n = time.len();
        let p = covariates.ncols();
        if event.len() != n || covariates.nrows() != n {
            return Err(BossError::InvalidInput(
                "time, event and covariates differ in length".into(),
            ));
        }
        if time.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(BossError::InvalidInput(
                "survival times must be positive and finite".into(),
            ));
        }
        if event.iter().filter(|&&e| e).count() < 2 {
            return Err(BossError::TooFewEvents);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| time[b].total_cmp(&time[a]));
        let mut tie_groups = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || time[order[i]] != time[order[start]] {
                tie_groups.push((start, i));
                start = i;
            }
        }
        let means: Vec<f64> = (0..p).map(|j| covariates.column(j).mean()).collect();
        let mut cov = Vec::with_capacity(n * p);
        for &s in &order {
            for j in 0..p {
                cov.push(covariates[(s, j)] - means[j]);
            }
        }
        let cov_range = (0..p)
            .map(|j| covariates.column(j).max() - covariates.column(j).min())
            .collect();
        Ok(CoxFitter {
            n,
            p,
            event: order.iter().map(|&s| event[s]).collect(),
            order,
            tie_groups,
            cov,
            cov_range,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fit(&self, x: &[bool], cfg: &FitConfig) -> Result<Fit> {
        cfg.validate()?;
        let n = self.n;
        if x.len() != n {
            return Err(BossError::InvalidInput("group vector length mismatch".into()));
        }
        let n_high = count_high(x);
        if n_high == 0 || n_high == n {
            return Err(BossError::CollinearDesign);
        }
        let d = self.p + 1;
        let x_mean = n_high as f64 / n as f64;
        let mut z = Vec::with_capacity(n * d);
        for (i, &s) in self.order.iter().enumerate() {
            z.push(if x[s] { 1.0 - x_mean } else { -x_mean });
            z.extend_from_slice(&self.cov[i * self.p..(i + 1) * self.p]);
        }

        let mut beta = DVector::zeros(d);
        let mut state = self.evaluate(&z, &beta, cfg.ties);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < cfg.max_iter {
            iterations += 1;
            let chol = state
                .info
                .clone()
                .cholesky()
                .ok_or(BossError::CollinearDesign)?;
            let mut step = chol.solve(&state.score);
            let mut candidate = &beta + &step;
            let mut next = self.evaluate(&z, &candidate, cfg.ties);
            let mut halvings = 0;
            while !(next.loglik >= state.loglik - 1e-12 * state.loglik.abs()) && halvings < 30 {
                step *= 0.5;
                candidate = &beta + &step;
                next = self.evaluate(&z, &candidate, cfg.ties);
                halvings += 1;
            }
            let change = step.amax();
            beta = candidate;
            state = next;
            if beta[0].abs() > DIVERGENCE_BOUND
                || (1..d).any(|j| beta[j].abs() * self.cov_range[j - 1] > DIVERGENCE_BOUND)
            {
                return Err(BossError::InfiniteCoefficient);
            }
            if change < cfg.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(BossError::NonConvergence {
                iterations,
                last_beta: beta[0],
            });
        }
        let inv = state
            .info
            .cholesky()
            .ok_or(BossError::InfiniteCoefficient)?
            .inverse();
        let var = inv[(0, 0)];
        if !(var > 0.0) || !var.is_finite() {
            return Err(BossError::InfiniteCoefficient);
        }
        let se = var.sqrt();
        Ok(Fit {
            beta: beta[0],
            se,
            z: beta[0] / se,
            n_high,
            n_low: n - n_high,
            intercept: None,
            residual_sd: None,
        })
    }

    /// Log partial likelihood, score and observed information at `beta`.
    /// `z` is the sorted, row-major design.
    fn evaluate(&self, z: &[f64], beta: &DVector<f64>, ties: Ties) -> CoxState {
        let d = beta.len();
        let eta: Vec<f64> = z
            .chunks_exact(d)
            .map(|row| row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum())
            .collect();
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let mut loglik = 0.0;
        let mut score = DVector::zeros(d);
        let mut info = DMatrix::zeros(d, d);
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; d];
        let mut s2 = vec![0.0; d * d];
        let mut d1 = vec![0.0; d];
        let mut d2 = vec![0.0; d * d];
        let mut a1 = vec![0.0; d];
        let mut a2 = vec![0.0; d * d];

        for &(start, end) in &self.tie_groups {
            let mut d0 = 0.0;
            d1.iter_mut().for_each(|v| *v = 0.0);
            d2.iter_mut().for_each(|v| *v = 0.0);
            let mut deaths = 0usize;
            for i in start..end {
                let row = &z[i * d..(i + 1) * d];
                let w = (eta[i] - shift).exp();
                s0 += w;
                for a in 0..d {
                    s1[a] += w * row[a];
                    for b in 0..=a {
                        s2[a * d + b] += w * row[a] * row[b];
                    }
                }
                if self.event[i] {
                    deaths += 1;
                    loglik += eta[i] - shift;
                    d0 += w;
                    for a in 0..d {
                        score[a] += row[a];
                        d1[a] += w * row[a];
                        for b in 0..=a {
                            d2[a * d + b] += w * row[a] * row[b];
                        }
                    }
                }
            }
            if deaths == 0 {
                continue;
            }
            for r in 0..deaths {
                let f = match ties {
                    Ties::Breslow => 0.0,
                    Ties::Efron => r as f64 / deaths as f64,
                };
                let t0 = s0 - f * d0;
                for a in 0..d {
                    a1[a] = (s1[a] - f * d1[a]) / t0;
                    for b in 0..=a {
                        a2[a * d + b] = (s2[a * d + b] - f * d2[a * d + b]) / t0;
                    }
                }
                loglik -= t0.ln();
                for a in 0..d {
                    score[a] -= a1[a];
                    for b in 0..=a {
                        info[(a, b)] += a2[a * d + b] - a1[a] * a1[b];
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        CoxState {
            loglik,
            score,
            info,
        }
    }
}

struct CoxState {
    loglik: f64,
    score: DVector<f64>,
    info: DMatrix<f64>,
}

pub fn fit_linear(y: &[f64], x: &[bool], covariates: &DMatrix<f64>) -> Result<Fit> {
    LinearFitter::new(y, covariates)?.fit(x)
}

pub fn fit_cox(
    time: &[f64],
    event: &[bool],
    x: &[bool],
    covariates: &DMatrix<f64>,
    cfg: &FitConfig,
) -> Result<Fit> {
    CoxFitter::new(time, event, covariates)?.fit(x, cfg)
}

/// Either fitter, chosen from the outcome type and model.
#[derive(Debug, Clone)]
pub enum Fitter {
    Linear(LinearFitter),
    Cox(CoxFitter, FitConfig),
}

impl Fitter {
    pub fn for_dataset(data: &Dataset, cfg: &FitConfig) -> Result<Self> {
        cfg.validate()?;
        match (&data.outcome, cfg.model) {
            (Outcome::Quantitative(y), Model::Linear) => {
                Ok(Fitter::Linear(LinearFitter::new(y, &data.covariates)?))
            }
            (Outcome::Survival { time, event }, Model::Cox) => Ok(Fitter::Cox(
                CoxFitter::new(time, event, &data.covariates)?,
                *cfg,
            )),
            (Outcome::Quantitative(_), Model::Cox) => Err(BossError::InvalidInput(
                "Cox model needs a survival outcome".into(),
            )),
            (Outcome::Survival { .. }, Model::Linear) => Err(BossError::InvalidInput(
                "linear model needs a quantitative outcome".into(),
            )),
        }
    }

    pub fn fit(&self, x: &[bool]) -> Result<Fit> {
        match self {
            Fitter::Linear(f) => f.fit(x),
            Fitter::Cox(f, cfg) => f.fit(x, cfg),
        }
    }
}
