//! Null correlation of the per-cutoff Z-statistics.
//!
//! With covariate projection `H` (intercept always included) the correlation
//! of tests `i` and `j` is `X_i'(I-H)X_j / sqrt(X_i'(I-H)X_i X_j'(I-H)X_j)`.
//! Without covariates this depends only on the group sizes.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{BossError, Result};

/// Rounding-level negative eigenvalues above this are clipped.
pub const PSD_REPAIR_THRESHOLD: f64 = -1e-8;

/// Symmetric, unit-diagonal, positive semi-definite k x k matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    /// Validates symmetry, unit diagonal and entries in [-1, 1], then repairs
    /// rounding-level indefiniteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let k = m.nrows();
        if k == 0 || m.ncols() != k {
            return Err(BossError::InvalidInput(
                "correlation matrix must be square and nonempty".into(),
            ));
        }
        for i in 0..k {
            if (m[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(BossError::InvalidInput(format!(
                    "diagonal entry {i} is {} (expected 1)",
                    m[(i, i)]
                )));
            }
            for j in 0..i {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-10 || a.abs() > 1.0 + 1e-12 {
                    return Err(BossError::InvalidInput(format!(
                        "entry ({i}, {j}) invalid or asymmetric"
                    )));
                }
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        Self::repair(sym)
    }

    fn repair(m: DMatrix<f64>) -> Result<Self> {
        let k = m.nrows();
        if k == 1 {
            return Ok(CorrelationMatrix(DMatrix::from_element(1, 1, 1.0)));
        }
        let eig = SymmetricEigen::new(m.clone());
        let min = eig.eigenvalues.min();
        if min >= 0.0 {
            return Ok(CorrelationMatrix(m));
        }
        if min < PSD_REPAIR_THRESHOLD {
            return Err(BossError::NotPositiveSemiDefinite(min));
        }
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        let v = &eig.eigenvectors;
        let mut r = v * DMatrix::from_diagonal(&clipped) * v.transpose();
        let d: Vec<f64> = (0..k).map(|i| r[(i, i)].sqrt()).collect();
        for i in 0..k {
            for j in 0..k {
                r[(i, j)] /= d[i] * d[j];
            }
            r[(i, i)] = 1.0;
        }
        Ok(CorrelationMatrix(r))
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Consistent reordering of rows and columns.
    pub fn permuted(&self, perm: &[usize]) -> CorrelationMatrix {
        let k = self.k();
        CorrelationMatrix(DMatrix::from_fn(k, k, |i, j| self.0[(perm[i], perm[j])]))
    }
}

/// Orthonormal basis of `[1, C]`.
fn covariate_basis(n: usize, covariates: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = covariates.ncols();
    if covariates.nrows() != n {
        return Err(BossError::InvalidInput(
            "covariate rows do not match design length".into(),
        ));
    }
    let mut basis = DMatrix::from_element(n, p + 1, 1.0);
    basis.columns_mut(1, p).copy_from(covariates);
    let (q, r) = basis.clone().qr().unpack();
    for j in 0..=p {
        if r[(j, j)].abs() <= 1e-10 * basis.column(j).norm().max(f64::MIN_POSITIVE) {
            return Err(BossError::CollinearDesign);
        }
    }
    Ok(q)
}

/// `(I - H) x` for a 0/1 vector, via the orthonormal basis `q`.
fn residualize(x: &[bool], q: &DMatrix<f64>) -> Vec<f64> {
    let n = x.len();
    let qs = q.as_slice();
    let mut r: Vec<f64> = x.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    for j in 0..q.ncols() {
        let col = &qs[j * n..(j + 1) * n];
        let coef: f64 = x.iter().zip(col).filter(|(&v, _)| v).map(|(_, c)| c).sum();
        for (ri, c) in r.iter_mut().zip(col) {
            *ri -= coef * c;
        }
    }
    r
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Correlation of the Z-statistics of the designs `xs` after adjusting for
/// `covariates` (given without intercept; the intercept is always added).
pub fn cov_with_covariates(xs: &[Vec<bool>], covariates: &DMatrix<f64>) -> Result<CorrelationMatrix> {
    let k = xs.len();
    if k == 0 {
        return Err(BossError::InvalidInput("no design vectors".into()));
    }
    let n = xs[0].len();
    if xs.iter().any(|x| x.len() != n) {
        return Err(BossError::InvalidInput("design vectors differ in length".into()));
    }
    let q = covariate_basis(n, covariates)?;
    let mut resid = Vec::with_capacity(k);
    let mut norms = Vec::with_capacity(k);
    for (i, x) in xs.iter().enumerate() {
        let r = residualize(x, &q);
        let nn = dot(&r, &r);
        let m = x.iter().filter(|&&v| v).count().max(1) as f64;
        if nn <= 1e-10 * m {
            return Err(BossError::ZeroProjectedNorm(i));
        }
        norms.push(nn.sqrt());
        resid.push(r);
    }
    let mut m = DMatrix::identity(k, k);
    for i in 0..k {
        for j in 0..i {
            let c = (dot(&resid[i], &resid[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    CorrelationMatrix::repair(m)
}

/// Closed form for the intercept-only model: for `m_i <= m_j`,
/// `sqrt((n - m_j) m_i) / sqrt((n - m_i) m_j)`.
pub fn cov_no_covariates(m: &[usize], n: usize) -> Result<CorrelationMatrix> {
    let k = m.len();
    if k == 0 {
        return Err(BossError::InvalidInput("no group sizes".into()));
    }
    if let Some(i) = m.iter().position(|&mi| mi == 0 || mi >= n) {
        return Err(BossError::DegenerateCutoff(i));
    }
    let nf = n as f64;
    let mut out = DMatrix::identity(k, k);
    for i in 0..k {
        for j in 0..i {
            let (small, large) = if m[i] <= m[j] {
                (m[i] as f64, m[j] as f64)
            } else {
                (m[j] as f64, m[i] as f64)
            };
            let c = ((nf - large) * small).sqrt() / ((nf - small) * large).sqrt();
            out[(i, j)] = c;
            out[(j, i)] = c;
        }
    }
    CorrelationMatrix::repair(out)
}

/// A design restricted to a subset of samples.
#[derive(Debug, Clone)]
pub struct MaskedDesign {
    /// Included sample indices, ascending.
    pub rows: Vec<usize>,
    /// Group labels for `rows`, in the same order.
    pub labels: Vec<bool>,
}

/// Correlation of Z-statistics computed on different sample subsets.
///
/// Each design is residualized against the covariates within its own
/// subset; the cross product runs over the samples common to both subsets
/// and is normalized by each design's own residual norm. This is exact for
/// the linear model with homoscedastic errors and reduces to
/// [`cov_with_covariates`] when every subset is the full sample.
pub fn cov_masked(
    designs: &[MaskedDesign],
    n: usize,
    covariates: &DMatrix<f64>,
) -> Result<CorrelationMatrix> {
    let k = designs.len();
    if k == 0 {
        return Err(BossError::InvalidInput("no design vectors".into()));
    }
    // full-length residual vectors, zero outside each subset
    let mut resid = Vec::with_capacity(k);
    let mut norms = Vec::with_capacity(k);
    for (i, d) in designs.iter().enumerate() {
        if d.rows.len() != d.labels.len() || d.rows.iter().any(|&r| r >= n) {
            return Err(BossError::InvalidInput(format!("malformed masked design {i}")));
        }
        let q = covariate_basis(d.rows.len(), &covariates.select_rows(&d.rows))?;
        let r = residualize(&d.labels, &q);
        let nn = dot(&r, &r);
        let m = d.labels.iter().filter(|&&v| v).count().max(1) as f64;
        if nn <= 1e-10 * m {
            return Err(BossError::ZeroProjectedNorm(i));
        }
        let mut full = vec![0.0; n];
        for (&row, v) in d.rows.iter().zip(r) {
            full[row] = v;
        }
        norms.push(nn.sqrt());
        resid.push(full);
    }
    let mut m = DMatrix::identity(k, k);
    for i in 0..k {
        for j in 0..i {
            let c = (dot(&resid[i], &resid[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    CorrelationMatrix::repair(m)
}
