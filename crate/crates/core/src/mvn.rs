//! Rectangle probabilities `P(lower <= Z <= upper)` for `Z ~ N(0, R)` with a
//! correlation matrix `R`.
//!
//! The integral is rewritten by separation of variables over a Cholesky
//! factor whose variables are ordered by increasing expected truncation
//! mass, then estimated with a randomly shifted rank-1 lattice (Richtmyer
//! generators `frac(sqrt(prime))`) under the baker's transform. Point counts
//! double until the 3.5-sigma spread over the random shifts drops below the
//! tolerance or the point budget runs out.
//!
//! Nested cutoff designs without covariates give a Markov chain
//! (`R[i][j] = R[i][i+1] R[i+1][i+2] ... R[j-1][j]`). Such matrices are
//! integrated instead by one-dimensional recursive quadrature over the chain,
//! which reaches the tolerance deterministically in a tiny fraction of the
//! lattice cost.
//!
//! Other matrices, such as those adjusted for covariates, are usually close
//! to the chain with the same adjacent correlations. That chain then serves
//! as a control variate on the lattice: its exact probability plus the
//! lattice mean of the difference between the two integrands.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::erf;

use crate::covariance::CorrelationMatrix;
use crate::error::{BossError, Result};

pub const DEFAULT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnOptions {
    /// Target absolute error (3.5 standard errors).
    pub tol: f64,
    pub randomizations: usize,
    /// Budget on integrand evaluations summed over all randomizations.
    pub max_points: usize,
    /// Points per randomization in the first pass.
    pub initial_points: usize,
}

impl Default for MvnOptions {
    fn default() -> Self {
        MvnOptions {
            tol: DEFAULT_TOL,
            randomizations: 12,
            max_points: 1 << 22,
            initial_points: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MvnResult {
    pub probability: f64,
    pub error_estimate: f64,
    pub points_used: usize,
    /// False when the budget ran out before `error_estimate <= tol`.
    pub converged: bool,
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-x / SQRT_2)
    }
}

/// Standard normal upper tail `1 - Phi(x)` without cancellation.
pub fn norm_sf(x: f64) -> f64 {
    norm_cdf(-x)
}

pub fn norm_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        INV_SQRT_2PI * (-0.5 * x * x).exp()
    }
}

/// Standard normal quantile.
pub fn norm_inv(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -SQRT_2 * erf::erfc_inv(2.0 * p)
    }
}

pub fn mvn_rectangle(
    lower: &[f64],
    upper: &[f64],
    sigma: &CorrelationMatrix,
    tol: f64,
    seed: u64,
) -> Result<MvnResult> {
    let opts = MvnOptions {
        tol,
        ..MvnOptions::default()
    };
    mvn_rectangle_with(lower, upper, sigma, &opts, seed)
}

pub fn mvn_rectangle_with(
    lower: &[f64],
    upper: &[f64],
    sigma: &CorrelationMatrix,
    opts: &MvnOptions,
    seed: u64,
) -> Result<MvnResult> {
    let k = sigma.k();
    if lower.len() != k || upper.len() != k {
        return Err(BossError::InvalidInput(format!(
            "bounds have lengths {} and {}, matrix is {k} x {k}",
            lower.len(),
            upper.len()
        )));
    }
    for i in 0..k {
        if lower[i].is_nan() || upper[i].is_nan() || lower[i] >= upper[i] {
            return Err(BossError::InvalidInput(format!(
                "bounds must satisfy lower < upper (coordinate {i})"
            )));
        }
    }
    if !(opts.tol > 0.0) || opts.randomizations < 2 || opts.initial_points == 0 {
        return Err(BossError::InvalidInput("invalid MVN options".into()));
    }

    if k == 1 {
        return Ok(MvnResult {
            probability: interval_mass(lower[0], upper[0]),
            error_estimate: 0.0,
            points_used: 0,
            converged: true,
        });
    }

    if let Some(rho) = chain_correlations(sigma) {
        if let Some(res) = chain_rectangle(lower, upper, &rho, opts.tol) {
            return Ok(res);
        }
    }

    let plan = Plan::new(lower, upper, sigma, None)?;
    let control = control_variate(lower, upper, sigma, &plan, opts.tol);
    Ok(plan.integrate(control.as_ref(), opts, seed))
}

/// The Markov chain sharing the adjacent correlations of `sigma`, integrated
/// in the same variable order, with its probability from quadrature.
fn control_variate(
    lower: &[f64],
    upper: &[f64],
    sigma: &CorrelationMatrix,
    plan: &Plan,
    tol: f64,
) -> Option<(Plan, f64, f64)> {
    let k = sigma.k();
    if k < 3 {
        return None;
    }
    let rho: Vec<f64> = (0..k - 1).map(|i| sigma.get(i, i + 1)).collect();
    let exact = chain_rectangle(lower, upper, &rho, 0.1 * tol)?;
    let chain = DMatrix::from_fn(k, k, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        rho[a..b].iter().product::<f64>()
    });
    let chain = CorrelationMatrix::new(chain).ok()?;
    let control = Plan::new(lower, upper, &chain, Some(&plan.order)).ok()?;
    Some((control, exact.probability, exact.error_estimate))
}

const CHAIN_TOL: f64 = 1e-10;

/// Adjacent correlations when `sigma` is a Markov chain in its given order.
fn chain_correlations(sigma: &CorrelationMatrix) -> Option<Vec<f64>> {
    let k = sigma.k();
    let rho: Vec<f64> = (0..k - 1).map(|i| sigma.get(i, i + 1)).collect();
    for i in 0..k {
        let mut expected = 1.0;
        for j in i + 1..k {
            expected *= rho[j - 1];
            if (sigma.get(i, j) - expected).abs() > CHAIN_TOL {
                return None;
            }
        }
    }
    Some(rho)
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Beyond this the standard normal density is below 1e-17.
const TAIL_CUT: f64 = 9.0;
const MIN_CHAIN_SD: f64 = 1e-3;
const MAX_CHAIN_NODES: usize = 4096;
/// Panel width of the base rule in conditional standard deviations.
const CHAIN_PANEL: f64 = 3.0;

/// Rectangle probability for `Z_{i+1} = rho_i Z_i + sqrt(1 - rho_i^2) e_i`.
///
/// Returns `None` when a conditional standard deviation is too small to
/// resolve, leaving the problem to the lattice rule.
fn chain_rectangle(lower: &[f64], upper: &[f64], rho: &[f64], tol: f64) -> Option<MvnResult> {
    let k = lower.len();
    let sd: Vec<f64> = rho.iter().map(|r| (1.0 - r * r).max(0.0).sqrt()).collect();
    if sd.iter().any(|&s| s < MIN_CHAIN_SD) {
        return None;
    }
    let lo: Vec<f64> = lower.iter().map(|&a| a.max(-TAIL_CUT)).collect();
    let hi: Vec<f64> = upper.iter().map(|&b| b.min(TAIL_CUT)).collect();
    if (0..k - 1).any(|i| lo[i] >= hi[i]) {
        return Some(MvnResult {
            probability: 0.0,
            error_estimate: 0.0,
            points_used: 0,
            converged: true,
        });
    }

    let mut previous: Option<f64> = None;
    let mut points = 0usize;
    let mut refine = 1usize;
    loop {
        let (p, used) = chain_pass(lower, upper, &lo, &hi, rho, &sd, refine)?;
        points += used;
        if let Some(coarse) = previous {
            let err = (p - coarse).abs();
            if err <= tol {
                return Some(MvnResult {
                    probability: p.clamp(0.0, 1.0),
                    error_estimate: err,
                    points_used: points,
                    converged: true,
                });
            }
        }
        previous = Some(p);
        refine *= 2;
    }
}

/// One quadrature pass with panels `refine` times finer than the base rule.
fn chain_pass(
    lower: &[f64],
    upper: &[f64],
    lo: &[f64],
    hi: &[f64],
    rho: &[f64],
    sd: &[f64],
    refine: usize,
) -> Option<(f64, usize)> {
    let k = lower.len();
    let mut used = 0;
    let nodes_for = |i: usize| -> Option<(Vec<f64>, Vec<f64>)> {
        let before = if i == 0 { 1.0 } else { sd[i - 1] };
        let width = CHAIN_PANEL * before.min(sd[i]).min(1.0) / refine as f64;
        let panels = ((hi[i] - lo[i]) / width).ceil().max(1.0) as usize;
        if panels * GL_NODES.len() > MAX_CHAIN_NODES {
            return None;
        }
        let h = (hi[i] - lo[i]) / panels as f64;
        let mut x = Vec::with_capacity(panels * GL_NODES.len());
        let mut w = Vec::with_capacity(panels * GL_NODES.len());
        for p in 0..panels {
            let mid = lo[i] + (p as f64 + 0.5) * h;
            for (t, wt) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                x.push(mid + 0.5 * h * t);
                w.push(0.5 * h * wt);
            }
        }
        Some((x, w))
    };

    let (mut x, w0) = nodes_for(0)?;
    // density of the surviving paths times the quadrature weight
    let mut mass: Vec<f64> = x.iter().zip(&w0).map(|(&u, &w)| norm_pdf(u) * w).collect();
    used += x.len();
    for i in 0..k - 2 {
        let (next_x, next_w) = nodes_for(i + 1)?;
        let (r, s) = (rho[i], sd[i]);
        let reach = TAIL_CUT * s;
        let next_mass: Vec<f64> = next_x
            .iter()
            .zip(&next_w)
            .map(|(&z, &w)| {
                let dens: f64 = x
                    .iter()
                    .zip(&mass)
                    .filter(|(&u, _)| (z - r * u).abs() < reach)
                    .map(|(&u, &m)| m * norm_pdf((z - r * u) / s))
                    .sum();
                dens * w / s
            })
            .collect();
        used += next_x.len();
        x = next_x;
        mass = next_mass;
    }
    let (r, s) = (rho[k - 2], sd[k - 2]);
    let p = x
        .iter()
        .zip(&mass)
        .map(|(&u, &m)| m * interval_mass((lower[k - 1] - r * u) / s, (upper[k - 1] - r * u) / s))
        .sum();
    Some((p, used))
}

/// `Phi(b) - Phi(a)`, evaluated in whichever tail keeps precision.
fn interval_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (norm_sf(a) - norm_sf(b)).max(0.0)
    } else {
        (norm_cdf(b) - norm_cdf(a)).max(0.0)
    }
}

/// Reordered bounds and lower-triangular factor.
struct Plan {
    k: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    /// Row-major k x k lower triangle.
    l: Vec<f64>,
    /// Original index of each integration variable.
    order: Vec<usize>,
}

const SINGULAR_EPS: f64 = 1e-10;

impl Plan {
    /// Chooses the variable order greedily unless `fixed` is given.
    fn new(lower: &[f64], upper: &[f64], sigma: &CorrelationMatrix, fixed: Option<&[usize]>) -> Result<Self> {
        let k = sigma.k();
        let mut order: Vec<usize> = (0..k).collect();
        let mut a = lower.to_vec();
        let mut b = upper.to_vec();
        let mut c: Vec<f64> = (0..k * k).map(|idx| sigma.get(idx / k, idx % k)).collect();
        let mut l = vec![0.0; k * k];
        let mut y = vec![0.0; k];

        for i in 0..k {
            let best = match fixed {
                Some(f) => order[i..].iter().position(|&o| o == f[i]).map_or(i, |p| i + p),
                None => {
                    let mut best = i;
                    let mut best_mass = f64::INFINITY;
                    for j in i..k {
                        let row = &l[j * k..j * k + i];
                        let v = c[j * k + j] - row.iter().map(|x| x * x).sum::<f64>();
                        if v > SINGULAR_EPS {
                            let s: f64 = row.iter().zip(&y[..i]).map(|(p, q)| p * q).sum();
                            let sd = v.sqrt();
                            let mass = interval_mass((a[j] - s) / sd, (b[j] - s) / sd);
                            if mass < best_mass {
                                best_mass = mass;
                                best = j;
                            }
                        }
                    }
                    best
                }
            };
            if best != i {
                order.swap(i, best);
                a.swap(i, best);
                b.swap(i, best);
                for col in 0..k {
                    c.swap(i * k + col, best * k + col);
                }
                for row in 0..k {
                    c.swap(row * k + i, row * k + best);
                }
                for col in 0..i {
                    l.swap(i * k + col, best * k + col);
                }
            }

            let v = c[i * k + i] - l[i * k..i * k + i].iter().map(|x| x * x).sum::<f64>();
            if v > SINGULAR_EPS {
                let d = v.sqrt();
                l[i * k + i] = d;
                for j in i + 1..k {
                    let dotp: f64 = (0..i).map(|m| l[j * k + m] * l[i * k + m]).sum();
                    l[j * k + i] = (c[j * k + i] - dotp) / d;
                }
                let s: f64 = (0..i).map(|m| l[i * k + m] * y[m]).sum();
                y[i] = truncated_mean((a[i] - s) / d, (b[i] - s) / d);
            } else if v < -1e-6 {
                return Err(BossError::Cholesky);
            } else {
                // deterministic given earlier variables; enters as a constraint
                for j in i..k {
                    l[j * k + i] = 0.0;
                }
                y[i] = 0.0;
            }
        }
        Ok(Plan { k, a, b, l, order })
    }

    /// Integrand at `w` in [0,1]^(k-1); `y` is scratch of length k.
    fn integrand(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let k = self.k;
        let mut f = 1.0;
        for i in 0..k {
            let row = &self.l[i * k..i * k + k];
            let s: f64 = row[..i].iter().zip(&y[..i]).map(|(p, q)| p * q).sum();
            let d = row[i];
            if d > 0.0 {
                let lo = norm_cdf((self.a[i] - s) / d);
                let hi = norm_cdf((self.b[i] - s) / d);
                let mass = hi - lo;
                if mass <= 0.0 {
                    return 0.0;
                }
                f *= mass;
                if i + 1 < k {
                    let u = (lo + w[i] * mass).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                    y[i] = norm_inv(u);
                }
            } else {
                if s < self.a[i] || s > self.b[i] {
                    return 0.0;
                }
                y[i] = 0.0;
            }
        }
        f
    }

    /// Randomized lattice estimate. With a `control` (plan, probability,
    /// error) the difference of the two integrands is averaged as well and
    /// whichever estimator has the smaller spread is reported.
    fn integrate(&self, control: Option<&(Plan, f64, f64)>, opts: &MvnOptions, seed: u64) -> MvnResult {
        let dims = self.k - 1;
        let generators: Vec<f64> = first_primes(dims)
            .into_iter()
            .map(|p| (p as f64).sqrt().fract())
            .collect();
        let reps = opts.randomizations;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shifts: Vec<Vec<f64>> = (0..reps)
            .map(|_| (0..dims).map(|_| rng.random::<f64>()).collect())
            .collect();

        let mut sums = vec![0.0; reps];
        let mut diffs = vec![0.0; reps];
        let mut w = vec![0.0; dims];
        let mut y = vec![0.0; self.k];
        let mut done = 0usize;
        let mut target = opts.initial_points;
        loop {
            for (r, shift) in shifts.iter().enumerate() {
                let mut acc = 0.0;
                let mut acc_diff = 0.0;
                for i in done..target {
                    let t = (i + 1) as f64;
                    for ((wj, &g), &sh) in w.iter_mut().zip(&generators).zip(shift) {
                        let x = (t * g + sh).fract();
                        *wj = (2.0 * x - 1.0).abs();
                    }
                    let f = self.integrand(&w, &mut y);
                    acc += f;
                    if let Some((plan, _, _)) = control {
                        acc_diff += f - plan.integrand(&w, &mut y);
                    }
                }
                sums[r] += acc;
                diffs[r] += acc_diff;
            }
            done = target;

            let (mut est, mut err) = spread(&sums, done);
            if let Some(&(_, exact, exact_err)) = control {
                let (d, d_err) = spread(&diffs, done);
                if d_err + exact_err < err {
                    est = exact + d;
                    err = d_err + exact_err;
                }
            }
            let converged = err <= opts.tol;
            if converged || reps * done * 2 > opts.max_points {
                if !converged {
                    log::warn!(
                        "MVN integration stopped at error {err:.3e} (tol {:.1e}) after {} points",
                        opts.tol,
                        reps * done
                    );
                }
                return MvnResult {
                    probability: est.clamp(0.0, 1.0),
                    error_estimate: err,
                    points_used: reps * done,
                    converged,
                };
            }
            target *= 2;
        }
    }
}

/// Mean over randomizations and 3.5 standard errors.
fn spread(sums: &[f64], points: usize) -> (f64, f64) {
    let reps = sums.len();
    let means: Vec<f64> = sums.iter().map(|s| s / points as f64).collect();
    let est = means.iter().sum::<f64>() / reps as f64;
    let var = means.iter().map(|m| (m - est).powi(2)).sum::<f64>() / (reps * (reps - 1)) as f64;
    (est, 3.5 * var.sqrt())
}

/// `E[Z | a < Z < b]` for standard normal `Z`.
fn truncated_mean(a: f64, b: f64) -> f64 {
    let mass = interval_mass(a, b);
    if mass > 1e-300 {
        let m = (norm_pdf(a) - norm_pdf(b)) / mass;
        if m.is_finite() {
            return m.clamp(a, b);
        }
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => 0.5 * (a + b),
        (true, false) => a,
        (false, true) => b,
        (false, false) => 0.0,
    }
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}
