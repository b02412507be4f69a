//! Reference computations that share no code path with the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `(beta, se)` of the last column of `[1, C, x]` from the normal equations.
pub fn ols_normal_equations(y: &[f64], x: &[bool], covariates: &DMatrix<f64>) -> (f64, f64) {
    let n = y.len();
    let p = covariates.ncols();
    let design = DMatrix::from_fn(n, p + 2, |i, j| match j {
        0 => 1.0,
        j if j <= p => covariates[(i, j - 1)],
        _ => f64::from(u8::from(x[i])),
    });
    let xtx = design.transpose() * &design;
    let inv = xtx.try_inverse().expect("full rank design");
    let coef = &inv * design.transpose() * DVector::from_column_slice(y);
    let resid = DVector::from_column_slice(y) - &design * &coef;
    let sigma2 = resid.norm_squared() / (n - p - 2) as f64;
    (coef[p + 1], (sigma2 * inv[(p + 1, p + 1)]).sqrt())
}

/// Log partial likelihood of a single binary regressor, Efron or Breslow
/// handling of tied event times.
pub fn partial_loglik(time: &[f64], event: &[bool], x: &[bool], beta: f64, efron: bool) -> f64 {
    let n = time.len();
    let risk = |i: usize| (beta * f64::from(u8::from(x[i]))).exp();
    let mut times: Vec<f64> = (0..n).filter(|&i| event[i]).map(|i| time[i]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut ll = 0.0;
    for &t in &times {
        let dying: Vec<usize> = (0..n).filter(|&i| event[i] && time[i] == t).collect();
        let at_risk: f64 = (0..n).filter(|&i| time[i] >= t).map(risk).sum();
        let tied: f64 = dying.iter().map(|&i| risk(i)).sum();
        let d = dying.len() as f64;
        for &i in &dying {
            ll += beta * f64::from(u8::from(x[i]));
        }
        for l in 0..dying.len() {
            let share = if efron { l as f64 / d } else { 0.0 };
            ll -= (at_risk - share * tied).ln();
        }
    }
    ll
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// `(beta, se)` maximizing the partial likelihood by brute force, with the
/// standard error from Richardson-extrapolated central second differences.
pub fn cox_brute_force(time: &[f64], event: &[bool], x: &[bool], efron: bool) -> (f64, f64) {
    let ll = |b: f64| partial_loglik(time, event, x, b, efron);
    let beta = golden_max(ll, -10.0, 10.0, 1e-11);
    let second = |h: f64| (ll(beta + h) - 2.0 * ll(beta) + ll(beta - h)) / (h * h);
    let h = 2e-3;
    let curvature = (4.0 * second(h / 2.0) - second(h)) / 3.0;
    (beta, (-1.0 / curvature).sqrt())
}

/// `(estimate, standard error)` of a rectangle probability by plain Monte
/// Carlo over Cholesky-transformed normal draws.
pub fn mvn_monte_carlo(
    lower: &[f64],
    upper: &[f64],
    corr: &DMatrix<f64>,
    draws: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let k = lower.len();
    let l = corr.clone().cholesky().expect("positive definite").l();
    let mut e = vec![0.0; k];
    let mut hits = 0usize;
    'draw: for _ in 0..draws {
        for v in e.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for i in 0..k {
            let z: f64 = (0..=i).map(|j| l[(i, j)] * e[j]).sum();
            if z < lower[i] || z > upper[i] {
                continue 'draw;
            }
        }
        hits += 1;
    }
    let p = hits as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

/// Random correlation matrix from a normalized Gram matrix.
pub fn random_correlation(k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a: DMatrix<f64> = DMatrix::from_fn(k, k + 2, |_, _| StandardNormal.sample(rng));
    let g: DMatrix<f64> = &a * a.transpose();
    DMatrix::from_fn(k, k, |i, j| g[(i, j)] / (g[(i, i)] * g[(j, j)]).sqrt())
}

/// Pearson correlation of two equally long samples.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn normal_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Exponential event times with rate `exp(lp)`, uniform censoring on
/// `[0, horizon]`, times rounded to `grain` to create ties.
pub fn survival_times(lp: &[f64], horizon: f64, grain: f64, rng: &mut impl Rng) -> (Vec<f64>, Vec<bool>) {
    let mut time = Vec::with_capacity(lp.len());
    let mut event = Vec::with_capacity(lp.len());
    for &eta in lp {
        let t: f64 = -rng.random::<f64>().ln() / eta.exp();
        let c: f64 = rng.random::<f64>() * horizon;
        let (obs, dead) = if t <= c { (t, true) } else { (c, false) };
        let obs = if grain > 0.0 { ((obs / grain).ceil() * grain).max(grain) } else { obs };
        time.push(obs);
        event.push(dead);
    }
    (time, event)
}
