//! Value at Risk and Expected Shortfall from a loss distribution or from a
//! pointwise tail function.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{mc_loss_histogram, mixed_pmf, mixed_tail_vector, LossDistribution, Method};
use crate::model::Portfolio;
use crate::numeric::CompensatedSum;
use crate::specfun::Quadrature;

const MONOTONE_SLACK: f64 = 1e-9;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must be in (0, 1), got {alpha}")))
    }
}

/// Smallest `k` with `P{L ≤ k} ≥ α`.
pub fn var_from_pmf(dist: &LossDistribution, alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    let mut cum = CompensatedSum::new();
    for (k, &p) in dist.pmf().iter().enumerate() {
        cum.add(p);
        if cum.value() >= alpha {
            return Ok(k);
        }
    }
    Ok(dist.max_loss())
}

/// `ES_α = ((P{L ≤ VaR} − α) VaR + Σ_{k>VaR} k P{L = k}) / (1 − α)`.
pub fn es_from_pmf(dist: &LossDistribution, alpha: f64) -> Result<f64> {
    let var = var_from_pmf(dist, alpha)?;
    let pmf = dist.pmf();
    let cdf = pmf[..=var].iter().copied().collect::<CompensatedSum>().value();
    let mut acc = CompensatedSum::new();
    acc.add((cdf - alpha) * var as f64);
    for (k, &p) in pmf.iter().enumerate().skip(var + 1) {
        acc.add(k as f64 * p);
    }
    Ok(acc.value() / (1.0 - alpha))
}

/// A VaR found by searching a tail function, with a flag raised when the
/// tail was seen to increase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TailVar {
    pub var: usize,
    pub non_monotone: bool,
}

/// Smallest `k ≥ 0` with `1 − tail(k) ≥ α`, by exponential bracketing from
/// `k_hint` and binary search.
///
/// `kmax` bounds the search; if no `k ≤ kmax` qualifies `kmax` is returned.
pub fn var_from_tail(tail: impl Fn(usize) -> f64, alpha: f64, k_hint: usize, kmax: usize) -> Result<TailVar> {
    check_alpha(alpha)?;
    let seen = RefCell::new(BTreeMap::<usize, f64>::new());
    let non_monotone = Cell::new(false);
    let pass = |k: usize| {
        let t = tail(k);
        let mut seen = seen.borrow_mut();
        let below = seen.range(..k).next_back().map(|(_, &v)| v);
        let above = seen.range(k + 1..).next().map(|(_, &v)| v);
        if below.is_some_and(|v| t > v + MONOTONE_SLACK) || above.is_some_and(|v| v > t + MONOTONE_SLACK) {
            non_monotone.set(true);
        }
        seen.insert(k, t);
        1.0 - t >= alpha
    };
    let start = k_hint.min(kmax);
    // bracket with lo failing and hi passing
    let (mut lo, mut hi) = if pass(start) {
        let mut hi = start;
        let mut step = 1;
        loop {
            if hi == 0 {
                return Ok(TailVar { var: 0, non_monotone: non_monotone.get() });
            }
            let probe = hi.saturating_sub(step);
            if pass(probe) {
                hi = probe;
                step *= 2;
            } else {
                break (probe, hi);
            }
        }
    } else {
        let mut lo = start;
        let mut step = 1;
        loop {
            if lo >= kmax {
                return Ok(TailVar { var: kmax, non_monotone: non_monotone.get() });
            }
            let probe = (lo + step).min(kmax);
            if pass(probe) {
                break (lo, probe);
            }
            lo = probe;
            step *= 2;
        }
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pass(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(TailVar { var: hi, non_monotone: non_monotone.get() })
}

/// ES from a tail function with `P{L = k} = tail(k−1) − tail(k)`, summed up
/// to `kmax`. Returns the estimate and the truncation bound
/// `kmax · tail(kmax) / (1 − α)`.
pub fn es_from_tail(tail: impl Fn(usize) -> f64, alpha: f64, var: usize, kmax: usize) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if kmax < var {
        return Err(Error::invalid(format!("kmax {kmax} is below VaR {var}")));
    }
    let mut acc = CompensatedSum::new();
    acc.add((1.0 - tail(var) - alpha) * var as f64);
    let mut prev = tail(var);
    for k in var + 1..=kmax {
        let t = tail(k);
        acc.add(k as f64 * (prev - t));
        prev = t;
    }
    let remainder = kmax as f64 * prev / (1.0 - alpha);
    Ok((acc.value() / (1.0 - alpha), remainder))
}

/// Clamps a mixed tail vector into `[0, 1]` and makes it non-increasing by
/// a running minimum. Returns whether any entry had to be lowered.
pub fn regularize_tail(tail: &mut [f64]) -> bool {
    let mut changed = false;
    let mut run = 1.0f64;
    for t in tail.iter_mut() {
        let c = t.clamp(0.0, 1.0);
        if c > run + MONOTONE_SLACK {
            changed = true;
        }
        run = run.min(c);
        *t = run;
    }
    changed
}

/// VaR and ES at several confidence levels for one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub method: String,
    pub order: Option<usize>,
    pub alpha: Vec<f64>,
    pub var: Vec<usize>,
    pub es: Vec<f64>,
    pub seconds: f64,
    /// Set when the mixed tail of a semi-analytic method was not monotone.
    pub non_monotone: bool,
}

/// VaR and ES of the unconditional loss.
///
/// The recursive method mixes conditional laws. Other deterministic methods
/// mix tail vectors over the support, regularize them and set the tail at
/// the maximal loss to zero before searching. Plain Monte Carlo uses the
/// empirical law of `runs` samples. Importance sampling targets a single
/// threshold and is rejected.
pub fn risk_report(
    port: &Portfolio,
    method: Method,
    quad: &Quadrature,
    alphas: &[f64],
    runs: u64,
    seed: u64,
) -> Result<RiskReport> {
    for &a in alphas {
        check_alpha(a)?;
    }
    let start = Instant::now();
    let kmax = port.max_loss();
    let (var, es, non_monotone) = match method {
        Method::Recursive | Method::MonteCarlo => {
            let dist = if method == Method::Recursive {
                mixed_pmf(port, quad)?
            } else {
                LossDistribution::from_raw(mc_loss_histogram(port, runs, seed)?)
            };
            let var = alphas.iter().map(|&a| var_from_pmf(&dist, a)).collect::<Result<Vec<_>>>()?;
            let es = alphas.iter().map(|&a| es_from_pmf(&dist, a)).collect::<Result<Vec<_>>>()?;
            (var, es, false)
        }
        Method::ImportanceOneStep | Method::ImportanceTwoStep => {
            return Err(Error::Incompatible {
                engine: method.name().to_string(),
                reason: "importance sampling estimates a single tail point".to_string(),
            })
        }
        _ => {
            let mut tail = mixed_tail_vector(port, method, quad, kmax)?;
            let mut non_monotone = regularize_tail(&mut tail);
            // the loss never exceeds max_loss; approximate mass above it is
            // put at the top
            tail[kmax] = 0.0;
            let f = |k: usize| tail.get(k).copied().unwrap_or(0.0);
            let mut var = Vec::with_capacity(alphas.len());
            let mut es = Vec::with_capacity(alphas.len());
            let mean = (0..kmax).map(f).sum::<f64>().round() as usize;
            for &a in alphas {
                let v = var_from_tail(f, a, mean, kmax)?;
                non_monotone |= v.non_monotone;
                es.push(es_from_tail(f, a, v.var, kmax)?.0);
                var.push(v.var);
            }
            (var, es, non_monotone)
        }
    };
    Ok(RiskReport {
        method: method.name().to_string(),
        order: method.order(),
        alpha: alphas.to_vec(),
        var,
        es,
        seconds: start.elapsed().as_secs_f64(),
        non_monotone,
    })
}
