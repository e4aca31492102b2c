//! Mod-Poisson approximation schemes for sums of independent Bernoulli
//! variables.
//!
//! The order-`r` scheme is the signed measure with generating function
//! `e^{λz} · Σ_{k≤r} b_k z^k` in `z = e^{iξ} − 1`, where `λ = Σ p_i` and
//! `b_k` sums `(−1)^{k−ℓ(μ)} 𝔭_μ / z_μ` over partitions `μ` of `k` with all
//! parts at least 2. Tails and calls are a Poisson term plus a correction
//! supported on `r` lattice points below the threshold.

use std::sync::OnceLock;

use crate::combinatorics::{partitions_with_min_part, StirlingTable};
use crate::error::{Error, Result};
use crate::numeric::{binomial, CompensatedSum};
use crate::specfun::{poisson_pmf, poisson_pmf_vec, poisson_tail};

/// Highest supported approximation order.
pub const MAX_ORDER: usize = 30;

/// Order, Poisson parameter and correction coefficients of a scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeCoefficients {
    lambda: f64,
    /// `b_0 = 1, b_1, …, b_r`.
    b: Vec<f64>,
}

impl SchemeCoefficients {
    /// Builds a scheme from `b_1..b_r`; `b_0 = 1` is implied.
    pub fn new(lambda: f64, b_from_one: &[f64]) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if b_from_one.len() > MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                order: b_from_one.len(),
                max: MAX_ORDER,
            });
        }
        let mut b = Vec::with_capacity(b_from_one.len() + 1);
        b.push(1.0);
        b.extend_from_slice(b_from_one);
        Ok(Self { lambda, b })
    }

    pub fn order(&self) -> usize {
        self.b.len() - 1
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `b_k` for `k ≤ r`, zero above.
    pub fn b(&self, k: usize) -> f64 {
        self.b.get(k).copied().unwrap_or(0.0)
    }

    /// `b_0..b_r`.
    pub fn b_all(&self) -> &[f64] {
        &self.b
    }

    /// Poisson summation cut-off `⌈λ + 40√λ⌉ + 10r`.
    pub fn truncation(&self) -> usize {
        truncation_point(self.lambda, self.order())
    }
}

pub(crate) fn truncation_point(lambda: f64, order: usize) -> usize {
    (lambda + 40.0 * lambda.sqrt()).ceil() as usize + 10 * order
}

/// `𝔭_k = Σ_i p_i^k` for `k = 0..=r`, with compensated accumulation.
pub fn power_sums(pd: &[f64], r: usize) -> Vec<f64> {
    let mut acc = vec![CompensatedSum::new(); r + 1];
    for &p in pd {
        let mut pk = 1.0;
        for a in acc.iter_mut() {
            a.add(pk);
            pk *= p;
        }
    }
    acc.iter().map(CompensatedSum::value).collect()
}

/// Parts and signed weight `(−1)^{k−ℓ}/z_μ` for one partition.
struct PartitionTerm {
    parts: Vec<u32>,
    weight: f64,
}

/// Partitions with parts `≥ 2` for every `k ≤ MAX_ORDER`, built once.
fn partition_terms() -> &'static [Vec<PartitionTerm>] {
    static TERMS: OnceLock<Vec<Vec<PartitionTerm>>> = OnceLock::new();
    TERMS.get_or_init(|| {
        (0..=MAX_ORDER as u32)
            .map(|k| {
                partitions_with_min_part(k, 2)
                    .into_iter()
                    .map(|p| {
                        let z = p.z_lambda().expect("z_lambda fits for k <= 30") as f64;
                        let sign = if (k as usize - p.len()) % 2 == 0 { 1.0 } else { -1.0 };
                        PartitionTerm {
                            parts: p.parts().to_vec(),
                            weight: sign / z,
                        }
                    })
                    .collect()
            })
            .collect()
    })
}

/// Scheme coefficients from the conditional default probabilities.
pub fn coefficients(pd: &[f64], r: usize) -> Result<SchemeCoefficients> {
    if r > MAX_ORDER {
        return Err(Error::UnsupportedOrder { order: r, max: MAX_ORDER });
    }
    let ps = power_sums(pd, r.max(1));
    coefficients_from_power_sums(ps[1], &ps, r)
}

/// Scheme coefficients from `λ` and power sums `𝔭_0..𝔭_r` (entries 0 and 1
/// are ignored).
pub fn coefficients_from_power_sums(lambda: f64, ps: &[f64], r: usize) -> Result<SchemeCoefficients> {
    if r > MAX_ORDER {
        return Err(Error::UnsupportedOrder { order: r, max: MAX_ORDER });
    }
    if ps.len() < r + 1 {
        return Err(Error::invalid("not enough power sums for the requested order"));
    }
    let terms = partition_terms();
    let mut b = vec![0.0; r];
    for k in 2..=r {
        let mut acc = CompensatedSum::new();
        for t in &terms[k] {
            let prod: f64 = t.parts.iter().map(|&j| ps[j as usize]).product();
            acc.add(t.weight * prod);
        }
        b[k - 1] = acc.value();
    }
    SchemeCoefficients::new(lambda, &b)
}

/// Scheme coefficients from raw moments `M_1..M_r` of the loss count, via
/// unsigned Stirling numbers of the first kind.
pub fn coefficients_from_moments(moments: &[f64], r: usize) -> Result<SchemeCoefficients> {
    if r > MAX_ORDER {
        return Err(Error::UnsupportedOrder { order: r, max: MAX_ORDER });
    }
    if moments.len() < r.max(1) {
        return Err(Error::invalid(format!(
            "need {} moments, got {}",
            r.max(1),
            moments.len()
        )));
    }
    let m1 = moments[0];
    if !(m1 > 0.0) {
        return Err(Error::invalid(format!("first moment must be positive, got {m1}")));
    }
    let stirling = StirlingTable::new(r.max(1))?;
    let fact = |n: usize| -> f64 { (1..=n).map(|i| i as f64).product() };
    let mut b = vec![0.0; r];
    for k in 1..=r {
        let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut acc = CompensatedSum::new();
        acc.add(sign_k * m1.powi(k as i32) / fact(k));
        for l in 1..=k {
            let outer = m1.powi((k - l) as i32) / (fact(k - l) * fact(l));
            for m in 1..=l {
                let sign = if (k - m) % 2 == 0 { 1.0 } else { -1.0 };
                let c = stirling.first_kind(l, m) as f64;
                acc.add(sign * outer * c * moments[m - 1]);
            }
        }
        b[k - 1] = acc.value();
    }
    SchemeCoefficients::new(m1, &b)
}

/// Mass of the signed measure at `k`:
/// `Σ_j b_j Σ_l (−1)^{j−l} C(j,l) pois(λ, k−l)`.
pub fn signed_measure_pmf(c: &SchemeCoefficients, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let mut acc = CompensatedSum::new();
    for (j, &bj) in c.b.iter().enumerate() {
        if bj == 0.0 {
            continue;
        }
        for l in 0..=j {
            let sign = if (j - l) % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(bj * sign * binomial(j, l) * poisson_pmf(c.lambda, k - l as i64));
        }
    }
    acc.value()
}

/// Signed-measure masses on `0..=kmax`.
pub fn signed_measure_vec(c: &SchemeCoefficients, kmax: usize) -> Vec<f64> {
    let pois = poisson_pmf_vec(c.lambda, kmax);
    // After j passes `diff` holds Σ_l (−1)^{j−l} C(j,l) pois(k−l).
    let mut out = pois.clone();
    let mut diff = pois;
    for &bj in &c.b[1..] {
        for k in (0..=kmax).rev() {
            let prev = if k > 0 { diff[k - 1] } else { 0.0 };
            diff[k] = prev - diff[k];
        }
        if bj != 0.0 {
            for (o, d) in out.iter_mut().zip(&diff) {
                *o += bj * d;
            }
        }
    }
    out
}

/// `(Δ_+^k f)(j) = Σ_l (−1)^{k−l} C(k,l) f(j+l)`.
pub fn forward_difference(f: &impl Fn(i64) -> f64, k: usize, j: i64) -> f64 {
    let mut acc = 0.0;
    for l in 0..=k {
        let sign = if (k - l) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(k, l) * f(j + l as i64);
    }
    acc
}

/// Correction `Δ(r, f)(j) = Σ_{k=1}^r b_k (Δ_+^k f)(j)`.
pub fn correction_delta(c: &SchemeCoefficients, f: &impl Fn(i64) -> f64, j: i64) -> f64 {
    let r = c.order();
    if r == 0 {
        return 0.0;
    }
    let values: Vec<f64> = (0..=r as i64).map(|l| f(j + l)).collect();
    let mut acc = 0.0;
    for k in 1..=r {
        let bk = c.b[k];
        if bk == 0.0 {
            continue;
        }
        let mut d = 0.0;
        for l in 0..=k {
            let sign = if (k - l) % 2 == 0 { 1.0 } else { -1.0 };
            d += sign * binomial(k, l) * values[l];
        }
        acc += bk * d;
    }
    acc
}

/// `E_ν[f] = E[f(Y)] + E[Δ(r,f)(Y)]` for `Y ~ Poisson(λ)`, truncated at
/// [`SchemeCoefficients::truncation`].
pub fn expectation(c: &SchemeCoefficients, f: impl Fn(i64) -> f64) -> f64 {
    let kmax = c.truncation();
    let pois = poisson_pmf_vec(c.lambda, kmax);
    let mut acc = CompensatedSum::new();
    for (k, &p) in pois.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let k = k as i64;
        acc.add(p * (f(k) + correction_delta(c, &f, k)));
    }
    acc.value()
}

/// Tail `ν((x, ∞))`: Poisson tail at `⌊x⌋` plus the correction on
/// `⌊x⌋−r+1..=⌊x⌋`. Returns 1 for negative `x`.
pub fn tail_estimate(c: &SchemeCoefficients, x: f64) -> f64 {
    if x < 0.0 {
        return 1.0;
    }
    let fx = x.floor() as i64;
    let ind = |k: i64| if (k as f64) > x { 1.0 } else { 0.0 };
    let mut out = poisson_tail(c.lambda, fx);
    let lo = (fx - c.order() as i64 + 1).max(0);
    for j in lo..=fx {
        out += poisson_pmf(c.lambda, j) * correction_delta(c, &ind, j);
    }
    out
}

/// Call price `E_ν[(L − K)^+]`.
pub fn call_estimate(c: &SchemeCoefficients, strike: f64) -> f64 {
    let lam = c.lambda;
    let ck = strike.ceil() as i64;
    let fk = strike.floor() as i64;
    let payoff = |k: i64| (k as f64 - strike).max(0.0);
    let mut out = lam * poisson_tail(lam, ck - 2) - strike * poisson_tail(lam, ck - 1);
    let lo = (fk - c.order() as i64 + 1).max(0);
    for j in lo..=fk {
        out += poisson_pmf(lam, j) * correction_delta(c, &payoff, j);
    }
    out
}

/// Tails `ν((k, ∞))` for `k = 0..=kmax`.
pub fn tail_vector(c: &SchemeCoefficients, kmax: usize) -> Vec<f64> {
    (0..=kmax).map(|k| tail_estimate(c, k as f64)).collect()
}

/// Factorial cumulants `κ_1..κ_m` of a finite signed mass sequence, read off
/// `log Σ_k ν(k)(1+z)^k`.
pub fn factorial_cumulants(masses: &[f64], m: usize) -> Result<Vec<f64>> {
    use crate::combinatorics::{series_log, SeriesCoefficients};
    // [z^j] Σ ν(k)(1+z)^k = Σ_k ν(k) C(k, j)
    let mut g = vec![CompensatedSum::new(); m + 1];
    for (k, &v) in masses.iter().enumerate() {
        for (j, a) in g.iter_mut().enumerate().take(m.min(k) + 1) {
            a.add(v * binomial(k, j));
        }
    }
    let g: Vec<f64> = g.iter().map(CompensatedSum::value).collect();
    let log = series_log(&SeriesCoefficients::new(g)?)?;
    let mut fact = 1.0;
    Ok((1..=m)
        .map(|j| {
            fact *= j as f64;
            log[j] * fact
        })
        .collect())
}
