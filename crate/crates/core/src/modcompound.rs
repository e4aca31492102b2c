//! Mod-compound-Poisson schemes for losses `Σ Z_i Y_i` with conditionally
//! i.i.d. integer exposures.
//!
//! The reference law is `CP(λ, Z)` with `λ = Σ p_i`, evaluated by Panjer's
//! recursion. The correction polynomial is `exp(Σ_{k≥2} (−1)^{k−1}/k · 𝔭_k ·
//! s(z)^k)` truncated at degree `r`, where `s(z) = Σ_j E[(Z)_j]/j! · z^j` is
//! the severity transform written in `z = e^{iξ} − 1`.

use std::sync::OnceLock;

use crate::combinatorics::{series_exp, SeriesCoefficients};
use crate::error::{Error, Result};
use crate::modpoisson::{correction_delta, power_sums, SchemeCoefficients};
use crate::numeric::CompensatedSum;

/// Highest order accepted by [`cp_coefficients`].
pub const MAX_COMPOUND_ORDER: usize = 12;

const NEGLIGIBLE_MASS: f64 = 1e-300;
const PANJER_MAX_LAMBDA: f64 = 500.0;

/// Exposure law on `{0, …, m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Severity {
    pmf: Vec<f64>,
}

impl Severity {
    /// Masses `q_0..q_m`; must be non-negative and sum to 1 within `1e−12`.
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::invalid("severity needs at least one mass"));
        }
        if let Some((k, q)) = pmf.iter().enumerate().find(|(_, q)| !(**q >= 0.0)) {
            return Err(Error::invalid(format!("severity mass q_{k} = {q} is negative")));
        }
        let total: f64 = pmf.iter().copied().collect::<CompensatedSum>().value();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("severity masses sum to {total}, not 1")));
        }
        let mut pmf = pmf;
        while pmf.len() > 1 && *pmf.last().unwrap() == 0.0 {
            pmf.pop();
        }
        Ok(Self { pmf })
    }

    /// Point mass at `value`.
    pub fn constant(value: usize) -> Self {
        let mut pmf = vec![0.0; value + 1];
        pmf[value] = 1.0;
        Self { pmf }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Largest value with positive mass.
    pub fn max_value(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    pub fn raw_moment(&self, k: i32) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(v, &q)| q * (v as f64).powi(k))
            .collect::<CompensatedSum>()
            .value()
    }

    /// `E[e^{θZ}]`.
    pub fn mgf(&self, theta: f64) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(v, &q)| q * (theta * v as f64).exp())
            .sum()
    }

    /// `(E[Z e^{θZ}], E[Z² e^{θZ}])`.
    pub fn mgf_derivatives(&self, theta: f64) -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (v, &q) in self.pmf.iter().enumerate() {
            let v = v as f64;
            let e = q * (theta * v).exp();
            d1 += v * e;
            d2 += v * v * e;
        }
        (d1, d2)
    }

    /// `E[(Z)_1], …, E[(Z)_r]`.
    pub fn factorial_moments(&self, r: usize) -> Vec<f64> {
        (1..=r)
            .map(|j| {
                self.pmf
                    .iter()
                    .enumerate()
                    .map(|(v, &q)| {
                        let falling: f64 = (0..j).map(|i| v as f64 - i as f64).product();
                        q * falling
                    })
                    .collect::<CompensatedSum>()
                    .value()
            })
            .collect()
    }
}

/// Coefficients of the order-`r` compound scheme and its reference law.
#[derive(Debug, Clone)]
pub struct CompoundCoefficients {
    scheme: SchemeCoefficients,
    severity: Severity,
    reference: OnceLock<Vec<f64>>,
}

impl CompoundCoefficients {
    pub fn order(&self) -> usize {
        self.scheme.order()
    }

    pub fn lambda(&self) -> f64 {
        self.scheme.lambda()
    }

    pub fn b(&self, k: usize) -> f64 {
        self.scheme.b(k)
    }

    pub fn severity(&self) -> &Severity {
        &self.severity
    }

    /// The coefficients viewed as a lattice scheme (for the correction
    /// operator, which does not depend on the reference law).
    pub fn as_scheme(&self) -> &SchemeCoefficients {
        &self.scheme
    }

    /// Support cap `λm + 40√(λ m E[Z²]) + 10r`.
    pub fn support_cap(&self) -> usize {
        let lam = self.lambda();
        let m = self.severity.max_value() as f64;
        let ez2 = self.severity.raw_moment(2);
        (lam * m + 40.0 * (lam * m * ez2).sqrt()).ceil() as usize + 10 * self.order()
    }

    /// Reference `CP(λ, Z)` masses up to the support cap, with the underflowed
    /// tail dropped; computed on first use.
    pub fn reference_pmf(&self) -> &[f64] {
        self.reference.get_or_init(|| {
            let mut pmf = cp_pmf(self.lambda(), &self.severity, self.support_cap());
            let last = pmf.iter().rposition(|&p| p > NEGLIGIBLE_MASS).unwrap_or(0);
            // keep room for the correction window above the cut
            pmf.truncate((last + 1 + self.order()).min(pmf.len()));
            pmf
        })
    }
}

/// Compound scheme coefficients by series composition.
pub fn cp_coefficients(pd: &[f64], severity: &Severity, r: usize) -> Result<CompoundCoefficients> {
    if r > MAX_COMPOUND_ORDER {
        return Err(Error::UnsupportedOrder {
            order: r,
            max: MAX_COMPOUND_ORDER,
        });
    }
    let ps = power_sums(pd, r.max(1));
    let lambda = ps[1];
    let b = if r < 2 {
        vec![0.0; r]
    } else {
        let fm = severity.factorial_moments(r);
        let mut s = SeriesCoefficients::zeros(r);
        let mut fact = 1.0;
        for j in 1..=r {
            fact *= j as f64;
            s.coeffs_mut()[j] = fm[j - 1] / fact;
        }
        let mut a = SeriesCoefficients::zeros(r);
        let mut s_pow = s.clone();
        for k in 2..=r {
            s_pow = s_pow.mul_truncated(&s);
            let w = if k % 2 == 1 { 1.0 } else { -1.0 } * ps[k] / k as f64;
            for (ai, si) in a.coeffs_mut().iter_mut().zip(s_pow.coeffs()) {
                *ai += w * si;
            }
        }
        series_exp(&a)?.into_vec()[1..].to_vec()
    };
    Ok(CompoundCoefficients {
        scheme: SchemeCoefficients::new(lambda, &b)?,
        severity: severity.clone(),
        reference: OnceLock::new(),
    })
}

/// `CP(λ, Z)` masses on `0..=kmax` by Panjer's recursion.
///
/// Zero exposures are thinned out first (`λ' = λ(1 − q_0)`, `Z' = Z | Z ≥ 1`).
/// Large `λ'` is split into equal parts whose laws are convolved, so the
/// starting mass `e^{−λ'}` never underflows.
pub fn cp_pmf(lam: f64, severity: &Severity, kmax: usize) -> Vec<f64> {
    let q = severity.pmf();
    let q0 = q[0];
    let mut out = vec![0.0; kmax + 1];
    if lam == 0.0 || q0 >= 1.0 {
        out[0] = 1.0;
        return out;
    }
    let lam_eff = lam * (1.0 - q0);
    let cond: Vec<f64> = q.iter().map(|&v| v / (1.0 - q0)).collect();
    let mut halvings = 0;
    let mut piece = lam_eff;
    while piece > PANJER_MAX_LAMBDA {
        piece *= 0.5;
        halvings += 1;
    }
    let mut pmf = panjer_poisson(piece, &cond, kmax);
    for _ in 0..halvings {
        pmf = convolve_truncated(&pmf, &pmf, kmax);
    }
    out.copy_from_slice(&pmf);
    out
}

fn panjer_poisson(lam: f64, cond: &[f64], kmax: usize) -> Vec<f64> {
    let m = cond.len() - 1;
    let mut g = vec![0.0; kmax + 1];
    g[0] = (-lam).exp();
    for k in 1..=kmax {
        let mut acc = 0.0;
        for j in 1..=k.min(m) {
            acc += j as f64 * cond[j] * g[k - j];
        }
        g[k] = lam / k as f64 * acc;
    }
    g
}

fn convolve_truncated(a: &[f64], b: &[f64], kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(kmax + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `E_ν[f] = E_CP[f] + E_CP[Δ(r, f)]`.
pub fn cp_expectation(c: &CompoundCoefficients, f: impl Fn(i64) -> f64) -> f64 {
    let reference = c.reference_pmf();
    let mut acc = CompensatedSum::new();
    for (k, &p) in reference.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let k = k as i64;
        acc.add(p * (f(k) + correction_delta(c.as_scheme(), &f, k)));
    }
    acc.value()
}

/// Signed-measure masses on `0..=kmax`: the correction polynomial applied
/// as repeated backward differences of the reference masses.
pub fn cp_signed_measure_vec(c: &CompoundCoefficients, kmax: usize) -> Vec<f64> {
    let reference = c.reference_pmf();
    let mut base = vec![0.0; kmax + 1];
    for (d, &p) in base.iter_mut().zip(reference) {
        *d = p;
    }
    let mut out = base.clone();
    let mut diff = base;
    for &bj in &c.as_scheme().b_all()[1..] {
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

/// Tail `ν((x, ∞))` of the compound scheme. Returns 1 for negative `x`.
pub fn cp_tail_estimate(c: &CompoundCoefficients, x: f64) -> f64 {
    if x < 0.0 {
        return 1.0;
    }
    let reference = c.reference_pmf();
    let fx = x.floor() as i64;
    let mut below = CompensatedSum::new();
    for &p in reference.iter().take((fx + 1) as usize) {
        below.add(p);
    }
    let mut out = 1.0 - below.value();
    let ind = |k: i64| if (k as f64) > x { 1.0 } else { 0.0 };
    let lo = (fx - c.order() as i64 + 1).max(0);
    for j in lo..=fx {
        let p = reference.get(j as usize).copied().unwrap_or(0.0);
        out += p * correction_delta(c.as_scheme(), &ind, j);
    }
    out
}

/// Call price `E_ν[(L − K)^+]` of the compound scheme.
pub fn cp_call_estimate(c: &CompoundCoefficients, strike: f64) -> f64 {
    let reference = c.reference_pmf();
    let mean = c.lambda() * c.severity.mean();
    // E[(L−K)^+] = E[L] − E[min(L, K)]
    let fk = strike.floor() as i64;
    let mut min_part = CompensatedSum::new();
    let mut below = CompensatedSum::new();
    for (k, &p) in reference.iter().enumerate().take((fk.max(-1) + 1) as usize) {
        min_part.add(k as f64 * p);
        below.add(p);
    }
    min_part.add(strike * (1.0 - below.value()));
    let mut out = mean - min_part.value();
    let payoff = |k: i64| (k as f64 - strike).max(0.0);
    let lo = (fk - c.order() as i64 + 1).max(0);
    for j in lo..=fk {
        let p = reference.get(j as usize).copied().unwrap_or(0.0);
        out += p * correction_delta(c.as_scheme(), &payoff, j);
    }
    out
}
