//! Special functions and factor quadrature.
//!
//! Lower incomplete gamma, Poisson masses and tails, the standard normal
//! distribution and its quantile, and Gauss–Hermite rules normalized against
//! the standard normal density.

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, ln_factorial};

const GAMMA_EPS: f64 = 1e-17;
const GAMMA_MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

/// Regularized lower incomplete gamma `P(x, λ) = γ(x, λ) / Γ(x)`.
pub fn regularized_lower_gamma(x: f64, lam: f64) -> Result<f64> {
    check_gamma_args(x, lam)?;
    if lam == 0.0 {
        return Ok(0.0);
    }
    if lam < x + 1.0 {
        Ok(gamma_series(x, lam))
    } else {
        Ok(1.0 - gamma_continued_fraction(x, lam))
    }
}

/// Regularized upper incomplete gamma `Q(x, λ) = 1 − P(x, λ)`, accurate when
/// it is small.
pub fn regularized_upper_gamma(x: f64, lam: f64) -> Result<f64> {
    check_gamma_args(x, lam)?;
    if lam == 0.0 {
        return Ok(1.0);
    }
    if lam < x + 1.0 {
        Ok(1.0 - gamma_series(x, lam))
    } else {
        Ok(gamma_continued_fraction(x, lam))
    }
}

/// Lower incomplete gamma `γ(x, λ) = ∫_0^λ t^{x−1} e^{−t} dt`.
///
/// Overflows to infinity once `Γ(x)` leaves the double range (`x > 171`);
/// use [`regularized_lower_gamma`] there.
pub fn lower_incomplete_gamma(x: f64, lam: f64) -> Result<f64> {
    let p = regularized_lower_gamma(x, lam)?;
    Ok(p * libm::tgamma(x))
}

fn check_gamma_args(x: f64, lam: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("incomplete gamma needs x > 0, got {x}")));
    }
    if !(lam >= 0.0) || !lam.is_finite() {
        return Err(Error::invalid(format!(
            "incomplete gamma needs lambda >= 0, got {lam}"
        )));
    }
    Ok(())
}

/// `ln(λ^x e^{−λ} / Γ(x + 1))`.
fn ln_prefactor(x: f64, lam: f64) -> f64 {
    let lg = if x.fract() == 0.0 && x <= 1e15 {
        ln_factorial(x as u64)
    } else {
        libm::lgamma(x + 1.0)
    };
    x * lam.ln() - lam - lg
}

/// `P(x, λ)` by `λ^x e^{−λ}/Γ(x+1) · Σ_n λ^n / ((x+1)⋯(x+n))`.
fn gamma_series(x: f64, lam: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut a = x;
    for _ in 0..GAMMA_MAX_ITER {
        a += 1.0;
        term *= lam / a;
        sum += term;
        if term < sum * GAMMA_EPS {
            break;
        }
    }
    (ln_prefactor(x, lam)).exp() * sum
}

/// `Q(x, λ)` by the modified Lentz continued fraction.
fn gamma_continued_fraction(x: f64, lam: f64) -> f64 {
    let mut b = lam + 1.0 - x;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - x);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    // λ^x e^{−λ}/Γ(x) = x · λ^x e^{−λ}/Γ(x+1)
    (ln_prefactor(x, lam) + x.ln()).exp() * h
}

/// Poisson mass `e^{−λ} λ^k / k!`, zero for negative `k`.
pub fn poisson_pmf(lam: f64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    if lam == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    ((k as f64) * lam.ln() - lam - ln_factorial(k as u64)).exp()
}

/// Poisson survival `P{X > k} = γ(k+1, λ)/k!`, equal to 1 for negative `k`.
pub fn poisson_tail(lam: f64, k: i64) -> f64 {
    if k < 0 {
        return 1.0;
    }
    if lam == 0.0 {
        return 0.0;
    }
    regularized_lower_gamma(k as f64 + 1.0, lam).expect("validated arguments")
}

/// Poisson masses `0..=kmax` by the stable forward recurrence from the mode.
pub fn poisson_pmf_vec(lam: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if lam == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let mode = (lam.floor() as usize).min(kmax);
    out[mode] = poisson_pmf(lam, mode as i64);
    for k in (0..mode).rev() {
        out[k] = out[k + 1] * (k + 1) as f64 / lam;
    }
    for k in mode + 1..=kmax {
        out[k] = out[k - 1] * lam / k as f64;
    }
    out
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: Wichura's AS241 rational approximation polished
/// by one Newton step.
pub fn std_normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid(format!(
            "normal quantile needs u in (0, 1), got {u}"
        )));
    }
    let x = as241(u);
    let (cdf, tail_side) = if x < 0.0 {
        (std_normal_cdf(x), u)
    } else {
        (std_normal_cdf(-x), 1.0 - u)
    };
    let pdf = std_normal_pdf(x);
    if pdf == 0.0 {
        return Ok(x);
    }
    let step = (cdf - tail_side) / pdf;
    Ok(if x < 0.0 { x - step } else { x + step })
}

fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// A quadrature rule for integrals against the standard normal law.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_m w_m f(ψ_m)` with compensated summation in node order.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| w * f(x)),
        )
    }
}

pub const MAX_HERMITE_NODES: usize = 512;

/// Probabilists' Gauss–Hermite rule with `n` nodes.
///
/// Nodes are the eigenvalues of the Jacobi matrix of the Hermite recurrence,
/// refined by Newton's method on the orthonormal polynomial. Weights come from
/// the Christoffel function `1 / Σ_k φ_k(x)²`. For `n` above roughly 370 the
/// outermost weights underflow to zero.
pub fn gauss_hermite(n: usize) -> Result<Quadrature> {
    if n == 0 || n > MAX_HERMITE_NODES {
        return Err(Error::invalid(format!(
            "Gauss-Hermite node count must be in 1..={MAX_HERMITE_NODES}, got {n}"
        )));
    }
    if n == 1 {
        return Ok(Quadrature {
            nodes: vec![0.0],
            weights: vec![1.0],
        });
    }
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p_n, p_nm1, _) = orthonormal_hermite(n, *x);
            let dx = p_n / ((n as f64).sqrt() * p_nm1);
            if !dx.is_finite() {
                break;
            }
            *x -= dx;
            if dx.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Symmetrize around zero.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let m = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -m;
        nodes[j] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (_, _, ln_christoffel) = orthonormal_hermite(n, x);
            (-ln_christoffel).exp()
        })
        .collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    let total = compensated_sum(weights.iter().copied());
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(Quadrature { nodes, weights })
}

/// Evaluates `φ_n(x)` and `φ_{n−1}(x)` up to a common positive scale, together
/// with `ln Σ_{k<n} φ_k(x)²` (unscaled), where `φ_k = He_k / √k!`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    const RESCALE: f64 = 1e100;
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    let mut sum_sq = 1.0f64;
    let mut ln_scale = 0.0f64;
    for k in 0..n {
        // x φ_k = √(k+1) φ_{k+1} + √k φ_{k−1}
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if k + 1 < n {
            sum_sq += cur * cur;
        }
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            sum_sq /= RESCALE * RESCALE;
            ln_scale += RESCALE.ln();
        }
    }
    (cur, prev, sum_sq.ln() + 2.0 * ln_scale)
}
