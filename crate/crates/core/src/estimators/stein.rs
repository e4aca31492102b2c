//! First-order Chen–Stein corrections to the Gaussian and Poisson call
//! prices.

use crate::error::{Error, Result};
use crate::model::ConditionalSlice;
use crate::modcompound::Severity;
use crate::numeric::CompensatedSum;
use crate::specfun::{poisson_pmf, poisson_tail, std_normal_cdf, std_normal_pdf};

/// Gaussian call with the zero-bias correction.
///
/// With `m = E[L]`, `σ² = Var L` and `K̃ = K − m`, returns the Bachelier price
/// `σφ(K̃/σ) − K̃(1 − Φ(K̃/σ))` plus `ΣE[X_i³]/(6σ²) · K̃ · φ_σ(K̃)`, where
/// `X_i` are the centered obligor losses. A degenerate slice (`σ = 0`) gives
/// `(m − K)^+`.
pub fn stein_gaussian_call(slice: &ConditionalSlice, strike: f64, exposure: Option<&Severity>) -> f64 {
    let (z1, z2, z3) = match exposure {
        None => (1.0, 1.0, 1.0),
        Some(z) => (z.raw_moment(1), z.raw_moment(2), z.raw_moment(3)),
    };
    let mut mean = CompensatedSum::new();
    let mut var = CompensatedSum::new();
    let mut third = CompensatedSum::new();
    for &p in slice.pd() {
        let e1 = p * z1;
        let e2 = p * z2;
        let e3 = p * z3;
        mean.add(e1);
        var.add(e2 - e1 * e1);
        third.add(e3 - 3.0 * e1 * e2 + 2.0 * e1 * e1 * e1);
    }
    let m = mean.value();
    let var = var.value();
    let k = strike - m;
    if !(var > 0.0) {
        return (-k).max(0.0);
    }
    let sigma = var.sqrt();
    let u = k / sigma;
    let bachelier = sigma * std_normal_pdf(u) - k * (1.0 - std_normal_cdf(u));
    let phi_sigma = std_normal_pdf(u) / sigma;
    bachelier + third.value() / (6.0 * var) * k * phi_sigma
}

/// Poisson call with the second-order Stein correction
/// `−½ Σp_i² · e^{−λ} λ^{K−1}/(K−1)!`, for unit exposures and integer
/// strikes. Strikes within rounding noise of an integer are snapped to it.
pub fn stein_poisson_call(slice: &ConditionalSlice, strike: f64) -> Result<f64> {
    let nearest = strike.round();
    let strike = if (strike - nearest).abs() <= 1e-12 * nearest.abs().max(1.0) { nearest } else { strike };
    if strike.fract() != 0.0 || strike < 0.0 {
        return Err(Error::invalid(format!(
            "Stein-Poisson correction needs a non-negative integer strike, got {strike}"
        )));
    }
    let k = strike as i64;
    let mut lam = CompensatedSum::new();
    let mut sq = CompensatedSum::new();
    for &p in slice.pd() {
        lam.add(p);
        sq.add(p * p);
    }
    let lam = lam.value();
    let poisson = lam * poisson_tail(lam, k - 2) - strike * poisson_tail(lam, k - 1);
    Ok(poisson - 0.5 * sq.value() * poisson_pmf(lam, k - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::recursive_pmf_unit;
    use crate::estimators::recursive::call_from_pmf;
    use crate::modpoisson::{call_estimate, coefficients};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slice(pd: Vec<f64>) -> ConditionalSlice {
        ConditionalSlice::new(0.0, pd).unwrap()
    }

    #[test]
    fn symmetric_slice_has_no_skew_correction() {
        let s = slice(vec![0.5; 30]);
        let k = 17.0;
        let m = 15.0;
        let sigma = (30.0f64 * 0.25).sqrt();
        let u = (k - m) / sigma;
        let bachelier = sigma * std_normal_pdf(u) - (k - m) * (1.0 - std_normal_cdf(u));
        assert!((stein_gaussian_call(&s, k, None) - bachelier).abs() < 1e-14);
    }

    #[test]
    fn third_moment_example() {
        // E[X³] for p = 0.2 is 0.2 · 0.8 · 0.6
        let p: f64 = 0.2;
        let e3 = p - 3.0 * p * p + 2.0 * p.powi(3);
        assert!((e3 - 0.096).abs() < 1e-15);
        assert!((p * (1.0 - p) * (1.0 - 2.0 * p) - 0.096).abs() < 1e-15);
    }

    #[test]
    fn degenerate_slice() {
        let s = slice(vec![0.0, 0.0]);
        assert_eq!(stein_gaussian_call(&s, 1.0, None), 0.0);
        let s = slice(vec![1.0, 1.0, 1.0]);
        assert_eq!(stein_gaussian_call(&s, 1.0, None), 2.0);
    }

    #[test]
    fn gaussian_close_to_recursive_near_the_mean() {
        let pd: Vec<f64> = (0..250).map(|i| 0.02 + 0.06 * i as f64 / 249.0).collect();
        let pmf = recursive_pmf_unit(&pd);
        let s = slice(pd);
        for k in [11.0, 12.5, 14.0] {
            let exact = call_from_pmf(&pmf, k);
            let est = stein_gaussian_call(&s, k, None);
            // the loss lives on the integers, the correction does not
            assert!(((est - exact) / exact).abs() < 2e-2, "k={k}: {est} vs {exact}");
        }
    }

    #[test]
    fn poisson_equals_order_two_scheme() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let pd: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
            let k = rng.random_range(0..15) as f64;
            let s = slice(pd.clone());
            let a = stein_poisson_call(&s, k).unwrap();
            let b = call_estimate(&coefficients(&pd, 2).unwrap(), k);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_correction_vanishes_for_small_pd() {
        let k = 3.0;
        let lam = 2.0;
        for n in [100usize, 10_000, 1_000_000] {
            let s = slice(vec![lam / n as f64; n]);
            let plain = lam * poisson_tail(lam, 1) - k * poisson_tail(lam, 2);
            let corrected = stein_poisson_call(&s, k).unwrap();
            assert!((corrected - plain).abs() <= 0.5 * lam * lam / n as f64);
        }
    }

    #[test]
    fn poisson_first_order_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let pd: Vec<f64> = (0..20).map(|_| rng.random_range(0.01..0.1)).collect();
        let exact = call_from_pmf(&recursive_pmf_unit(&pd), 3.0);
        let s = slice(pd.clone());
        let corrected = stein_poisson_call(&s, 3.0).unwrap();
        let lam: f64 = pd.iter().sum();
        let plain = lam * poisson_tail(lam, 1) - 3.0 * poisson_tail(lam, 2);
        assert!((corrected - exact).abs() < (plain - exact).abs());
        let sq: f64 = pd.iter().map(|p| p * p).sum();
        assert!((corrected - exact).abs() < sq * sq.sqrt());
    }

    #[test]
    fn non_integer_strike_is_rejected() {
        assert!(stein_poisson_call(&slice(vec![0.1]), 2.5).is_err());
    }
}
