//! Exact conditional loss law by adding one obligor at a time.

use crate::error::{Error, Result};
use crate::model::ConditionalSlice;
use crate::modcompound::Severity;
use crate::numeric::CompensatedSum;

/// Largest support accepted by [`recursive_pmf`].
pub const MAX_SUPPORT: usize = 50_000_000;

/// Probability masses on `{0, …, N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDistribution {
    pmf: Vec<f64>,
}

impl LossDistribution {
    /// Masses must be non-negative and sum to 1 within `1e−12`.
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::invalid("loss distribution needs at least one mass"));
        }
        if let Some(p) = pmf.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::invalid(format!("negative probability mass {p}")));
        }
        let total = pmf.iter().copied().collect::<CompensatedSum>().value();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { pmf })
    }

    /// Wraps masses without validation (mixtures of valid laws).
    pub(crate) fn from_raw(pmf: Vec<f64>) -> Self {
        Self { pmf }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn max_loss(&self) -> usize {
        self.pmf.len() - 1
    }

    /// `P{L > k}` for `k = 0..=N`, summed from the top.
    pub fn tails(&self) -> Vec<f64> {
        tails_from_pmf(&self.pmf)
    }

    /// `E[(L − K)^+]`.
    pub fn call(&self, strike: f64) -> f64 {
        call_from_pmf(&self.pmf, strike)
    }

    /// `E[L^m]`.
    pub fn raw_moment(&self, m: i32) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| p * (k as f64).powi(m))
            .collect::<CompensatedSum>()
            .value()
    }
}

pub(crate) fn tails_from_pmf(pmf: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pmf.len()];
    let mut acc = CompensatedSum::new();
    for k in (0..pmf.len()).rev() {
        out[k] = acc.value();
        acc.add(pmf[k]);
    }
    out
}

pub(crate) fn call_from_pmf(pmf: &[f64], strike: f64) -> f64 {
    let start = if strike < 0.0 { 0 } else { strike.floor() as usize + 1 };
    pmf.iter()
        .enumerate()
        .skip(start)
        .map(|(k, &p)| p * (k as f64 - strike))
        .collect::<CompensatedSum>()
        .value()
}

/// Poisson-binomial masses for unit exposures.
pub fn recursive_pmf_unit(pd: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; pd.len() + 1];
    pmf[0] = 1.0;
    for (i, &p) in pd.iter().enumerate() {
        let q = 1.0 - p;
        for k in (1..=i + 1).rev() {
            pmf[k] = pmf[k] * q + pmf[k - 1] * p;
        }
        pmf[0] *= q;
    }
    pmf
}

/// Exact conditional loss law, one obligor at a time.
///
/// With unit exposures this is the Poisson-binomial recursion; otherwise each
/// obligor convolves the current law with `(1 − p) δ_0 + p Z`.
pub fn recursive_pmf(slice: &ConditionalSlice, exposure: Option<&Severity>) -> Result<LossDistribution> {
    let pd = slice.pd();
    let m = exposure.map_or(1, |z| z.max_value());
    let support = pd
        .len()
        .checked_mul(m)
        .and_then(|v| v.checked_add(1))
        .filter(|&v| v <= MAX_SUPPORT)
        .ok_or_else(|| {
            Error::Resource(format!(
                "loss support {} x {} exceeds the limit of {MAX_SUPPORT} points",
                pd.len(),
                m
            ))
        })?;
    let z = match exposure {
        Some(z) if z.max_value() != 1 || z.pmf()[0] != 0.0 => z,
        _ => return Ok(LossDistribution::from_raw(recursive_pmf_unit(pd))),
    };
    let q = z.pmf();
    let mut pmf = vec![0.0; support];
    pmf[0] = 1.0;
    let mut top = 0usize;
    let mut next = vec![0.0; support];
    for &p in pd {
        let new_top = top + m;
        for v in next.iter_mut().take(new_top + 1) {
            *v = 0.0;
        }
        for (k, &mass) in pmf.iter().enumerate().take(top + 1) {
            if mass == 0.0 {
                continue;
            }
            next[k] += mass * (1.0 - p);
            for (j, &qj) in q.iter().enumerate() {
                next[k + j] += mass * p * qj;
            }
        }
        std::mem::swap(&mut pmf, &mut next);
        top = new_top;
    }
    Ok(LossDistribution::from_raw(pmf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slice(pd: Vec<f64>) -> ConditionalSlice {
        ConditionalSlice::new(0.0, pd).unwrap()
    }

    fn brute_force(pd: &[f64]) -> Vec<f64> {
        let n = pd.len();
        let mut out = vec![0.0; n + 1];
        for mask in 0u32..(1 << n) {
            let mut prob = 1.0;
            for (i, &p) in pd.iter().enumerate() {
                prob *= if mask >> i & 1 == 1 { p } else { 1.0 - p };
            }
            out[mask.count_ones() as usize] += prob;
        }
        out
    }

    #[test]
    fn small_cases() {
        let d = recursive_pmf(&slice(vec![0.3]), None).unwrap();
        assert_eq!(d.pmf(), &[0.7, 0.3]);
        let d = recursive_pmf(&slice(vec![0.5, 0.5]), None).unwrap();
        assert_eq!(d.pmf(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let pd: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
            let d = recursive_pmf(&slice(pd.clone()), None).unwrap();
            for (a, b) in d.pmf().iter().zip(brute_force(&pd)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn general_exposure_matches_enumeration() {
        let z = Severity::new(vec![0.1, 0.3, 0.6]).unwrap();
        let pd = [0.2, 0.5, 0.7];
        let d = recursive_pmf(&slice(pd.to_vec()), Some(&z)).unwrap();
        let mut oracle = vec![0.0; 7];
        // each obligor contributes 0 w.p. 1−p+p q0, j w.p. p q_j
        let law = |p: f64| [1.0 - p + p * 0.1, p * 0.3, p * 0.6];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    oracle[a + b + c] += law(pd[0])[a] * law(pd[1])[b] * law(pd[2])[c];
                }
            }
        }
        for (x, y) in d.pmf().iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-15);
        }
        let unit = recursive_pmf(&slice(pd.to_vec()), Some(&Severity::constant(1))).unwrap();
        assert_eq!(unit.pmf(), recursive_pmf(&slice(pd.to_vec()), None).unwrap().pmf());
    }

    #[test]
    fn resource_limit() {
        let z = Severity::constant(1000);
        let err = recursive_pmf(&slice(vec![0.1; 60_000]), Some(&z)).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn tails_and_calls() {
        let d = LossDistribution::new(vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(d.tails(), vec![0.75, 0.25, 0.0]);
        assert!((d.call(0.0) - 1.0).abs() < 1e-15);
        assert!((d.call(1.0) - 0.25).abs() < 1e-15);
        assert!((d.call(0.5) - 0.625).abs() < 1e-15);
        assert!(LossDistribution::new(vec![0.5, 0.6]).is_err());
    }

    proptest! {
        #[test]
        fn mass_is_one(pd in proptest::collection::vec(0.0f64..1.0, 1..200)) {
            let d = recursive_pmf(&slice(pd), None).unwrap();
            let mass: f64 = d.pmf().iter().copied().collect::<CompensatedSum>().value();
            prop_assert!((mass - 1.0).abs() < 1e-12);
            prop_assert!(d.pmf().iter().all(|&p| p >= 0.0));
        }
    }
}
