//! Conditional cumulant generating function, its Legendre transform and the
//! sharp large-deviations tail estimate.

use crate::error::{Error, Result};
use crate::model::ConditionalSlice;
use crate::modcompound::Severity;
use crate::numeric::CompensatedSum;

/// `Λ(θ) = Σ_i log(1 + p_i(E[e^{θZ}] − 1))` for one slice.
#[derive(Debug, Clone, Copy)]
pub struct Cgf<'a> {
    pd: &'a [f64],
    exposure: Option<&'a Severity>,
}

/// Whether a cgf value is divided by the obligor count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// `Λ(θ)`, as in the importance-sampling likelihood ratio.
    Total,
    /// `F(θ) = Λ(θ)/n`, as in the large-deviations estimator.
    PerObligor,
}

impl<'a> Cgf<'a> {
    pub fn new(slice: &'a ConditionalSlice, exposure: Option<&'a Severity>) -> Self {
        Self { pd: slice.pd(), exposure }
    }

    pub fn from_pd(pd: &'a [f64], exposure: Option<&'a Severity>) -> Self {
        Self { pd, exposure }
    }

    fn scale(&self, scale: Scale) -> f64 {
        match scale {
            Scale::Total => 1.0,
            Scale::PerObligor => 1.0 / self.pd.len() as f64,
        }
    }

    /// Cgf value at `theta ≥ 0`.
    pub fn value(&self, theta: f64, scale: Scale) -> f64 {
        let mut acc = CompensatedSum::new();
        match self.exposure {
            None => {
                for &p in self.pd {
                    // log(1 + p(e^θ − 1)) = θ + log(p + (1−p)e^{−θ})
                    if theta > 0.0 {
                        acc.add(theta + (p + (1.0 - p) * (-theta).exp()).ln());
                    } else {
                        acc.add((p * theta.exp_m1()).ln_1p());
                    }
                }
            }
            Some(z) => {
                let m1 = z.mgf(theta) - 1.0;
                for &p in self.pd {
                    acc.add((p * m1).ln_1p());
                }
            }
        }
        acc.value() * self.scale(scale)
    }

    /// First and second derivatives at `theta`.
    pub fn derivatives(&self, theta: f64, scale: Scale) -> (f64, f64) {
        let mut d1 = CompensatedSum::new();
        let mut d2 = CompensatedSum::new();
        match self.exposure {
            None => {
                for &p in self.pd {
                    let q = tilted_unit(p, theta);
                    d1.add(q);
                    d2.add(q * (1.0 - q));
                }
            }
            Some(z) => {
                let m = z.mgf(theta);
                let (m1, m2) = z.mgf_derivatives(theta);
                for &p in self.pd {
                    let d = 1.0 + p * (m - 1.0);
                    let a = p * m1 / d;
                    d1.add(a);
                    d2.add(p * m2 / d - a * a);
                }
            }
        }
        let s = self.scale(scale);
        (d1.value() * s, d2.value() * s)
    }

    /// Largest loss per obligor with positive probability.
    pub fn max_mean(&self) -> f64 {
        let m = self.exposure.map_or(1, |z| z.max_value()) as f64;
        let active = self.pd.iter().filter(|&&p| p > 0.0).count() as f64;
        active * m / self.pd.len() as f64
    }

    /// Solves `F'(θ) = x` for `θ ≥ 0` by safeguarded Newton iteration.
    ///
    /// `x` is a loss per obligor. Returns [`Error::BelowConditionalMean`] when
    /// `x` does not exceed `F'(0)` and [`Error::Domain`] when `x` is not below
    /// the largest achievable value.
    pub fn solve_tilt(&self, x: f64) -> Result<f64> {
        let (mean, _) = self.derivatives(0.0, Scale::PerObligor);
        if !(x > mean) {
            return Err(Error::BelowConditionalMean { x, mean });
        }
        let max = self.max_mean();
        if !(x < max) {
            return Err(Error::Domain(format!(
                "loss per obligor {x} is not below the maximum {max}"
            )));
        }
        let f = |t: f64| self.derivatives(t, Scale::PerObligor);
        let mut lo = 0.0;
        let mut hi = 1.0;
        while f(hi).0 < x {
            lo = hi;
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Domain(format!("no tilt reaches loss per obligor {x}")));
            }
        }
        let mut theta = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (d1, d2) = f(theta);
            let g = d1 - x;
            if g.abs() <= 1e-12 * x.max(1e-300) {
                return Ok(theta);
            }
            if g > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let newton = theta - g / d2;
            theta = if d2 > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * hi {
                return Ok(theta);
            }
        }
        Ok(theta)
    }
}

/// Exponentially tilted default probability `pM/(1 + p(M − 1))`, where `M`
/// is the exposure mgf at the tilt.
pub fn tilted_pd(p: f64, mgf: f64) -> f64 {
    p * mgf / (1.0 + p * (mgf - 1.0))
}

/// Tilted probability for unit exposures (`M = e^θ`), stable for large `θ`.
pub(crate) fn tilted_unit(p: f64, theta: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    p / (p + (1.0 - p) * (-theta).exp())
}

/// Large-deviations estimate of `P{L > n x}` on one slice:
/// `exp(−n(θx − F(θ))) / √(2π n θ² F''(θ))` at the tilt `θ` solving
/// `F'(θ) = x`.
pub fn ld_tail(slice: &ConditionalSlice, x_per_obligor: f64, exposure: Option<&Severity>) -> Result<f64> {
    let cgf = Cgf::new(slice, exposure);
    let theta = cgf.solve_tilt(x_per_obligor)?;
    let n = slice.n() as f64;
    let f = cgf.value(theta, Scale::PerObligor);
    let (_, f2) = cgf.derivatives(theta, Scale::PerObligor);
    let rate = n * (theta * x_per_obligor - f);
    Ok((-rate).exp() / (2.0 * std::f64::consts::PI * n * theta * theta * f2).sqrt())
}

/// [`ld_tail`] with the below-the-mean regime mapped to 1.
pub fn ld_tail_or_one(slice: &ConditionalSlice, x_per_obligor: f64, exposure: Option<&Severity>) -> Result<f64> {
    match ld_tail(slice, x_per_obligor, exposure) {
        Err(Error::BelowConditionalMean { .. }) => Ok(1.0),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::recursive_pmf_unit;

    fn slice(pd: Vec<f64>) -> ConditionalSlice {
        ConditionalSlice::new(0.0, pd).unwrap()
    }

    #[test]
    fn cgf_at_zero() {
        let s = slice(vec![0.1, 0.3, 0.05]);
        let c = Cgf::new(&s, None);
        assert_eq!(c.value(0.0, Scale::PerObligor), 0.0);
        let h = 1e-6;
        let fd = (c.value(h, Scale::PerObligor) - c.value(-h, Scale::PerObligor)) / (2.0 * h);
        assert!((fd - 0.45 / 3.0).abs() < 1e-9);
        assert!((c.derivatives(0.0, Scale::PerObligor).0 - 0.15).abs() < 1e-15);
        let z = Severity::new(vec![0.2, 0.5, 0.3]).unwrap();
        let c = Cgf::new(&s, Some(&z));
        assert!(c.value(0.0, Scale::Total).abs() < 1e-15);
        let fd = (c.value(h, Scale::Total) - c.value(-h, Scale::Total)) / (2.0 * h);
        assert!((fd - 0.45 * 1.1).abs() < 1e-8);
    }

    #[test]
    fn unit_and_general_paths_agree() {
        let s = slice(vec![0.1, 0.3, 0.05, 0.6]);
        let a = Cgf::new(&s, None);
        let z = Severity::constant(1);
        let b = Cgf::new(&s, Some(&z));
        for t in [0.0, 0.3, 1.7, 4.0] {
            assert!((a.value(t, Scale::Total) - b.value(t, Scale::Total)).abs() < 1e-13);
            let (a1, a2) = a.derivatives(t, Scale::Total);
            let (b1, b2) = b.derivatives(t, Scale::Total);
            assert!((a1 - b1).abs() < 1e-12 && (a2 - b2).abs() < 1e-12);
        }
    }

    #[test]
    fn tilt_solves_first_order_condition() {
        let pd: Vec<f64> = (0..40).map(|i| 0.01 + 0.002 * i as f64).collect();
        let s = slice(pd);
        let c = Cgf::new(&s, None);
        let x = 0.12;
        let theta = c.solve_tilt(x).unwrap();
        assert!((c.derivatives(theta, Scale::PerObligor).0 - x).abs() < 1e-10);
        // dense scan of θx − F(θ) peaks at the solution
        let obj = |t: f64| t * x - c.value(t, Scale::PerObligor);
        let best = (0..=40_000)
            .map(|i| i as f64 * 1e-4)
            .max_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap();
        assert!((best - theta).abs() < 2e-4);
    }

    #[test]
    fn tilt_errors() {
        let s = slice(vec![0.1, 0.2]);
        let c = Cgf::new(&s, None);
        assert!(matches!(c.solve_tilt(0.1), Err(Error::BelowConditionalMean { .. })));
        assert!(matches!(c.solve_tilt(1.0), Err(Error::Domain(_))));
        assert!(matches!(ld_tail(&s, 0.05, None), Err(Error::BelowConditionalMean { .. })));
        assert_eq!(ld_tail_or_one(&s, 0.05, None).unwrap(), 1.0);
    }

    #[test]
    fn tilted_probability_examples() {
        assert_eq!(tilted_pd(0.1, 1.0), 0.1);
        assert!((tilted_pd(0.1, 2.0) - 0.2 / 1.1).abs() < 1e-15);
        assert!((tilted_unit(0.1, 50.0) - 1.0).abs() < 1e-15);
        assert!((tilted_unit(0.1, 2f64.ln()) - 0.2 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn ld_tail_order_of_magnitude() {
        let pd: Vec<f64> = (0..250).map(|i| 0.02 + 0.06 * i as f64 / 249.0).collect();
        let pmf = recursive_pmf_unit(&pd);
        let s = slice(pd);
        for k in [20usize, 25, 30, 35] {
            let exact: f64 = pmf[k + 1..].iter().sum();
            let est = ld_tail(&s, k as f64 / 250.0, None).unwrap();
            let ratio = est / exact;
            assert!((0.2..5.0).contains(&ratio), "k={k}: ratio {ratio}");
        }
    }
}
