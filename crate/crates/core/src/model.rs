//! One-factor Gaussian copula portfolios.
//!
//! Given the factor `ψ`, obligor `i` defaults independently with probability
//! `p_i(ψ) = Φ((Φ⁻¹(p̄_i) − √ρ ψ)/√(1−ρ))`, so low factor values mean more
//! defaults. Unconditional quantities are obtained by mixing per-slice values
//! over a quadrature rule for `ψ`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::modcompound::Severity;
use crate::numeric::CompensatedSum;
use crate::specfun::{std_normal_cdf, std_normal_quantile, Quadrature};

const PD_FLOOR: f64 = 1e-300;
const PD_CEIL: f64 = 1.0 - 1e-16;

/// Obligor default probabilities, correlation and exposure law.
#[derive(Debug, Clone)]
pub struct Portfolio {
    avg_pd: Vec<f64>,
    thresholds: Vec<f64>,
    rho: f64,
    exposure: Option<Severity>,
    notional_per_obligor: f64,
}

impl Portfolio {
    /// Unit exposures and unit notional per obligor.
    ///
    /// Average default probabilities must lie in `[0, 1)`; a zero entry is an
    /// obligor that never defaults.
    pub fn new(avg_pd: Vec<f64>, rho: f64) -> Result<Self> {
        if avg_pd.is_empty() {
            return Err(Error::config("n", "portfolio needs at least one obligor"));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::config("rho", format!("must be in [0, 1), got {rho}")));
        }
        if let Some((i, p)) = avg_pd
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..1.0).contains(*p))
        {
            return Err(Error::config(
                "avg_pd",
                format!("entry {i} must be in [0, 1), got {p}"),
            ));
        }
        let thresholds = avg_pd
            .iter()
            .map(|&p| {
                if p == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    std_normal_quantile(p).expect("p in (0, 1)")
                }
            })
            .collect();
        Ok(Self {
            avg_pd,
            thresholds,
            rho,
            exposure: None,
            notional_per_obligor: 1.0,
        })
    }

    /// Evenly spaced `p̄_i = lo + (hi − lo)(i−1)/(n−1)`.
    pub fn with_pd_grid(n: usize, rho: f64, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if !(lo <= hi) {
            return Err(Error::config("pd_grid", format!("need lo <= hi, got {lo} > {hi}")));
        }
        let pd = if n == 1 {
            vec![lo]
        } else {
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        };
        Self::new(pd, rho)
    }

    /// Log-normal draws with the given arithmetic mean and standard
    /// deviation, capped at 0.999, from a seeded ChaCha stream.
    pub fn with_pd_lognormal(n: usize, rho: f64, mean: f64, sd: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if !(mean > 0.0 && mean < 1.0) {
            return Err(Error::config("pd_lognormal.mean", format!("must be in (0, 1), got {mean}")));
        }
        if !(sd >= 0.0) {
            return Err(Error::config("pd_lognormal.sd", format!("must be >= 0, got {sd}")));
        }
        let sigma2 = (1.0 + (sd / mean).powi(2)).ln();
        let mu = mean.ln() - 0.5 * sigma2;
        let dist = LogNormal::new(mu, sigma2.sqrt())
            .map_err(|e| Error::config("pd_lognormal", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pd = (0..n).map(|_| dist.sample(&mut rng).min(0.999)).collect();
        Self::new(pd, rho)
    }

    pub fn with_exposure(mut self, exposure: Severity) -> Self {
        self.exposure = Some(exposure);
        self
    }

    pub fn with_notional_per_obligor(mut self, notional: f64) -> Result<Self> {
        if !(notional > 0.0) || !notional.is_finite() {
            return Err(Error::config(
                "notional_per_obligor",
                format!("must be positive, got {notional}"),
            ));
        }
        self.notional_per_obligor = notional;
        Ok(self)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: PortfolioFile = serde_json::from_str(text).map_err(|e| {
            let field = unknown_field_of(&e.to_string());
            Error::config(field, e.to_string())
        })?;
        file.build()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("portfolio", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }

    pub fn n(&self) -> usize {
        self.avg_pd.len()
    }

    pub fn avg_pd(&self) -> &[f64] {
        &self.avg_pd
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn exposure(&self) -> Option<&Severity> {
        self.exposure.as_ref()
    }

    pub fn notional_per_obligor(&self) -> f64 {
        self.notional_per_obligor
    }

    /// Largest loss the portfolio can produce, in loss units.
    pub fn max_loss(&self) -> usize {
        self.n() * self.exposure.as_ref().map_or(1, |z| z.max_value())
    }

    /// Expected loss per defaulting obligor.
    pub fn mean_exposure(&self) -> f64 {
        self.exposure.as_ref().map_or(1.0, |z| z.mean())
    }

    /// Same portfolio with averaged probabilities replaced by the
    /// constant-hazard term probabilities at time `t` (see [`term_pd`]).
    pub fn at_time(&self, t: f64, horizon: f64) -> Result<Self> {
        let pd = self
            .avg_pd
            .iter()
            .map(|&p| term_pd(p, t, horizon))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(pd, self.rho)?;
        out.exposure = self.exposure.clone();
        out.notional_per_obligor = self.notional_per_obligor;
        Ok(out)
    }

    /// Conditional default probabilities given the factor value `psi`.
    pub fn conditional_pd(&self, psi: f64) -> ConditionalSlice {
        let a = self.rho.sqrt();
        let s = (1.0 - self.rho).sqrt();
        let pd = self
            .thresholds
            .iter()
            .zip(&self.avg_pd)
            .map(|(&t, &p)| {
                if p == 0.0 {
                    0.0
                } else if self.rho == 0.0 {
                    p
                } else {
                    std_normal_cdf((t - a * psi) / s).clamp(PD_FLOOR, PD_CEIL)
                }
            })
            .collect();
        ConditionalSlice { psi, pd }
    }

    /// `Σ_m w_m f(slice(ψ_m))`, evaluated in parallel and reduced in node
    /// order with compensated summation. With `ρ = 0` the single slice is
    /// evaluated once.
    pub fn integrate_factor<F>(&self, quad: &Quadrature, per_slice: F) -> Result<f64>
    where
        F: Fn(&ConditionalSlice) -> Result<f64> + Sync,
    {
        if self.rho == 0.0 {
            return per_slice(&self.conditional_pd(0.0))
                .map_err(|e| Error::AtNode { node: 0, source: Box::new(e) });
        }
        let values = self.evaluate_nodes(quad, |s| per_slice(s))?;
        let mut acc = CompensatedSum::new();
        for (w, v) in quad.weights().iter().zip(values) {
            acc.add(w * v);
        }
        Ok(acc.value())
    }

    /// Vector-valued version of [`Portfolio::integrate_factor`]; every slice
    /// must return the same length.
    pub fn integrate_factor_vec<F>(&self, quad: &Quadrature, per_slice: F) -> Result<Vec<f64>>
    where
        F: Fn(&ConditionalSlice) -> Result<Vec<f64>> + Sync,
    {
        if self.rho == 0.0 {
            return per_slice(&self.conditional_pd(0.0))
                .map_err(|e| Error::AtNode { node: 0, source: Box::new(e) });
        }
        let values = self.evaluate_nodes(quad, per_slice)?;
        let len = values.first().map_or(0, Vec::len);
        let mut acc = vec![CompensatedSum::new(); len];
        for (node, (w, v)) in quad.weights().iter().zip(&values).enumerate() {
            if v.len() != len {
                return Err(Error::AtNode {
                    node,
                    source: Box::new(Error::invalid("slice results differ in length")),
                });
            }
            for (a, x) in acc.iter_mut().zip(v) {
                a.add(w * x);
            }
        }
        Ok(acc.iter().map(CompensatedSum::value).collect())
    }

    fn evaluate_nodes<T, F>(&self, quad: &Quadrature, per_slice: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&ConditionalSlice) -> Result<T> + Sync,
    {
        quad.nodes()
            .par_iter()
            .enumerate()
            .map(|(node, &psi)| {
                per_slice(&self.conditional_pd(psi))
                    .map_err(|e| Error::AtNode { node, source: Box::new(e) })
            })
            .collect()
    }
}

/// Conditional default probabilities at one factor value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSlice {
    psi: f64,
    pd: Vec<f64>,
}

impl ConditionalSlice {
    /// A slice from explicit probabilities; entries must lie in `[0, 1]`.
    pub fn new(psi: f64, pd: Vec<f64>) -> Result<Self> {
        if let Some(p) = pd.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("default probability {p} outside [0, 1]")));
        }
        Ok(Self { psi, pd })
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn pd(&self) -> &[f64] {
        &self.pd
    }

    pub fn n(&self) -> usize {
        self.pd.len()
    }

    /// Conditional expected number of defaults.
    pub fn mean(&self) -> f64 {
        self.pd.iter().copied().collect::<CompensatedSum>().value()
    }
}

/// Constant-hazard term default probability `1 − (1 − p̄)^{t/T}`.
pub fn term_pd(pbar: f64, t: f64, horizon: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be >= 0, got {t}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid(format!("horizon must be > 0, got {horizon}")));
    }
    if pbar == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    Ok(-(((t / horizon) * (-pbar).ln_1p()).exp_m1()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortfolioFile {
    n: usize,
    rho: f64,
    avg_pd: Option<Vec<f64>>,
    pd_grid: Option<GridSpec>,
    pd_lognormal: Option<LogNormalSpec>,
    exposure: Option<ExposureSpec>,
    notional_per_obligor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    lo: f64,
    hi: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogNormalSpec {
    mean: f64,
    sd: f64,
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExposureSpec {
    pmf: Vec<f64>,
}

impl PortfolioFile {
    fn build(self) -> Result<Portfolio> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::config("rho", format!("must be in [0, 1), got {}", self.rho)));
        }
        let given = [
            self.avg_pd.is_some(),
            self.pd_grid.is_some(),
            self.pd_lognormal.is_some(),
        ];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(Error::config(
                "avg_pd",
                "exactly one of avg_pd, pd_grid, pd_lognormal is required",
            ));
        }
        let mut port = if let Some(pd) = self.avg_pd {
            if pd.len() != self.n {
                return Err(Error::config(
                    "avg_pd",
                    format!("has {} entries but n = {}", pd.len(), self.n),
                ));
            }
            Portfolio::new(pd, self.rho)?
        } else if let Some(g) = self.pd_grid {
            Portfolio::with_pd_grid(self.n, self.rho, g.lo, g.hi)?
        } else {
            let l = self.pd_lognormal.expect("checked above");
            Portfolio::with_pd_lognormal(self.n, self.rho, l.mean, l.sd, l.seed)?
        };
        if let Some(e) = self.exposure {
            let sev = Severity::new(e.pmf).map_err(|e| Error::config("exposure.pmf", e.to_string()))?;
            port = port.with_exposure(sev);
        }
        if let Some(x) = self.notional_per_obligor {
            port = port.with_notional_per_obligor(x)?;
        }
        Ok(port)
    }
}

/// Best-effort extraction of the offending field from a serde message.
pub(crate) fn unknown_field_of(msg: &str) -> String {
    for marker in ["unknown field `", "missing field `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "json".to_string()
}

/// 250 obligors, `ρ = 0.3`, `p̄` evenly spaced on `[0.02, 0.08]`.
pub fn grid_benchmark() -> Portfolio {
    Portfolio::with_pd_grid(250, 0.3, 0.02, 0.08).expect("valid grid")
}

/// 100 obligors, `ρ = 0.1`, log-normal `p̄` with mean 0.05 and standard
/// deviation 0.01 (seed 7), five-year probabilities.
pub fn tranche_benchmark() -> Portfolio {
    Portfolio::with_pd_lognormal(100, 0.1, 0.05, 0.01, 7).expect("valid parameters")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gauss_hermite;
    use proptest::prelude::*;

    #[test]
    fn zero_correlation_keeps_average_pd() {
        let port = Portfolio::new(vec![0.01, 0.05, 0.2], 0.0).unwrap();
        for psi in [-3.0, 0.0, 2.5] {
            assert_eq!(port.conditional_pd(psi).pd(), port.avg_pd());
        }
    }

    #[test]
    fn conditional_pd_reference_value() {
        let port = Portfolio::new(vec![0.05], 0.3).unwrap();
        let p = port.conditional_pd(0.0).pd()[0];
        let expected = std_normal_cdf(std_normal_quantile(0.05).unwrap() / 0.7f64.sqrt());
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 0.024650684966).abs() < 1e-11);
    }

    #[test]
    fn conditional_pd_decreases_in_factor() {
        let port = Portfolio::with_pd_grid(5, 0.4, 0.01, 0.1).unwrap();
        let mut last = port.conditional_pd(-6.0);
        for i in -59..=60 {
            let s = port.conditional_pd(i as f64 * 0.1);
            for (a, b) in s.pd().iter().zip(last.pd()) {
                assert!(a < b);
            }
            last = s;
        }
    }

    #[test]
    fn integrate_constant() {
        let port = Portfolio::with_pd_grid(10, 0.3, 0.02, 0.08).unwrap();
        let quad = gauss_hermite(32).unwrap();
        let v = port.integrate_factor(&quad, |_| Ok(2.5)).unwrap();
        assert!((v - 2.5).abs() < 1e-13);
    }

    #[test]
    fn tower_property() {
        let port = Portfolio::with_pd_grid(250, 0.3, 0.02, 0.08).unwrap();
        let target: f64 = port.avg_pd().iter().sum();
        let mean64 = port
            .integrate_factor(&gauss_hermite(64).unwrap(), |s| Ok(s.mean()))
            .unwrap();
        assert!((mean64 - target).abs() < 1e-6, "{mean64} vs {target}");
        let mean256 = port
            .integrate_factor(&gauss_hermite(256).unwrap(), |s| Ok(s.mean()))
            .unwrap();
        assert!((mean256 - target).abs() < 1e-10, "{mean256} vs {target}");
    }

    #[test]
    fn integrate_reports_node() {
        let port = Portfolio::with_pd_grid(3, 0.3, 0.02, 0.08).unwrap();
        let quad = gauss_hermite(8).unwrap();
        let err = port
            .integrate_factor(&quad, |s| {
                if s.psi() > 1.0 {
                    Err(Error::invalid("boom"))
                } else {
                    Ok(1.0)
                }
            })
            .unwrap_err();
        match err {
            Error::AtNode { node, .. } => assert!(quad.nodes()[node] > 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn term_pd_values() {
        assert!((term_pd(0.04, 5.0, 5.0).unwrap() - 0.04).abs() < 1e-16);
        assert_eq!(term_pd(0.04, 0.0, 5.0).unwrap(), 0.0);
        let half = term_pd(0.04, 2.5, 5.0).unwrap();
        assert!((half - (1.0 - 0.96f64.sqrt())).abs() < 1e-15);
        assert!((half - 0.020204).abs() < 1e-6);
    }

    #[test]
    fn json_parsing() {
        let p = Portfolio::from_json_str(r#"{"n": 4, "rho": 0.2, "pd_grid": {"lo": 0.01, "hi": 0.04}}"#)
            .unwrap();
        assert_eq!(p.n(), 4);
        assert!((p.avg_pd()[3] - 0.04).abs() < 1e-15);

        let p = Portfolio::from_json_str(
            r#"{"n": 2, "rho": 0.1, "avg_pd": [0.1, 0.2], "exposure": {"pmf": [0.0, 0.5, 0.5]}, "notional_per_obligor": 2}"#,
        )
        .unwrap();
        assert_eq!(p.max_loss(), 4);
        assert_eq!(p.notional_per_obligor(), 2.0);

        let p = Portfolio::from_json_str(
            r#"{"n": 50, "rho": 0.1, "pd_lognormal": {"mean": 0.05, "sd": 0.02, "seed": 7}}"#,
        )
        .unwrap();
        let again = Portfolio::from_json_str(
            r#"{"n": 50, "rho": 0.1, "pd_lognormal": {"mean": 0.05, "sd": 0.02, "seed": 7}}"#,
        )
        .unwrap();
        assert_eq!(p.avg_pd(), again.avg_pd());
    }

    #[test]
    fn json_errors_name_the_field() {
        let err = Portfolio::from_json_str(r#"{"n": 2, "rho": 1.2, "avg_pd": [0.1, 0.2]}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "rho"), "{err}");
        let err = Portfolio::from_json_str(r#"{"n": 2, "avg_pd": [0.1, 0.2]}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "rho"), "{err}");
        let err = Portfolio::from_json_str(r#"{"n": 3, "rho": 0.1, "avg_pd": [0.1, 0.2]}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "avg_pd"));
        let err = Portfolio::from_json_str(r#"{"n": 1, "rho": 0.1, "avg_pd": [1.5]}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "avg_pd"));
    }

    proptest! {
        #[test]
        fn conditional_pd_stays_in_unit_interval(p in 1e-6f64..0.99, rho in 0.0f64..0.99, psi in -10.0f64..10.0) {
            let port = Portfolio::new(vec![p], rho).unwrap();
            let q = port.conditional_pd(psi).pd()[0];
            prop_assert!(q > 0.0 && q < 1.0);
        }
    }
}
