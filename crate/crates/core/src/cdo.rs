//! Synthetic CDO tranches priced as call spreads on the portfolio loss.
//!
//! Obligors follow constant hazards calibrated so that `p̄_i` is the default
//! probability at the contract maturity, and the factor is shared across
//! payment dates. Legs are quoted in basis points of portfolio notional.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{mixed_call, Method};
use crate::model::Portfolio;
use crate::specfun::Quadrature;

/// Attachment and detachment points as fractions of portfolio notional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrancheSpec {
    pub attach: f64,
    pub detach: f64,
}

impl TrancheSpec {
    pub fn new(attach: f64, detach: f64) -> Result<Self> {
        if !(0.0 <= attach && attach < detach && detach <= 1.0) {
            return Err(Error::invalid(format!(
                "tranche needs 0 <= attach < detach <= 1, got [{attach}, {detach}]"
            )));
        }
        Ok(Self { attach, detach })
    }

    /// Attachment and detachment strikes in loss units.
    pub fn strikes(&self, port: &Portfolio) -> (f64, f64) {
        let total = port.n() as f64 * port.notional_per_obligor();
        (self.attach * total, self.detach * total)
    }

    /// The standard ladder 0–3, 3–7, 7–10, 10–15, 15–30%.
    pub fn standard() -> Vec<Self> {
        [(0.0, 0.03), (0.03, 0.07), (0.07, 0.10), (0.10, 0.15), (0.15, 0.30)]
            .iter()
            .map(|&(a, d)| Self { attach: a, detach: d })
            .collect()
    }

    /// Reads a JSON array of `{attach, detach}` objects.
    pub fn list_from_json_str(text: &str) -> Result<Vec<Self>> {
        let raw: Vec<TrancheSpec> = serde_json::from_str(text).map_err(|e| {
            Error::config(crate::model::unknown_field_of(&e.to_string()), e.to_string())
        })?;
        if raw.is_empty() {
            return Err(Error::config("tranches", "at least one tranche is required"));
        }
        raw.into_iter()
            .map(|t| Self::new(t.attach, t.detach).map_err(|e| Error::config("tranches", e.to_string())))
            .collect()
    }

    pub fn list_from_path(path: impl AsRef<Path>) -> Result<Vec<Self>> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("tranches", format!("cannot read {}: {e}", path.display())))?;
        Self::list_from_json_str(&text)
    }
}

/// Payment dates `0 = t_0 < … < t_N = T` and a flat continuously
/// compounded rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentSchedule {
    times: Vec<f64>,
    rate: f64,
}

impl PaymentSchedule {
    /// `times` must start at 0 and increase strictly.
    pub fn new(times: Vec<f64>, rate: f64) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::invalid("schedule needs t_0 = 0 and at least one payment"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("payment times must increase strictly"));
        }
        if !rate.is_finite() {
            return Err(Error::invalid(format!("rate must be finite, got {rate}")));
        }
        Ok(Self { times, rate })
    }

    /// `freq` equally spaced payments per year up to `maturity`.
    pub fn regular(maturity: f64, freq: usize, rate: f64) -> Result<Self> {
        if !(maturity > 0.0) || freq == 0 {
            return Err(Error::invalid("maturity and frequency must be positive"));
        }
        let n = (maturity * freq as f64).round().max(1.0) as usize;
        let times = (0..=n).map(|i| maturity * i as f64 / n as f64).collect();
        Self::new(times, rate)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn maturity(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    fn discount(&self, t: f64) -> f64 {
        (-self.rate * t).exp()
    }
}

fn check_engine(engine: Method) -> Result<()> {
    match engine {
        Method::Recursive
        | Method::ModPoisson { .. }
        | Method::ModCompound { .. }
        | Method::SteinGaussian
        | Method::SteinPoisson => Ok(()),
        other => Err(Error::Incompatible {
            engine: other.name().to_string(),
            reason: "tranche pricing needs a call-price estimator".to_string(),
        }),
    }
}

/// `E[(L_t − K_a)^+] − E[(L_t − K_d)^+]` with term probabilities at `t`.
pub fn expected_tranche_loss(
    port: &Portfolio,
    tranche: &TrancheSpec,
    t: f64,
    horizon: f64,
    engine: Method,
    quad: &Quadrature,
) -> Result<f64> {
    check_engine(engine)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let at = port.at_time(t, horizon)?;
    let (ka, kd) = tranche.strikes(port);
    Ok(mixed_call(&at, engine, quad, ka)? - mixed_call(&at, engine, quad, kd)?)
}

/// Expected tranche losses at every schedule date.
pub fn expected_loss_path(
    port: &Portfolio,
    tranche: &TrancheSpec,
    sched: &PaymentSchedule,
    engine: Method,
    quad: &Quadrature,
) -> Result<Vec<f64>> {
    sched
        .times()
        .iter()
        .map(|&t| expected_tranche_loss(port, tranche, t, sched.maturity(), engine, quad))
        .collect()
}

/// `Σ e^{−r t_n}(EL(t_n) − EL(t_{n−1}))` from an expected-loss path.
pub fn default_leg_from_path(sched: &PaymentSchedule, el: &[f64]) -> f64 {
    let t = sched.times();
    (1..t.len())
        .map(|n| sched.discount(t[n]) * (el[n] - el[n - 1]))
        .sum()
}

/// `s Σ e^{−r t_n}(t_n − t_{n−1})((K_d − K_a) − EL(t_n))`.
pub fn premium_leg_from_path(sched: &PaymentSchedule, el: &[f64], width: f64, spread: f64) -> f64 {
    let t = sched.times();
    spread
        * (1..t.len())
            .map(|n| sched.discount(t[n]) * (t[n] - t[n - 1]) * (width - el[n]))
            .sum::<f64>()
}

/// Discounted expected tranche losses, in loss units.
pub fn default_leg(
    port: &Portfolio,
    tranche: &TrancheSpec,
    sched: &PaymentSchedule,
    engine: Method,
    quad: &Quadrature,
) -> Result<f64> {
    let el = expected_loss_path(port, tranche, sched, engine, quad)?;
    Ok(default_leg_from_path(sched, &el))
}

/// Discounted premium payments at annual spread `spread`, in loss units.
pub fn premium_leg(
    port: &Portfolio,
    tranche: &TrancheSpec,
    sched: &PaymentSchedule,
    engine: Method,
    quad: &Quadrature,
    spread: f64,
) -> Result<f64> {
    if !(spread >= 0.0) {
        return Err(Error::invalid(format!("spread must be >= 0, got {spread}")));
    }
    let el = expected_loss_path(port, tranche, sched, engine, quad)?;
    let (ka, kd) = tranche.strikes(port);
    Ok(premium_leg_from_path(sched, &el, kd - ka, spread))
}

/// Prices of one tranche. Legs are in basis points of portfolio notional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranchePrice {
    pub tranche: TrancheSpec,
    pub default_leg_bp: f64,
    /// Premium leg at a spread of 1.
    pub premium_leg_bp: f64,
    pub fair_spread_bp: f64,
    pub seconds: f64,
}

/// Fair spread `default leg / premium leg(1)` in basis points.
pub fn fair_spread(
    port: &Portfolio,
    tranche: &TrancheSpec,
    sched: &PaymentSchedule,
    engine: Method,
    quad: &Quadrature,
) -> Result<f64> {
    Ok(price_tranche(port, tranche, sched, engine, quad)?.fair_spread_bp)
}

/// Both legs and the fair spread of one tranche.
pub fn price_tranche(
    port: &Portfolio,
    tranche: &TrancheSpec,
    sched: &PaymentSchedule,
    engine: Method,
    quad: &Quadrature,
) -> Result<TranchePrice> {
    let start = Instant::now();
    let el = expected_loss_path(port, tranche, sched, engine, quad)?;
    let (ka, kd) = tranche.strikes(port);
    let default = default_leg_from_path(sched, &el);
    let premium = premium_leg_from_path(sched, &el, kd - ka, 1.0);
    if !(premium > 0.0) {
        return Err(Error::DegenerateTranche(format!(
            "premium leg of [{}, {}] is not positive",
            tranche.attach, tranche.detach
        )));
    }
    let to_bp = 1e4 / (port.n() as f64 * port.notional_per_obligor());
    Ok(TranchePrice {
        tranche: *tranche,
        default_leg_bp: default * to_bp,
        premium_leg_bp: premium * to_bp,
        fair_spread_bp: default / premium * 1e4,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Prices every tranche in order.
pub fn price_tranches(
    port: &Portfolio,
    tranches: &[TrancheSpec],
    sched: &PaymentSchedule,
    engine: Method,
    quad: &Quadrature,
) -> Result<Vec<TranchePrice>> {
    tranches
        .iter()
        .map(|t| price_tranche(port, t, sched, engine, quad))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::term_pd;
    use crate::specfun::gauss_hermite;

    fn port() -> Portfolio {
        Portfolio::with_pd_grid(40, 0.2, 0.02, 0.1).unwrap()
    }

    #[test]
    fn term_structure_examples() {
        assert!((term_pd(0.04, 5.0, 5.0).unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(term_pd(0.04, 0.0, 5.0).unwrap(), 0.0);
        assert!((term_pd(0.04, 2.5, 5.0).unwrap() - (1.0 - 0.96f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn tranche_validation() {
        assert!(TrancheSpec::new(0.1, 0.1).is_err());
        assert!(TrancheSpec::new(0.2, 1.1).is_err());
        let t = TrancheSpec::list_from_json_str(r#"[{"attach":0,"detach":0.03},{"attach":0.03,"detach":0.07}]"#).unwrap();
        assert_eq!(t.len(), 2);
        let err = TrancheSpec::list_from_json_str(r#"[{"attach":0,"detach":0.03,"x":1}]"#).unwrap_err();
        assert!(matches!(err, Error::Config { field, .. } if field == "x"));
        assert!(PaymentSchedule::new(vec![0.0, 1.0, 1.0], 0.0).is_err());
        assert_eq!(PaymentSchedule::regular(5.0, 4, 0.03).unwrap().times().len(), 21);
    }

    #[test]
    fn full_capital_tranche_is_the_mean() {
        let port = port();
        let quad = gauss_hermite(32).unwrap();
        let full = TrancheSpec::new(0.0, 1.0).unwrap();
        let el = expected_tranche_loss(&port, &full, 2.0, 5.0, Method::Recursive, &quad).unwrap();
        let mean: f64 = port.avg_pd().iter().map(|&p| term_pd(p, 2.0, 5.0).unwrap()).sum();
        assert!((el - mean).abs() < 1e-10);
        assert_eq!(expected_tranche_loss(&port, &full, 0.0, 5.0, Method::Recursive, &quad).unwrap(), 0.0);
    }

    #[test]
    fn additivity_and_monotonicity() {
        let port = port();
        let quad = gauss_hermite(32).unwrap();
        let sched = PaymentSchedule::regular(5.0, 4, 0.03).unwrap();
        let ladder = [0.0, 0.03, 0.07, 0.1, 0.15, 0.3, 1.0];
        for engine in [Method::Recursive, Method::ModPoisson { order: 6 }, Method::SteinGaussian] {
            let mut total = 0.0;
            let (k0, k1) = TrancheSpec::new(0.0, 1.0).unwrap().strikes(&port);
            let at = port.at_time(5.0, 5.0).unwrap();
            let spread = mixed_call(&at, engine, &quad, k0).unwrap() - mixed_call(&at, engine, &quad, k1).unwrap();
            for w in ladder.windows(2) {
                let t = TrancheSpec::new(w[0], w[1]).unwrap();
                let el = expected_loss_path(&port, &t, &sched, engine, &quad).unwrap();
                for d in el.windows(2) {
                    assert!(d[1] - d[0] >= -1e-10);
                }
                total += el[el.len() - 1];
            }
            assert!((total - spread).abs() < 1e-9, "{engine}: {total} vs {spread}");
            if engine == Method::Recursive {
                let mean: f64 = port.avg_pd().iter().sum();
                assert!((total - mean).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn leg_identities() {
        let zero = Portfolio::new(vec![0.0; 20], 0.3).unwrap();
        let quad = gauss_hermite(16).unwrap();
        let t = TrancheSpec::new(0.03, 0.07).unwrap();
        let sched = PaymentSchedule::regular(5.0, 4, 0.0).unwrap();
        assert_eq!(default_leg(&zero, &t, &sched, Method::Recursive, &quad).unwrap(), 0.0);
        let (ka, kd) = t.strikes(&zero);
        let prem = premium_leg(&zero, &t, &sched, Method::Recursive, &quad, 0.01).unwrap();
        assert!((prem - 0.01 * 5.0 * (kd - ka)).abs() < 1e-12);
        let p = price_tranche(&zero, &t, &sched, Method::Recursive, &quad).unwrap();
        assert_eq!(p.fair_spread_bp, 0.0);

        let port = port();
        let a = premium_leg(&port, &t, &sched, Method::Recursive, &quad, 0.02).unwrap();
        let b = premium_leg(&port, &t, &sched, Method::Recursive, &quad, 0.04).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12 * b.abs());
        assert_eq!(premium_leg(&port, &t, &sched, Method::Recursive, &quad, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn single_period_full_capital_spread() {
        let port = port();
        let quad = gauss_hermite(32).unwrap();
        let full = TrancheSpec::new(0.0, 1.0).unwrap();
        let sched = PaymentSchedule::new(vec![0.0, 3.0], 0.0).unwrap();
        let el = expected_tranche_loss(&port, &full, 3.0, 3.0, Method::Recursive, &quad).unwrap();
        let notional = port.n() as f64;
        let s = fair_spread(&port, &full, &sched, Method::Recursive, &quad).unwrap();
        assert!((s - 1e4 * el / (3.0 * (notional - el))).abs() < 1e-9);
        let dl = default_leg(&port, &full, &sched, Method::Recursive, &quad).unwrap();
        assert!((dl - el).abs() < 1e-12);
    }

    #[test]
    fn spreads_fall_with_seniority() {
        let port = port();
        let quad = gauss_hermite(32).unwrap();
        let sched = PaymentSchedule::regular(5.0, 4, 0.03).unwrap();
        let prices = price_tranches(&port, &TrancheSpec::standard(), &sched, Method::Recursive, &quad).unwrap();
        for w in prices.windows(2) {
            assert!(w[0].fair_spread_bp > w[1].fair_spread_bp);
        }
    }

    #[test]
    fn engines() {
        let port = port();
        let quad = gauss_hermite(16).unwrap();
        let t = TrancheSpec::new(0.0, 0.03).unwrap();
        let sched = PaymentSchedule::regular(1.0, 4, 0.0).unwrap();
        for m in [Method::LargeDeviations, Method::MonteCarlo, Method::ImportanceTwoStep] {
            assert!(matches!(
                price_tranche(&port, &t, &sched, m, &quad),
                Err(Error::Incompatible { .. })
            ));
        }
        // 3% of 40 obligors is a non-integer strike, 5% is an integer one
        for detach in [0.03, 0.05] {
            let t = TrancheSpec::new(0.0, detach).unwrap();
            let a = price_tranche(&port, &t, &sched, Method::SteinPoisson, &quad).unwrap();
            let b = price_tranche(&port, &t, &sched, Method::ModPoisson { order: 2 }, &quad).unwrap();
            assert!((a.fair_spread_bp - b.fair_spread_bp).abs() < 1e-8);
        }
        let t = TrancheSpec::new(0.0, 0.05).unwrap();
        let b = price_tranche(&port, &t, &sched, Method::ModPoisson { order: 2 }, &quad).unwrap();
        let c = price_tranche(&port, &t, &sched, Method::ModCompound { order: 2 }, &quad).unwrap();
        assert!((c.fair_spread_bp - b.fair_spread_bp).abs() < 1e-7);
    }
}
