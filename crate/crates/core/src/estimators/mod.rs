//! Competing estimators of conditional and unconditional loss quantities.
//!
//! Each semi-analytic method works on a [`ConditionalSlice`]; the helpers in
//! this module dispatch on a [`Method`] and mix slice results over a
//! quadrature rule for the factor. Simulation methods sample the factor
//! themselves.

mod large_dev;
mod recursive;
mod simulation;
mod stein;

use std::fmt;

pub use large_dev::{ld_tail, ld_tail_or_one, tilted_pd, Cgf, Scale};
#[cfg(test)]
pub(crate) use recursive::tails_from_pmf;
pub use recursive::{recursive_pmf, recursive_pmf_unit, LossDistribution, MAX_SUPPORT};
pub use simulation::{
    is_tail_onestep, is_tail_twostep, mc_loss_histogram, mc_tail, optimal_factor_shift, EstimateWithCI,
};
pub use stein::{stein_gaussian_call, stein_poisson_call};

use crate::error::{Error, Result};
use crate::model::{ConditionalSlice, Portfolio};
use crate::modcompound::{self, Severity};
use crate::modpoisson;
use crate::numeric::CompensatedSum;
use crate::specfun::Quadrature;

/// Estimation method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Recursive,
    ModPoisson { order: usize },
    ModCompound { order: usize },
    LargeDeviations,
    SteinGaussian,
    SteinPoisson,
    MonteCarlo,
    ImportanceOneStep,
    ImportanceTwoStep,
}

impl Method {
    /// Parses a method name; `order` is used by the scheme methods only and
    /// defaults to 6.
    pub fn parse(name: &str, order: Option<usize>) -> Result<Self> {
        let order = order.unwrap_or(6);
        Ok(match name {
            "recursive" => Method::Recursive,
            "modpoisson" => Method::ModPoisson { order },
            "modcompound" => Method::ModCompound { order },
            "ld" => Method::LargeDeviations,
            "stein-gauss" => Method::SteinGaussian,
            "stein-poisson" => Method::SteinPoisson,
            "mc" => Method::MonteCarlo,
            "is1" => Method::ImportanceOneStep,
            "is2" => Method::ImportanceTwoStep,
            other => return Err(Error::config("method", format!("unknown method `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Recursive => "recursive",
            Method::ModPoisson { .. } => "modpoisson",
            Method::ModCompound { .. } => "modcompound",
            Method::LargeDeviations => "ld",
            Method::SteinGaussian => "stein-gauss",
            Method::SteinPoisson => "stein-poisson",
            Method::MonteCarlo => "mc",
            Method::ImportanceOneStep => "is1",
            Method::ImportanceTwoStep => "is2",
        }
    }

    /// Approximation order for the scheme methods.
    pub fn order(&self) -> Option<usize> {
        match self {
            Method::ModPoisson { order } | Method::ModCompound { order } => Some(*order),
            _ => None,
        }
    }

    pub fn is_simulation(&self) -> bool {
        matches!(
            self,
            Method::MonteCarlo | Method::ImportanceOneStep | Method::ImportanceTwoStep
        )
    }

    fn incompatible(&self, reason: impl Into<String>) -> Error {
        Error::Incompatible {
            engine: self.name().to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.order() {
            Some(r) => write!(f, "{}({r})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

fn is_unit(exposure: Option<&Severity>) -> bool {
    exposure.is_none_or(|z| z.max_value() == 1 && z.pmf()[0] == 0.0)
}

fn unit_only(method: Method, exposure: Option<&Severity>) -> Result<()> {
    if is_unit(exposure) {
        Ok(())
    } else {
        Err(method.incompatible("needs unit exposures"))
    }
}

fn compound(pd: &[f64], exposure: Option<&Severity>, order: usize) -> Result<modcompound::CompoundCoefficients> {
    let unit = Severity::constant(1);
    modcompound::cp_coefficients(pd, exposure.unwrap_or(&unit), order)
}

/// `P{L > x}` on one slice.
///
/// Chen–Stein methods difference their call prices on the loss lattice. The
/// large-deviations value is 1 below the conditional mean and 0 at or above
/// the largest possible loss.
pub fn slice_tail(method: Method, slice: &ConditionalSlice, exposure: Option<&Severity>, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Ok(1.0);
    }
    match method {
        Method::Recursive => {
            let d = recursive_pmf(slice, exposure)?;
            let k = x.floor() as usize;
            Ok(d.pmf().iter().skip(k + 1).copied().collect::<CompensatedSum>().value())
        }
        Method::ModPoisson { order } => {
            unit_only(method, exposure)?;
            Ok(modpoisson::tail_estimate(&modpoisson::coefficients(slice.pd(), order)?, x))
        }
        Method::ModCompound { order } => {
            Ok(modcompound::cp_tail_estimate(&compound(slice.pd(), exposure, order)?, x))
        }
        Method::LargeDeviations => {
            let cgf = Cgf::new(slice, exposure);
            let per = x / slice.n() as f64;
            if per >= cgf.max_mean() {
                return Ok(0.0);
            }
            ld_tail_or_one(slice, per, exposure)
        }
        Method::SteinGaussian | Method::SteinPoisson => {
            let k = x.floor();
            Ok(slice_call(method, slice, exposure, k)? - slice_call(method, slice, exposure, k + 1.0)?)
        }
        _ => Err(method.incompatible("simulation methods do not work on a single slice")),
    }
}

/// `E[(L − K)^+]` on one slice.
pub fn slice_call(method: Method, slice: &ConditionalSlice, exposure: Option<&Severity>, strike: f64) -> Result<f64> {
    match method {
        Method::Recursive => Ok(recursive_pmf(slice, exposure)?.call(strike)),
        Method::ModPoisson { order } => {
            unit_only(method, exposure)?;
            Ok(modpoisson::call_estimate(&modpoisson::coefficients(slice.pd(), order)?, strike))
        }
        Method::ModCompound { order } => {
            Ok(modcompound::cp_call_estimate(&compound(slice.pd(), exposure, order)?, strike))
        }
        Method::SteinGaussian => Ok(stein_gaussian_call(slice, strike, exposure)),
        Method::SteinPoisson => {
            unit_only(method, exposure)?;
            lattice_call(strike, |k| stein_poisson_call(slice, k))
        }
        Method::LargeDeviations => Err(method.incompatible("no call-price estimator")),
        _ => Err(method.incompatible("simulation methods do not work on a single slice")),
    }
}

/// Extends a call price known at integer strikes to any strike. On the
/// integers `K ↦ E[(L − K)^+]` is piecewise linear, and below zero it is
/// `E[L] − K`.
fn lattice_call(strike: f64, at: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if strike <= 0.0 {
        return Ok(at(0.0)? - strike);
    }
    let lo = strike.floor();
    let w = strike - lo;
    if w <= 1e-12 * strike.max(1.0) {
        return at(lo);
    }
    if 1.0 - w <= 1e-12 * strike.max(1.0) {
        return at(lo + 1.0);
    }
    Ok((1.0 - w) * at(lo)? + w * at(lo + 1.0)?)
}

/// Tails `P{L > k}` for `k = 0..=kmax` on one slice.
pub fn slice_tail_vector(
    method: Method,
    slice: &ConditionalSlice,
    exposure: Option<&Severity>,
    kmax: usize,
) -> Result<Vec<f64>> {
    match method {
        Method::Recursive => {
            let mut t = recursive_pmf(slice, exposure)?.tails();
            t.resize(kmax + 1, 0.0);
            Ok(t)
        }
        Method::ModPoisson { order } => {
            unit_only(method, exposure)?;
            Ok(modpoisson::tail_vector(&modpoisson::coefficients(slice.pd(), order)?, kmax))
        }
        Method::ModCompound { order } => {
            let c = compound(slice.pd(), exposure, order)?;
            let masses = modcompound::cp_signed_measure_vec(&c, kmax);
            let mut below = CompensatedSum::new();
            Ok(masses
                .iter()
                .map(|&m| {
                    below.add(m);
                    1.0 - below.value()
                })
                .collect())
        }
        Method::SteinGaussian | Method::SteinPoisson => {
            let calls = (0..=kmax + 1)
                .map(|k| slice_call(method, slice, exposure, k as f64))
                .collect::<Result<Vec<_>>>()?;
            Ok(calls.windows(2).map(|w| w[0] - w[1]).collect())
        }
        _ => (0..=kmax)
            .map(|k| slice_tail(method, slice, exposure, k as f64))
            .collect(),
    }
}

/// Unconditional `P{L > x}`. Simulation methods use `runs` and `seed`;
/// the others mix over `quad` and report a zero standard error.
pub fn mixed_tail(
    port: &Portfolio,
    method: Method,
    quad: &Quadrature,
    x: f64,
    runs: u64,
    seed: u64,
) -> Result<EstimateWithCI> {
    match method {
        Method::MonteCarlo => mc_tail(port, x, runs, seed),
        Method::ImportanceOneStep => is_tail_onestep(port, x, runs, seed),
        Method::ImportanceTwoStep => is_tail_twostep(port, x, runs, seed),
        _ => {
            let exposure = port.exposure();
            let v = port.integrate_factor(quad, |s| slice_tail(method, s, exposure, x))?;
            Ok(EstimateWithCI::exact(v))
        }
    }
}

/// Unconditional `E[(L − K)^+]` mixed over `quad`.
pub fn mixed_call(port: &Portfolio, method: Method, quad: &Quadrature, strike: f64) -> Result<f64> {
    let exposure = port.exposure();
    port.integrate_factor(quad, |s| slice_call(method, s, exposure, strike))
}

/// Unconditional tails on `0..=kmax` mixed over `quad`.
pub fn mixed_tail_vector(port: &Portfolio, method: Method, quad: &Quadrature, kmax: usize) -> Result<Vec<f64>> {
    if method.is_simulation() {
        return Err(method.incompatible("tail vectors need a deterministic method"));
    }
    let exposure = port.exposure();
    port.integrate_factor_vec(quad, |s| slice_tail_vector(method, s, exposure, kmax))
}

/// Exact unconditional loss law mixed over `quad`.
pub fn mixed_pmf(port: &Portfolio, quad: &Quadrature) -> Result<LossDistribution> {
    let exposure = port.exposure();
    let pmf = port.integrate_factor_vec(quad, |s| {
        let mut p = recursive_pmf(s, exposure)?.pmf().to_vec();
        p.resize(port.max_loss() + 1, 0.0);
        Ok(p)
    })?;
    Ok(LossDistribution::from_raw(pmf))
}
