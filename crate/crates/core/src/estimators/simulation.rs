//! Plain Monte Carlo and importance-sampled tail estimators.
//!
//! Every run owns a ChaCha stream selected by its index, so results depend on
//! `(seed, runs)` only and not on how runs are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::large_dev::{tilted_pd, Cgf, Scale};
use crate::model::{ConditionalSlice, Portfolio};
use crate::modcompound::Severity;
use crate::numeric::CompensatedSum;

const BATCH: usize = 4096;
const OUTER_GRID_STEP: f64 = 0.05;
const OUTER_RANGE: f64 = 8.0;
const GOLDEN_TOL: f64 = 1e-8;

/// A simulation estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub std_error: f64,
    pub runs: u64,
    /// Two-sided confidence level used by [`EstimateWithCI::interval`].
    pub confidence: f64,
}

impl EstimateWithCI {
    /// A deterministic value.
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            runs: 1,
            confidence: 0.95,
        }
    }

    /// Asymptotic normal interval at [`EstimateWithCI::confidence`].
    pub fn interval(&self) -> (f64, f64) {
        let z = crate::specfun::std_normal_quantile(0.5 + 0.5 * self.confidence).unwrap_or(1.96);
        (self.mean - z * self.std_error, self.mean + z * self.std_error)
    }
}

fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Draws from `pmf` by inversion.
fn sample_index(pmf: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &q) in pmf.iter().enumerate() {
        acc += q;
        if u < acc {
            return k;
        }
    }
    pmf.len() - 1
}

/// Per-run sample: the indicator-weighted value `1{L > x} w`.
fn simulate<F>(runs: u64, seed: u64, per_run: F) -> Result<EstimateWithCI>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    if runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    let batches = runs.div_ceil(BATCH as u64);
    let sums: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * BATCH as u64;
            let end = (start + BATCH as u64).min(runs);
            let mut s1 = CompensatedSum::new();
            let mut s2 = CompensatedSum::new();
            for run in start..end {
                let mut rng = run_rng(seed, run);
                let v = per_run(&mut rng);
                s1.add(v);
                s2.add(v * v);
            }
            (s1.value(), s2.value())
        })
        .collect();
    let mut s1 = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for (a, b) in sums {
        s1.add(a);
        s2.add(b);
    }
    let n = runs as f64;
    let mean = s1.value() / n;
    let var = if runs > 1 {
        ((s2.value() - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(EstimateWithCI {
        mean,
        std_error: (var / n).sqrt(),
        runs,
        confidence: 0.95,
    })
}

/// One conditional loss draw given default probabilities and exposure law.
fn draw_loss(rng: &mut ChaCha8Rng, pd: &[f64], exposure: Option<&[f64]>) -> u64 {
    let mut loss = 0u64;
    for &p in pd {
        let u: f64 = rng.random();
        if u < p {
            loss += match exposure {
                None => 1,
                Some(q) => sample_index(q, rng.random()) as u64,
            };
        }
    }
    loss
}

/// Plain Monte Carlo estimate of `P{L > x}`.
///
/// Standard error is `√(p̂(1 − p̂)/runs)`.
pub fn mc_tail(port: &Portfolio, x: f64, runs: u64, seed: u64) -> Result<EstimateWithCI> {
    if runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    if x < 0.0 {
        return Ok(EstimateWithCI { mean: 1.0, std_error: 0.0, runs, confidence: 0.95 });
    }
    let exposure = port.exposure().map(Severity::pmf);
    let est = simulate(runs, seed, |rng| {
        let psi: f64 = rng.sample(StandardNormal);
        let slice = port.conditional_pd(psi);
        let loss = draw_loss(rng, slice.pd(), exposure);
        if loss as f64 > x {
            1.0
        } else {
            0.0
        }
    })?;
    let p = est.mean;
    Ok(EstimateWithCI {
        std_error: (p * (1.0 - p) / runs as f64).sqrt(),
        ..est
    })
}

/// Empirical loss distribution from plain Monte Carlo.
pub fn mc_loss_histogram(port: &Portfolio, runs: u64, seed: u64) -> Result<Vec<f64>> {
    if runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    let exposure = port.exposure().map(Severity::pmf);
    let size = port.max_loss() + 1;
    let batches = runs.div_ceil(BATCH as u64);
    let counts: Vec<Vec<u64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * BATCH as u64;
            let end = (start + BATCH as u64).min(runs);
            let mut counts = vec![0u64; size];
            for run in start..end {
                let mut rng = run_rng(seed, run);
                let psi: f64 = rng.sample(StandardNormal);
                let slice = port.conditional_pd(psi);
                counts[draw_loss(&mut rng, slice.pd(), exposure) as usize] += 1;
            }
            counts
        })
        .collect();
    let mut total = vec![0u64; size];
    for c in counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    Ok(total.into_iter().map(|c| c as f64 / runs as f64).collect())
}

/// Conditional tilt for threshold `x` (total loss units): zero when `x` does
/// not exceed the conditional mean, or when no loss can exceed `x`.
fn conditional_tilt(slice: &ConditionalSlice, exposure: Option<&Severity>, x: f64) -> Result<f64> {
    let cgf = Cgf::new(slice, exposure);
    let per = x / slice.n() as f64;
    if per >= cgf.max_mean() {
        return Ok(0.0);
    }
    match cgf.solve_tilt(per) {
        Ok(t) => Ok(t),
        Err(Error::BelowConditionalMean { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Tilted defaults and exposures for one slice, plus the log-likelihood
/// ratio pieces.
struct TiltedSlice {
    pd: Vec<f64>,
    exposure: Option<Vec<f64>>,
    theta: f64,
    /// Unnormalized cgf `Λ(θ)`.
    cgf: f64,
}

fn tilt_slice(slice: &ConditionalSlice, exposure: Option<&Severity>, theta: f64) -> TiltedSlice {
    if theta == 0.0 {
        return TiltedSlice {
            pd: slice.pd().to_vec(),
            exposure: exposure.map(|z| z.pmf().to_vec()),
            theta,
            cgf: 0.0,
        };
    }
    let cgf = Cgf::new(slice, exposure).value(theta, Scale::Total);
    match exposure {
        None => TiltedSlice {
            pd: slice
                .pd()
                .iter()
                .map(|&p| crate::estimators::large_dev::tilted_unit(p, theta))
                .collect(),
            exposure: None,
            theta,
            cgf,
        },
        Some(z) => {
            let m = z.mgf(theta);
            let tilted_z = z
                .pmf()
                .iter()
                .enumerate()
                .map(|(j, &q)| q * (theta * j as f64).exp() / m)
                .collect();
            TiltedSlice {
                pd: slice.pd().iter().map(|&p| tilted_pd(p, m)).collect(),
                exposure: Some(tilted_z),
                theta,
                cgf,
            }
        }
    }
}

/// Samples one conditional loss under the tilt and returns
/// `1{L > x} · exp(−θL + Λ(θ))`.
fn tilted_sample(rng: &mut ChaCha8Rng, t: &TiltedSlice, x: f64) -> f64 {
    let loss = draw_loss(rng, &t.pd, t.exposure.as_deref()) as f64;
    if loss > x {
        (-t.theta * loss + t.cgf).exp()
    } else {
        0.0
    }
}

fn is_onestep_with<T>(port: &Portfolio, x: f64, runs: u64, seed: u64, tilt: T) -> Result<EstimateWithCI>
where
    T: Fn(&ConditionalSlice) -> Result<f64> + Sync,
{
    if x < 0.0 {
        return Ok(EstimateWithCI { mean: 1.0, std_error: 0.0, runs, confidence: 0.95 });
    }
    let exposure = port.exposure();
    let failure = std::sync::Mutex::new(None);
    let est = simulate(runs, seed, |rng| {
        let psi: f64 = rng.sample(StandardNormal);
        let slice = port.conditional_pd(psi);
        let theta = match tilt(&slice) {
            Ok(t) => t,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                0.0
            }
        };
        tilted_sample(rng, &tilt_slice(&slice, exposure, theta), x)
    })?;
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(est),
    }
}

/// One-step importance sampling: untilted factor, exponentially tilted
/// defaults (and exposures) given the factor.
pub fn is_tail_onestep(port: &Portfolio, x: f64, runs: u64, seed: u64) -> Result<EstimateWithCI> {
    let exposure = port.exposure();
    is_onestep_with(port, x, runs, seed, |s| conditional_tilt(s, exposure, x))
}

/// Objective `Λ(θ_x(z), z) − θ_x(z) x − z²/2` of the outer factor shift.
fn outer_objective(port: &Portfolio, x: f64, z: f64) -> Result<f64> {
    let slice = port.conditional_pd(z);
    let exposure = port.exposure();
    let theta = conditional_tilt(&slice, exposure, x)?;
    let cgf = Cgf::new(&slice, exposure).value(theta, Scale::Total);
    Ok(cgf - theta * x - 0.5 * z * z)
}

/// Mean `μ` of the shifted factor law: grid search over `[−8, 8]` refined by
/// golden-section search. Zero when the factor has no effect (`ρ = 0`).
pub fn optimal_factor_shift(port: &Portfolio, x: f64) -> Result<f64> {
    if port.rho() == 0.0 {
        return Ok(0.0);
    }
    let steps = (2.0 * OUTER_RANGE / OUTER_GRID_STEP).round() as usize;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=steps {
        let z = -OUTER_RANGE + i as f64 * OUTER_GRID_STEP;
        let v = outer_objective(port, x, z)?;
        if v > best.0 {
            best = (v, z);
        }
    }
    let (mut a, mut b) = (
        (best.1 - OUTER_GRID_STEP).max(-OUTER_RANGE),
        (best.1 + OUTER_GRID_STEP).min(OUTER_RANGE),
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = outer_objective(port, x, c)?;
    let mut fd = outer_objective(port, x, d)?;
    while b - a > GOLDEN_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = outer_objective(port, x, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = outer_objective(port, x, d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Two-step importance sampling: factor drawn from `N(μ, 1)`, conditional
/// tilting as in the one-step scheme, weight multiplied by
/// `exp(μ²/2 − μψ)`.
pub fn is_tail_twostep(port: &Portfolio, x: f64, runs: u64, seed: u64) -> Result<EstimateWithCI> {
    if runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    if x < 0.0 {
        return Ok(EstimateWithCI { mean: 1.0, std_error: 0.0, runs, confidence: 0.95 });
    }
    let mu = optimal_factor_shift(port, x)?;
    let exposure = port.exposure();
    let failure = std::sync::Mutex::new(None);
    let est = simulate(runs, seed, |rng| {
        let eps: f64 = rng.sample(StandardNormal);
        let psi = mu + eps;
        let slice = port.conditional_pd(psi);
        let theta = match conditional_tilt(&slice, exposure, x) {
            Ok(t) => t,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                0.0
            }
        };
        let w = tilted_sample(rng, &tilt_slice(&slice, exposure, theta), x);
        if w == 0.0 {
            0.0
        } else {
            w * (0.5 * mu * mu - mu * psi).exp()
        }
    })?;
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(est),
    }
}
