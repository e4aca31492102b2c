//! Call prices `E[(L − K)^+]` on one conditional slice: Chen–Stein
//! corrections against the exact law and the order-6 scheme.

use modphi_credit::estimators::{recursive_pmf, stein_gaussian_call, stein_poisson_call};
use modphi_credit::model::ConditionalSlice;
use modphi_credit::modpoisson::{call_estimate, coefficients};

fn main() -> modphi_credit::Result<()> {
    let pd: Vec<f64> = (0..100).map(|i| 0.01 + 0.1 * i as f64 / 99.0).collect();
    let slice = ConditionalSlice::new(0.0, pd.clone())?;
    let exact = recursive_pmf(&slice, None)?;
    let scheme = coefficients(&pd, 6)?;

    println!("{:>3} {:>12} {:>12} {:>12} {:>12}", "K", "exact", "gauss", "poisson", "order 6");
    for k in [2.0, 4.0, 6.0, 8.0, 12.0] {
        println!(
            "{k:>3} {:>12.8} {:>12.8} {:>12.8} {:>12.8}",
            exact.call(k),
            stein_gaussian_call(&slice, k, None),
            stein_poisson_call(&slice, k)?,
            call_estimate(&scheme, k)
        );
    }
    Ok(())
}
