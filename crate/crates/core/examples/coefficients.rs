//! Scheme coefficients for one slice, two ways, and the signed measure they
//! define.

use modphi_credit::estimators::recursive_pmf_unit;
use modphi_credit::modpoisson::{
    coefficients, coefficients_from_moments, factorial_cumulants, power_sums, signed_measure_vec,
};

fn main() -> modphi_credit::Result<()> {
    let pd = vec![0.02, 0.05, 0.1, 0.2, 0.3];
    let order = 6;
    let c = coefficients(&pd, order)?;
    println!("lambda = {}", c.lambda());
    println!("power sums = {:?}", &power_sums(&pd, order)[2..]);

    let exact = recursive_pmf_unit(&pd);
    let moments: Vec<f64> = (1..=order as i32)
        .map(|m| exact.iter().enumerate().map(|(k, p)| p * (k as f64).powi(m)).sum())
        .collect();
    let from_moments = coefficients_from_moments(&moments, order)?;
    for k in 2..=order {
        println!("b_{k} = {:+.12e}  (from moments {:+.12e})", c.b(k), from_moments.b(k));
    }

    let nu = signed_measure_vec(&c, 40);
    println!("\n k       nu(k)          exact");
    for k in 0..=pd.len() {
        println!("{k:>2} {:>14.10} {:>14.10}", nu[k], exact[k]);
    }
    println!("mass beyond n: {:.3e}", nu[pd.len() + 1..].iter().sum::<f64>());

    let kappa = factorial_cumulants(&nu, order)?;
    println!("factorial cumulants: {kappa:.6?}");
    Ok(())
}
