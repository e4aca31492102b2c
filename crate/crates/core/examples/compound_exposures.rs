//! Random integer exposures: the compound scheme against the exact
//! recursion with severities.

use modphi_credit::estimators::{mixed_pmf, mixed_tail, Method};
use modphi_credit::model::Portfolio;
use modphi_credit::modcompound::Severity;
use modphi_credit::specfun::gauss_hermite;

fn main() -> modphi_credit::Result<()> {
    // each default costs 1, 2 or 3 units
    let severity = Severity::new(vec![0.0, 0.5, 0.3, 0.2])?;
    let port = Portfolio::with_pd_grid(100, 0.2, 0.01, 0.05)?.with_exposure(severity);
    let quad = gauss_hermite(64)?;
    let exact = mixed_pmf(&port, &quad)?.tails();

    println!("{:>4} {:>14} {:>14} {:>14}", "x", "recursive", "order 2", "order 6");
    for x in [5usize, 10, 20, 40, 80] {
        let r2 = mixed_tail(&port, Method::ModCompound { order: 2 }, &quad, x as f64, 0, 0)?;
        let r6 = mixed_tail(&port, Method::ModCompound { order: 6 }, &quad, x as f64, 0, 0)?;
        println!("{x:>4} {:>14.6e} {:>14.6e} {:>14.6e}", exact[x], r2.mean, r6.mean);
    }
    Ok(())
}
