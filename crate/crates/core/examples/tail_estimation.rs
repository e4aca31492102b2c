//! Unconditional tail `P{L > x}` of the grid portfolio by every deterministic
//! method, next to the exact recursion.

use modphi_credit::estimators::{mixed_pmf, mixed_tail, Method};
use modphi_credit::model;
use modphi_credit::specfun::gauss_hermite;

fn main() -> modphi_credit::Result<()> {
    let port = model::grid_benchmark();
    let quad = gauss_hermite(64)?;
    let exact = mixed_pmf(&port, &quad)?.tails();

    let methods = [
        Method::ModPoisson { order: 2 },
        Method::ModPoisson { order: 6 },
        Method::ModPoisson { order: 10 },
        Method::SteinGaussian,
        Method::LargeDeviations,
    ];
    print!("{:>5} {:>14}", "x", "recursive");
    for m in &methods {
        print!(" {:>16}", m.to_string());
    }
    println!();
    for x in [20usize, 50, 100, 150, 200] {
        print!("{x:>5} {:>14.6e}", exact[x]);
        for &m in &methods {
            let est = mixed_tail(&port, m, &quad, x as f64, 0, 0)?;
            print!(" {:>16.6e}", est.mean);
        }
        println!();
    }
    Ok(())
}
