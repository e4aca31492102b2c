//! Fair spreads of the standard tranche ladder under several engines.

use modphi_credit::cdo::{price_tranches, PaymentSchedule, TrancheSpec};
use modphi_credit::estimators::Method;
use modphi_credit::model;
use modphi_credit::specfun::gauss_hermite;

fn main() -> modphi_credit::Result<()> {
    let port = model::tranche_benchmark();
    let quad = gauss_hermite(64)?;
    // five years, quarterly, 3% flat
    let sched = PaymentSchedule::regular(5.0, 4, 0.03)?;
    let tranches = TrancheSpec::standard();

    let engines = [
        Method::Recursive,
        Method::ModPoisson { order: 4 },
        Method::ModPoisson { order: 10 },
        Method::SteinPoisson,
        Method::SteinGaussian,
    ];
    let priced: Vec<_> = engines
        .iter()
        .map(|&m| price_tranches(&port, &tranches, &sched, m, &quad))
        .collect::<Result<_, _>>()?;

    print!("{:>10}", "tranche");
    for m in &engines {
        print!(" {:>16}", m.to_string());
    }
    println!();
    for (i, t) in tranches.iter().enumerate() {
        print!("{:>4.0}%-{:>3.0}%", 100.0 * t.attach, 100.0 * t.detach);
        for p in &priced {
            print!(" {:>16.4}", p[i].fair_spread_bp);
        }
        println!();
    }
    Ok(())
}
