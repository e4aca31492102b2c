//! A rare tail point: plain Monte Carlo against one- and two-step
//! importance sampling at equal run counts.

use modphi_credit::estimators::{is_tail_onestep, is_tail_twostep, mc_tail, mixed_pmf, optimal_factor_shift};
use modphi_credit::model::Portfolio;
use modphi_credit::specfun::gauss_hermite;

fn main() -> modphi_credit::Result<()> {
    let port = Portfolio::with_pd_grid(50, 0.2, 0.01, 0.03)?;
    let exact = mixed_pmf(&port, &gauss_hermite(128)?)?.tails();
    let x = 12.0;
    let runs = 20_000;
    println!("exact P{{L > {x}}} = {:.4e}", exact[x as usize]);
    println!("factor shift = {:.4}", optimal_factor_shift(&port, x)?);

    let show = |name: &str, e: modphi_credit::estimators::EstimateWithCI| {
        let (lo, hi) = e.interval();
        println!("{name:>4}: {:.4e}  se {:.2e}  [{lo:.3e}, {hi:.3e}]", e.mean, e.std_error);
    };
    show("mc", mc_tail(&port, x, runs, 1)?);
    show("is1", is_tail_onestep(&port, x, runs, 1)?);
    show("is2", is_tail_twostep(&port, x, runs, 1)?);
    Ok(())
}
