//! Saddlepoint tilt and large-deviations tail of one slice as the threshold
//! moves away from the mean.

use modphi_credit::estimators::{ld_tail, recursive_pmf, Cgf};
use modphi_credit::model::ConditionalSlice;

fn main() -> modphi_credit::Result<()> {
    let pd: Vec<f64> = (0..200).map(|i| 0.01 + 0.04 * i as f64 / 199.0).collect();
    let n = pd.len() as f64;
    let slice = ConditionalSlice::new(0.0, pd)?;
    let exact = recursive_pmf(&slice, None)?.tails();
    let cgf = Cgf::new(&slice, None);
    println!("mean loss {:.3}", slice.mean());

    for x in [10usize, 15, 20, 30] {
        let theta = cgf.solve_tilt(x as f64 / n)?;
        let ld = ld_tail(&slice, x as f64 / n, None)?;
        println!("x {x:>3}  theta {theta:>8.4}  ld {ld:.4e}  exact {:.4e}", exact[x]);
    }
    Ok(())
}
