//! Credit-portfolio loss distributions in the one-factor Gaussian copula.
//!
//! The central approximation is a signed measure built from a Poisson (or
//! compound Poisson) reference law times a polynomial correction in
//! `e^{iξ} − 1`. Its coefficients come from power sums of the conditional
//! default probabilities, and tails and call prices reduce to incomplete gamma
//! evaluations plus a short correction window.
//!
//! Around it sit the usual competitors: the exact recursion, large
//! deviations, Chen–Stein corrections, plain and importance-sampled Monte
//! Carlo. VaR/ES estimation and synthetic CDO pricing are built on top.
//!
//! ```
//! use modphi_credit::{model::Portfolio, modpoisson, specfun};
//!
//! let port = Portfolio::with_pd_grid(250, 0.3, 0.02, 0.08).unwrap();
//! let quad = specfun::gauss_hermite(64).unwrap();
//! let tail = port
//!     .integrate_factor(&quad, |slice| {
//!         let c = modpoisson::coefficients(slice.pd(), 6)?;
//!         Ok(modpoisson::tail_estimate(&c, 40.0))
//!     })
//!     .unwrap();
//! assert!(tail > 0.0 && tail < 0.1);
//! ```

pub mod cdo;
pub mod cli;
pub mod combinatorics;
pub mod error;
pub mod estimators;
pub mod model;
pub mod modcompound;
pub mod modpoisson;
pub mod numeric;
pub mod risk;
pub mod specfun;

pub use error::{Error, Result};
