//! Special functions and divergences between beta distributions.

mod divergence;
pub mod quadrature;
mod special;

pub use divergence::{hellinger, jsd, DivergenceKind, JSD_TOLERANCE};
pub use special::{binom_pmf, binom_pmf_table, ln_gamma, log_beta, reg_inc_beta, BetaShapes};
pub(crate) use special::beta_cdf_and_sf;
