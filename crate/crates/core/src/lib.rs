//! Frontier ("end-point regression") estimation.
//!
//! Data `(Xᵢ, Yᵢ)` satisfy `Yᵢ = a(Xᵢ) + εᵢ` with `εᵢ ≥ 0` and an error
//! density that behaves like `b c u^{c−1}` at zero. The boundary curve `a` is
//! estimated by local linear programming ([`frontier`]), the tail shape by
//! Hill-type log-spacings ([`tail`]), and the bandwidth by Monte-Carlo
//! simulation of the extreme-value limit law ([`limit`]).

pub mod cli;
pub mod error;
pub mod frontier;
pub mod io;
pub mod kernel_geom;
mod linalg;
pub mod limit;
pub mod lp;
pub mod pilot;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod tail;

pub use error::{Error, Result};
