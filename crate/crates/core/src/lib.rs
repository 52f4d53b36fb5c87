//! Exact shadows of finite atomic measures on ℝ, convex-order calculus, and
//! shadow martingales on finite time grids.
//!
//! The library is organized around a handful of exact primitives:
//!
//! * [`measure`] — atomic measures and the positive / convex /
//!   convex-positive / convex-stochastic orders, plus `W₁`;
//! * [`potential`] — piecewise-linear potential functions, lower convex
//!   envelopes, convex suprema and infima;
//! * [`shadow`] — simple and obstructed shadows, peacocks, shadow tables;
//! * [`parametrization`] — left-curtain / sunset / middle-curtain /
//!   interval parametrizations of an initial marginal;
//! * [`dilation`] — Kellerer dilation kernels and NSI checks;
//! * [`martingale`] — the shadow martingale as a mixture of per-slice
//!   dilation chains, sampling, and audits;
//! * [`mot`] — brute-force LP oracles: a dense simplex solver, the shadow
//!   LP, martingale optimal transport, and MSM cost checks.

pub mod dilation;
pub mod error;
pub mod lp;
pub mod martingale;
pub mod measure;
pub mod mot;
pub mod parametrization;
pub mod potential;
pub mod rng;
pub mod shadow;
pub mod tol;

pub use error::{Error, Result};
pub use measure::Measure;
pub use shadow::Peacock;
