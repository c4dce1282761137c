//! Pseudospectral toolkit for the dissipative 2D α-SQG equation
//! `∂w/∂t + v·∇w + Λ^α w = 0`, `v = (-R₂w, R₁w)`, on a large periodized box.
//!
//! The crate has three layers:
//!
//! * **Spectral core** ([`spectral`]) — exact Fourier multipliers for `Λ^s`,
//!   the Riesz velocity, Sobolev norms and 2/3-rule dealiasing, plus the
//!   integrating-factor solver ([`solver`]).
//! * **Constructive toolkit** — quadrature constants ([`constants`]),
//!   structured radial/oscillatory fields ([`profile`], [`ansatz`]), local
//!   pointwise surrogates of the nonlocal operators ([`local_ops`]) and the
//!   explicit pseudo-solution with its forcing decomposition ([`pseudo`]).
//! * **Experiments** ([`experiments`]) — reproducible drivers measuring the
//!   approximation rates, pseudo-solution error, Sobolev norm inflation,
//!   radial decay and translated compositions, with CSV/SVG reports.
//!
//! Start with the runnable examples in `examples/` — one per capability —
//! or the thin `alpha-sqg` CLI binary that wraps the experiment drivers.

pub mod ansatz;
pub mod constants;
pub mod error;
pub mod experiments;
pub mod jet;
pub mod local_ops;
pub mod profile;
pub mod pseudo;
pub mod quad;
pub mod solver;
pub mod spectral;

pub use error::{Result, SqgError};
