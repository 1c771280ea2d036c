//! Hamiltonian eigenvalues from the self-consistent kernel-function equation.
//!
//! A Hamiltonian is split as `H = diag(E) + g` ([`model`]). For each level `gamma`
//! the kernel `R_gamma(z)` ([`kernel`]) resums every path through the other
//! states; the level shift solves `R_gamma(-dE) = dE` ([`eigensolve`]) and also
//! equals a series in powers of `R_gamma` and its derivatives at `z = 0`.
//! [`verify`] checks the identities that tie those two forms together.

pub mod cli;
pub mod eigensolve;
pub mod error;
pub mod jet;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod reference;
pub mod verify;

pub use eigensolve::{diagonalize_oracle, eval_series, solve_root, EigenResult, Method, SeriesReport, SolveOptions};
pub use error::{Error, Result};
pub use jet::Jet;
pub use kernel::{cut_series, eval_r, jet_r, Convention, CutSeriesReport, EvalMode, KernelContext};
pub use model::{ModelMeta, SpectrumSplit, SplitOptions};
