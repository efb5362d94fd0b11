//! Tensor-network toolkit for one-dimensional quantum lattice models.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense complex tensors with pairwise contraction, reduced QR
//!   and truncated SVD (the workhorse of every algorithm here).
//! - [`mps`]: finite and infinite matrix product states in Vidal canonical
//!   form, with entanglement diagnostics, expectation values and two-site
//!   gate application.
//! - [`mpo`]: declarative Hamiltonians compiled into matrix product
//!   operators via the finite-automaton construction.
//! - [`dmrg`] / [`idmrg`]: ground-state search for finite chains and for the
//!   thermodynamic limit.
//! - [`tebd`]: Trotterized imaginary- and real-time evolution.
//! - [`observables`]: correlators, order parameters, Luttinger/CFT fits and
//!   entanglement-spectrum diagnostics built on top of the solvers.

pub mod dmrg;
pub mod idmrg;
pub mod model;
pub mod mpo;
pub mod mps;
pub mod observables;
pub mod tebd;
pub mod tensor;

pub use model::HamiltonianSpec;
pub use mps::{ImpsState, MpsState};
pub use mpo::Mpo;
pub use tensor::{contract, qr_reduced, svd_truncated, DenseTensor, SvdResult, TruncationPolicy, C64};
