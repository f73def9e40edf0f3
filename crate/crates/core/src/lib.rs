//! Few-boson dynamics in a one-dimensional double well with a ramped
//! Gaussian barrier.
//!
//! Two numerically independent routes are provided: an exact two-body
//! treatment on a Fourier grid basis ([`grid`], [`twobody`]) and a
//! Bose-Hubbard discretisation in occupation-number space ([`fock`]).
//! [`propagate`] evolves states under static or ramped Hamiltonians and
//! [`observables`] turns trajectories into detection probabilities,
//! currents, entropies and oscillation periods.

pub mod eigs;
pub mod error;
pub mod fock;
pub mod grid;
pub mod kahan;
pub mod linalg;
pub mod observables;
pub mod ops;
pub mod propagate;
pub mod twobody;

pub use error::{Error, Result};
