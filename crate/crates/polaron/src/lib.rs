//! Strong-coupling polaron energetics in external electromagnetic fields.
//!
//! The crate computes ground-state energies of the magnetic Pekar functional
//!
//! ```text
//!     𝓔_α(A, V, φ) = ∫ |(−i∇+A)φ|² + V|φ|²  −  α ∬ |φ(x)|²|φ(y)|²/|x−y|
//! ```
//!
//! on the unit sphere, the two-electron Pekar–Tomasevich analogue with
//! Coulomb repulsion, the parameter budget of the strong-coupling lower
//! bound, and small truncated boson-mode models that exercise the coherent
//! state machinery behind it.
//!
//! Units are ħ = 1, m = 1/2, Coulomb coefficient 1; the kinetic energy of a
//! normalized state is `‖∇φ‖²`.
//!
//! Heavy node loops and transforms run on rayon when the default `parallel`
//! feature is enabled; building with `--no-default-features` gives a fully
//! sequential fallback. Reductions use fixed chunking, so both builds (and
//! any worker count) produce bitwise identical results.

pub mod bipolaron;
pub mod budget;
pub mod coulomb;
pub mod energy;
mod error;
pub mod fft;
pub mod field;
pub mod fock;
pub mod grid;
mod parallel;
pub mod pekar;
pub mod potential;

pub use error::{PolaronError, Result};
pub use field::ComplexField3D;
pub use grid::{Boundary, Grid3D};
pub use potential::{PotentialPair, ScalarPotentialSpec, VectorPotentialSpec};
