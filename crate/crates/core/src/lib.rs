// Tensor code indexes several arrays with the same component loop variable, and
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod dynamics;
pub mod energies;
pub mod error;
pub mod grid;
pub mod harness;
pub mod initdata;
pub mod jet;
pub mod run;
pub mod spectral;
pub mod state;
pub mod timestepper;
pub mod vectorfields;

pub use dynamics::{Dynamics, Forcing, Formulation, HPhiJet};
pub use error::{Error, Result};
pub use grid::{Grid, MatrixField, ScalarField, VectorField};
pub use jet::Jet;
pub use spectral::{Spectral, Spectrum};
pub use state::{ConstraintReport, FieldState, StateFD, StateHPhi};
