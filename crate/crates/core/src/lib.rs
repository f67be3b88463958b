//! Numerical laboratory for Ornstein-Uhlenbeck semigroups in high dimension.
//!
//! The crate is organised in three layers:
//!
//! 1. **Shared numerics** — symmetric tridiagonal eigensolvers
//!    ([`tridiag`]), Gauss-Hermite and adaptive quadrature ([`quadrature`]),
//!    third-order jets ([`jet`]), expression parsing ([`expr`]), vector
//!    fields ([`field`]), and finite-difference probes ([`fd`]).
//! 2. **Model layer** — diagonal Ornstein-Uhlenbeck semigroups evaluated by
//!    Gaussian quadrature ([`spectral`]), the killed one-dimensional
//!    coordinate and its spectral heat kernel ([`killed`]), Green functions
//!    and Harnack-ratio envelopes ([`counterexample`]), and reflection
//!    coupling with exit-time bounds ([`coupling`]).
//! 3. **Carré-du-champ and heat-flow checks** — dual-route Gamma operators
//!    ([`gamma`]), explicit grid and ensemble heat solvers ([`heat`]), and
//!    flow distances with differential Harnack sweeps ([`distance`]).
//!
//! Everything is deterministic: random draws are made with counter-mode
//! generators seeded per trial, and parallel reductions preserve order.

// Validation guards are written as `!(x > 0.0)` on purpose: the negated form
// rejects NaN along with the out-of-range values, which the suggested
// `partial_cmp` rewrite would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterexample;
pub mod coupling;
pub mod distance;
pub mod error;
pub mod expr;
pub mod fd;
pub mod field;
pub mod gamma;
pub mod heat;
pub mod jet;
pub mod killed;
pub mod quadrature;
pub mod spectral;
pub mod tridiag;

pub use counterexample::{KilledProductModel, OccupationConfig};
pub use coupling::{CouplingConfig, CouplingOutcome, CouplingReport};
pub use distance::{ArcDistance, ArcOutcome, HarnackCheck, WitnessBound};
pub use error::{Error, Result};
pub use expr::Expr;
pub use field::{CubicPoly, ExpField, ExprField, ScalarField, VectorFieldSet};
pub use gamma::{CdCheck, ChainRuleReport, DualValue, Psi};
pub use heat::{
    DtLogCheck, EnsembleConfig, EnsembleEstimate, GridConfig, GridSolution, LiYauCheck,
    LiYauSweep,
};
pub use jet::Jet;
pub use killed::KilledCoordinate;
pub use spectral::SpectralModel;
