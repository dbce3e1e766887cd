//! Symbolic/numeric verification engine for the symmetry classification of
//! the one-dimensional kinetic equation
//!
//! ```text
//!     f_t + c f_x + (F f)_c = 0
//! ```
//!
//! for a force law `F(t, x, c)` (and, in the extended setting, `F(t, x, c, f)`).
//! The crate provides the symbolic expression kernel, prolonged vector
//! fields, classifying-equation residuals, the finite equivalence group,
//! the machine-checked classification catalog, a characteristics-based
//! transport simulator, and dimension estimation for symmetry algebras.

pub mod catalog;
pub mod classify;
pub mod equivtrans;
pub mod expr;
pub mod fields;
pub mod kinsim;

pub use expr::{Env, Expr, ExprError, Verdict};
pub use fields::{Algebra, FieldError, VectorField};
