//! Inverse-model feedforward for Hammerstein motion systems.
//!
//! A norm-optimal ILC run on a training reference produces a feedforward
//! signal that already compensates the input saturation. Fitting a Wiener
//! controller `h(F(theta) r, phi)` to that signal, weighted by the process
//! sensitivity, gives a feedforward that generalizes to new references.
//! Basis-function ILC and classical open-loop Hammerstein identification are
//! included as baselines, along with the simulated servo used to compare them.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod ident;
pub mod ilc;
pub mod lifted_lti;
pub mod plant_sim;
pub mod pso;
pub mod trajectory;

pub use error::{Error, Result};
