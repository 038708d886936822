//! Data-driven plasticity: reference constitutive models, principal-space
//! sequence generation, POD compression, small feedforward networks trained
//! with Levenberg-Marquardt, and a compact finite-element driver that can run
//! either the reference model or a trained surrogate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod datagen;
pub mod fem;
pub mod material;
pub mod scaling;
pub mod tensor;
pub mod lm;
pub mod pod;
pub mod fnn;
pub mod surrogate;
pub mod pipeline;
