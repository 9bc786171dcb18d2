//! Desk-scale solver for a thermistor in an RLC circuit.
//!
//! The model couples three equations on the cylinder Ω = B × (0, ℓ): the
//! integrated circuit ODE for the capacitor voltage V, the frozen-coefficient
//! potential equation for φ with σ(θ) conductivity, and the nonlinear heat
//! equation for the temperature θ driven by the Joule source σ(θ)|∇φ|². The
//! time-slab scheme evaluates the coefficients at the delayed temperature
//! θ(t - τ), solves each slab by a contraction fixed point for V and an
//! implicit Kirchhoff-transformed heat step, and pastes slabs continuously.
//!
//! Alongside the solver, the diagnostics module turns the computable a priori
//! estimates (minimum principle, voltage bound, per-node energy inequalities,
//! mass balance, weighted gradient norms) into assertable runtime checks, and
//! the scheme module provides an empirical τ-refinement Cauchy study.

// `!(x > 0.0)` deliberately treats NaN as a violation; partial_cmp would
// obscure that.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod circuit;
pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod grid;
pub mod laws;
mod linalg;
pub mod output;
pub mod parabolic;
pub mod scheme;
