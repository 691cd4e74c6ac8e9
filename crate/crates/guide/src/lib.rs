//! The chapters of the mdbook guide in `book/src`, compiled as module docs so
//! that `cargo test` runs every code block in the book.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/transition-matrices.md")]
pub mod transition_matrices {}

#[doc = include_str!("../../../book/src/markov-spectral.md")]
pub mod markov_spectral {}

#[doc = include_str!("../../../book/src/proximal-operators.md")]
pub mod proximal_operators {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
