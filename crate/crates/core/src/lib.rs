//! Numerical laboratory for Anosov endomorphisms of 𝕋² and 𝕋³.
//!
//! The crate is `no_std` with `alloc`. Enabling `parallel` pulls in `std`
//! and rayon for grid and Monte Carlo loops.
#![no_std]
// Whenever std ends up in the graph (the `parallel` feature, dev-dependencies of
// integration tests) its inherent float methods make the `Float` imports redundant.
#![allow(unused_imports)]
// `!(a < b)` is used on purpose so that NaN takes the failing branch; small
// fixed-size matrix kernels read better with index loops.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod conjugacy;
pub mod cover;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod lattice;
pub mod leaf;
pub mod linalg;
pub mod livsic;
pub mod map;
pub mod periodic;
pub mod spectrum;
pub mod srb;
pub mod stats;
pub mod t3;
pub mod teoplus;
pub mod trig;

pub use cover::CoverPoint;
pub use error::{Error, Result};
pub use lattice::IntegerMatrix;
pub use linalg::{Matrix, Vector};
pub use map::{MapKind, ToralMap};
pub use spectrum::{Classification, LinearModel};
pub use trig::{TrigField, TrigScalar, TrigTerm};
