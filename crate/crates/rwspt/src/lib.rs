//! Modular rewritable stochastic Petri nets.
//!
//! Nets carry hierarchical place labels (`p(<"w";0><"R";1><"L";0>)`). Label
//! structure exposes symmetry: states are normalized by reassigning sibling
//! indices, which yields a quotient state space whose rates form a strongly
//! lumped CTMC.

pub mod algebra;
pub mod ctmc;
pub mod models;
pub mod multiset;
pub mod net;
pub mod netio;
pub mod rewriting;
pub mod statespace;
pub mod symmetry;

pub use multiset::Bag;
pub use net::{Net, Pair, Place, System, Transition};
