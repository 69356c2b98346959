//! Extended phase space `(p, q, e, t)`, the group `HSp(2n)` that preserves
//! its symplectic and degenerate forms, and numerical checks that Hamiltonian
//! flows stay inside it.
//!
//! The guide in `book/` walks through the pieces; its code runs as doctests.

// `!(x <= tol)` is used on purpose: a NaN residual must count as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod canonical;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod group;
pub mod integrate;
pub mod report;
pub mod suites;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/forms.md")]
    pub mod forms {}
    #[doc = include_str!("../../../book/src/group.md")]
    pub mod group {}
    #[doc = include_str!("../../../book/src/algebra.md")]
    pub mod algebra {}
    #[doc = include_str!("../../../book/src/flows.md")]
    pub mod flows {}
    #[doc = include_str!("../../../book/src/verification.md")]
    pub mod verification {}
    #[doc = include_str!("../../../book/src/canonical.md")]
    pub mod canonical {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
