//! Guide chapters compiled as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/operators.md")]
mod operators {}
#[doc = include_str!("../../../book/src/eigensolve.md")]
mod eigensolve {}
#[doc = include_str!("../../../book/src/sylvester.md")]
mod sylvester {}
#[doc = include_str!("../../../book/src/forward.md")]
mod forward {}
#[doc = include_str!("../../../book/src/backward.md")]
mod backward {}
#[doc = include_str!("../../../book/src/verification.md")]
mod verification {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
#[doc = include_str!("../../../README.md")]
mod readme {}
