//! Compiles the code blocks of the guide in `book/` as doctests, one module
//! per chapter, so the book cannot drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/gradients.md")]
pub mod gradients {}
#[doc = include_str!("../../../book/src/circuits.md")]
pub mod circuits {}
#[doc = include_str!("../../../book/src/mixer.md")]
pub mod mixer {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
