//! The mdbook chapters under `book/src`, compiled so that `cargo test`
//! runs every code listing as a doctest. One module per chapter keeps
//! failures traceable to their file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/games.md")]
pub mod games {}
#[doc = include_str!("../../../book/src/solving.md")]
pub mod solving {}
#[doc = include_str!("../../../book/src/gradients.md")]
pub mod gradients {}
#[doc = include_str!("../../../book/src/learning.md")]
pub mod learning {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
