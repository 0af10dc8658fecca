//! The guide chapters from `book/`, embedded so their code blocks run as
//! doc-tests. `cargo test --doc` keeps the book honest; the rendered
//! book (`mdbook build book`) and these modules share the same source
//! files.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}

#[doc = include_str!("../../../book/src/privacy.md")]
pub mod privacy {}

#[doc = include_str!("../../../book/src/centrality.md")]
pub mod centrality {}

#[doc = include_str!("../../../book/src/gnn.md")]
pub mod gnn {}

#[doc = include_str!("../../../book/src/sparsification.md")]
pub mod sparsification {}

#[doc = include_str!("../../../book/src/protocol.md")]
pub mod protocol {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
