//! The nlilab guide. Each chapter of the book is included here so that its
//! code samples run as doctests and cannot drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/waveforms.md")]
pub mod waveforms {}

#[doc = include_str!("../../../book/src/propagation.md")]
pub mod propagation {}

#[doc = include_str!("../../../book/src/links.md")]
pub mod links {}

#[doc = include_str!("../../../book/src/receiver.md")]
pub mod receiver {}

#[doc = include_str!("../../../book/src/decomposition.md")]
pub mod decomposition {}

#[doc = include_str!("../../../book/src/analytic.md")]
pub mod analytic {}

#[doc = include_str!("../../../book/src/batch-runs.md")]
pub mod batch_runs {}
