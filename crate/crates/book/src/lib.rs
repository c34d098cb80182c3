//! The guide in `book/src`, compiled so that every Rust snippet runs as a
//! doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/names.md")]
pub mod names {}
#[doc = include_str!("../../../book/src/ingestion.md")]
pub mod ingestion {}
#[doc = include_str!("../../../book/src/squats.md")]
pub mod squats {}
#[doc = include_str!("../../../book/src/search.md")]
pub mod search {}
#[doc = include_str!("../../../book/src/review.md")]
pub mod review {}
#[doc = include_str!("../../../book/src/reports.md")]
pub mod reports {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
