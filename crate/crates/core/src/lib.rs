pub mod bpnn;
pub mod content;
pub mod corpus;
pub mod dwell;
pub mod error;
pub mod eval;
pub mod features;
pub mod index;
pub mod rank;
pub mod semantics;
pub mod textprep;

pub use crate::error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/text.md")]
    mod text {}
    #[doc = include_str!("../../../book/src/content.md")]
    mod content {}
    #[doc = include_str!("../../../book/src/dwell.md")]
    mod dwell {}
    #[doc = include_str!("../../../book/src/semantics.md")]
    mod semantics {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/ranking.md")]
    mod ranking {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
