#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod data;
pub mod indicators;
pub mod landscape;
pub mod netgen;
pub mod numkit;
pub mod search;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/architectures.md")]
    struct Architectures;
    #[doc = include_str!("../../../book/src/indicators.md")]
    struct Indicators;
    #[doc = include_str!("../../../book/src/search.md")]
    struct Search;
    #[doc = include_str!("../../../book/src/landscape.md")]
    struct Landscape;
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    struct Benchmarks;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
    #[doc = include_str!("../../../README.md")]
    struct Readme;
}
