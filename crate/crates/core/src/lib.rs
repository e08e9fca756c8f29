pub mod backend_native;
pub mod bench;
pub mod catalog;
pub mod error;
pub mod frontend;
pub mod kernel_ir;
pub mod optimizer;
pub mod runtime;
pub mod session;
pub mod storage;
pub mod tpch;
pub mod udf;
pub mod value;
pub mod volcano;

pub use error::{Error, Result};
pub use frontend::DataFrame;
pub use runtime::{Backend, RunConfig};
pub use session::{ExecStats, Prepared, Session};

/// The guide's chapters, so their snippets run as doc-tests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/getting-started.md")]
    pub mod getting_started {}
    #[doc = include_str!("../../../book/src/queries.md")]
    pub mod queries {}
    #[doc = include_str!("../../../book/src/udfs.md")]
    pub mod udfs {}
    #[doc = include_str!("../../../book/src/pipelines.md")]
    pub mod pipelines {}
    #[doc = include_str!("../../../book/src/native.md")]
    pub mod native {}
    #[doc = include_str!("../../../book/src/parallel.md")]
    pub mod parallel {}
    #[doc = include_str!("../../../book/src/storage.md")]
    pub mod storage {}
    #[doc = include_str!("../../../book/src/testing.md")]
    pub mod testing {}
    #[doc = include_str!("../../../book/src/bench.md")]
    pub mod bench {}
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
}
