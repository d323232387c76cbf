//! Search spaces, architecture encodings and compilation of an architecture
//! into an initialized ReLU network.

mod arch;
mod net;
mod space;

pub use arch::{
    cell_depth, enumerate_cells, mutate, random_arch, Architecture, ParseError, GRAPH_EXTRA_EDGE_P,
    MAX_REJECTIONS,
};
pub use net::{
    compile, ActivationBits, BiasInit, CompiledNet, NetBuilder, ParamGroup, Shape, Trace,
};
pub use space::{
    complete_dag_edges, MacroConfig, Op, SearchSpace, SpaceKind, GRAPH_MAX_EDGES, GRAPH_VERTICES,
};

use thiserror::Error;

use crate::numkit::NumError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("unknown operator `{0}`")]
    UnknownOp(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no valid architecture after {0} rejected samples")]
    SamplingExhausted(usize),
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Num(#[from] NumError),
}
