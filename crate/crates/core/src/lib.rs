//! Scale-space invariant attention deraining network.
//!
//! A small define-by-run autodiff engine ([`tensor`]) carries a multi-stage
//! deraining network ([`net`]) whose per-scale features are gated by
//! attention masks computed from difference-of-Gaussian pyramids built over
//! the network's own feature maps ([`scale_space`], [`sian`]).

pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod net;
pub mod scale_space;
pub mod sian;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Gradients, Graph, PoolMode, Shape, Tensor, Var};
