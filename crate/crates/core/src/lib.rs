//! Best approximation of vector-valued functions by simple functions with at
//! most `k` values, measured in `L^p` Bochner norms.
//!
//! The data is a discrete weighted measure space ([`MeasureSpace`]) whose
//! atoms carry values in `R^d`, equipped with a smooth norm ([`Norm`]).
//! [`quantizer::lloyd`] alternates Voronoi projection and p-th mean updates
//! and reports a [`quantizer::Certificate`] of the minimizer structure;
//! [`oracle::brute_force`] gives exact optima on tiny instances.

// `!(x > y)` is used on purpose so that NaN falls into the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exponent;
pub mod norms;
pub mod oracle;
pub mod pmean;
pub mod quantizer;
pub mod simplefn;
pub mod space;
pub mod voronoi;

pub use error::{Error, Result};
pub use norms::{Norm, NormKind};
pub use pmean::PMeanResult;
pub use quantizer::{Certificate, QuantizeReport, QuantizerConfig};
pub use simplefn::SimpleFunction;
pub use space::{Atom, MeasureSpace};
pub use voronoi::VoronoiDiagram;
