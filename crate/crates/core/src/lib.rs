//! Exact network reconstruction from noisy consensus time series and a
//! single Laplacian eigenvalue.
//!
//! Typical use: [`graph`] builds a topology, [`consensus`] simulates the
//! noise-driven protocol, [`probe`] estimates λ_N in a decentralised way, and
//! [`reconstruct`] turns the record plus λ_N into an adjacency matrix.
//! [`experiment`] runs seeded campaigns of the whole chain.

pub mod consensus;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod linalg;
pub mod noise;
pub mod par;
pub mod plot;
pub mod probe;
pub mod reconstruct;
pub mod series;

pub use error::{Error, ErrorKind, Result};
pub use graph::{count_errors, laplacian, spectrum, Graph, LaplacianSpectrum};
pub use par::Exec;
pub use reconstruct::{ReconstructionResult, TraceRecord};
pub use series::TimeSeriesMatrix;
