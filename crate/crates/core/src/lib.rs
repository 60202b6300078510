//! Spatially parallel window decoding for lattice-surgery merges.
//!
//! A merged patch is cut into windows with commit regions. Windows in the
//! same layer decode independently; later layers receive the artificial
//! defects left on their seams by earlier ones.
//!
//! ```
//! use spwin::{geometry, graph, noise, engine};
//!
//! let s = geometry::rect_scenario(5, 2, 5).unwrap();
//! let g = graph::build_graph(&s.patch, &s.cuts, geometry::GraphType::X, 5, 0.01).unwrap();
//! let dec = engine::WindowedDecoder::new(&g, &s.config).unwrap();
//! let sample = noise::sample(&g, 0.01, 7, 0);
//! let out = dec.run(&sample, &engine::EngineOptions::default()).unwrap();
//! assert_eq!(out.layers_used, 2);
//! ```

pub mod analysis;
pub mod engine;
pub mod experiment;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod matcher;
pub mod noise;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("patch cannot be tiled: {0}")]
    NonTileable(String),
    #[error("grid needs staggering: {0}")]
    NonStaggeredGrid(String),
    #[error("inconsistent boundary labels: {0}")]
    InconsistentBoundaryLabels(String),
    #[error("too many defects for exhaustive search: {0} > {1}")]
    TooManyDefects(usize, usize),
    #[error("correction leaves a nonzero syndrome on {0} nodes")]
    ResidualSyndrome(usize),
    #[error("{0} shots are too few for a histogram fit (need {1})")]
    InsufficientShots(u64, u64),
    #[error("no confusion string exists for d={d}, w={w}")]
    Infeasible { d: u32, w: u32 },
    #[error("window {0} is not in the configuration")]
    UnknownWindow(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
