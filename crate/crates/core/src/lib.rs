//! Simulation and analysis of the sequencing-depth trade-off in single-cell
//! RNA-seq.
//!
//! Given a budget of `m` reads, profiling more cells explores the population
//! better but spreads the reads thinner. This crate simulates the two-stage
//! read sampling process, measures the exact Wasserstein distance between the
//! resulting noisy empirical distribution and the ground truth, and evaluates
//! the closed-form bounds and the optimal-allocation power law
//! `n ~ (C m / E|P|_0)^(1 - 2/(k+2))`.
//!
//! Module map:
//!
//! - [`simplex`]: expression profiles, discrete distributions, population statistics.
//! - [`sequencing`]: multinomial read sampling and cell-weight scenarios.
//! - [`wasserstein`]: exact optimal transport (network simplex) and a brute-force oracle.
//! - [`dimension`]: PCA intrinsic dimension and NMF-based low-dimensional populations.
//! - [`allocation`]: closed-form bounds and the optimal number of cells.
//! - [`ingest`]: counts matrices, preprocessing and population construction.
//! - [`experiment`]: `(m, n)` sweeps, `n*` extraction, slope fits, CSV and SVG output.
//! - [`manifest`]: run manifests with configuration snapshots and input digests.

pub mod allocation;
pub mod dimension;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod manifest;
pub mod rng;
pub mod sequencing;
pub mod simplex;
pub mod wasserstein;

pub use error::{Error, Result};
pub use simplex::{DiscreteDistribution, ExpressionProfile, PopulationStats};
