//! Distributed stochastic mirror descent (D-SMD) for two-network stochastic
//! zero-sum games.
//!
//! Two networks of agents play a zero-sum game over probability simplices.
//! Network 1 collectively minimizes the game cost `U`, network 2 maximizes it.
//! Every agent only sees its own noisy cost, mixes iterates with its graph
//! neighbours, reads a weighted estimate of the opposing network through a
//! bipartite channel, and takes a mirror-descent step.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`geometry`] | regularizers, Bregman divergences, prox-mappings, simplex projection |
//! | [`topology`] | graphs, Metropolis mixing matrices, bipartite weights, transition products, decay constants |
//! | [`games`] | bilinear and entropy-regularized stochastic matrix games with noisy subgradient oracles |
//! | [`engine`] | step-size schedules, the D-SMD round and full runs, trajectories |
//! | [`metrics`] | pseudo regret, gap function, NE reference solver, theoretical envelopes |
//! | [`harness`] | configuration, multi-path experiments, sweeps, bound verification, CSV/JSON reports |

pub mod engine;
pub mod error;
pub mod games;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};
