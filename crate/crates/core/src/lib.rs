//! A from-scratch scalar reverse-mode autodiff engine and a small training
//! toolkit built on it: multilayer perceptrons assembled from individual
//! value nodes, max-margin training on a two-spiral dataset, text
//! checkpoints that resume bit-exactly, and figure emission as plain SVG.
//!
//! The computation graph is an arena of scalar nodes ([`engine::GraphStore`]).
//! Graphs are wired once and re-evaluated in place as inputs change, so a
//! whole training run allocates a fixed, small set of nodes.
//!
//! # Quick start
//!
//! ```
//! use spiralgrad::engine::GraphStore;
//!
//! let mut g = GraphStore::new();
//! let x = g.create_value(2.5, true);
//! let y = g.create_value(0.3, true);
//! let z = g.multiply(x, y).unwrap();
//!
//! g.backward(z).unwrap();
//! assert_eq!(g.data(z).unwrap(), 0.75);
//! assert_eq!(g.grad(x).unwrap(), 0.3);
//! assert_eq!(g.grad(y).unwrap(), 2.5);
//! ```

pub mod cli;
pub mod config;
pub mod data;
pub mod engine;
pub mod nn;
pub mod plot;
pub mod rng;
pub mod train;

pub use engine::{EngineError, GraphStore, NodeId, Op};
pub use nn::{new_mlp, ForwardBinding, MlpSpec, NnError};
pub use train::{Experiment, ExperimentConfig};
