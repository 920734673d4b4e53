//! Synthesis of linear hybrid automata with constant flows from sampled
//! trajectories.
//!
//! Given one or more time series, the library produces a hybrid automaton
//! whose locations have constant derivatives, together with the smallest
//! tube radius `epsilon` such that every input series is tracked by some
//! execution of the automaton within `epsilon` in the sup norm.
//!
//! The pipeline has two phases:
//!
//! 1. *Segmentation* ([`segmentation`]): each series is optionally
//!    simplified (Ramer-Douglas-Peucker), the slopes of the simplified
//!    pieces are clustered with k-means, and every original piece is mapped
//!    to a location label.
//! 2. *Parameter synthesis* ([`flowpoly`], [`automaton`]): the label
//!    assignment turns each series into a family of linear constraints over
//!    the unknown slopes, initial states and `epsilon`; a linear program
//!    minimizes `epsilon`, and the optimal point is folded into an automaton
//!    with interval invariants and guards ([`automaton::build_lha`]).
//!
//! [`automaton::synthesize`] runs the whole pipeline and self-checks the
//! result. [`datagen`] generates benchmark trajectories from known hybrid
//! models so the synthesizer can be exercised end to end.

pub mod automaton;
pub mod datagen;
pub mod flowpoly;
mod lp;
pub mod model_io;
pub mod segmentation;
pub mod timeseries;


pub use automaton::{synthesize, Lha, SynthesisOptions, SynthesisResult};
pub use timeseries::TimeSeries;
