//! Local deletion algorithms on random regular graphs.
//!
//! The crate covers the coloured multigraph and pairing-model backends, the
//! step loop of a local deletion algorithm with clash handling, concrete
//! algorithms with output repair and validation, and the differential
//! equation machinery that predicts their trajectories.

pub mod graph_core;
pub mod pairing;
pub mod lda;
pub mod algorithms;
pub mod ode;
pub mod harness;
