//! Small balanced k-way node separators via a multilevel algorithm with
//! flow-based local search, plus an asynchronous island-model evolutionary
//! optimizer and convergence-curve tooling.

pub mod baseline;
pub mod coarsening;
pub mod convergence;
pub mod dinic;
pub mod evolution;
pub mod flow_refine;
pub mod graph;
pub mod island;
pub mod kway;
pub mod metis;
pub mod multilevel;
pub mod solution;
