pub mod averaging;
pub mod cli;
pub mod dyadic;
pub mod error;
pub mod hilbert;
pub mod lowerbound;
pub mod normlab;
pub mod operators;
pub mod stochastic;
pub mod walk;
