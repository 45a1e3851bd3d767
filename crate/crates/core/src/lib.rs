pub mod error;
pub mod grid;
pub mod operators;
pub mod penalty;
pub mod tvprox;
pub mod solver;
pub mod phantoms;
pub mod cli;
