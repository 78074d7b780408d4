pub mod bounds;
pub mod chain;
pub mod cli;
pub mod dominating;
pub mod error;
pub mod experiment;
pub mod functional;
pub mod laws;
pub mod rng;
pub mod verify;
pub mod wasserstein;
