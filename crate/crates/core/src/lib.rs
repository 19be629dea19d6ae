pub mod baselines;
pub mod bus;
pub mod consensus;
pub mod datagen;
pub mod detect;
pub mod edge;
pub mod error;
pub mod evolve;
pub mod federate;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod rul;
