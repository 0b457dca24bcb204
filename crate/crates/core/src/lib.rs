pub mod cli;
pub mod cycles;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod io;
pub mod limit_law;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod samplers;
pub mod spectral;
