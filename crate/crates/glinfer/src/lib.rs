//! Simulation harness and command-line front end for the selective
//! inference library: deterministic scenario generation, Monte Carlo
//! experiment running, noise estimation, the naive z comparator, and the
//! file formats spoken by the `glinfer` binary.

pub mod experiment;
pub mod io;
pub mod naive;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod sigma;
pub mod stats;
pub mod stepsign;
