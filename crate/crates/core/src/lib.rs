pub mod batch;
pub mod bench;
pub mod covariance;
pub mod data;
pub mod engine;
pub mod error;
pub mod io;
pub mod mvn;
pub mod permutation;
pub mod regress;
pub mod simulate;
