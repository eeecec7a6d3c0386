pub mod error;
pub mod harness;
pub mod interpolant;
pub mod kernel;
pub mod manifolds;
pub mod operator;
pub mod pointcloud;
pub mod solver;
