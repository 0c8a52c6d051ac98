//! Exact and numerical study of domino tilings of Temperleyan polyominoes,
//! their spanning-tree duals, and the loop-erased random walk.

pub mod conformal;
pub mod coupling;
pub mod energy;
pub mod hp;
pub mod kasteleyn;
pub mod lerw;
pub mod linalg;
pub mod region;
pub mod slitgreens;
pub mod treelap;
