//! Numerical workhorses shared by the ratio-cut, certificate and flow code.

pub mod ipm;
pub mod maxflow;
pub mod simplex;
pub mod spectral;
pub mod subsets;
