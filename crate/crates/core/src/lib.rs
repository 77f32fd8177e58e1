pub mod problem;
pub mod spectral;
pub mod vectorfield;
pub mod nullforms;
pub mod diagnostics;
pub mod smoothing;
pub mod solver;
