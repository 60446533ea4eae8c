pub mod cli;
pub mod directions;
pub mod forest;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod stats;
pub mod svg;
pub mod tessellation;
pub mod verify;
