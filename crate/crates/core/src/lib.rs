pub mod dense;
pub mod factor;
pub mod lanczos;
pub mod lobpcg;
pub mod mtx;
pub mod precond;
pub mod rayleigh_ritz;
pub mod sparse;
pub mod testgen;
pub mod verify;
