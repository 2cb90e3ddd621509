pub mod altpath;
pub mod cli;
pub mod error;
pub mod gauge_opt;
pub mod grid_spectral;
pub mod lattice;
pub mod model;
pub mod numfmt;
pub mod smalllin;
pub mod transport;
pub mod wannier;

pub use error::{Error, Result};
