pub mod channel_grid;
pub mod compensate;
pub mod config;
pub mod error;
pub mod io;
pub mod link;
pub mod measure;
pub mod optim;
pub mod qstate;
pub mod random;
pub mod rng;
pub mod source;
pub mod sweep;
pub mod tomo;

pub use error::{Error, Result};
