pub mod autodiff;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod mixer;
pub mod model;
pub mod quantum;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
