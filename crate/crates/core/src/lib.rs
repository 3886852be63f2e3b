pub mod algebra;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod gns;
pub mod numerics;
pub mod qds;

pub use error::{Error, Result};
