pub mod cli;
pub mod control;
pub mod error;
pub mod fp;
pub mod group;
pub mod iwasawa;
pub mod linalg;
pub mod operators;
pub mod padic;
pub mod smith;
pub mod val;

pub use error::{Error, Result};
