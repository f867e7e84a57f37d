pub mod bwasym;
pub mod edgestats;
pub mod error;
pub mod fredholm;
pub mod kernel;
pub mod mcsim;
pub mod quad;
pub mod specfun;
pub mod testfn;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
