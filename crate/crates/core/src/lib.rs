pub mod error;
pub mod extreal;
pub mod localmodel;
pub mod tree;
pub mod variables;
pub mod martingale;
pub mod globalexp;
pub mod approx;
pub mod oracle;
pub mod random;
pub mod cli;

pub use error::{Error, Result};
pub use extreal::ExtReal;
