pub mod clifford;
pub mod error;
pub mod kernels;
pub mod module_ops;
pub mod laplace;
pub mod random;

pub use clifford::{CliffordElement, ConeElement};
pub use error::{Error, Result};
