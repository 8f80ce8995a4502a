pub mod banded;
pub mod tridiag;
