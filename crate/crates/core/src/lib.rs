pub mod bench;
pub mod datareal;
pub mod error;
pub mod io;
pub mod kyp;
pub mod linalg;
pub mod minreal;
pub mod nearestph;
pub mod pipeline;
pub mod prbt;
pub mod regularize;
pub mod riccati;
pub mod sysrep;
