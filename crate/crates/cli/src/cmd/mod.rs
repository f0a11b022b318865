pub mod diagnose;
pub mod eval;
pub mod features;
pub mod generate;
pub mod topics;
pub mod train;
