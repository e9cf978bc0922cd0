pub mod baseline;
pub mod eval;
pub mod explain;
pub mod rank;
pub mod run;
