pub mod conic;
pub mod milp;
pub mod grid;
pub mod dso;
pub mod tso;
pub mod baseline;
pub mod coordinator;
pub mod report;
pub mod cli;
