pub mod bdi;
pub mod events;
pub mod exec;
pub mod grid;
pub mod harness;
pub mod model;
pub mod plan;
pub mod planner;
pub mod rational;
pub mod rt;
