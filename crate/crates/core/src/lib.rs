#![no_std]
extern crate alloc;

pub mod action;
pub mod dataset;
pub mod episode;
pub mod eval;
pub mod nn;
pub mod oracle;
pub mod policies;
pub mod rng;
pub mod sensor_policy;
pub mod sensors;
pub mod trainer;
pub mod world;

pub use action::Action;
