//! Independent oracles shared by the integration tests and the acceptance
//! target.
#![allow(dead_code)]

pub mod gradcheck;
pub mod fsm;
pub mod adam_ref;
