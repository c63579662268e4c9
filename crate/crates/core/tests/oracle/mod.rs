//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod dense;
pub mod exact_tail;
pub mod geat_hp;
