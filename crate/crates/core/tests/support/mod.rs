//! Independent reference implementations shared by the oracle tests.
#![allow(dead_code)]

pub mod firth;
pub mod kalman;
