#![allow(dead_code)]

pub mod gradients;
pub mod idx;
pub mod invariants;
