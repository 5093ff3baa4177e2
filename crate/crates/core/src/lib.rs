//! Open-world query answering for Boolean conjunctive queries under guarded
//! TGDs that obey a side signature.
//!
//! The decision pipeline normalizes the rules, computes a childish saturation,
//! fact-saturates the instance, linearizes, and decides the resulting linear
//! problem. Chase variants act as oracles and a proof checker certifies
//! positive answers.

pub mod bench;
pub mod chase;
pub mod dsl;
pub mod factclosure;
pub mod fuzz;
pub mod linear;
pub mod linearize;
pub mod logic;
pub mod pipeline;
pub mod preprocess;
pub mod saturate;
