//! Entropy-gated hybrid reasoning for object-goal navigation.

pub mod cli;
pub mod eval;
pub mod gate;
pub mod navsim;
pub mod policy;
pub mod seeds;
pub mod semantic_map;
pub mod trainer;
