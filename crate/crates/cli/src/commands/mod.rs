pub mod area;
pub mod candidates;
pub mod evaluate;
pub mod loss;
pub mod refine;
pub mod synth;
