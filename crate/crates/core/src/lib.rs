pub mod dim;
pub mod dynamics;
pub mod env;
pub mod eval;
pub mod morphology;
pub mod nn;
pub mod ppo;
pub mod seeding;
