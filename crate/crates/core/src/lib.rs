pub mod decision;
pub mod designer;
pub mod error;
pub mod gridworld;
pub mod harness;
pub mod learner;
pub mod regret;
pub mod ued;

pub use error::{Error, Result};
