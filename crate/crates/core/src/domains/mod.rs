//! Built-in benchmark problems.

pub mod kitchen;
pub mod pickup;

use crate::belief::Belief;
use crate::model::Pomdp;
use crate::objective::SafeReachObjective;

pub use kitchen::{build_kitchen, Cell, KitchenConfig};
pub use pickup::build_pickup_example;

/// A model together with its initial belief and objective.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub model: Pomdp,
    pub initial: Belief,
    pub objective: SafeReachObjective,
}
