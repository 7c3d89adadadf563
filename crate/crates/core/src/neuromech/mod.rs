//! Lumped musculoskeletal plants.
//!
//! Each stimulation channel drives one muscle group with first-order
//! activation dynamics and a fatigue state `φ`, the fraction of maximum force
//! the group can still produce. Groups apply torque to one of three
//! mechanical systems: an elbow moving against gravity, an elbow on a
//! horizontal plane with an antagonist pair, or a frictionless cycling crank.

mod muscle;
mod plant;

pub use muscle::{muscle_step, MuscleParams, MuscleState};
pub use plant::{
    arm_energy, crank_transfer, plant_reset, plant_step, ArmParams, CrankParams, PlantSpec, PlantState, ScenarioKind,
};
