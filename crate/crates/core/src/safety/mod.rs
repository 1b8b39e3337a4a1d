//! Contact forces, force sensing, clutches and the safety supervisor.

mod clutch;
mod contact;
mod sensor;
mod supervisor;

pub use clutch::{joint_torques, update_clutch, ClutchState};
pub use contact::{contact_force, proximity, tangent_basis, ContactForce, ContactParams, Proximity};
pub use sensor::{sense, sensor_rng, SensorModel, SensorReading};
pub use supervisor::{
    supervisor_step, OperatorInput, SafetyConfig, SafetyLimits, SafetyState, SafetyStatus,
};
