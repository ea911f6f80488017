//! Floating-base dynamics of a three-section pneumatic soft snake swimming on
//! a water surface.

pub mod cli;
pub mod config;
pub mod contact;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod gait;
pub mod kinematics;
pub mod ode;
pub mod params;
pub mod plot;
pub mod sim;
pub mod validate;
