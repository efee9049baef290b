//! Renewable energy community deployment profiles and their effect on
//! zonal day-ahead market equilibria.

pub mod analysis;
pub mod atlas;
pub mod calendar;
pub mod domain;
pub mod fixture;
pub mod market;
pub mod pipeline;
pub mod profiles;
pub mod projection;

pub use domain::{Category, Zone};
