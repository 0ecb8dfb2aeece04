//! Privacy-preference enforcement for stream processing over smart-object
//! networks.

pub mod compliance;
pub mod engine;
pub mod hierarchy;
pub mod peas;
pub mod preferences;
pub mod scenario;
pub mod simnet;
