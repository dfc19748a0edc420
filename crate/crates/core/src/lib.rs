pub mod error;
pub mod numeric;
pub mod par;
pub mod quad;
pub mod score_model;
pub mod planner;
pub mod sim;
pub mod metrics;
pub mod io;
