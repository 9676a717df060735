pub mod appearance;
pub mod assoc;
pub mod geometry;
pub mod gesture;
pub mod kalman;
pub mod metrics;
pub mod simkit;
pub mod tracker;
