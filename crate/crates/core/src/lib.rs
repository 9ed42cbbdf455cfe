pub mod analytics;
pub mod constants;
pub mod engine;
pub mod error;
pub mod flywheel;
pub mod fock;
pub mod params;
pub mod propagator;
pub mod thermometry;
