pub mod cli;
pub mod cy_pipeline;
pub mod gma_solver;
pub mod lie_frame;
pub mod torus_field;
pub mod verifier;
