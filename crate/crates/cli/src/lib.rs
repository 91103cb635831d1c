pub mod artifacts;
pub mod workflows;
