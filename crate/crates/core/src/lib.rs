//! Loop-closure back-end for panoramic annular visual odometry.

pub mod geom;
pub mod camera;
pub mod features;
pub mod bow;
pub mod ids;
pub mod backend;
pub mod loop_closure;
pub mod eval;
pub mod sim;
pub mod pipeline;
