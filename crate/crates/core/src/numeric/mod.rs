//! Small numerical building blocks shared by the model layers.

pub mod cplx;
pub mod optimize;
pub mod quad;
pub mod rng;
pub mod stats;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
