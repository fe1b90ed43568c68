//! Persistence: splat PLY models, dataset directories, run configuration,
//! and analytic surface files.

pub mod config;
pub mod dataset;
pub mod ply;
pub mod scene_file;
