//! Surface-aligned Gaussian splatting on the CPU.
//!
//! The crate covers the whole desk-scale pipeline: point-cloud preprocessing
//! (normal estimation and smooth/individual partitioning), initialization of
//! thin surface-aligned splats, a differentiable tile-based rasterizer with
//! analytic gradients, tangent-space densification, the combined
//! photometric + co-planar smoothness objective, an Adam trainer, image
//! quality metrics, synthetic scene generation, and PLY/dataset persistence.
//!
//! All numerical code is generic over the scalar type through [`scalar::Real`]
//! (`f32` or `f64`); the concrete aliases at the crate root pick `f64`, which
//! is what the trainer and the verification suite use.

pub mod densify;
pub mod error;
pub mod geometry;
pub mod image;
pub mod init;
pub mod io;
pub mod loss;
pub mod math;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod raster;
pub mod scalar;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default scalar for the full pipeline.
pub type Scalar = f64;

pub type Splat = model::GaussianSplat<Scalar>;
pub type Map = model::GaussianMap<Scalar>;
pub type Camera = model::CameraView<Scalar>;
pub type Cloud = geometry::ClassifiedCloud<Scalar>;
pub type Image = image::ImageRgb<Scalar>;
pub type Config = train::TrainConfig<Scalar>;
pub type Scene = synth::SyntheticScene<Scalar>;

