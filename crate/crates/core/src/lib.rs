//! Generative image compression toolkit.
//!
//! An image is transmitted as a structured caption (losslessly DEFLATE-coded)
//! and/or an 8x-downsampled, low-bitrate visual condition. Both travel in a
//! small [`container::Container`] together with the original dimensions, and
//! the receiver regenerates the picture with a generative backend.
//!
//! The crate is organised by role:
//!
//! * [`container`] - the `.gzc` wire format.
//! * [`textcodec`] - raw DEFLATE caption coding and word budgets.
//! * [`visualcodec`] - raster images, resampling, and the built-in block codec.
//! * [`prompting`] - captioning instructions and caption validation.
//! * [`backends`] - HTTP clients and deterministic mocks for external services.
//! * [`metrics`] - rate accounting, PSNR, SSIM, embedding cosine, aggregation.
//! * [`harness`] - dataset preparation, encode/decode, and the experiment matrix.

pub mod backends;
pub mod container;
pub mod harness;
pub mod metrics;
pub mod par;
pub mod prompting;
pub mod textcodec;
pub mod visualcodec;

pub use container::{Container, ContainerHeader, VisualPayload};
pub use textcodec::Caption;
pub use visualcodec::RasterImage;
