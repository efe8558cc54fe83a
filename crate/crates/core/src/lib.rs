//! Multi-view texture backprojection for UV-mapped triangle meshes.
//!
//! The crate turns a set of per-view RGB images of an untextured mesh into an
//! albedo texture atlas. Besides the classic heuristics (most front-facing
//! view, plain and weighted averaging) it implements a learned backprojection
//! module: each texel gathers K×K pixel neighborhoods from every view in which
//! its surface point is visible, encodes their geometry (relative position,
//! relative normal, n·v and geodesic distance) and color, and fuses them with
//! three cross-attention blocks.
//!
//! Pipeline overview:
//!
//! - [`mesh`]: OBJ loading, normals, normalization, inverse-UV texel maps
//! - [`raster`]: cameras, G-buffer and textured software rasterization
//! - [`geodesics`]: window-limited geodesic distance fields
//! - [`gather`]: per-texel pixel neighborhoods with visibility tests
//! - [`neural`]: the attention network with hand-written reverse-mode gradients
//! - [`backproject`]: heuristic and neural texture synthesis, pull-push inpainting
//! - [`trainer`]: synthetic scenes, view augmentation, Adam training loop
//! - [`evalkit`]: L1/PSNR/seam-energy/coverage metrics and CSV reports

pub mod backproject;
pub mod color;
mod error;
pub mod evalkit;
pub mod formats;
pub mod gather;
pub mod geodesics;
pub mod geom;
pub mod mesh;
pub mod neural;
pub mod raster;
pub mod texture;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
pub use geom::{Vec2, Vec3};
pub use texture::Texture;
