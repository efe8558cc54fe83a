//! Software rasterization: pinhole cameras, G-buffers and unlit textured
//! renders.
//!
//! Rasterization bins triangles into square tiles and fills tiles in
//! parallel. Within a tile triangles are visited in face order and the
//! depth test is strict, so equal-depth ties go to the lower face id and the
//! output does not depend on the thread count.

mod camera;
mod gbuffer;
mod textured;

pub use camera::{
    make_view_ring, paint3d_schedule, paint3d_views, Camera, CameraSpec, Intrinsics, Projection,
    DEFAULT_CAMERA_DISTANCE, PAINT3D_VIEW_NAMES,
};
pub use gbuffer::{rasterize, render_gbuffer, Fragment, GBuffer, NO_FACE};
pub use textured::{render_textured, render_textured_with, RenderStats, TextureFilter};
