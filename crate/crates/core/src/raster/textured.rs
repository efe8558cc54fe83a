use super::{rasterize, Camera, GBuffer};
use crate::color::{ColorImage, Rgb, MAGENTA};
use crate::geom::lerp2;
use crate::mesh::Mesh;
use crate::texture::Texture;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TextureFilter {
    #[default]
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub foreground: usize,
    /// Pixels whose UV landed on an empty texel (drawn magenta).
    pub invalid_texel_hits: usize,
}

/// Unlit albedo rendering with a black background.
pub fn render_textured(
    mesh: &Mesh,
    texture: &Texture,
    camera: &Camera,
    filter: TextureFilter,
) -> (ColorImage, RenderStats) {
    let frags = rasterize(mesh, camera);
    let mut img = ColorImage::new(camera.width, camera.height);
    let mut stats = RenderStats::default();
    for (idx, frag) in frags.into_iter().enumerate() {
        let Some(frag) = frag else { continue };
        stats.foreground += 1;
        let uv = lerp2(frag.bary, mesh.face_uv(frag.face as usize));
        img.pixels[idx] = shade(texture, uv.x, uv.y, filter, &mut stats);
    }
    (img, stats)
}

/// Same as [`render_textured`] but reuses the fragments stored in a G-buffer
/// rendered from the same camera.
pub fn render_textured_with(
    mesh: &Mesh,
    texture: &Texture,
    gbuffer: &GBuffer,
    filter: TextureFilter,
) -> (ColorImage, RenderStats) {
    let mut img = ColorImage::new(gbuffer.width, gbuffer.height);
    let mut stats = RenderStats::default();
    for idx in 0..gbuffer.face.len() {
        if !gbuffer.mask(idx) {
            continue;
        }
        stats.foreground += 1;
        let uv = lerp2(gbuffer.bary[idx], mesh.face_uv(gbuffer.face[idx] as usize));
        img.pixels[idx] = shade(texture, uv.x, uv.y, filter, &mut stats);
    }
    (img, stats)
}

fn texel_index(t: &Texture, x: f64, y: f64) -> usize {
    let i = (x.floor().max(0.0) as usize).min(t.width - 1);
    let j = (y.floor().max(0.0) as usize).min(t.height - 1);
    j * t.width + i
}

fn shade(t: &Texture, u: f64, v: f64, filter: TextureFilter, stats: &mut RenderStats) -> Rgb {
    let (x, y) = (u * t.width as f64, v * t.height as f64);
    let c = match filter {
        TextureFilter::Nearest => t.get(texel_index(t, x, y)),
        TextureFilter::Bilinear => {
            let (fx, fy) = (x - 0.5, y - 0.5);
            let (x0, y0) = (fx.floor(), fy.floor());
            let (tx, ty) = (fx - x0, fy - y0);
            let mut acc = [0.0f64; 3];
            let mut wsum = 0.0;
            for (dx, dy, w) in [
                (0.0, 0.0, (1.0 - tx) * (1.0 - ty)),
                (1.0, 0.0, tx * (1.0 - ty)),
                (0.0, 1.0, (1.0 - tx) * ty),
                (1.0, 1.0, tx * ty),
            ] {
                if let Some(c) = t.get(texel_index(t, x0 + dx + 0.5, y0 + dy + 0.5)) {
                    for k in 0..3 {
                        acc[k] += w * c[k] as f64;
                    }
                    wsum += w;
                }
            }
            (wsum > 0.0).then(|| acc.map(|a| (a / wsum) as f32))
        }
    };
    c.unwrap_or_else(|| {
        stats.invalid_texel_hits += 1;
        MAGENTA
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::BLACK;
    use crate::geom::{Vec2, Vec3};
    use crate::raster::Intrinsics;

    fn uv_quad() -> Mesh {
        let mut m = Mesh::new(
            vec![
                Vec3::new(-1.0, -1.0, 0.0),
                Vec3::new(1.0, -1.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(-1.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        m.compute_normals();
        m
    }

    fn cam(size: usize) -> Camera {
        // Distance chosen so the [-1,1] quad exactly fills a 90° frustum.
        Camera::new(
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::zeros(),
            Vec3::y(),
            Intrinsics {
                vertical_fov: 90f64.to_radians(),
                width: size,
                height: size,
                near: 0.1,
                far: 10.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn constant_texture_renders_constant() {
        let m = uv_quad();
        let t = Texture::constant(8, 8, [1.0, 0.0, 0.0]);
        let (img, stats) = render_textured(&m, &t, &cam(16), TextureFilter::Nearest);
        assert_eq!(stats.foreground, 256);
        assert!(img.pixels.iter().all(|&c| c == [1.0, 0.0, 0.0]));
    }

    #[test]
    fn checkerboard_quadrants_align() {
        let m = uv_quad();
        let mut t = Texture::empty(2, 2);
        let (a, b) = ([1.0, 1.0, 1.0], [0.0, 0.0, 1.0]);
        t.set(0, a); // u<.5, v<.5: bottom-left
        t.set(1, b);
        t.set(2, b);
        t.set(3, a); // top-right
        let (img, stats) = render_textured(&m, &t, &cam(8), TextureFilter::Nearest);
        assert_eq!(stats.invalid_texel_hits, 0);
        for y in 0..8 {
            for x in 0..8 {
                let top = y < 4;
                let right = x >= 4;
                let expect = if top == right { a } else { b };
                assert_eq!(img.get(x, y), expect, "pixel {x},{y}");
            }
        }
    }

    #[test]
    fn empty_texels_render_magenta() {
        let m = uv_quad();
        let t = Texture::empty(4, 4);
        let (img, stats) = render_textured(&m, &t, &cam(4), TextureFilter::Nearest);
        assert_eq!(stats.invalid_texel_hits, 16);
        assert!(img.pixels.iter().all(|&c| c == MAGENTA));
        let (img, _) = render_textured(&m, &Texture::constant(4, 4, BLACK), &cam(4), TextureFilter::Bilinear);
        assert!(img.pixels.iter().all(|&c| c == BLACK));
    }
}
