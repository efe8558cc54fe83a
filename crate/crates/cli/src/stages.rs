//! File-level stages: prepare, render-views, backproject.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use surftex::backproject::{backproject_baseline, inpaint_pullpush, run_iterative, Baseline, BaselineConfig, Method};
use surftex::color::{save_gray_png, ColorImage};
use surftex::evalkit::coverage;
use surftex::formats::{load_texel_map, load_texture, save_gbuffer, save_texel_map, save_texture};
use surftex::gather::{GatherConfig, ViewBundle, DEFAULT_VISIBILITY_EPSILON};
use surftex::geodesics::{Geodesics, DEFAULT_RADIUS};
use surftex::mesh::{build_texel_map, load_obj, Mesh, TexelMap};
use surftex::neural::load_weights;
use surftex::raster::{
    paint3d_schedule, paint3d_views, render_gbuffer, render_textured, CameraSpec, Intrinsics, TextureFilter, DEFAULT_CAMERA_DISTANCE,
    PAINT3D_VIEW_NAMES,
};
use surftex::{Error, Result, Texture};

use crate::{ensure_dir, write_json, Global, Strategy};

pub const MESH_FILE: &str = "mesh.obj";
pub const TEXEL_MAP_FILE: &str = "texels.stxm";
pub const REPORT_FILE: &str = "prepare.json";
pub const MANIFEST_FILE: &str = "views.json";

#[derive(Args)]
pub struct PrepareArgs {
    /// Input OBJ with texture coordinates.
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Texture width and height.
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    /// Precompute geodesic fields for every texel.
    #[arg(long)]
    pub geodesics: bool,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: f64,
}

#[derive(Args)]
pub struct RenderArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    pub prepared: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Camera file `{"cameras": [...]}`; the six-view preset otherwise.
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    /// Image size of the preset views.
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    #[arg(long, default_value_t = DEFAULT_CAMERA_DISTANCE)]
    pub distance: f64,
    /// Also render RGB views of this texture (PNG or STXT).
    #[arg(long)]
    pub texture: Option<PathBuf>,
}

#[derive(Args)]
pub struct BackprojectArgs {
    #[arg(long)]
    pub prepared: PathBuf,
    /// Views manifest `{"views": [{"image", "camera"}]}`.
    #[arg(long)]
    pub views: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    /// Network weights (required for `neural`).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Minimum cosine between normal and view direction.
    #[arg(long, default_value_t = surftex::backproject::DEFAULT_THRESHOLD)]
    pub thr: f64,
    /// Exponent of the weighted baseline.
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = DEFAULT_VISIBILITY_EPSILON)]
    pub epsilon: f64,
    /// Process views in pairs, each pass seeing the running texture.
    #[arg(long)]
    pub iterative: bool,
    /// Also write a chart-restricted pull-push fill.
    #[arg(long)]
    pub inpaint: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewEntry {
    pub image: PathBuf,
    pub camera: CameraSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewsManifest {
    pub views: Vec<ViewEntry>,
}

#[derive(Deserialize)]
struct CameraFile {
    cameras: Vec<CameraSpec>,
}

/// Mesh and texel map read back from a `prepare` directory.
pub struct Prepared {
    pub dir: PathBuf,
    pub mesh: Mesh,
    pub map: TexelMap,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Geodesic cache location: `$STX_CACHE_DIR/<mesh hash>_r<radius>.stxd`
/// when set, else next to the prepared mesh.
pub fn geodesic_cache_path(dir: &Path, mesh: &Mesh, radius: f64) -> PathBuf {
    match std::env::var_os("STX_CACHE_DIR") {
        Some(d) if !d.is_empty() => PathBuf::from(d).join(format!("{:016x}_r{radius}.stxd", mesh.content_hash())),
        _ => dir.join("geodesics.stxd"),
    }
}

/// Normalizes `mesh` and writes it with its texel map and report into
/// `out`; returns the prepared mesh and map.
pub fn write_prepared(mut mesh: Mesh, warnings: Vec<String>, size: usize, out: &Path, geodesics: Option<f64>) -> Result<Prepared> {
    if !size.is_power_of_two() {
        log::warn!("texture size {size} is not a power of two");
    }
    ensure_dir(&out.to_path_buf())?;
    let norm = mesh.normalize()?;
    let stats = mesh.compute_normals();
    std::fs::write(out.join(MESH_FILE), mesh.to_obj_string()).map_err(|e| Error::io(out.join(MESH_FILE), e))?;
    let (map, atlas) = build_texel_map(&mesh, size, size)?;
    save_texel_map(&map, out.join(TEXEL_MAP_FILE))?;
    let mut report = json!({
        "size": [size, size],
        "faces": mesh.face_count(),
        "vertices": mesh.vertices.len(),
        "mesh_hash": format!("{:016x}", mesh.content_hash()),
        "normalization": { "center": [norm.center.x, norm.center.y, norm.center.z], "scale": norm.scale },
        "normals": format!("{stats:?}"),
        "atlas": atlas,
        "warnings": warnings,
    });
    if let Some(radius) = geodesics {
        let geo = Geodesics::new(&mesh, radius)?;
        geo.precompute(&map)?;
        let path = geodesic_cache_path(out, &mesh, radius);
        if let Some(parent) = path.parent() {
            ensure_dir(&parent.to_path_buf())?;
        }
        geo.save(&path)?;
        let shown = path.strip_prefix(out).unwrap_or(&path);
        report["geodesics"] = json!({ "radius": radius, "fields": geo.cached_fields(), "cache": shown });
        log::info!("cached {} geodesic fields in {}", geo.cached_fields(), path.display());
    }
    write_json(out.join(REPORT_FILE), &report)?;
    Ok(Prepared {
        dir: out.to_path_buf(),
        mesh,
        map,
    })
}

pub fn load_prepared(dir: &Path) -> Result<Prepared> {
    let mut mesh = load_obj(dir.join(MESH_FILE))?.mesh;
    mesh.compute_normals();
    let map = load_texel_map(dir.join(TEXEL_MAP_FILE), mesh.face_charts())?;
    Ok(Prepared {
        dir: dir.to_path_buf(),
        mesh,
        map,
    })
}

pub fn prepare(a: &PrepareArgs, _g: &Global) -> Result<()> {
    let load = load_obj(&a.mesh)?;
    let warnings = load.warnings.iter().map(|w| format!("{w:?}")).collect();
    let p = write_prepared(load.mesh, warnings, a.size, &a.out, a.geodesics.then_some(a.radius))?;
    log::info!("prepared {} faces, {} valid texels", p.mesh.face_count(), p.map.valid_count());
    Ok(())
}

fn load_any_texture(path: &Path) -> Result<Texture> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        let (img, mask) = ColorImage::load_png(path)?;
        Ok(Texture::from_image(&img, mask.as_deref()))
    } else {
        load_texture(path)
    }
}

/// Where the RGB view images come from.
pub enum ViewImages<'a> {
    /// Left for an external generator to supply.
    External,
    Render(&'a Texture),
    Given(&'a [ColorImage]),
}

/// Writes depth PNGs, G-buffers, a manifest and, unless external, the RGB
/// images for `cameras`.
pub fn write_views(mesh: &Mesh, cameras: &[CameraSpec], images: ViewImages, out: &Path) -> Result<ViewsManifest> {
    ensure_dir(&out.to_path_buf())?;
    let mut views = Vec::new();
    for (i, spec) in cameras.iter().enumerate() {
        let cam = spec.to_camera()?;
        let g = render_gbuffer(mesh, &cam);
        let stem = format!("view_{i:02}");
        save_gray_png(
            out.join(format!("{stem}_depth.png")),
            g.width,
            g.height,
            &g.depth_visualization(cam.near, cam.far),
        )?;
        save_gbuffer(&g, out.join(format!("{stem}.stxg")))?;
        let image = PathBuf::from(format!("{stem}.png"));
        match &images {
            ViewImages::External => {}
            ViewImages::Render(t) => render_textured(mesh, t, &cam, TextureFilter::Nearest).0.save_png(out.join(&image))?,
            ViewImages::Given(imgs) => imgs[i].save_png(out.join(&image))?,
        }
        views.push(ViewEntry {
            image,
            camera: spec.clone(),
        });
    }
    let manifest = ViewsManifest { views };
    write_json(out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn render_views(a: &RenderArgs, _g: &Global) -> Result<()> {
    let p = load_prepared(&a.prepared)?;
    let cameras: Vec<CameraSpec> = match &a.cameras {
        Some(path) => read_json::<CameraFile>(path)?.cameras,
        None => {
            let intr = Intrinsics {
                width: a.size,
                height: a.size,
                ..Intrinsics::default()
            };
            paint3d_views(a.distance, intr).iter().map(|c| c.spec()).collect()
        }
    };
    if cameras.is_empty() {
        return Err(Error::InvalidConfig("camera file lists no cameras".into()));
    }
    let texture = a.texture.as_deref().map(load_any_texture).transpose()?;
    let images = texture.as_ref().map_or(ViewImages::External, ViewImages::Render);
    write_views(&p.mesh, &cameras, images, &a.out)?;
    if a.cameras.is_none() {
        log::info!("rendered preset views {}", PAINT3D_VIEW_NAMES.join(", "));
    }
    Ok(())
}

/// Reads the manifest images (paths relative to the manifest) and renders
/// their G-buffers.
pub fn load_views(mesh: &Mesh, manifest_path: &Path) -> Result<Vec<ViewBundle>> {
    let manifest: ViewsManifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .views
        .iter()
        .map(|v| {
            let (img, _) = ColorImage::load_png(base.join(&v.image))?;
            ViewBundle::new(mesh, v.camera.to_camera()?, img)
        })
        .collect()
}

/// Writes `texture.{png,stxt}` and, with `inpaint`, the filled variant.
pub fn write_textures(map: &TexelMap, tex: &Texture, inpaint: bool, out: &Path, stem: &str) -> Result<Option<Texture>> {
    tex.save_png(out.join(format!("{stem}.png")))?;
    save_texture(tex, out.join(format!("{stem}.stxt")))?;
    if !inpaint {
        return Ok(None);
    }
    let filled = inpaint_pullpush(tex, map)?;
    filled.save_png(out.join(format!("{stem}_inpainted.png")))?;
    save_texture(&filled, out.join(format!("{stem}_inpainted.stxt")))?;
    Ok(Some(filled))
}

pub fn backproject(a: &BackprojectArgs, _g: &Global) -> Result<()> {
    if a.strategy == Strategy::Neural && a.weights.is_none() {
        return Err(Error::InvalidConfig("strategy `neural` needs --weights".into()));
    }
    let p = load_prepared(&a.prepared)?;
    let views = load_views(&p.mesh, &a.views)?;
    if views.is_empty() {
        return Err(Error::InvalidConfig("views manifest lists no views".into()));
    }
    let bcfg = BaselineConfig {
        thr: a.thr,
        epsilon: a.epsilon,
    };
    let weights = a.weights.as_deref().map(load_weights).transpose()?;
    let geo = match &weights {
        Some(w) if w.arch.geodesics => {
            let geo = Geodesics::new(&p.mesh, a.radius)?;
            let cache = geodesic_cache_path(&p.dir, &p.mesh, a.radius);
            if cache.exists() {
                match geo.load(&cache) {
                    Ok(n) => log::info!("loaded {n} geodesic fields from {}", cache.display()),
                    Err(e) => log::warn!("ignoring geodesic cache {}: {e}", cache.display()),
                }
            }
            Some(geo)
        }
        _ => None,
    };
    let method = match (a.strategy, &weights) {
        (Strategy::Frontfacing, _) => Method::Baseline(Baseline::FrontFacing, bcfg),
        (Strategy::Average, _) => Method::Baseline(Baseline::Average, bcfg),
        (Strategy::Weighted, _) => Method::Baseline(Baseline::Weighted { power: a.power }, bcfg),
        (Strategy::Neural, w) => Method::Neural {
            weights: w.as_ref().expect("checked above"),
            geo: geo.as_ref(),
            gather: GatherConfig { k: a.k, epsilon: a.epsilon },
        },
    };
    let tex = if a.iterative {
        let schedule = if views.len() == 6 {
            paint3d_schedule()
        } else {
            (0..views.len()).collect::<Vec<_>>().chunks(2).map(<[usize]>::to_vec).collect()
        };
        run_iterative(&p.map, &views, &schedule, &method)?
    } else if let Method::Baseline(b, cfg) = method {
        backproject_baseline(&p.map, &views, b, &cfg)
    } else {
        method.run(&p.map, &views, None)?
    };
    ensure_dir(&a.out)?;
    let filled = write_textures(&p.map, &tex, a.inpaint, &a.out, "texture")?;
    let mut stats = json!({
        "strategy": method.name(),
        "views": views.len(),
        "valid_texels": p.map.valid_count(),
        "coverage": coverage(&tex, &p.map),
    });
    if let Some(f) = filled {
        stats["coverage_inpainted"] = json!(coverage(&f, &p.map));
    }
    write_json(a.out.join("backproject.json"), &stats)
}
