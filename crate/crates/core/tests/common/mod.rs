#![allow(dead_code)]

use std::path::{Path, PathBuf};

use blockwise::config::{PipelineConfig, RendererKind};
use blockwise::geometry::BBox;
use blockwise::raster::{Raster, Rgb, WHITE};

pub const GRAY: Rgb = [128, 128, 128];

pub fn bbox(x: u32, y: u32, w: u32, h: u32) -> BBox {
    BBox::new(x, y, w, h).unwrap()
}

/// White 1000×1000 with a 3px gray bar at y=498..501.
pub fn bar_canvas() -> Raster {
    let mut img = Raster::filled(1000, 1000, WHITE);
    img.fill_rect(&bbox(0, 498, 1000, 3), GRAY);
    img
}

pub fn uniform_canvas() -> Raster {
    Raster::filled(1000, 1000, WHITE)
}

/// Horizontal bar across the canvas and a vertical bar in the lower half.
pub fn two_level_canvas() -> Raster {
    let mut img = Raster::filled(1000, 1000, WHITE);
    img.fill_rect(&bbox(0, 500, 1000, 3), GRAY);
    img.fill_rect(&bbox(500, 503, 3, 497), GRAY);
    img
}

/// Offline workspace: a design PNG, a stub screenshot directory whose
/// default screenshot is the design itself, and a config that uses the
/// mock backend with a response cache.
pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub design_path: PathBuf,
    pub config: PipelineConfig,
}

impl Workspace {
    pub fn new(design: &Raster) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let design_path = dir.path().join("design.png");
        design.save_png(&design_path).unwrap();
        let shots = dir.path().join("shots");
        std::fs::create_dir_all(&shots).unwrap();
        design.save_png(shots.join("default.png")).unwrap();

        let mut config = PipelineConfig::default();
        config.output_dir = dir.path().join("runs");
        config.client.cache_dir = Some(dir.path().join("cache"));
        config.client.retry_backoff_ms = 1;
        config.renderer.backend = RendererKind::Stub;
        config.renderer.stub_dir = Some(shots);
        config.validate().unwrap();
        Self { dir, design_path, config }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn stub_dir(&self) -> PathBuf {
        self.config.renderer.stub_dir.clone().unwrap()
    }

    /// Writes the config as TOML and returns its path.
    pub fn write_config(&self) -> PathBuf {
        let path = self.path().join("pipeline.toml");
        std::fs::write(&path, toml::to_string(&self.config).unwrap()).unwrap();
        path
    }
}

/// Every file under `root`, relative path → bytes, sorted.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
