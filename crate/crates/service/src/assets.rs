//! Immutable depth pyramids shared by every session.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use depthtouch_core::fixtures::Surface;
use depthtouch_core::io::{self, GridFormat};
use depthtouch_core::workspace::DEFAULT_ROI_NODES;
use depthtouch_core::{build_pyramid, DepthField, DepthPyramid, RoiSelection};
use serde::Serialize;

/// Levels built for loaded assets, fewer if the grid is too small.
pub const MAX_LEVELS: usize = 4;

#[derive(Debug)]
pub struct Asset {
    pub id: String,
    pub pyramid: Arc<DepthPyramid<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelInfo {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssetInfo {
    pub id: String,
    pub levels: Vec<LevelInfo>,
    pub default_roi: RoiSelection,
}

impl Asset {
    pub fn from_field(id: impl Into<String>, field: &DepthField<f64>) -> Result<Self> {
        let field = field.fill_holes()?;
        let levels = DepthPyramid::max_levels(&field).min(MAX_LEVELS);
        Ok(Self { id: id.into(), pyramid: Arc::new(build_pyramid(&field, levels)?) })
    }

    pub fn load(id: impl Into<String>, path: &Path) -> Result<Self> {
        let field: DepthField<f64> = io::load_depth_grid(path, GridFormat::from_path(path))
            .with_context(|| format!("loading {}", path.display()))?;
        Self::from_field(id, &field)
    }

    /// The finest level that fits in a default-sized window, shown whole.
    pub fn default_roi(&self) -> RoiSelection {
        let p = &self.pyramid;
        let level = (0..p.len())
            .find(|&l| p.levels()[l].width().max(p.levels()[l].height()) <= DEFAULT_ROI_NODES)
            .unwrap_or(p.len() - 1);
        RoiSelection::full(p, level).expect("level exists")
    }

    pub fn info(&self) -> AssetInfo {
        let levels = self
            .pyramid
            .levels()
            .iter()
            .enumerate()
            .map(|(level, f)| LevelInfo { level, width: f.width(), height: f.height(), spacing: f.spacing() })
            .collect();
        AssetInfo { id: self.id.clone(), levels, default_roi: self.default_roi() }
    }
}

#[derive(Debug, Default)]
pub struct AssetStore {
    assets: BTreeMap<String, Arc<Asset>>,
}

impl AssetStore {
    /// Store holding the synthetic demo surfaces: `demo-flat` (a plane at
    /// 20 mm) and `demo-holed` (textured dome with filled holes).
    pub fn with_demos() -> Result<Self> {
        let mut s = Self::default();
        s.insert(Asset::from_field("demo-flat", &Surface::Flat.sample(101)?)?);
        s.insert(Asset::from_field("demo-holed", &Surface::Holed.sample(201)?)?);
        Ok(s)
    }

    pub fn insert(&mut self, asset: Asset) {
        self.assets.insert(asset.id.clone(), Arc::new(asset));
    }

    pub fn get(&self, id: &str) -> Option<Arc<Asset>> {
        self.assets.get(id).cloned()
    }

    pub fn list(&self) -> Vec<AssetInfo> {
        self.assets.values().map(|a| a.info()).collect()
    }
}
