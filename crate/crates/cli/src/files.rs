//! Instance and target files (TOML).

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use autobid_core::market::{ContinuumSegment, DiscreteItem, MarketInstance};
use autobid_core::reduction::TargetSystem;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bidders {
    pub count: usize,
}

/// On-disk market: `[bidders] count`, `[[items]]`, `[[segments]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub bidders: Bidders,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<DiscreteItem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<ContinuumSegment>,
}

impl From<&MarketInstance> for MarketFile {
    fn from(m: &MarketInstance) -> Self {
        MarketFile {
            bidders: Bidders { count: m.n_bidders },
            items: m.items.clone(),
            segments: m.segments.clone(),
        }
    }
}

impl From<MarketFile> for MarketInstance {
    fn from(f: MarketFile) -> Self {
        MarketInstance {
            n_bidders: f.bidders.count,
            items: f.items,
            segments: f.segments,
        }
    }
}

pub fn parse_market(text: &str) -> Result<MarketInstance> {
    let file: MarketFile = toml::from_str(text).context("market file does not match the schema")?;
    let inst = MarketInstance::from(file);
    inst.validate()?;
    Ok(inst)
}

pub fn market_to_string(m: &MarketInstance) -> Result<String> {
    Ok(toml::to_string(&MarketFile::from(m))?)
}

pub fn load_market(path: &Path) -> Result<MarketInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_market(&text).with_context(|| format!("loading market {}", path.display()))
}

pub fn save_market(path: &Path, m: &MarketInstance) -> Result<()> {
    fs::write(path, market_to_string(m)?).with_context(|| format!("writing {}", path.display()))
}

pub fn parse_target(text: &str) -> Result<TargetSystem> {
    let t: TargetSystem = toml::from_str(text).context("target file does not match the schema")?;
    t.validate()?;
    Ok(t)
}

pub fn target_to_string(t: &TargetSystem) -> Result<String> {
    Ok(toml::to_string(t)?)
}

pub fn load_target(path: &Path) -> Result<TargetSystem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_target(&text).with_context(|| format!("loading target {}", path.display()))
}

pub fn save_target(path: &Path, t: &TargetSystem) -> Result<()> {
    fs::write(path, target_to_string(t)?).with_context(|| format!("writing {}", path.display()))
}
