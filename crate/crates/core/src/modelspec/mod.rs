//! Declarative staged-CNN descriptions and activation surgery.
//!
//! A [`ModelSpec`] is a stem convolution, four stages of residual blocks and
//! a classifier head. Every activation lives at a named site:
//!
//! * `stem.act`
//! * `stage{K}.block{J}.act_a` (band A, after the first convolution)
//! * `stage{K}.block{J}.act_b` (band B, after the residual add)
//!
//! Stages and blocks are numbered from 1. Surgery rewrites the kind at the
//! sites picked out by a [`GroupSelector`] and leaves everything else alone.

mod model;

pub use model::{Block, ConvParams, Model, Trace};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::ActivationKind;

pub const NUM_STAGES: usize = 4;
pub const INPUT_CHANNELS: usize = 3;
/// Block counts of the full-size video backbone the mini-x3d preset mirrors.
pub const X3D_BLOCKS: [usize; NUM_STAGES] = [3, 5, 11, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    A,
    B,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::A => "A",
            Band::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StemSpec {
    pub channels: usize,
    pub act: ActivationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub channels: usize,
    pub stride: usize,
    pub act_a: ActivationKind,
    pub act_b: ActivationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub blocks: Vec<BlockSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSpec {
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub preset: String,
    pub stem: StemSpec,
    pub stages: Vec<StageSpec>,
    pub head: HeadSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActivationSite {
    pub site_id: String,
    pub band: Option<Band>,
    pub kind: ActivationKind,
}

/// Position of a site inside a spec; stage and block are 0-based here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SitePos {
    Stem,
    Block {
        stage: usize,
        block: usize,
        band: Band,
    },
}

impl SitePos {
    fn id(self) -> String {
        match self {
            SitePos::Stem => "stem.act".to_string(),
            SitePos::Block { stage, block, band } => {
                let suffix = match band {
                    Band::A => "act_a",
                    Band::B => "act_b",
                };
                format!("stage{}.block{}.{suffix}", stage + 1, block + 1)
            }
        }
    }

    fn band(self) -> Option<Band> {
        match self {
            SitePos::Stem => None,
            SitePos::Block { band, .. } => Some(band),
        }
    }
}

/// Picks out a set of activation sites.
///
/// `Initial` is the stem only, `Middle` is stages 2 and 3, `Last` is stage
/// 4. Stage-1 sites are reached only through `All`, a band, or an explicit
/// site id. `And` intersects two selectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GroupSelector {
    Initial,
    Middle,
    Last,
    All,
    Band(Band),
    Site(String),
    And(Box<GroupSelector>, Box<GroupSelector>),
}

impl GroupSelector {
    pub fn and(self, other: GroupSelector) -> GroupSelector {
        GroupSelector::And(Box::new(self), Box::new(other))
    }

    fn matches(&self, pos: SitePos) -> bool {
        match self {
            GroupSelector::Initial => pos == SitePos::Stem,
            GroupSelector::Middle => matches!(pos, SitePos::Block { stage: 1 | 2, .. }),
            GroupSelector::Last => matches!(pos, SitePos::Block { stage: 3, .. }),
            GroupSelector::All => true,
            GroupSelector::Band(b) => pos.band() == Some(*b),
            GroupSelector::Site(id) => pos.id() == *id,
            GroupSelector::And(a, b) => a.matches(pos) && b.matches(pos),
        }
    }

    fn check_sites(&self, spec: &ModelSpec) -> Result<()> {
        match self {
            GroupSelector::Site(id) => {
                if spec.positions().any(|p| p.id() == *id) {
                    Ok(())
                } else {
                    Err(Error::UnknownSite(id.clone()))
                }
            }
            GroupSelector::And(a, b) => {
                a.check_sites(spec)?;
                b.check_sites(spec)
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for GroupSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSelector::Initial => f.write_str("initial"),
            GroupSelector::Middle => f.write_str("middle"),
            GroupSelector::Last => f.write_str("last"),
            GroupSelector::All => f.write_str("all"),
            GroupSelector::Band(Band::A) => f.write_str("band-a"),
            GroupSelector::Band(Band::B) => f.write_str("band-b"),
            GroupSelector::Site(id) => write!(f, "site:{id}"),
            GroupSelector::And(a, b) => write!(f, "{a}&{b}"),
        }
    }
}

impl FromStr for GroupSelector {
    type Err = Error;

    /// Accepts `initial`, `middle`, `last`, `all`, `band-a`, `band-b`,
    /// `site:<id>` and `&`-joined intersections such as `middle&band-a`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('&').map(parse_atom);
        let first = parts
            .next()
            .ok_or_else(|| Error::InvalidSelector(s.to_string()))??;
        parts.try_fold(first, |acc, next| Ok(acc.and(next?)))
    }
}

fn parse_atom(s: &str) -> Result<GroupSelector> {
    let s = s.trim();
    if let Some(id) = s.strip_prefix("site:") {
        if id.is_empty() {
            return Err(Error::InvalidSelector(s.to_string()));
        }
        return Ok(GroupSelector::Site(id.to_string()));
    }
    match s.to_ascii_lowercase().as_str() {
        "initial" => Ok(GroupSelector::Initial),
        "middle" => Ok(GroupSelector::Middle),
        "last" => Ok(GroupSelector::Last),
        "all" => Ok(GroupSelector::All),
        "band-a" | "a" | "act_a" => Ok(GroupSelector::Band(Band::A)),
        "band-b" | "b" | "act_b" => Ok(GroupSelector::Band(Band::B)),
        _ => Err(Error::InvalidSelector(s.to_string())),
    }
}

impl TryFrom<String> for GroupSelector {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GroupSelector> for String {
    fn from(sel: GroupSelector) -> String {
        sel.to_string()
    }
}

/// Which current kinds a surgery rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KindFilter {
    Any,
    Kind(ActivationKind),
}

impl KindFilter {
    fn accepts(self, kind: ActivationKind) -> bool {
        match self {
            KindFilter::Any => true,
            KindFilter::Kind(k) => k == kind,
        }
    }
}

impl From<ActivationKind> for KindFilter {
    fn from(kind: ActivationKind) -> Self {
        KindFilter::Kind(kind)
    }
}

impl fmt::Display for KindFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KindFilter::Any => f.write_str("any"),
            KindFilter::Kind(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for KindFilter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("any") {
            Ok(KindFilter::Any)
        } else {
            s.parse().map(KindFilter::Kind)
        }
    }
}

impl TryFrom<String> for KindFilter {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KindFilter> for String {
    fn from(k: KindFilter) -> String {
        k.to_string()
    }
}

/// One activation replacement step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surgery {
    pub selector: GroupSelector,
    pub from: KindFilter,
    pub to: ActivationKind,
}

/// Allocates parameters for `spec`; see [`Model::build`].
pub fn build_model(spec: &ModelSpec, rng: &mut crate::tensor::Rng) -> Result<Model> {
    Model::build(spec, rng)
}

pub fn preset(name: &str) -> Result<ModelSpec> {
    preset_with_blocks(name, [1; NUM_STAGES])
}

/// Mini presets with a configurable number of blocks per stage. Only the
/// first block of a stage carries the stage stride.
pub fn preset_with_blocks(name: &str, blocks: [usize; NUM_STAGES]) -> Result<ModelSpec> {
    let band_b = match name {
        "mini-resnet" => ActivationKind::Relu,
        "mini-x3d" => ActivationKind::Swish,
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    const CHANNELS: [usize; NUM_STAGES] = [8, 16, 32, 32];
    const STRIDES: [usize; NUM_STAGES] = [1, 2, 2, 2];
    let stages = (0..NUM_STAGES)
        .map(|s| StageSpec {
            blocks: (0..blocks[s])
                .map(|b| BlockSpec {
                    channels: CHANNELS[s],
                    stride: if b == 0 { STRIDES[s] } else { 1 },
                    act_a: ActivationKind::Relu,
                    act_b: band_b,
                })
                .collect(),
        })
        .collect();
    let spec = ModelSpec {
        preset: name.to_string(),
        stem: StemSpec {
            channels: 8,
            act: ActivationKind::Relu,
        },
        stages,
        head: HeadSpec { classes: 10 },
    };
    spec.validate()?;
    Ok(spec)
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.stages.len() != NUM_STAGES {
            return Err(Error::InvalidSpec(format!(
                "expected {NUM_STAGES} stages, got {}",
                self.stages.len()
            )));
        }
        if self.stem.channels == 0 {
            return Err(Error::InvalidSpec("stem needs at least one channel".into()));
        }
        if self.head.classes < 2 {
            return Err(Error::InvalidSpec("head needs at least two classes".into()));
        }
        let mut prev = self.stem.channels;
        for (s, stage) in self.stages.iter().enumerate() {
            if stage.blocks.is_empty() {
                return Err(Error::InvalidSpec(format!("stage{} has no blocks", s + 1)));
            }
            for (b, block) in stage.blocks.iter().enumerate() {
                if block.stride == 0 {
                    return Err(Error::InvalidSpec(format!(
                        "stage{}.block{} has stride 0",
                        s + 1,
                        b + 1
                    )));
                }
                if block.channels < prev {
                    return Err(Error::InvalidSpec(format!(
                        "stage{}.block{}: channels {} decrease from {prev}",
                        s + 1,
                        b + 1,
                        block.channels
                    )));
                }
                prev = block.channels;
            }
        }
        Ok(())
    }

    fn positions(&self) -> impl Iterator<Item = SitePos> + '_ {
        let blocks = self.stages.iter().enumerate().flat_map(|(stage, st)| {
            (0..st.blocks.len()).flat_map(move |block| {
                [Band::A, Band::B].map(|band| SitePos::Block { stage, block, band })
            })
        });
        std::iter::once(SitePos::Stem).chain(blocks)
    }

    fn kind_at(&self, pos: SitePos) -> ActivationKind {
        match pos {
            SitePos::Stem => self.stem.act,
            SitePos::Block { stage, block, band } => {
                let b = &self.stages[stage].blocks[block];
                match band {
                    Band::A => b.act_a,
                    Band::B => b.act_b,
                }
            }
        }
    }

    fn kind_at_mut(&mut self, pos: SitePos) -> &mut ActivationKind {
        match pos {
            SitePos::Stem => &mut self.stem.act,
            SitePos::Block { stage, block, band } => {
                let b = &mut self.stages[stage].blocks[block];
                match band {
                    Band::A => &mut b.act_a,
                    Band::B => &mut b.act_b,
                }
            }
        }
    }

    /// All sites in network order: stem, then each block's band A and B.
    pub fn list_sites(&self) -> Vec<ActivationSite> {
        self.positions()
            .map(|p| ActivationSite {
                site_id: p.id(),
                band: p.band(),
                kind: self.kind_at(p),
            })
            .collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.stages.iter().map(|s| s.blocks.len()).sum()
    }

    /// Returns a copy with every site matched by `selector` whose kind passes
    /// `from` set to `to`, plus the number of sites rewritten.
    pub fn replace_activations(
        &self,
        selector: &GroupSelector,
        from: KindFilter,
        to: ActivationKind,
    ) -> Result<(ModelSpec, usize)> {
        selector.check_sites(self)?;
        let mut out = self.clone();
        let hits: Vec<SitePos> = self
            .positions()
            .filter(|&p| selector.matches(p) && from.accepts(self.kind_at(p)))
            .collect();
        for &p in &hits {
            *out.kind_at_mut(p) = to;
        }
        Ok((out, hits.len()))
    }

    pub fn apply(&self, surgery: &Surgery) -> Result<(ModelSpec, usize)> {
        self.replace_activations(&surgery.selector, surgery.from, surgery.to)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<ModelSpec> {
        let spec: ModelSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    /// SHA-256 of the compact JSON serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("model spec serializes");
        hex::encode(Sha256::digest(&json))
    }
}
