use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::conv::{Conv2d, ConvGru, ProjectionHead};
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Channels of `concat(depth, normal)`.
pub const DEPTH_NORMAL_CHANNELS: usize = 4;
/// Channels of `concat(depth, normal, logits)`.
pub const SLZ_INPUT_CHANNELS: usize = 6;
/// Default hidden width.
pub const DEFAULT_HIDDEN_CHANNELS: usize = 8;
/// Half-width of the uniform distribution used by [`RefinementWeights::random`].
pub const INIT_SCALE: f32 = 0.1;

/// All parameters of the two refinement flows.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementWeights {
    /// Depth-normal flow cell at 1/4 scale; input is `[x, up(h_1/7)]`.
    pub gru_quarter: ConvGru,
    /// Depth-normal flow cell at 1/7 scale; input is `[x, up(h_1/14)]`.
    pub gru_seventh: ConvGru,
    /// Depth-normal flow cell at 1/14 scale; input is `x` only.
    pub gru_fourteenth: ConvGru,
    pub proj_depth: ProjectionHead,
    pub proj_normal: ProjectionHead,
    /// Landing-zone flow cell at 1/4 scale.
    pub slz_gru: ConvGru,
    pub proj_slz: ProjectionHead,
}

impl RefinementWeights {
    /// Seeded weights, uniform in `[-0.1, 0.1]`.
    pub fn random(hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = INIT_SCALE;
        let dn = DEPTH_NORMAL_CHANNELS;
        Self {
            gru_quarter: ConvGru::random(hidden, dn + hidden, s, &mut rng),
            gru_seventh: ConvGru::random(hidden, dn + hidden, s, &mut rng),
            gru_fourteenth: ConvGru::random(hidden, dn, s, &mut rng),
            proj_depth: ProjectionHead::random(hidden, 1, s, &mut rng),
            proj_normal: ProjectionHead::random(hidden, 3, s, &mut rng),
            slz_gru: ConvGru::random(hidden, SLZ_INPUT_CHANNELS, s, &mut rng),
            proj_slz: ProjectionHead::random(hidden, 2, s, &mut rng),
        }
    }

    /// Replaces all three projection heads with zeros.
    pub fn with_zero_heads(mut self) -> Self {
        let h = self.hidden_channels();
        self.proj_depth = ProjectionHead::zeros(h, 1);
        self.proj_normal = ProjectionHead::zeros(h, 3);
        self.proj_slz = ProjectionHead::zeros(h, 2);
        self
    }

    pub fn hidden_channels(&self) -> usize {
        self.gru_quarter.hidden_channels()
    }

    /// Checks that every block agrees on the hidden width and input layout.
    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_channels();
        let dn = DEPTH_NORMAL_CHANNELS;
        let cells = [
            ("gru_quarter", &self.gru_quarter, dn + h),
            ("gru_seventh", &self.gru_seventh, dn + h),
            ("gru_fourteenth", &self.gru_fourteenth, dn),
            ("slz_gru", &self.slz_gru, SLZ_INPUT_CHANNELS),
        ];
        for (name, cell, input) in cells {
            if cell.hidden_channels() != h || cell.input_channels() != input {
                return Err(Error::Shape(format!(
                    "{name}: expected hidden {h} / input {input}, found {} / {}",
                    cell.hidden_channels(),
                    cell.input_channels()
                )));
            }
        }
        let heads = [
            ("proj_depth", &self.proj_depth, 1),
            ("proj_normal", &self.proj_normal, 3),
            ("proj_slz", &self.proj_slz, 2),
        ];
        for (name, head, out) in heads {
            if head.in_channels() != h || head.out_channels() != out {
                return Err(Error::Shape(format!(
                    "{name}: expected {h} -> {out} channels, found {} -> {}",
                    head.in_channels(),
                    head.out_channels()
                )));
            }
        }
        Ok(())
    }

    fn cells(&self) -> [(&'static str, &ConvGru); 4] {
        [
            ("dn.gru4", &self.gru_quarter),
            ("dn.gru7", &self.gru_seventh),
            ("dn.gru14", &self.gru_fourteenth),
            ("slz.gru4", &self.slz_gru),
        ]
    }

    fn heads(&self) -> [(&'static str, &ProjectionHead); 3] {
        [
            ("dn.proj_d", &self.proj_depth),
            ("dn.proj_n", &self.proj_normal),
            ("slz.proj", &self.proj_slz),
        ]
    }

    /// Every entry name of a weight bundle, in a fixed order.
    pub fn entry_names() -> Vec<String> {
        let mut names = Vec::new();
        for cell in ["dn.gru4", "dn.gru7", "dn.gru14", "slz.gru4"] {
            for gate in ["z", "r", "h"] {
                names.push(format!("{cell}.{gate}.weight"));
                names.push(format!("{cell}.{gate}.bias"));
            }
        }
        for head in ["dn.proj_d", "dn.proj_n", "slz.proj"] {
            for layer in ["conv1", "conv2"] {
                names.push(format!("{head}.{layer}.weight"));
                names.push(format!("{head}.{layer}.bias"));
            }
        }
        names
    }

    /// Flattens the weights into named rasters, one per kernel and bias.
    pub fn to_bundle(&self) -> BTreeMap<String, Raster> {
        let mut out = BTreeMap::new();
        let mut put = |prefix: String, conv: &Conv2d| {
            out.insert(format!("{prefix}.weight"), conv.kernel().clone());
            out.insert(format!("{prefix}.bias"), conv.bias().clone());
        };
        for (name, cell) in self.cells() {
            put(format!("{name}.z"), &cell.update);
            put(format!("{name}.r"), &cell.reset);
            put(format!("{name}.h"), &cell.candidate);
        }
        for (name, head) in self.heads() {
            put(format!("{name}.conv1"), &head.conv1);
            put(format!("{name}.conv2"), &head.conv2);
        }
        out
    }

    /// Rebuilds weights from named rasters. Fails with
    /// [`Error::MissingEntry`] naming the first absent entry.
    pub fn from_bundle(bundle: &BTreeMap<String, Raster>) -> Result<Self> {
        if let Some(missing) = Self::entry_names()
            .into_iter()
            .find(|n| !bundle.contains_key(n))
        {
            return Err(Error::MissingEntry(missing));
        }
        let conv = |prefix: &str| -> Result<Conv2d> {
            Conv2d::new(
                bundle[&format!("{prefix}.weight")].clone(),
                bundle[&format!("{prefix}.bias")].clone(),
            )
            .map_err(|e| Error::Shape(format!("{prefix}: {e}")))
        };
        let cell = |name: &str| -> Result<ConvGru> {
            ConvGru::new(
                conv(&format!("{name}.z"))?,
                conv(&format!("{name}.r"))?,
                conv(&format!("{name}.h"))?,
            )
        };
        let head = |name: &str| -> Result<ProjectionHead> {
            ProjectionHead::new(
                conv(&format!("{name}.conv1"))?,
                conv(&format!("{name}.conv2"))?,
            )
        };
        let weights = Self {
            gru_quarter: cell("dn.gru4")?,
            gru_seventh: cell("dn.gru7")?,
            gru_fourteenth: cell("dn.gru14")?,
            proj_depth: head("dn.proj_d")?,
            proj_normal: head("dn.proj_n")?,
            slz_gru: cell("slz.gru4")?,
            proj_slz: head("slz.proj")?,
        };
        weights.validate()?;
        Ok(weights)
    }
}
