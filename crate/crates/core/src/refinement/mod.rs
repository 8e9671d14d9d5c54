//! Dual-flow iterative refinement.
//!
//! Each iteration first runs the depth-normal flow, whose three ConvGRU cells
//! update hidden states at 1/14, 1/7 and 1/4 of the base resolution
//! (coarse to fine), after which two projection heads add residuals to the
//! depth and normal maps. The landing-zone flow then updates its own 1/4-scale
//! hidden state from the refreshed depth and normals plus the current logits,
//! and a third head adds a residual to the logits.
//!
//! Predictions live at 1/4 scale. `concat` below means channel concatenation.

mod conv;
mod weights;

pub use conv::{Conv2d, ConvGru, ProjectionHead};
pub use weights::{
    RefinementWeights, DEFAULT_HIDDEN_CHANNELS, DEPTH_NORMAL_CHANNELS, INIT_SCALE,
    SLZ_INPUT_CHANNELS,
};

use std::collections::BTreeMap;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Default base resolution.
pub const DEFAULT_BASE: usize = 56;
/// Base sizes must be multiples of this.
pub const BASE_MULTIPLE: usize = 28;

/// Returns `(1/4, 1/7, 1/14)` sizes of a base dimension.
pub fn pyramid_sizes(base: usize) -> Result<(usize, usize, usize)> {
    if base == 0 || !base.is_multiple_of(BASE_MULTIPLE) {
        return Err(Error::InvalidInput(format!(
            "base resolution {base} is not a positive multiple of {BASE_MULTIPLE}"
        )));
    }
    Ok((base / 4, base / 7, base / 14))
}

/// Hidden states of the depth-normal flow.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenPyramid {
    pub quarter: Raster,
    pub seventh: Raster,
    pub fourteenth: Raster,
}

/// Everything carried from one refinement iteration to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementState {
    pub hidden: HiddenPyramid,
    /// Hidden state owned by the landing-zone flow (1/4 scale).
    pub slz_hidden: Raster,
    /// Depth, 1 channel.
    pub depth: Raster,
    /// Unnormalised normals, 3 channels.
    pub normal: Raster,
    /// Safe/unsafe logits, 2 channels.
    pub logits: Raster,
    /// Completed iterations.
    pub step: usize,
    /// Set between the depth-normal step and the landing-zone step of an iteration.
    pub awaiting_slz: bool,
}

impl RefinementState {
    /// A state at step 0. Shapes are validated against the base size implied
    /// by `depth` (four times its width and height).
    pub fn initial(
        hidden: HiddenPyramid,
        slz_hidden: Raster,
        depth: Raster,
        normal: Raster,
        logits: Raster,
    ) -> Result<Self> {
        let state = Self {
            hidden,
            slz_hidden,
            depth,
            normal,
            logits,
            step: 0,
            awaiting_slz: false,
        };
        state.validate()?;
        Ok(state)
    }

    /// Seeded synthetic initial state for demos and tests: a noisy plane at
    /// ten metres, camera-facing normals, small logits and hidden states.
    /// The landing-zone hidden state starts as a copy of the 1/4 hidden state.
    pub fn seeded(base_w: usize, base_h: usize, hidden_channels: usize, seed: u64) -> Result<Self> {
        let (qw, sw, fw) = pyramid_sizes(base_w)?;
        let (qh, sh, fh) = pyramid_sizes(base_h)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Uniform::new_inclusive(-1.0f32, 1.0);
        let mut noise = |scale: f32| scale * unit.sample(&mut rng);
        let quarter = Raster::from_fn(qw, qh, hidden_channels, |_, _, _| noise(0.5));
        let seventh = Raster::from_fn(sw, sh, hidden_channels, |_, _, _| noise(0.5));
        let fourteenth = Raster::from_fn(fw, fh, hidden_channels, |_, _, _| noise(0.5));
        let depth = Raster::from_fn(qw, qh, 1, |x, y, _| {
            10.0 + 0.05 * (x as f32 - y as f32) + noise(0.2)
        });
        let normal = Raster::from_fn(qw, qh, 3, |_, _, c| [0.0, 0.0, -1.0][c] + noise(0.1));
        let logits = Raster::from_fn(qw, qh, 2, |_, _, _| noise(1.0));
        Self::initial(
            HiddenPyramid {
                quarter: quarter.clone(),
                seventh,
                fourteenth,
            },
            quarter,
            depth,
            normal,
            logits,
        )
    }

    pub fn base_size(&self) -> (usize, usize) {
        (self.depth.width() * 4, self.depth.height() * 4)
    }

    pub fn hidden_channels(&self) -> usize {
        self.hidden.quarter.channels()
    }

    pub fn validate(&self) -> Result<()> {
        let (bw, bh) = self.base_size();
        let (qw, sw, fw) = pyramid_sizes(bw)?;
        let (qh, sh, fh) = pyramid_sizes(bh)?;
        let hc = self.hidden_channels();
        let expect = |what: &str, r: &Raster, w: usize, h: usize, c: usize| -> Result<()> {
            if r.width() != w || r.height() != h || r.channels() != c {
                return Err(Error::Shape(format!(
                    "{what}: expected {w}x{h}x{c}, found {}x{}x{}",
                    r.width(),
                    r.height(),
                    r.channels()
                )));
            }
            Ok(())
        };
        expect("depth", &self.depth, qw, qh, 1)?;
        expect("normal", &self.normal, qw, qh, 3)?;
        expect("logits", &self.logits, qw, qh, 2)?;
        expect("hidden 1/4", &self.hidden.quarter, qw, qh, hc)?;
        expect("hidden 1/7", &self.hidden.seventh, sw, sh, hc)?;
        expect("hidden 1/14", &self.hidden.fourteenth, fw, fh, hc)?;
        expect("landing-zone hidden", &self.slz_hidden, qw, qh, hc)?;
        let rasters = [
            &self.depth,
            &self.normal,
            &self.logits,
            &self.hidden.quarter,
            &self.hidden.seventh,
            &self.hidden.fourteenth,
            &self.slz_hidden,
        ];
        if !rasters.iter().all(|r| r.is_all_finite()) {
            return Err(Error::Degenerate(
                "refinement state contains non-finite values".into(),
            ));
        }
        Ok(())
    }

    /// Named rasters describing the whole state, for checkpointing.
    pub fn to_bundle(&self) -> BTreeMap<String, Raster> {
        let mut out = BTreeMap::new();
        out.insert("hidden.quarter".into(), self.hidden.quarter.clone());
        out.insert("hidden.seventh".into(), self.hidden.seventh.clone());
        out.insert("hidden.fourteenth".into(), self.hidden.fourteenth.clone());
        out.insert("slz_hidden".into(), self.slz_hidden.clone());
        out.insert("depth".into(), self.depth.clone());
        out.insert("normal".into(), self.normal.clone());
        out.insert("logits".into(), self.logits.clone());
        let meta = [self.step as f32, if self.awaiting_slz { 1.0 } else { 0.0 }];
        out.insert(
            "meta".into(),
            Raster::from_vec(1, 1, 2, meta.to_vec()).expect("1x1x2"),
        );
        out
    }

    pub fn from_bundle(bundle: &BTreeMap<String, Raster>) -> Result<Self> {
        let get = |name: &str| {
            bundle
                .get(name)
                .cloned()
                .ok_or_else(|| Error::MissingEntry(name.to_string()))
        };
        let meta = get("meta")?;
        if meta.len() != 2 {
            return Err(Error::Shape("state meta entry must hold two values".into()));
        }
        let step = meta.data()[0];
        if !(step >= 0.0 && step.fract() == 0.0) {
            return Err(Error::InvalidInput(format!("bad step counter {step}")));
        }
        let state = Self {
            hidden: HiddenPyramid {
                quarter: get("hidden.quarter")?,
                seventh: get("hidden.seventh")?,
                fourteenth: get("hidden.fourteenth")?,
            },
            slz_hidden: get("slz_hidden")?,
            depth: get("depth")?,
            normal: get("normal")?,
            logits: get("logits")?,
            step: step as usize,
            awaiting_slz: meta.data()[1] != 0.0,
        };
        state.validate()?;
        Ok(state)
    }
}

fn add_residual(base: &Raster, delta: &Raster) -> Raster {
    let mut out = base.clone();
    for (v, d) in out.data_mut().iter_mut().zip(delta.data()) {
        *v += d;
    }
    out
}

fn ensure_compatible(state: &RefinementState, weights: &RefinementWeights) -> Result<()> {
    state.validate()?;
    weights.validate()?;
    if weights.hidden_channels() != state.hidden_channels() {
        return Err(Error::Shape(format!(
            "weights expect {} hidden channels, state has {}",
            weights.hidden_channels(),
            state.hidden_channels()
        )));
    }
    Ok(())
}

fn ensure_finite(state: RefinementState) -> Result<RefinementState> {
    state.validate()?;
    Ok(state)
}

/// Depth-normal half of an iteration. `limit` is the iteration count `T`;
/// the step counter itself advances in [`slz_flow_step`].
pub fn depth_normal_flow_step(
    state: &RefinementState,
    weights: &RefinementWeights,
    limit: usize,
) -> Result<RefinementState> {
    ensure_compatible(state, weights)?;
    if state.awaiting_slz {
        return Err(Error::Protocol(
            "depth-normal step already applied; landing-zone step must follow".into(),
        ));
    }
    if state.step >= limit {
        return Err(Error::SequenceExhausted {
            step: state.step,
            limit,
        });
    }
    let h = &state.hidden;
    let x = Raster::concat(&[&state.depth, &state.normal])?;
    let x7 = x.resize_bilinear(h.seventh.width(), h.seventh.height());
    let x14 = x.resize_bilinear(h.fourteenth.width(), h.fourteenth.height());

    let fourteenth = weights.gru_fourteenth.step(&h.fourteenth, &x14)?;
    let ctx7 = fourteenth.resize_nearest(h.seventh.width(), h.seventh.height());
    let seventh = weights
        .gru_seventh
        .step(&h.seventh, &Raster::concat(&[&x7, &ctx7])?)?;
    let ctx4 = seventh.resize_nearest(h.quarter.width(), h.quarter.height());
    let quarter = weights
        .gru_quarter
        .step(&h.quarter, &Raster::concat(&[&x, &ctx4])?)?;

    let delta_d = weights.proj_depth.forward(&quarter)?;
    let delta_n = weights.proj_normal.forward(&quarter)?;
    ensure_finite(RefinementState {
        depth: add_residual(&state.depth, &delta_d),
        normal: add_residual(&state.normal, &delta_n),
        hidden: HiddenPyramid {
            quarter,
            seventh,
            fourteenth,
        },
        slz_hidden: state.slz_hidden.clone(),
        logits: state.logits.clone(),
        step: state.step,
        awaiting_slz: true,
    })
}

/// Landing-zone half of an iteration; consumes the depth and normals just
/// produced by [`depth_normal_flow_step`] and advances the step counter.
pub fn slz_flow_step(
    state: &RefinementState,
    weights: &RefinementWeights,
) -> Result<RefinementState> {
    ensure_compatible(state, weights)?;
    if !state.awaiting_slz {
        return Err(Error::Protocol(
            "landing-zone step requires a preceding depth-normal step".into(),
        ));
    }
    let x = Raster::concat(&[&state.depth, &state.normal, &state.logits])?;
    let slz_hidden = weights.slz_gru.step(&state.slz_hidden, &x)?;
    let delta = weights.proj_slz.forward(&slz_hidden)?;
    ensure_finite(RefinementState {
        logits: add_residual(&state.logits, &delta),
        slz_hidden,
        hidden: state.hidden.clone(),
        depth: state.depth.clone(),
        normal: state.normal.clone(),
        step: state.step + 1,
        awaiting_slz: false,
    })
}

/// Runs `steps` full iterations from `init` and returns every state,
/// `init` included, so the result has `steps + 1` entries.
pub fn run_refinement(
    init: &RefinementState,
    weights: &RefinementWeights,
    steps: usize,
) -> Result<Vec<RefinementState>> {
    if init.awaiting_slz {
        return Err(Error::Protocol(
            "cannot start a run in the middle of an iteration".into(),
        ));
    }
    ensure_compatible(init, weights)?;
    let limit = init.step + steps;
    let mut seq = Vec::with_capacity(steps + 1);
    seq.push(init.clone());
    for _ in 0..steps {
        let last = seq.last().expect("non-empty");
        let mid = depth_normal_flow_step(last, weights, limit)?;
        seq.push(slz_flow_step(&mid, weights)?);
    }
    Ok(seq)
}

/// Bilinear upsampling of the 1/4-scale predictions to base resolution:
/// `(depth, normal, logits)`.
pub fn upsample_to_base(state: &RefinementState) -> (Raster, Raster, Raster) {
    let (bw, bh) = state.base_size();
    (
        state.depth.resize_bilinear(bw, bh),
        state.normal.resize_bilinear(bw, bh),
        state.logits.resize_bilinear(bw, bh),
    )
}
