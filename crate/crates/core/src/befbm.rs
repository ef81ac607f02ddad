//! Boundary-enhanced feature bridging: gated fusion of adjacent scales and
//! the boundary-alignment loss against the Sobel edge pyramid.
//!
//! For every adjacent pair `(i, i+1)` both levels are projected to the
//! finer level's width by 1×1 kernels, the coarser one is upsampled to the
//! finer resolution, and the two are mixed with a single scalar gate
//! `α = σ(W₁·GAP(Zᵢ) + W₂·GAP(Zⱼ))`.

use crate::error::{Error, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::rng::SplitMix64;
use crate::tensor::{Tensor, Var};

/// Gate and projection parameters for one adjacent pair.
#[derive(Clone, Debug)]
pub struct BridgeParams {
    pub width: usize,
    /// `[C, C_i, 1, 1]`
    pub proj_fine: ParamId,
    /// `[C, C_j, 1, 1]`
    pub proj_coarse: ParamId,
    /// `[C]`
    pub w1: ParamId,
    /// `[C]`
    pub w2: ParamId,
}

impl BridgeParams {
    /// `pair` is 1-based.
    pub fn init(store: &mut ParamStore, pair: usize, c_fine: usize, c_coarse: usize, rng: &mut SplitMix64) -> Self {
        let width = c_fine;
        let prefix = format!("befbm.pair{pair}");
        let gate_bound = 1.0 / (width as f64).sqrt();
        Self {
            width,
            proj_fine: store.add(
                format!("{prefix}.proj_fine"),
                Tensor::glorot([width, c_fine, 1, 1], c_fine, width, rng),
            ),
            proj_coarse: store.add(
                format!("{prefix}.proj_coarse"),
                Tensor::glorot([width, c_coarse, 1, 1], c_coarse, width, rng),
            ),
            w1: store.add(format!("{prefix}.w1"), Tensor::uniform([width], gate_bound, rng)),
            w2: store.add(format!("{prefix}.w2"), Tensor::uniform([width], gate_bound, rng)),
        }
    }
}

/// Per-level 1×1 readout `C_l -> 1` with bias, followed by a sigmoid.
#[derive(Clone, Debug)]
pub struct BoundaryHead {
    pub kernels: Vec<ParamId>,
    pub biases: Vec<ParamId>,
}

impl BoundaryHead {
    pub fn init(store: &mut ParamStore, channels: &[usize], rng: &mut SplitMix64) -> Self {
        let mut kernels = Vec::new();
        let mut biases = Vec::new();
        for (l, &c) in channels.iter().enumerate() {
            let prefix = format!("befbm.boundary.l{}", l + 1);
            kernels.push(store.add(format!("{prefix}.w"), Tensor::glorot([1, c, 1, 1], c, 1, rng)));
            biases.push(store.add(format!("{prefix}.b"), Tensor::zeros([1])));
        }
        Self { kernels, biases }
    }

    /// `B_l = σ(head_l(Z_l))`, shape `[1, H_l, W_l]`.
    pub fn predict<'g>(&self, level: usize, z: &Var<'g>, p: &Bound<'g>) -> Result<Var<'g>> {
        let (k, b) = self
            .kernels
            .get(level)
            .zip(self.biases.get(level))
            .ok_or_else(|| Error::InvalidArgument(format!("no boundary head for level {level}")))?;
        Ok(z.conv2d(&p[*k], 1)?.add_channel_bias(&p[*b])?.sigmoid())
    }
}

#[derive(Clone, Debug)]
pub struct Befbm {
    pub pairs: Vec<BridgeParams>,
    pub boundary: BoundaryHead,
}

impl Befbm {
    pub fn init(store: &mut ParamStore, channels: &[usize], rng: &mut SplitMix64) -> Result<Self> {
        if channels.len() < 2 {
            return Err(Error::config("num_scales", "bridging needs at least 2 scales"));
        }
        let pairs = channels
            .windows(2)
            .enumerate()
            .map(|(i, w)| BridgeParams::init(store, i + 1, w[0], w[1], rng))
            .collect();
        let boundary = BoundaryHead::init(store, channels, rng);
        Ok(Self { pairs, boundary })
    }
}

/// `W · GAP(Z)` for `W` of length `C` and `Z` of shape `[C, H, W]`, as a
/// `[1, 1]` value.
fn gated_dot<'g>(w: &Var<'g>, z: &Var<'g>) -> Result<Var<'g>> {
    let gap = z.global_avg_pool()?;
    let c = gap.shape()[0];
    if w.shape() != [c] {
        return Err(Error::ShapeMismatch {
            op: "gate_alpha",
            lhs: w.shape(),
            rhs: vec![c],
        });
    }
    w.reshape([1, c])?.matmul(&gap.reshape([c, 1])?)
}

/// `α = σ(W₁·GAP(Zᵢ) + W₂·GAP(Zⱼ))` for already projected inputs.
pub fn gate_alpha<'g>(zi: &Var<'g>, zj: &Var<'g>, w1: &Var<'g>, w2: &Var<'g>) -> Result<Var<'g>> {
    let (si, sj) = (zi.shape(), zj.shape());
    if si.len() != 3 || sj.len() != 3 || si[0] != sj[0] {
        return Err(Error::ShapeMismatch {
            op: "gate_alpha",
            lhs: si,
            rhs: sj,
        });
    }
    Ok(gated_dot(w1, zi)?.add(&gated_dot(w2, zj)?)?.sigmoid())
}

/// `α·Zᵢ + (1−α)·Zⱼ'` where `Zⱼ'` is `zj` upsampled to `zi`'s spatial dims.
pub fn bridge_pair<'g>(zi: &Var<'g>, zj: &Var<'g>, alpha: &Var<'g>) -> Result<Var<'g>> {
    let si = zi.shape();
    if si.len() != 3 {
        return Err(Error::InvalidShape {
            op: "bridge_pair",
            shape: si,
            reason: "expected [C, H, W]".into(),
        });
    }
    let up = zj.upsample_to(si[1], si[2])?;
    zi.lerp(&up, alpha)
}

pub struct BridgedLevel<'g> {
    pub fused: Var<'g>,
    pub alpha: Var<'g>,
    /// Projected coarser input upsampled to the finer resolution.
    pub coarse: Var<'g>,
    /// Projected finer input.
    pub fine: Var<'g>,
}

pub struct BridgedPyramid<'g> {
    /// One fused level per adjacent pair, finest first.
    pub levels: Vec<BridgedLevel<'g>>,
}

impl<'g> BridgedPyramid<'g> {
    pub fn finest(&self) -> &Var<'g> {
        &self.levels[0].fused
    }
}

/// Projects, gates and fuses every adjacent pair of encoded levels.
pub fn build_bridged_pyramid<'g>(encoded: &[Var<'g>], module: &Befbm, p: &Bound<'g>) -> Result<BridgedPyramid<'g>> {
    if encoded.len() < 2 || encoded.len() != module.pairs.len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} encoded levels, got {}",
            module.pairs.len() + 1,
            encoded.len()
        )));
    }
    let mut levels = Vec::with_capacity(module.pairs.len());
    for (pair, zs) in module.pairs.iter().zip(encoded.windows(2)) {
        let fine = zs[0].conv2d(&p[pair.proj_fine], 1)?;
        let coarse_small = zs[1].conv2d(&p[pair.proj_coarse], 1)?;
        let alpha = gate_alpha(&fine, &coarse_small, &p[pair.w1], &p[pair.w2])?;
        let s = fine.shape();
        let coarse = coarse_small.upsample_to(s[1], s[2])?;
        let fused = fine.lerp(&coarse, &alpha)?;
        levels.push(BridgedLevel {
            fused,
            alpha,
            coarse,
            fine,
        });
    }
    Ok(BridgedPyramid { levels })
}

/// Boundary maps `B_l` for every encoded level.
pub fn boundary_maps<'g>(encoded: &[Var<'g>], head: &BoundaryHead, p: &Bound<'g>) -> Result<Vec<Var<'g>>> {
    encoded.iter().enumerate().map(|(l, z)| head.predict(l, z, p)).collect()
}

/// `Σ_l mean((B_l − E_l)²)` given boundary maps and edge targets, both
/// `[1, H_l, W_l]`.
pub fn edge_loss_from_maps<'g>(maps: &[Var<'g>], edges: &[Tensor]) -> Result<Var<'g>> {
    if maps.len() != edges.len() || maps.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} boundary maps for {} edge levels",
            maps.len(),
            edges.len()
        )));
    }
    let g = maps[0].graph();
    let mut total: Option<Var<'g>> = None;
    for (b, e) in maps.iter().zip(edges) {
        let target = g.constant(e.reshape(b.shape()).map_err(|_| Error::ShapeMismatch {
            op: "edge_loss",
            lhs: b.shape(),
            rhs: e.shape().to_vec(),
        })?);
        let term = b.sub(&target)?.square().mean();
        total = Some(match total {
            Some(t) => t.add(&term)?,
            None => term,
        });
    }
    Ok(total.expect("at least one level"))
}

/// `L_edge` for encoded levels `Z_l` against edge maps `E_l`.
pub fn edge_loss<'g>(encoded: &[Var<'g>], edges: &[Tensor], head: &BoundaryHead, p: &Bound<'g>) -> Result<Var<'g>> {
    let maps = boundary_maps(encoded, head, p)?;
    edge_loss_from_maps(&maps, edges)
}
